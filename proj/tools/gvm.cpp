// gvm: check, run and explore session-typed programs.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gvm/explore.hpp"
#include "gvm/parser.hpp"
#include "gvm/run.hpp"
#include "gvm/trace_json.hpp"
#include "gvm/typecheck.hpp"

namespace {

enum Exit : int {
  kOk = 0,
  kTypeError = 1,
  kParseError = 2,
  kIoError = 3,
  kExploreRefused = 4,
  kStuck = 10,
  kOutOfGas = 11,
  kAuditFailure = 20,
};

struct Loaded {
  gvm::CheckResult checked;
  int status = kOk;
};

Loaded load(const std::string& path, bool runnable) {
  Loaded out;
  std::ifstream in(path);
  if (!in) {
    std::cerr << path << ": cannot open file\n";
    out.status = kIoError;
    return out;
  }
  std::stringstream text;
  text << in.rdbuf();
  if (in.bad()) {
    std::cerr << path << ": read error\n";
    out.status = kIoError;
    return out;
  }
  try {
    gvm::Expr e = gvm::parse_program(text.str());
    out.checked = runnable ? gvm::check_runnable(e) : gvm::check_program(e);
  } catch (const gvm::ParseError& err) {
    std::cerr << path << ":" << err.what() << "\n";
    out.status = kParseError;
  } catch (const gvm::TypeError& err) {
    std::cerr << path << ":" << err.what() << "\n";
    out.status = kTypeError;
  }
  return out;
}

std::string join(const std::vector<std::size_t>& xs) {
  std::string s;
  for (auto x : xs) s += (s.empty() ? "" : ",") + std::to_string(x);
  return s.empty() ? "-" : s;
}

int cmd_check(const std::string& path) {
  Loaded l = load(path, false);
  if (l.status != kOk) return l.status;
  std::cout << gvm::to_string(l.checked.type) << "\n";
  return kOk;
}

struct RunConfig {
  std::optional<std::size_t> gas;
  std::vector<std::size_t> schedule;
  bool audit = false;
  std::string trace;
};

int cmd_run(const std::string& path, const RunConfig& cfg) {
  Loaded l = load(path, true);
  if (l.status != kOk) return l.status;
  gvm::Gas gas = cfg.schedule.empty() ? gvm::Gas::plain(cfg.gas.value_or(10000)) : gvm::Gas::structured(cfg.schedule);
  gvm::RunResult res = gvm::run(l.checked.core, gas, {cfg.audit, {}});

  if (!cfg.trace.empty()) {
    const gvm::TraceFormat fmt = gvm::trace_format_from_env();
    if (cfg.trace == "-") {
      gvm::write_trace(std::cout, res, fmt);
    } else {
      std::ofstream out(cfg.trace);
      if (!out) {
        std::cerr << cfg.trace << ": cannot write trace\n";
        return kIoError;
      }
      gvm::write_trace(out, res, fmt);
    }
  }
  if (res.audit_failure) {
    std::cout << "AuditFailure at step " << res.audit_failure->step << ": " << gvm::to_string(res.audit_failure->report)
              << "\n";
    return kAuditFailure;
  }
  std::cout << gvm::to_string(res.outcome) << " after " << res.trace.size() << " steps\n";
  switch (res.outcome) {
    case gvm::Outcome::Terminated: return kOk;
    case gvm::Outcome::Stuck: return kStuck;
    case gvm::Outcome::OutOfGas: return kOutOfGas;
  }
  return kOk;
}

int cmd_explore(const std::string& path, const gvm::ExploreOptions& opts) {
  Loaded l = load(path, true);
  if (l.status != kOk) return l.status;
  gvm::ExploreReport rep;
  try {
    rep = gvm::explore(l.checked.core, opts);
  } catch (const gvm::ExploreBoundExceeded& err) {
    std::cerr << "refusing: " << err.what() << "\n";
    return kExploreRefused;
  }
  std::cout << "outcomes:";
  for (auto o : rep.outcome_set()) std::cout << ' ' << gvm::to_string(o);
  std::cout << "\n";
  for (const auto& [o, w] : rep.outcomes)
    std::cout << gvm::to_string(o) << " witness: " << join(w.prefix) << " (" << w.steps << " steps)\n";
  if (rep.out_of_gas)
    std::cout << "OutOfGas witness: " << join(rep.out_of_gas->prefix) << " (" << rep.out_of_gas->steps << " steps)\n";
  std::cout << "states: " << rep.states << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interpreter for a linear session-typed functional language"};
  app.require_subcommand(1);

  std::string path;
  auto* check = app.add_subcommand("check", "Parse and type check a program, print its type");
  check->add_option("FILE", path, "Program file")->required();

  RunConfig cfg;
  auto* run = app.add_subcommand("run", "Run a program under a gas budget or rotation schedule");
  run->add_option("FILE", path, "Program file")->required();
  auto* gas_opt = run->add_option("--gas", cfg.gas, "Number of scheduler steps (default 10000)");
  run->add_option("--schedule", cfg.schedule, "Comma-separated pool rotations, one per step")
      ->delimiter(',')
      ->excludes(gas_opt);
  run->add_flag("--audit", cfg.audit, "Audit resources after every step");
  run->add_option("--trace", cfg.trace, "Write a JSON trace record per step to this file (- for stdout)");

  gvm::ExploreOptions eopts;
  auto* explore = app.add_subcommand("explore", "Enumerate rotation schedules and report reachable outcomes");
  explore->add_option("FILE", path, "Program file")->required();
  explore->add_option("--maxlen", eopts.maxlen, "Length of the rotation prefix")->required();
  explore->add_option("--maxrot", eopts.maxrot, "Rotations tried per step are below this (0: pool size)")->required();
  explore->add_option("--tail", eopts.tail_gas, "Steps allowed after the prefix")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  if (check->parsed()) return cmd_check(path);
  if (run->parsed()) return cmd_run(path, cfg);
  return cmd_explore(path, eopts);
}
