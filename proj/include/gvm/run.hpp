#pragma once

// start + schedule, with an optional audit after every step.

#include <functional>
#include <optional>
#include <vector>

#include "gvm/audit.hpp"
#include "gvm/scheduler.hpp"

namespace gvm {

struct RunOptions {
  bool audit = false;
  // Test hook: may corrupt the state after step `index`, before it is
  // audited.
  std::function<void(State&, std::size_t index)> tamper;
};

struct StepRecord {
  TraceStep step;
  ChannelTable table;  // after the step
  std::optional<AuditReport> audit;
  std::optional<Rendezvous> rendezvous;
  std::vector<ChannelEnd> transferred;  // ends carried by a transmitted value
};

struct AuditFailure {
  std::size_t step;
  AuditReport report;
};

struct RunResult {
  Outcome outcome = Outcome::OutOfGas;
  Trace trace;
  std::vector<StepRecord> records;
  State final_state;
  std::optional<AuditFailure> audit_failure;
};

inline RunResult run_state(State st, const Gas& gas, const RunOptions& opts = {}) {
  RunResult res;
  if (opts.audit) {
    AuditReport initial = audit_state(st.table, st.pool);
    if (!initial.ok()) {
      res.audit_failure = AuditFailure{0, initial};
      res.final_state = std::move(st);
      return res;
    }
  }
  auto observe = [&](const TraceStep& ts, const StepResult& sr, const State& before, State& after) {
    if (opts.tamper) opts.tamper(after, ts.step);
    StepRecord rec{ts, after.table, std::nullopt, sr.rendezvous, {}};
    if (sr.rendezvous && sr.rendezvous->payload) rec.transferred = channel_ends(*sr.rendezvous->payload);
    if (opts.audit) {
      AuditReport report = audit_state(after.table, after.pool);
      report.merge(check_reduction(before.table, sr.event, sr.reduction, after.table));
      if (sr.rendezvous) {
        report.merge(check_fidelity(before.table, *sr.rendezvous));
        report.merge(check_transfer(before.pool, after.pool, *sr.rendezvous));
      }
      rec.audit = report;
      if (!report.ok()) res.audit_failure = AuditFailure{ts.step, report};
    }
    res.records.push_back(std::move(rec));
    return !res.audit_failure.has_value();
  };
  ScheduleResult sr = schedule(gas, st, observe);
  res.outcome = sr.outcome;
  res.trace = std::move(sr.trace);
  res.final_state = std::move(st);
  return res;
}

// `e` must be a checked core expression of type unit.
inline RunResult run(const Expr& e, const Gas& gas, const RunOptions& opts = {}) {
  return run_state(start(e), gas, opts);
}

}  // namespace gvm
