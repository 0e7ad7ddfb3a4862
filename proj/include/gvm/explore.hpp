#pragma once

// Exhaustive exploration of structured-gas schedules.
//
// A schedule is a prefix of at most `maxlen` rotations followed by a
// zero-rotation tail of at most `tail_gas` steps. States reached at the same
// prefix depth are explored once.

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "gvm/scheduler.hpp"

namespace gvm {

class ExploreBoundExceeded : public std::runtime_error {
 public:
  ExploreBoundExceeded(double estimate, double limit)
      : std::runtime_error("exploration would visit about " + format(estimate) + " schedules (limit " +
                           format(limit) + ")"),
        estimate_(estimate) {}

  double estimate() const noexcept { return estimate_; }

 private:
  static std::string format(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
  }
  double estimate_;
};

struct ExploreOptions {
  std::size_t maxlen = 8;
  // Rotations tried per prefix step are 0 .. min(maxrot, pool size) - 1;
  // 0 means all distinct rotations of the current pool.
  std::size_t maxrot = 0;
  std::size_t tail_gas = 10000;
  double limit = 5e7;  // schedules, estimated before starting
  std::size_t max_states = 2'000'000;
  // Explore a state reached twice at the same depth only once.
  bool dedup = true;
};

struct Witness {
  std::vector<std::size_t> prefix;  // the rotations; the tail is all zeros
  std::size_t steps = 0;            // total steps of the run
};

struct ExploreReport {
  std::map<Outcome, Witness> outcomes;  // Terminated / Stuck, with a witness each
  std::optional<Witness> out_of_gas;    // tail budget exhausted somewhere
  std::size_t states = 0;               // distinct (state, depth) pairs visited
  std::size_t runs = 0;                 // tails executed

  std::set<Outcome> outcome_set() const {
    std::set<Outcome> s;
    for (const auto& [o, w] : outcomes) s.insert(o);
    return s;
  }
};

inline double estimate_schedules(std::size_t maxlen, std::size_t maxrot) {
  double total = 0;
  for (std::size_t l = 0; l <= maxlen; ++l) total += std::pow(static_cast<double>(maxrot), static_cast<double>(l));
  return total;
}

namespace detail {

class Explorer {
 public:
  Explorer(const ExploreOptions& opts, std::function<bool(const Trace&)> stop)
      : opts_(opts), stop_(std::move(stop)) {}

  ExploreReport report;
  std::optional<std::pair<Witness, Trace>> found;

  void visit(const State& st, std::vector<std::size_t>& prefix, Trace& trace) {
    if (found) return;
    if (opts_.dedup && !seen_.insert(state_key(st) + "#" + std::to_string(prefix.size())).second) return;
    ++report.states;
    if (report.states > opts_.max_states)
      throw ExploreBoundExceeded(static_cast<double>(report.states) * 2, static_cast<double>(opts_.max_states));

    if (prefix.size() == opts_.maxlen) {
      tail(st, prefix, trace);
      return;
    }
    std::size_t width = std::max<std::size_t>(st.pool.size(), 1);
    if (opts_.maxrot != 0) width = std::min(width, opts_.maxrot);
    for (std::size_t r = 0; r < width && !found; ++r) {
      State next = st;
      rotate_pool(next, r);
      StepResult sr = step(next);
      prefix.push_back(r);
      trace.push_back({trace.size(), r, sr.event, sr.reduction, next.pool.size()});
      if (is_final(sr.event.kind))
        finish(sr.event.kind == EventKind::Terminated ? Outcome::Terminated : Outcome::Stuck, prefix, trace);
      else
        visit(next, prefix, trace);
      trace.pop_back();
      prefix.pop_back();
    }
  }

 private:
  void tail(State st, const std::vector<std::size_t>& prefix, Trace& trace) {
    ++report.runs;
    const std::size_t base = trace.size();
    Outcome outcome = Outcome::OutOfGas;
    for (std::size_t i = 0; i < opts_.tail_gas; ++i) {
      StepResult sr = step(st);
      trace.push_back({trace.size(), 0, sr.event, sr.reduction, st.pool.size()});
      if (is_final(sr.event.kind)) {
        outcome = sr.event.kind == EventKind::Terminated ? Outcome::Terminated : Outcome::Stuck;
        break;
      }
    }
    finish(outcome, prefix, trace);
    trace.resize(base);
  }

  void finish(Outcome o, const std::vector<std::size_t>& prefix, const Trace& trace) {
    Witness w{prefix, trace.size()};
    if (stop_ && stop_(trace)) {
      found.emplace(w, trace);
      return;
    }
    if (o == Outcome::OutOfGas) {
      if (!report.out_of_gas) report.out_of_gas = w;
    } else {
      report.outcomes.try_emplace(o, w);
    }
  }

  ExploreOptions opts_;
  std::function<bool(const Trace&)> stop_;
  std::unordered_set<std::string> seen_;
};

inline void check_bound(const ExploreOptions& opts) {
  if (opts.maxrot == 0) return;  // bounded by max_states instead
  double est = estimate_schedules(opts.maxlen, opts.maxrot);
  if (est > opts.limit) throw ExploreBoundExceeded(est, opts.limit);
}

}  // namespace detail

inline ExploreReport explore(const State& initial, const ExploreOptions& opts = {}) {
  detail::check_bound(opts);
  detail::Explorer ex(opts, nullptr);
  std::vector<std::size_t> prefix;
  Trace trace;
  ex.visit(initial, prefix, trace);
  return ex.report;
}

inline ExploreReport explore(const Expr& e, const ExploreOptions& opts = {}) { return explore(start(e), opts); }

// First schedule (in exploration order) whose complete trace satisfies
// `pred`, with that trace. With deduplication on, a schedule reaching an
// already visited state by another route is not tried.
inline std::optional<std::pair<Witness, Trace>> find_schedule(const State& initial, const ExploreOptions& opts,
                                                               std::function<bool(const Trace&)> pred) {
  detail::check_bound(opts);
  detail::Explorer ex(opts, std::move(pred));
  std::vector<std::size_t> prefix;
  Trace trace;
  ex.visit(initial, prefix, trace);
  return ex.found;
}

// The gas that replays a witness.
inline Gas witness_gas(const Witness& w) {
  std::vector<std::size_t> rotations = w.prefix;
  rotations.resize(w.steps, 0);
  return Gas::structured(std::move(rotations));
}

}  // namespace gvm
