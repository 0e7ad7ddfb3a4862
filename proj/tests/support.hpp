#pragma once

// Shared helpers for the test suites: corpus access, seeded generators of
// session types and types, and independent oracles.

#include <cstdint>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "gvm/parser.hpp"
#include "gvm/pretty.hpp"
#include "gvm/scheduler.hpp"
#include "gvm/syntax.hpp"
#include "gvm/typecheck.hpp"

namespace gvm::testing {

inline std::string programs_dir() { return GVM_PROGRAMS_DIR; }

inline std::string read_program(const std::string& name) {
  std::ifstream in(programs_dir() + "/" + name);
  if (!in) throw std::runtime_error("missing corpus program " + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Expr load_core(const std::string& name) { return check_runnable(parse_program(read_program(name))).core; }

// Programs that terminate under every schedule.
inline const std::vector<std::string>& race_free_programs() {
  static const std::vector<std::string> names = {
      "handshake.gv",        "send_recv.gv",  "higher_order.gv",    "choice.gv",        "lambda.gv",
      "rec_consumer.gv", "subsume.gv",   "ping_pong.gv",       "closure_send.gv",  "async_basic.gv",
      "async_chain.gv", "async_recursive.gv"};
  return names;
}

inline const std::vector<std::string>& corpus_programs() {
  static const std::vector<std::string> names = [] {
    auto v = race_free_programs();
    v.insert(v.end(), {"lone_wait.gv", "crossed_wait.gv", "rec_loop.gv"});
    return v;
  }();
  return names;
}

// ---------------------------------------------------------------------------
// Generators

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::size_t below(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  bool coin() { return below(2) == 0; }
  Dir dir() { return coin() ? Dir::Snd : Dir::Rcv; }

  // Closed, contractive session of depth at most `depth`, with at most
  // `arity` alternatives per choice. `vars` recursion variables are in
  // scope; `guarded` says whether one may appear here.
  Session session(int depth, std::size_t arity = 4, std::size_t vars = 0, bool guarded = false) {
    if (depth <= 0) {
      if (guarded && vars > 0 && coin()) return sess::var(below(vars));
      return sess::end(dir());
    }
    switch (below(guarded && vars > 0 ? 5 : 4)) {
      case 0:
        return sess::end(dir());
      case 1:
        return sess::xmit(dir(), type(depth - 1, arity), session(depth - 1, arity, vars, true));
      case 2: {
        std::vector<Session> alts;
        const std::size_t m = 1 + below(arity);
        for (std::size_t i = 0; i < m; ++i) alts.push_back(session(depth - 1, arity, vars, true));
        return sess::choice(dir(), std::move(alts));
      }
      case 3:
        return sess::mu(session(depth - 1, arity, vars + 1, false));
      default:
        return sess::var(below(vars));
    }
  }

  // Session whose top is a recursion.
  Session mu_session(int depth, std::size_t arity = 3) {
    return sess::mu(session(depth - 1, arity, 1, false));
  }

  Type type(int depth, std::size_t arity = 4) {
    if (depth <= 0) return ty::unit();
    switch (below(4)) {
      case 0:
        return ty::unit();
      case 1:
        return ty::pair(type(depth - 1, arity), type(depth - 1, arity));
      case 2:
        return ty::chan(session(depth - 1, arity));
      default:
        return ty::fun(coin() ? Linearity::LL : Linearity::UU, type(depth - 1, arity), type(depth - 1, arity));
    }
  }

  // A random supertype (up = true) or subtype (up = false) of `s`, built by
  // narrowing/widening choices and moving payloads the matching way.
  Session vary(const Session& s, bool up, std::size_t vars = 0) {
    switch (s.kind()) {
      case Session::Kind::End:
      case Session::Kind::Var:
        return s;
      case Session::Kind::Mu:
        return sess::mu(vary(s.body(), up, vars + 1));
      case Session::Kind::Xmit: {
        // send payloads are contravariant, receive payloads covariant
        bool payload_up = s.dir() == Dir::Snd ? !up : up;
        return sess::xmit(s.dir(), vary(s.payload(), payload_up), vary(s.cont(), up, vars));
      }
      case Session::Kind::Choice: {
        std::vector<Session> alts;
        for (const auto& a : s.alts()) alts.push_back(vary(a, up, vars));
        // Internal choice: the supertype offers a prefix. External choice:
        // the supertype accepts more.
        bool shrink = (s.dir() == Dir::Snd) == up;
        if (shrink) {
          alts.resize(1 + below(alts.size()));
        } else {
          std::size_t extra = below(2);
          for (std::size_t i = 0; i < extra; ++i) alts.push_back(session(2, 2, vars, true));
        }
        return sess::choice(s.dir(), std::move(alts));
      }
    }
    return s;
  }

  Type vary(const Type& t, bool up) {
    switch (t.kind()) {
      case Type::Kind::Unit:
        return t;
      case Type::Kind::Pair:
        return ty::pair(vary(t.first(), up), vary(t.second(), up));
      case Type::Kind::Chan:
        return ty::chan(vary(t.session(), up));
      case Type::Kind::Fun:
        return ty::fun(t.linearity(), vary(t.arg(), !up), vary(t.result(), up));
    }
    return t;
  }

  // Equivalent presentation of `s`: unrolls recursions at random places.
  Session unroll(const Session& s, std::size_t vars = 0) {
    switch (s.kind()) {
      case Session::Kind::Mu:
        if (vars == 0 && coin()) return unroll(unfold(s), 0);
        return sess::mu(unroll(s.body(), vars + 1));
      case Session::Kind::Xmit:
        return sess::xmit(s.dir(), s.payload(), unroll(s.cont(), vars));
      case Session::Kind::Choice: {
        std::vector<Session> alts;
        for (const auto& a : s.alts()) alts.push_back(unroll(a, vars));
        return sess::choice(s.dir(), std::move(alts));
      }
      default:
        return s;
    }
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// Oracles

inline std::size_t node_count(const Session& s);

inline std::size_t node_count(const Type& t) {
  switch (t.kind()) {
    case Type::Kind::Unit: return 1;
    case Type::Kind::Pair: return 1 + node_count(t.first()) + node_count(t.second());
    case Type::Kind::Chan: return 1 + node_count(t.session());
    case Type::Kind::Fun: return 1 + node_count(t.arg()) + node_count(t.result());
  }
  return 1;
}

inline std::size_t node_count(const Session& s) {
  switch (s.kind()) {
    case Session::Kind::End:
    case Session::Kind::Var: return 1;
    case Session::Kind::Xmit: return 1 + node_count(s.payload()) + node_count(s.cont());
    case Session::Kind::Choice: {
      std::size_t n = 1;
      for (const auto& a : s.alts()) n += node_count(a);
      return n;
    }
    case Session::Kind::Mu: return 1 + node_count(s.body());
  }
  return 1;
}

// Equality of the infinite unfoldings of `a` and `b`, down to `fuel`
// constructors. Unfolding a recursion costs nothing: contractivity bounds
// how many can stack up. Verdicts are memoised per pair: equal down to some
// depth implies equal down to any smaller one, unequal at some depth implies
// unequal at any larger one.
class BoundedEquality {
 public:
  bool operator()(const Session& a, const Session& b, std::size_t fuel) {
    if (fuel == 0) return true;
    Session x = unfold(a);
    Session y = unfold(b);
    Verdict& v = memo_[to_string(x) + " ~ " + to_string(y)];
    if (fuel <= v.equal_to) return true;
    if (fuel >= v.unequal_at) return false;
    bool eq = compare(x, y, fuel);
    // the recursion may have rehashed the map; look the entry up again
    Verdict& w = memo_[to_string(x) + " ~ " + to_string(y)];
    if (eq)
      w.equal_to = std::max(w.equal_to, fuel);
    else
      w.unequal_at = std::min(w.unequal_at, fuel);
    return eq;
  }

  bool operator()(const Type& a, const Type& b, std::size_t fuel) {
    if (fuel == 0) return true;
    if (a.kind() != b.kind()) return false;
    switch (a.kind()) {
      case Type::Kind::Unit:
        return true;
      case Type::Kind::Pair:
        return (*this)(a.first(), b.first(), fuel - 1) && (*this)(a.second(), b.second(), fuel - 1);
      case Type::Kind::Chan:
        return (*this)(a.session(), b.session(), fuel - 1);
      case Type::Kind::Fun:
        return a.linearity() == b.linearity() && (*this)(a.arg(), b.arg(), fuel - 1) &&
               (*this)(a.result(), b.result(), fuel - 1);
    }
    return false;
  }

 private:
  struct Verdict {
    std::size_t equal_to = 0;
    std::size_t unequal_at = std::numeric_limits<std::size_t>::max();
  };

  bool compare(const Session& x, const Session& y, std::size_t fuel) {
    if (x.kind() != y.kind() || x.dir() != y.dir()) return false;
    switch (x.kind()) {
      case Session::Kind::End:
        return true;
      case Session::Kind::Xmit:
        return (*this)(x.payload(), y.payload(), fuel - 1) && (*this)(x.cont(), y.cont(), fuel - 1);
      case Session::Kind::Choice:
        if (x.alts().size() != y.alts().size()) return false;
        for (std::size_t i = 0; i < x.alts().size(); ++i)
          if (!(*this)(x.alts()[i], y.alts()[i], fuel - 1)) return false;
        return true;
      default:
        return false;
    }
  }

  std::unordered_map<std::string, Verdict> memo_;
};

inline bool bounded_equal(const Session& a, const Session& b, std::size_t fuel) {
  return BoundedEquality()(a, b, fuel);
}

inline bool bounded_equal(const Type& a, const Type& b, std::size_t fuel) { return BoundedEquality()(a, b, fuel); }

// Depth that separates any two inequivalent sessions: a regular tree has at
// most as many distinct subtrees as its presentation has nodes.
inline std::size_t separating_depth(const Session& a, const Session& b) {
  return node_count(a) + node_count(b) + 1;
}

// A step leaves no actionable command behind: no ready, halted, forking or
// allocating thread and no pair of threads that could rendezvous.
inline bool nothing_actionable(const ThreadPool& pool) {
  for (const auto& c : pool)
    if (std::holds_alternative<ReadyC>(c) || std::holds_alternative<HaltC>(c) || std::holds_alternative<ForkC>(c) ||
        std::holds_alternative<NewC>(c))
      return false;
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (std::size_t j = 0; j < pool.size(); ++j) {
      if (i == j) continue;
      const auto* cl = std::get_if<CloseC>(&pool[i]);
      const auto* wt = std::get_if<WaitC>(&pool[j]);
      if (cl && wt && vcr_match(cl->ch, wt->ch)) return false;
      const auto* sd = std::get_if<SendC>(&pool[i]);
      const auto* rv = std::get_if<RecvC>(&pool[j]);
      if (sd && rv && vcr_match(sd->ch, rv->ch)) return false;
      const auto* sl = std::get_if<SelectC>(&pool[i]);
      const auto* br = std::get_if<BranchC>(&pool[j]);
      if (sl && br && vcr_match(sl->ch, br->ch)) return false;
    }
  return true;
}

}  // namespace gvm::testing
