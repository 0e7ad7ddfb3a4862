#pragma once

// Algorithmic linear type checking.
//
// The declarative rules split the typing context between subterms. Here the
// split is inferred: a consumption mask is threaded through the term, a
// linear binding flips from available to consumed at its single use, and
// every binder checks on exit that its linear bindings were consumed.
//
// Recursive sessions are equi-recursive. Equivalence and subtyping are
// decided coinductively: a pair of sessions already under comparison is
// assumed related, which terminates because a closed mu-term has finitely
// many distinct unfoldings.

#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gvm/asynclib.hpp"
#include "gvm/pretty.hpp"
#include "gvm/syntax.hpp"

namespace gvm {

// Innermost binding last: de Bruijn index k is element size()-1-k.
using TypingContext = std::vector<Type>;
// true = consumed.
using ConsumptionMask = std::vector<bool>;

enum class TypeErrorKind {
  LinearityViolation,
  UnusedLinear,
  TypeMismatch,
  ArityMismatch,
  NotASubtype,
  UnboundVariable,
  UnrestrictedContextRequired,
};

inline const char* to_string(TypeErrorKind k) {
  switch (k) {
    case TypeErrorKind::LinearityViolation:
      return "LinearityViolation";
    case TypeErrorKind::UnusedLinear:
      return "UnusedLinear";
    case TypeErrorKind::TypeMismatch:
      return "TypeMismatch";
    case TypeErrorKind::ArityMismatch:
      return "ArityMismatch";
    case TypeErrorKind::NotASubtype:
      return "NotASubtype";
    case TypeErrorKind::UnboundVariable:
      return "UnboundVariable";
    case TypeErrorKind::UnrestrictedContextRequired:
      return "UnrestrictedContextRequired";
  }
  return "TypeError";
}

class TypeError : public std::runtime_error {
 public:
  TypeError(TypeErrorKind kind, SourceLoc loc, const std::string& message)
      : std::runtime_error(std::to_string(loc.line) + ":" + std::to_string(loc.column) + ": " + to_string(kind) +
                           ": " + message),
        kind_(kind),
        loc_(loc) {}

  TypeErrorKind kind() const noexcept { return kind_; }
  SourceLoc loc() const noexcept { return loc_; }

 private:
  TypeErrorKind kind_;
  SourceLoc loc_;
};

// ---------------------------------------------------------------------------
// Equivalence and subtyping

namespace detail {

class Relation {
 public:
  enum class Mode { Equiv, Sub };

  explicit Relation(Mode mode) : mode_(mode) {}

  bool sessions(const Session& a, const Session& b) {
    if (a == b) return true;
    auto key = std::make_pair(to_string(a), to_string(b));
    if (!assumed_.insert(std::move(key)).second) return true;
    const Session x = unfold(a);
    const Session y = unfold(b);
    if (x.kind() != y.kind() || x.dir() != y.dir()) return false;
    switch (x.kind()) {
      case Session::Kind::End:
        return true;
      case Session::Kind::Xmit: {
        // Output is contravariant in the payload, input covariant.
        const bool payload = x.dir() == Dir::Snd ? types(y.payload(), x.payload()) : types(x.payload(), y.payload());
        return payload && sessions(x.cont(), y.cont());
      }
      case Session::Kind::Choice: {
        const auto& xs = x.alts();
        const auto& ys = y.alts();
        std::size_t common;
        if (mode_ == Mode::Equiv) {
          if (xs.size() != ys.size()) return false;
          common = xs.size();
        } else if (x.dir() == Dir::Snd) {
          // Internal choice: the supertype offers a prefix of the alternatives.
          if (ys.size() > xs.size()) return false;
          common = ys.size();
        } else {
          // External choice: the supertype accepts more alternatives.
          if (xs.size() > ys.size()) return false;
          common = xs.size();
        }
        for (std::size_t i = 0; i < common; ++i)
          if (!sessions(xs[i], ys[i])) return false;
        return true;
      }
      case Session::Kind::Mu:
      case Session::Kind::Var:
        break;
    }
    return false;
  }

  bool types(const Type& a, const Type& b) {
    if (a.kind() != b.kind()) return false;
    switch (a.kind()) {
      case Type::Kind::Unit:
        return true;
      case Type::Kind::Pair:
        return types(a.first(), b.first()) && types(a.second(), b.second());
      case Type::Kind::Chan:
        return sessions(a.session(), b.session());
      case Type::Kind::Fun:
        return a.linearity() == b.linearity() && types(b.arg(), a.arg()) && types(a.result(), b.result());
    }
    return false;
  }

 private:
  Mode mode_;
  std::set<std::pair<std::string, std::string>> assumed_;
};

}  // namespace detail

inline bool type_equiv(const Session& a, const Session& b) {
  return detail::Relation(detail::Relation::Mode::Equiv).sessions(a, b);
}

// Under Equiv mode every variance collapses to equality, so the contravariant
// argument flips in Relation::types are harmless.
inline bool type_equiv(const Type& a, const Type& b) {
  return detail::Relation(detail::Relation::Mode::Equiv).types(a, b);
}

inline bool sub_session(const Session& a, const Session& b) {
  return detail::Relation(detail::Relation::Mode::Sub).sessions(a, b);
}

inline bool subtype(const Type& a, const Type& b) { return detail::Relation(detail::Relation::Mode::Sub).types(a, b); }

// ---------------------------------------------------------------------------
// Expression checking

struct CheckResult {
  Type type;
  ConsumptionMask mask;
  // The input with asynchronous surface forms expanded.
  Expr core;
};

namespace detail {

class Checker {
 public:
  Checker(TypingContext ctx, ConsumptionMask mask) : ctx_(std::move(ctx)), mask_(std::move(mask)) {
    if (mask_.size() != ctx_.size()) throw std::invalid_argument("typing context and mask differ in length");
  }

  std::pair<Type, Expr> check(const Expr& e) {
    switch (e.kind()) {
      case ExprKind::Var:
        return {use(e, e.var()), e};
      case ExprKind::Unit:
        return {ty::unit(), e};
      case ExprKind::Pair: {
        Type a = use(e, e.var(0));
        Type b = use(e, e.var(1));
        return {ty::pair(std::move(a), std::move(b)), e};
      }
      case ExprKind::Let: {
        auto [bound_type, bound] = check(e.sub(0));
        push(bound_type);
        auto [t, body] = check(e.sub(1));
        pop_checked(e, 1);
        return {t, rebuild(e, {bound, body})};
      }
      case ExprKind::LetPair: {
        Type p = use(e, e.var());
        if (p.kind() != Type::Kind::Pair)
          fail(TypeErrorKind::TypeMismatch, e, "letpair expects a pair, got " + to_string(p));
        push(p.first());
        push(p.second());
        auto [t, body] = check(e.sub());
        pop_checked(e, 2);
        return {t, rebuild(e, {body})};
      }
      case ExprKind::Fork: {
        auto [t, body] = check(e.sub());
        if (!type_equiv(t, ty::unit()))
          fail(TypeErrorKind::TypeMismatch, e, "forked expression must have type unit, got " + to_string(t));
        return {ty::unit(), rebuild(e, {body})};
      }
      case ExprKind::New:
        return {ty::pair(ty::chan(e.session()), ty::chan(dual(e.session()))), e};
      case ExprKind::Close:
      case ExprKind::Wait: {
        const Dir d = e.kind() == ExprKind::Close ? Dir::Snd : Dir::Rcv;
        Session s = channel(e, e.var());
        if (s.kind() != Session::Kind::End || s.dir() != d)
          fail(TypeErrorKind::TypeMismatch, e,
               std::string(d == Dir::Snd ? "close" : "wait") + " expects " + (d == Dir::Snd ? "end!" : "end?") +
                   ", got " + to_string(s));
        return {ty::unit(), e};
      }
      case ExprKind::Send: {
        Session s = channel(e, e.var(0));
        if (s.kind() != Session::Kind::Xmit || s.dir() != Dir::Snd)
          fail(TypeErrorKind::TypeMismatch, e, "send on a channel of type " + to_string(s));
        Type v = use(e, e.var(1));
        if (!subtype(v, s.payload()))
          fail(TypeErrorKind::NotASubtype, e, to_string(v) + " is not a subtype of " + to_string(s.payload()));
        return {ty::chan(s.cont()), e};
      }
      case ExprKind::Recv: {
        Session s = channel(e, e.var());
        if (s.kind() != Session::Kind::Xmit || s.dir() != Dir::Rcv)
          fail(TypeErrorKind::TypeMismatch, e, "recv on a channel of type " + to_string(s));
        return {ty::pair(ty::chan(s.cont()), s.payload()), e};
      }
      case ExprKind::Select: {
        Session s = channel(e, e.var());
        if (s.kind() != Session::Kind::Choice || s.dir() != Dir::Snd)
          fail(TypeErrorKind::TypeMismatch, e, "select on a channel of type " + to_string(s));
        if (e.label() >= s.alts().size())
          fail(TypeErrorKind::ArityMismatch, e,
               "label " + std::to_string(e.label()) + " out of range for " + std::to_string(s.alts().size()) +
                   " alternatives");
        return {ty::chan(s.alts()[e.label()]), e};
      }
      case ExprKind::Branch:
        return check_branch(e);
      case ExprKind::Lambda: {
        push(e.type());
        auto [t, body] = check(e.sub());
        pop_checked(e, 1);
        return {ty::fun(Linearity::LL, e.type(), t), rebuild(e, {body})};
      }
      case ExprKind::Rec:
        return check_rec(e);
      case ExprKind::App: {
        Type f = use(e, e.var(0));
        if (f.kind() != Type::Kind::Fun) fail(TypeErrorKind::TypeMismatch, e, "applying a non-function " + to_string(f));
        Type a = use(e, e.var(1));
        if (!subtype(a, f.arg()))
          fail(TypeErrorKind::NotASubtype, e, to_string(a) + " is not a subtype of " + to_string(f.arg()));
        return {f.result(), e};
      }
      case ExprKind::Subsume: {
        Type t = use(e, e.var());
        if (!subtype(t, e.type()))
          fail(TypeErrorKind::NotASubtype, e, to_string(t) + " is not a subtype of " + to_string(e.type()));
        return {e.type(), e};
      }
      case ExprKind::ANew:
        return check(build_anew(e.session(), e.loc()));
      case ExprKind::ASend: {
        Session s = promise(e, e.var(0));
        if (unfold(s).kind() != Session::Kind::Xmit || unfold(s).dir() != Dir::Snd)
          fail(TypeErrorKind::TypeMismatch, e, "asend on an asynchronous channel of type " + to_string(s));
        return check(build_asend(e.var(0), e.var(1), s, e.loc()));
      }
      case ExprKind::ARecv: {
        Session s = promise(e, e.var());
        if (unfold(s).kind() != Session::Kind::Xmit || unfold(s).dir() != Dir::Rcv)
          fail(TypeErrorKind::TypeMismatch, e, "arecv on an asynchronous channel of type " + to_string(s));
        return check(build_arecv(e.var(), s, e.loc()));
      }
    }
    fail(TypeErrorKind::TypeMismatch, e, "unknown expression");
  }

  const ConsumptionMask& mask() const { return mask_; }
  const TypingContext& context() const { return ctx_; }

  [[noreturn]] static void fail(TypeErrorKind kind, const Expr& e, const std::string& msg) {
    throw TypeError(kind, e.loc(), msg);
  }

 private:
  std::size_t slot(const Expr& e, std::size_t k) const {
    if (k >= ctx_.size()) fail(TypeErrorKind::UnboundVariable, e, "variable index " + std::to_string(k) + " unbound");
    return ctx_.size() - 1 - k;
  }

  Type use(const Expr& e, std::size_t k) {
    const std::size_t i = slot(e, k);
    if (mask_[i])
      fail(TypeErrorKind::LinearityViolation, e, "linear variable " + std::to_string(k) + " already consumed");
    if (!is_unrestricted(ctx_[i])) mask_[i] = true;
    return ctx_[i];
  }

  // Consumes a channel variable and returns its unfolded session.
  Session channel(const Expr& e, std::size_t k) {
    Type t = use(e, k);
    if (t.kind() != Type::Kind::Chan) fail(TypeErrorKind::TypeMismatch, e, "expected a channel, got " + to_string(t));
    return unfold(t.session());
  }

  // Peeks at an asynchronous channel variable: its type must be AT[s].
  Session promise(const Expr& e, std::size_t k) {
    const Type& t = ctx_[slot(e, k)];
    if (t.kind() == Type::Kind::Chan) {
      Session p = unfold(t.session());
      if (p.kind() == Session::Kind::Xmit && p.dir() == Dir::Rcv && p.payload().kind() == Type::Kind::Chan) {
        Session rest = unfold(p.cont());
        if (rest.kind() == Session::Kind::End && rest.dir() == Dir::Rcv) return p.payload().session();
      }
    }
    fail(TypeErrorKind::TypeMismatch, e, "expected an asynchronous channel, got " + to_string(t));
  }

  void push(const Type& t) {
    ctx_.push_back(t);
    mask_.push_back(false);
  }

  void pop_checked(const Expr& e, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!mask_.back() && !is_unrestricted(ctx_.back()))
        fail(TypeErrorKind::UnusedLinear, e, "linear binding of type " + to_string(ctx_.back()) + " is never used");
      ctx_.pop_back();
      mask_.pop_back();
    }
  }

  std::pair<Type, Expr> check_branch(const Expr& e) {
    Session s = channel(e, e.var());
    if (s.kind() != Session::Kind::Choice || s.dir() != Dir::Rcv)
      fail(TypeErrorKind::TypeMismatch, e, "branch on a channel of type " + to_string(s));
    if (e.subs().size() != s.alts().size())
      fail(TypeErrorKind::ArityMismatch, e,
           "branch has " + std::to_string(e.subs().size()) + " cases for " + std::to_string(s.alts().size()) +
               " alternatives");
    const ConsumptionMask before = mask_;
    std::optional<ConsumptionMask> after;
    Type result;
    std::vector<Expr> cases;
    for (std::size_t i = 0; i < e.subs().size(); ++i) {
      mask_ = before;
      push(ty::chan(s.alts()[i]));
      auto [t, body] = check(e.subs()[i]);
      pop_checked(e.subs()[i], 1);
      if (!after) {
        after = mask_;
        result = t;
      } else {
        if (*after != mask_)
          fail(TypeErrorKind::LinearityViolation, e.subs()[i],
               "case " + std::to_string(i) + " consumes different linear variables than case 0");
        if (!type_equiv(result, t))
          fail(TypeErrorKind::TypeMismatch, e.subs()[i],
               "case " + std::to_string(i) + " has type " + to_string(t) + ", case 0 has " + to_string(result));
      }
      cases.push_back(std::move(body));
    }
    mask_ = *after;
    return {result, rebuild(e, std::move(cases))};
  }

  std::pair<Type, Expr> check_rec(const Expr& e) {
    const Type& f = e.type();
    if (f.kind() != Type::Kind::Fun || f.linearity() != Linearity::UU)
      fail(TypeErrorKind::TypeMismatch, e, "rec needs an unrestricted function type, got " + to_string(f));
    const ConsumptionMask before = mask_;
    push(f);
    push(f.arg());
    auto [t, body] = check(e.sub());
    pop_checked(e, 2);
    if (mask_ != before)
      fail(TypeErrorKind::UnrestrictedContextRequired, e, "recursive function captures a linear variable");
    if (!subtype(t, f.result()))
      fail(TypeErrorKind::NotASubtype, e, "body type " + to_string(t) + " is not a subtype of " + to_string(f.result()));
    return {f, rebuild(e, {body})};
  }

  static Expr rebuild(const Expr& e, std::vector<Expr> subs) {
    if (subs == e.subs()) {
      bool same = true;
      for (std::size_t i = 0; i < subs.size(); ++i) same = same && subs[i].get() == e.subs()[i].get();
      if (same) return e;
    }
    return e.with_subs(std::move(subs));
  }

  TypingContext ctx_;
  ConsumptionMask mask_;
};

}  // namespace detail

// Checks `e` in `ctx`, threading `mask`. Bindings of ctx left available in the
// returned mask were not used by `e`.
inline CheckResult check_expr(const TypingContext& ctx, ConsumptionMask mask, const Expr& e) {
  detail::Checker checker(ctx, std::move(mask));
  auto [t, core] = checker.check(e);
  return {std::move(t), checker.mask(), std::move(core)};
}

// Checks `e` in `ctx` where every linear binding of ctx must be used.
inline CheckResult check_in_context(const TypingContext& ctx, const Expr& e) {
  CheckResult r = check_expr(ctx, ConsumptionMask(ctx.size(), false), e);
  for (std::size_t i = 0; i < ctx.size(); ++i)
    if (!r.mask[i] && !is_unrestricted(ctx[i]))
      throw TypeError(TypeErrorKind::UnusedLinear, e.loc(),
                      "context binding " + std::to_string(ctx.size() - 1 - i) + " of type " + to_string(ctx[i]) +
                          " is never used");
  return r;
}

inline CheckResult check_program(const Expr& e) { return check_in_context({}, e); }

// Programs run only at type unit.
inline CheckResult check_runnable(const Expr& e) {
  CheckResult r = check_program(e);
  if (!type_equiv(r.type, ty::unit()))
    throw TypeError(TypeErrorKind::TypeMismatch, e.loc(), "program has type " + to_string(r.type) + ", expected unit");
  return r;
}

}  // namespace gvm
