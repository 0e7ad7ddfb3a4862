#pragma once

// Declarative typing for the core fragment (variables, unit, pairs, let,
// letpair, fork, new, close, wait, send, recv), decided by trying every
// context splitting. Independent of the algorithmic checker.

#include <optional>
#include <string>
#include <vector>

#include "gvm/pretty.hpp"
#include "gvm/syntax.hpp"
#include "gvm/typecheck.hpp"

namespace gvm::testing {

// A split context keeps every position; a binding given to the other side
// is absent.
using Slots = std::vector<std::optional<Type>>;

class DeclarativeTyping {
 public:
  // Every type derivable for e in ctx.
  std::vector<Type> derive(const Slots& ctx, const Expr& e) {
    std::vector<Type> out;
    auto add = [&](Type t) {
      for (const auto& u : out)
        if (u == t) return;
      out.push_back(std::move(t));
    };
    switch (e.kind()) {
      case ExprKind::Var:
        if (auto t = lookup(ctx, e.var())) add(*t);
        break;
      case ExprKind::Unit:
        if (all_unrestricted(ctx)) add(ty::unit());
        break;
      case ExprKind::Pair:
        for_each_split(ctx, [&](const Slots& l, const Slots& r) {
          auto a = lookup(l, e.var(0));
          auto b = lookup(r, e.var(1));
          if (a && b) add(ty::pair(*a, *b));
        });
        break;
      case ExprKind::Let:
        for_each_split(ctx, [&](const Slots& l, const Slots& r) {
          for (const auto& t1 : derive(l, e.sub(0))) {
            Slots body = r;
            body.push_back(t1);
            for (auto& t2 : derive(body, e.sub(1))) add(t2);
          }
        });
        break;
      case ExprKind::LetPair:
        for_each_split(ctx, [&](const Slots& l, const Slots& r) {
          auto p = lookup(l, e.var());
          if (!p || p->kind() != Type::Kind::Pair) return;
          Slots body = r;
          body.push_back(p->first());
          body.push_back(p->second());
          for (auto& t : derive(body, e.sub())) add(t);
        });
        break;
      case ExprKind::Fork:
        for (const auto& t : derive(ctx, e.sub()))
          if (t.kind() == Type::Kind::Unit) add(ty::unit());
        break;
      case ExprKind::New:
        if (all_unrestricted(ctx)) add(ty::pair(ty::chan(e.session()), ty::chan(dual(e.session()))));
        break;
      case ExprKind::Close:
      case ExprKind::Wait: {
        const Dir d = e.kind() == ExprKind::Close ? Dir::Snd : Dir::Rcv;
        if (auto s = channel(lookup(ctx, e.var())); s && s->kind() == Session::Kind::End && s->dir() == d)
          add(ty::unit());
        break;
      }
      case ExprKind::Send:
        for_each_split(ctx, [&](const Slots& l, const Slots& r) {
          auto s = channel(lookup(l, e.var(0)));
          auto v = lookup(r, e.var(1));
          if (s && v && s->kind() == Session::Kind::Xmit && s->dir() == Dir::Snd && type_equiv(*v, s->payload()))
            add(ty::chan(s->cont()));
        });
        break;
      case ExprKind::Recv:
        if (auto s = channel(lookup(ctx, e.var())); s && s->kind() == Session::Kind::Xmit && s->dir() == Dir::Rcv)
          add(ty::pair(ty::chan(s->cont()), s->payload()));
        break;
      default:
        break;  // outside the fragment
    }
    return out;
  }

 private:
  static bool all_unrestricted(const Slots& ctx, std::optional<std::size_t> except = std::nullopt) {
    for (std::size_t i = 0; i < ctx.size(); ++i)
      if (ctx[i] && (!except || *except != i) && !is_unrestricted(*ctx[i])) return false;
    return true;
  }

  // Variable rule: the binding is present and everything else present is
  // unrestricted.
  static std::optional<Type> lookup(const Slots& ctx, std::size_t k) {
    if (k >= ctx.size()) return std::nullopt;
    const std::size_t pos = ctx.size() - 1 - k;
    if (!ctx[pos] || !all_unrestricted(ctx, pos)) return std::nullopt;
    return ctx[pos];
  }

  static std::optional<Session> channel(const std::optional<Type>& t) {
    if (!t || t->kind() != Type::Kind::Chan) return std::nullopt;
    return unfold(t->session());
  }

  template <typename F>
  static void for_each_split(const Slots& ctx, F&& f) {
    std::vector<std::size_t> linear;
    for (std::size_t i = 0; i < ctx.size(); ++i)
      if (ctx[i] && !is_unrestricted(*ctx[i])) linear.push_back(i);
    for (std::size_t bits = 0; bits < (std::size_t{1} << linear.size()); ++bits) {
      Slots l = ctx, r = ctx;
      for (std::size_t j = 0; j < linear.size(); ++j) ((bits >> j) & 1 ? l : r)[linear[j]].reset();
      f(l, r);
    }
  }
};

// ---------------------------------------------------------------------------
// The enumerated family

struct TypingCase {
  std::vector<Type> ctx;  // outermost first
  Expr expr;
};

inline const std::vector<Type>& oracle_type_pool() {
  static const std::vector<Type> pool = {
      ty::unit(),
      ty::chan(sess::end(Dir::Snd)),
      ty::chan(sess::end(Dir::Rcv)),
      ty::chan(sess::send(ty::unit(), sess::end(Dir::Snd))),
      ty::chan(sess::recv(ty::unit(), sess::end(Dir::Rcv))),
      ty::pair(ty::chan(sess::end(Dir::Snd)), ty::chan(sess::end(Dir::Rcv))),
  };
  return pool;
}

namespace detail {

inline std::vector<Expr> atoms(std::size_t n) {
  std::vector<Expr> out;
  for (std::size_t k = 0; k < n; ++k) {
    out.push_back(expr::var(k));
    out.push_back(expr::close(k));
    out.push_back(expr::wait(k));
    out.push_back(expr::recv(k));
    out.push_back(expr::fork(expr::close(k)));
    for (std::size_t j = 0; j < n; ++j) {
      out.push_back(expr::pair(k, j));
      out.push_back(expr::send(k, j));
    }
  }
  out.push_back(expr::unit());
  out.push_back(expr::fork(expr::unit()));
  out.push_back(expr::new_channel(sess::end(Dir::Snd)));
  out.push_back(expr::new_channel(sess::send(ty::unit(), sess::end(Dir::Snd))));
  return out;
}

inline void terms(std::size_t n, int depth, std::size_t budget, std::vector<Expr>& out) {
  for (auto& a : atoms(n)) out.push_back(a);
  if (depth <= 0) return;
  if (n + 1 <= budget) {
    std::vector<Expr> bodies;
    terms(n + 1, depth - 1, budget, bodies);
    for (const auto& a : atoms(n))
      for (const auto& b : bodies) out.push_back(expr::let(a, b));
  }
  if (n + 2 <= budget) {
    std::vector<Expr> bodies;
    terms(n + 2, depth - 1, budget, bodies);
    for (std::size_t k = 0; k < n; ++k)
      for (const auto& b : bodies) out.push_back(expr::letpair(k, b));
  }
}

}  // namespace detail

// Every term over contexts of up to two bindings from the pool, with at most
// four bindings in scope anywhere.
inline std::vector<TypingCase> typing_family() {
  constexpr std::size_t budget = 4;
  std::vector<TypingCase> out;
  const auto& pool = oracle_type_pool();
  std::vector<std::vector<Type>> contexts = {{}};
  for (const auto& a : pool) contexts.push_back({a});
  for (const auto& a : pool)
    for (const auto& b : pool) contexts.push_back({a, b});
  for (const auto& ctx : contexts) {
    std::vector<Expr> es;
    detail::terms(ctx.size(), ctx.size() < 2 ? 2 : 1, budget, es);
    for (auto& e : es) out.push_back({ctx, std::move(e)});
  }
  return out;
}

struct Agreement {
  std::size_t cases = 0;
  std::size_t accepted = 0;
  std::size_t duplicate_use = 0;  // rejected with LinearityViolation
  std::size_t unused_linear = 0;  // rejected with UnusedLinear
  std::size_t mismatches = 0;
  std::vector<std::string> disagreements;  // the first few
};

inline Agreement compare_with_oracle(const std::vector<TypingCase>& family) {
  Agreement res;
  DeclarativeTyping oracle;
  for (const auto& c : family) {
    ++res.cases;
    Slots slots(c.ctx.begin(), c.ctx.end());
    std::vector<Type> derivable = oracle.derive(slots, c.expr);
    std::optional<Type> algorithmic;
    try {
      algorithmic = check_in_context(c.ctx, c.expr).type;
    } catch (const TypeError& err) {
      if (err.kind() == TypeErrorKind::LinearityViolation) ++res.duplicate_use;
      if (err.kind() == TypeErrorKind::UnusedLinear) ++res.unused_linear;
    }
    bool agree = algorithmic ? derivable.size() == 1 && type_equiv(derivable.front(), *algorithmic) : derivable.empty();
    if (algorithmic) ++res.accepted;
    if (!agree) ++res.mismatches;
    if (!agree && res.disagreements.size() < 10) {
      std::string ctx;
      for (const auto& t : c.ctx) ctx += to_string(t) + "; ";
      res.disagreements.push_back("[" + ctx + "] " + to_string(c.expr) + ": checker " +
                                  (algorithmic ? to_string(*algorithmic) : "rejects") + ", oracle finds " +
                                  std::to_string(derivable.size()) + " types");
    }
  }
  return res;
}

}  // namespace gvm::testing
