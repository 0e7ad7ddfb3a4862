#pragma once

// Runtime values and the stuttering CEK machine.
//
// decompose runs a thread's expression through administrative steps (let,
// letpair, value construction) until it needs the scheduler, and returns the
// pending effect as a Command. It never touches the channel table.
//
// Environments are kept strengthened: whenever an expression is captured
// (continuation frame, closure, forked thunk, branch cases) its environment
// is cut down to the variables it actually uses and the body is renumbered
// to match, so a captured environment holds exactly its resources.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "gvm/pretty.hpp"
#include "gvm/syntax.hpp"

namespace gvm {

// A bug in the runtime or an unchecked program; well-typed programs never
// raise it.
class MachineFault : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class Polarity { Pos, Neg };

constexpr Polarity opposite(Polarity p) noexcept { return p == Polarity::Pos ? Polarity::Neg : Polarity::Pos; }

using ChannelId = std::uint64_t;

struct ChannelEnd {
  ChannelId id = 0;
  Polarity pol = Polarity::Pos;

  friend bool operator==(const ChannelEnd&, const ChannelEnd&) = default;
  friend auto operator<=>(const ChannelEnd&, const ChannelEnd&) = default;
};

inline std::string to_string(const ChannelEnd& c) {
  return std::to_string(c.id) + (c.pol == Polarity::Pos ? "+" : "-");
}

class Val;
using VEnv = std::vector<Val>;

namespace detail {
struct ValNode;
struct Frame;
}  // namespace detail

class Val {
 public:
  struct Unit {
    friend bool operator==(const Unit&, const Unit&) = default;
  };
  struct Pair;
  struct Chan {
    ChannelEnd end;
    friend bool operator==(const Chan&, const Chan&) = default;
  };
  struct Closure;
  struct Label {
    std::size_t label;
    friend bool operator==(const Label&, const Label&) = default;
  };

  Val();

  static Val unit();
  static Val pair(Val a, Val b);
  static Val chan(ChannelEnd end);
  static Val closure(Linearity lin, bool recursive, Expr body, VEnv env);
  static Val label(std::size_t l);

  bool is_unit() const;
  const Pair* as_pair() const;
  const Chan* as_chan() const;
  const Closure* as_closure() const;

  template <typename F>
  decltype(auto) visit(F&& f) const;

  friend bool operator==(const Val& a, const Val& b);

 private:
  std::shared_ptr<const detail::ValNode> node_;
};

struct Val::Pair {
  Val first;
  Val second;
  friend bool operator==(const Pair&, const Pair&) = default;
};

struct Val::Closure {
  Linearity lin;
  // Recursive closures see themselves at index 1 of their body, below the
  // argument.
  bool recursive;
  Expr body;
  VEnv env;
  friend bool operator==(const Closure&, const Closure&) = default;
};

namespace detail {
struct ValNode {
  std::variant<Val::Unit, Val::Pair, Val::Chan, Val::Closure, Val::Label> v;
};
}  // namespace detail

inline Val::Val() : node_(std::make_shared<const detail::ValNode>(detail::ValNode{Unit{}})) {}
inline Val Val::unit() { return Val(); }
inline Val Val::pair(Val a, Val b) {
  Val v;
  v.node_ = std::make_shared<const detail::ValNode>(detail::ValNode{Pair{std::move(a), std::move(b)}});
  return v;
}
inline Val Val::chan(ChannelEnd end) {
  Val v;
  v.node_ = std::make_shared<const detail::ValNode>(detail::ValNode{Chan{end}});
  return v;
}
inline Val Val::closure(Linearity lin, bool recursive, Expr body, VEnv env) {
  Val v;
  v.node_ = std::make_shared<const detail::ValNode>(
      detail::ValNode{Closure{lin, recursive, std::move(body), std::move(env)}});
  return v;
}
inline Val Val::label(std::size_t l) {
  Val v;
  v.node_ = std::make_shared<const detail::ValNode>(detail::ValNode{Label{l}});
  return v;
}
inline bool Val::is_unit() const { return std::holds_alternative<Unit>(node_->v); }
inline const Val::Pair* Val::as_pair() const { return std::get_if<Pair>(&node_->v); }
inline const Val::Chan* Val::as_chan() const { return std::get_if<Chan>(&node_->v); }
inline const Val::Closure* Val::as_closure() const { return std::get_if<Closure>(&node_->v); }
template <typename F>
decltype(auto) Val::visit(F&& f) const {
  return std::visit(std::forward<F>(f), node_->v);
}
inline bool operator==(const Val& a, const Val& b) { return a.node_ == b.node_ || a.node_->v == b.node_->v; }

// Halt, or a frozen call to decompose: body, its environment, and the next
// continuation. The body binds the incoming value at index 0.
class Cont {
 public:
  Cont() = default;  // Halt

  static Cont halt() { return {}; }
  static Cont bind(Expr body, VEnv env, Cont next);

  bool is_halt() const noexcept { return frame_ == nullptr; }
  const Expr& body() const;
  const VEnv& env() const;
  const Cont& next() const;

  friend bool operator==(const Cont& a, const Cont& b);

 private:
  std::shared_ptr<const detail::Frame> frame_;
};

namespace detail {
struct Frame {
  Expr body;
  VEnv env;
  Cont next;
};
}  // namespace detail

inline Cont Cont::bind(Expr body, VEnv env, Cont next) {
  Cont k;
  k.frame_ = std::make_shared<const detail::Frame>(detail::Frame{std::move(body), std::move(env), std::move(next)});
  return k;
}
inline const Expr& Cont::body() const { return frame_->body; }
inline const VEnv& Cont::env() const { return frame_->env; }
inline const Cont& Cont::next() const { return frame_->next; }
inline bool operator==(const Cont& a, const Cont& b) {
  if (a.frame_ == b.frame_) return true;
  if (!a.frame_ || !b.frame_) return false;
  return a.frame_->body == b.frame_->body && a.frame_->env == b.frame_->env && a.frame_->next == b.frame_->next;
}

// ---------------------------------------------------------------------------
// Commands

struct ReadyC {
  Val value;
  Cont k;
  friend bool operator==(const ReadyC&, const ReadyC&) = default;
};
struct HaltC {
  Val value;
  friend bool operator==(const HaltC&, const HaltC&) = default;
};
struct ForkC {
  Cont child;
  Cont parent;
  friend bool operator==(const ForkC&, const ForkC&) = default;
};
struct NewC {
  Session session;
  Cont k;
  friend bool operator==(const NewC& a, const NewC& b) { return a.session == b.session && a.k == b.k; }
};
struct CloseC {
  ChannelEnd ch;
  Cont k;
  friend bool operator==(const CloseC&, const CloseC&) = default;
};
struct WaitC {
  ChannelEnd ch;
  Cont k;
  friend bool operator==(const WaitC&, const WaitC&) = default;
};
struct SendC {
  ChannelEnd ch;
  Val value;
  Cont k;
  friend bool operator==(const SendC&, const SendC&) = default;
};
struct RecvC {
  ChannelEnd ch;
  Cont k;
  friend bool operator==(const RecvC&, const RecvC&) = default;
};
struct SelectC {
  std::size_t label;
  ChannelEnd ch;
  Cont k;
  friend bool operator==(const SelectC&, const SelectC&) = default;
};
// All cases share `env`; case i runs with the continuation channel bound at
// index 0 on top of it.
struct BranchC {
  ChannelEnd ch;
  std::vector<Expr> cases;
  VEnv env;
  Cont k;
  friend bool operator==(const BranchC&, const BranchC&) = default;
};

using Command = std::variant<ReadyC, HaltC, ForkC, NewC, CloseC, WaitC, SendC, RecvC, SelectC, BranchC>;

// ---------------------------------------------------------------------------
// Resources

inline void collect_ends(const Val& v, std::vector<ChannelEnd>& out);

inline void collect_ends(const VEnv& env, std::vector<ChannelEnd>& out) {
  for (const auto& v : env) collect_ends(v, out);
}

inline void collect_ends(const Val& v, std::vector<ChannelEnd>& out) {
  if (const auto* p = v.as_pair()) {
    collect_ends(p->first, out);
    collect_ends(p->second, out);
  } else if (const auto* c = v.as_chan()) {
    out.push_back(c->end);
  } else if (const auto* f = v.as_closure()) {
    collect_ends(f->env, out);
  }
}

inline void collect_ends(const Cont& k, std::vector<ChannelEnd>& out) {
  for (const Cont* c = &k; !c->is_halt(); c = &c->next()) collect_ends(c->env(), out);
}

inline void collect_ends(const Command& cmd, std::vector<ChannelEnd>& out) {
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, ReadyC>) {
          collect_ends(c.value, out);
          collect_ends(c.k, out);
        } else if constexpr (std::is_same_v<T, HaltC>) {
          collect_ends(c.value, out);
        } else if constexpr (std::is_same_v<T, ForkC>) {
          collect_ends(c.child, out);
          collect_ends(c.parent, out);
        } else if constexpr (std::is_same_v<T, NewC>) {
          collect_ends(c.k, out);
        } else if constexpr (std::is_same_v<T, SendC>) {
          out.push_back(c.ch);
          collect_ends(c.value, out);
          collect_ends(c.k, out);
        } else if constexpr (std::is_same_v<T, BranchC>) {
          out.push_back(c.ch);
          collect_ends(c.env, out);
          collect_ends(c.k, out);
        } else {
          out.push_back(c.ch);
          collect_ends(c.k, out);
        }
      },
      cmd);
}

// Multiset of channel ends reachable from x, sorted.
template <typename T>
std::vector<ChannelEnd> channel_ends(const T& x) {
  std::vector<ChannelEnd> out;
  collect_ends(x, out);
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Capture

struct Capture {
  std::vector<Expr> bodies;
  VEnv env;
};

// Closes `bodies` (each with `binders` local variables on top of `env`) over
// the part of `env` they use. The result environment keeps the original
// relative order.
inline Capture capture(std::span<const Expr> bodies, std::size_t binders, const VEnv& env) {
  std::vector<std::size_t> used;  // outer indices relative to env
  for (const auto& b : bodies)
    for (std::size_t k : b.free_vars())
      if (k >= binders) used.push_back(k - binders);
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());
  if (!used.empty() && used.back() >= env.size())
    throw MachineFault("expression refers past the end of its environment");

  // used is ascending in de Bruijn index, i.e. descending in position.
  Capture out;
  out.env.reserve(used.size());
  for (auto it = used.rbegin(); it != used.rend(); ++it) out.env.push_back(env[env.size() - 1 - *it]);
  auto renumber = [&](std::size_t k) {
    return static_cast<std::size_t>(std::lower_bound(used.begin(), used.end(), k) - used.begin());
  };
  for (const auto& b : bodies) out.bodies.push_back(rename_free(b, renumber, binders));
  return out;
}

// ---------------------------------------------------------------------------
// decompose / apply_cont

namespace detail {

inline const Val& access(const VEnv& env, std::size_t k) {
  if (k >= env.size()) throw MachineFault("unbound variable " + std::to_string(k) + " at run time");
  return env[env.size() - 1 - k];
}

inline ChannelEnd access_end(const VEnv& env, std::size_t k) {
  const auto* c = access(env, k).as_chan();
  if (!c) throw MachineFault("expected a channel value at run time");
  return c->end;
}

}  // namespace detail

inline Command decompose(Expr e, VEnv env, Cont k) {
  using detail::access;
  using detail::access_end;
  for (;;) {
    switch (e.kind()) {
      case ExprKind::Var:
        return ReadyC{access(env, e.var()), std::move(k)};
      case ExprKind::Unit:
        return ReadyC{Val::unit(), std::move(k)};
      case ExprKind::Pair:
        return ReadyC{Val::pair(access(env, e.var(0)), access(env, e.var(1))), std::move(k)};
      case ExprKind::Let: {
        Capture body = capture(std::span(&e.sub(1), 1), 1, env);
        k = Cont::bind(std::move(body.bodies.front()), std::move(body.env), std::move(k));
        e = Expr(e.sub(0));
        continue;
      }
      case ExprKind::LetPair: {
        const auto* p = access(env, e.var()).as_pair();
        if (!p) throw MachineFault("letpair on a non-pair value");
        Val a = p->first;
        Val b = p->second;
        env.push_back(std::move(a));
        env.push_back(std::move(b));
        e = Expr(e.sub());
        continue;
      }
      case ExprKind::Fork: {
        Capture thunk = capture(std::span(&e.sub(), 1), 0, env);
        Cont child = Cont::bind(shift(thunk.bodies.front(), 1), std::move(thunk.env), Cont::halt());
        return ForkC{std::move(child), std::move(k)};
      }
      case ExprKind::New:
        return NewC{e.session(), std::move(k)};
      case ExprKind::Close:
        return CloseC{access_end(env, e.var()), std::move(k)};
      case ExprKind::Wait:
        return WaitC{access_end(env, e.var()), std::move(k)};
      case ExprKind::Send:
        return SendC{access_end(env, e.var(0)), access(env, e.var(1)), std::move(k)};
      case ExprKind::Recv:
        return RecvC{access_end(env, e.var()), std::move(k)};
      case ExprKind::Select:
        return SelectC{e.label(), access_end(env, e.var()), std::move(k)};
      case ExprKind::Branch: {
        ChannelEnd ch = access_end(env, e.var());
        Capture cases = capture(e.subs(), 1, env);
        return BranchC{ch, std::move(cases.bodies), std::move(cases.env), std::move(k)};
      }
      case ExprKind::Lambda: {
        Capture fn = capture(std::span(&e.sub(), 1), 1, env);
        return ReadyC{Val::closure(Linearity::LL, false, std::move(fn.bodies.front()), std::move(fn.env)),
                      std::move(k)};
      }
      case ExprKind::Rec: {
        Capture fn = capture(std::span(&e.sub(), 1), 2, env);
        return ReadyC{Val::closure(Linearity::UU, true, std::move(fn.bodies.front()), std::move(fn.env)),
                      std::move(k)};
      }
      case ExprKind::App: {
        const Val& f = access(env, e.var(0));
        const auto* fn = f.as_closure();
        if (!fn) throw MachineFault("applying a non-function value");
        VEnv body_env = fn->env;
        if (fn->recursive) body_env.push_back(f);
        return ReadyC{access(env, e.var(1)), Cont::bind(fn->body, std::move(body_env), std::move(k))};
      }
      case ExprKind::Subsume:
        return ReadyC{access(env, e.var()), std::move(k)};
      case ExprKind::ANew:
      case ExprKind::ASend:
      case ExprKind::ARecv:
        throw MachineFault("asynchronous surface form reached the machine; check the program first");
    }
    throw MachineFault("unknown expression");
  }
}

inline Command apply_cont(const Cont& k, Val v) {
  if (k.is_halt()) {
    if (!channel_ends(v).empty()) throw MachineFault("thread halts while holding channel ends");
    return HaltC{std::move(v)};
  }
  VEnv env = k.env();
  env.push_back(std::move(v));
  return decompose(k.body(), std::move(env), k.next());
}

// ---------------------------------------------------------------------------
// Printing

void print(std::ostream& os, const Val& v);

inline void print(std::ostream& os, const VEnv& env) {
  os << '[';
  for (std::size_t i = 0; i < env.size(); ++i) {
    if (i) os << ' ';
    print(os, env[i]);
  }
  os << ']';
}

inline void print(std::ostream& os, const Val& v) {
  v.visit([&](const auto& x) {
    using T = std::decay_t<decltype(x)>;
    if constexpr (std::is_same_v<T, Val::Unit>) {
      os << "unit";
    } else if constexpr (std::is_same_v<T, Val::Pair>) {
      os << "(pair ";
      print(os, x.first);
      os << ' ';
      print(os, x.second);
      os << ')';
    } else if constexpr (std::is_same_v<T, Val::Chan>) {
      os << "(chan " << to_string(x.end) << ')';
    } else if constexpr (std::is_same_v<T, Val::Closure>) {
      os << "(closure " << (x.lin == Linearity::LL ? "lin" : "unr") << (x.recursive ? " rec " : " ");
      detail::ExprPrinter(os).print(x.body);
      os << ' ';
      print(os, x.env);
      os << ')';
    } else {
      os << "(label " << x.label << ')';
    }
  });
}

inline void print(std::ostream& os, const Cont& k) {
  if (k.is_halt()) {
    os << "halt";
    return;
  }
  os << "(bind ";
  detail::ExprPrinter(os).print(k.body());
  os << ' ';
  print(os, k.env());
  os << ' ';
  print(os, k.next());
  os << ')';
}

inline void print(std::ostream& os, const Command& cmd) {
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, ReadyC>) {
          os << "(Ready ";
          print(os, c.value);
          os << ' ';
          print(os, c.k);
        } else if constexpr (std::is_same_v<T, HaltC>) {
          os << "(Halt ";
          print(os, c.value);
        } else if constexpr (std::is_same_v<T, ForkC>) {
          os << "(Fork ";
          print(os, c.child);
          os << ' ';
          print(os, c.parent);
        } else if constexpr (std::is_same_v<T, NewC>) {
          os << "(New " << to_string(c.session) << ' ';
          print(os, c.k);
        } else if constexpr (std::is_same_v<T, CloseC>) {
          os << "(Close " << to_string(c.ch) << ' ';
          print(os, c.k);
        } else if constexpr (std::is_same_v<T, WaitC>) {
          os << "(Wait " << to_string(c.ch) << ' ';
          print(os, c.k);
        } else if constexpr (std::is_same_v<T, SendC>) {
          os << "(Send " << to_string(c.ch) << ' ';
          print(os, c.value);
          os << ' ';
          print(os, c.k);
        } else if constexpr (std::is_same_v<T, RecvC>) {
          os << "(Recv " << to_string(c.ch) << ' ';
          print(os, c.k);
        } else if constexpr (std::is_same_v<T, SelectC>) {
          os << "(Select " << c.label << ' ' << to_string(c.ch) << ' ';
          print(os, c.k);
        } else {
          os << "(Branch " << to_string(c.ch) << " (";
          for (std::size_t i = 0; i < c.cases.size(); ++i) {
            if (i) os << ' ';
            detail::ExprPrinter(os).print(c.cases[i]);
          }
          os << ") ";
          print(os, c.env);
          os << ' ';
          print(os, c.k);
        }
        os << ')';
      },
      cmd);
}

template <typename T>
  requires requires(std::ostream& os, const T& x) { print(os, x); }
std::string describe(const T& x) {
  std::ostringstream os;
  print(os, x);
  return os.str();
}

// Shape digest of a transmitted value.
inline std::string shape(const Val& v) {
  return v.visit([](const auto& x) -> std::string {
    using T = std::decay_t<decltype(x)>;
    if constexpr (std::is_same_v<T, Val::Unit>) {
      return "unit";
    } else if constexpr (std::is_same_v<T, Val::Pair>) {
      return "(pair " + shape(x.first) + " " + shape(x.second) + ")";
    } else if constexpr (std::is_same_v<T, Val::Chan>) {
      return "(chan " + to_string(x.end) + ")";
    } else if constexpr (std::is_same_v<T, Val::Closure>) {
      return x.lin == Linearity::LL ? "(fun lin)" : "(fun unr)";
    } else {
      return "(label " + std::to_string(x.label) + ")";
    }
  });
}

}  // namespace gvm
