#pragma once

// Types, session types and the ANF expression language.
//
// All syntax trees are immutable and shared; copying a Session, Type or Expr
// copies a pointer. Equality is structural.

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <memory>
#include <utility>
#include <vector>

namespace gvm {

enum class Dir { Snd, Rcv };

constexpr Dir flip(Dir d) noexcept { return d == Dir::Snd ? Dir::Rcv : Dir::Snd; }

// LL marks a function that must be used exactly once, UU one that may be
// duplicated or dropped.
enum class Linearity { LL, UU };

class Type;
class Session;

namespace detail {
struct SessionNode;
struct TypeNode;
struct ExprNode;
}  // namespace detail

class Session {
 public:
  enum class Kind { Xmit, End, Choice, Mu, Var };

  Session() = default;

  Kind kind() const;
  Dir dir() const;
  const Type& payload() const;            // Xmit
  const Session& cont() const;            // Xmit
  const std::vector<Session>& alts() const;  // Choice
  const Session& body() const;            // Mu
  std::size_t index() const;              // Var

  explicit operator bool() const noexcept { return node_ != nullptr; }
  const detail::SessionNode* get() const noexcept { return node_.get(); }

  static Session make(detail::SessionNode node);

  friend bool operator==(const Session& a, const Session& b);

 private:
  std::shared_ptr<const detail::SessionNode> node_;
};

class Type {
 public:
  enum class Kind { Unit, Pair, Chan, Fun };

  Type() = default;

  Kind kind() const;
  const Type& first() const;     // Pair
  const Type& second() const;    // Pair
  const Session& session() const;  // Chan
  Linearity linearity() const;   // Fun
  const Type& arg() const;       // Fun
  const Type& result() const;    // Fun

  explicit operator bool() const noexcept { return node_ != nullptr; }

  static Type make(detail::TypeNode node);

  friend bool operator==(const Type& a, const Type& b);

 private:
  std::shared_ptr<const detail::TypeNode> node_;
};

namespace detail {

struct SessionNode {
  Session::Kind kind;
  Dir dir = Dir::Snd;
  Type payload;
  // Xmit: {cont}; Choice: alternatives; Mu: {body}.
  std::vector<Session> next;
  std::size_t index = 0;
};

struct TypeNode {
  Type::Kind kind;
  Linearity lin = Linearity::LL;
  Type a;
  Type b;
  Session s;
};

}  // namespace detail

inline Session Session::make(detail::SessionNode node) {
  Session s;
  s.node_ = std::make_shared<const detail::SessionNode>(std::move(node));
  return s;
}

inline Session::Kind Session::kind() const { return node_->kind; }
inline Dir Session::dir() const { return node_->dir; }
inline const Type& Session::payload() const {
  assert(kind() == Kind::Xmit);
  return node_->payload;
}
inline const Session& Session::cont() const {
  assert(kind() == Kind::Xmit);
  return node_->next.front();
}
inline const std::vector<Session>& Session::alts() const {
  assert(kind() == Kind::Choice);
  return node_->next;
}
inline const Session& Session::body() const {
  assert(kind() == Kind::Mu);
  return node_->next.front();
}
inline std::size_t Session::index() const {
  assert(kind() == Kind::Var);
  return node_->index;
}

inline Type Type::make(detail::TypeNode node) {
  Type t;
  t.node_ = std::make_shared<const detail::TypeNode>(std::move(node));
  return t;
}

inline Type::Kind Type::kind() const { return node_->kind; }
inline const Type& Type::first() const {
  assert(kind() == Kind::Pair);
  return node_->a;
}
inline const Type& Type::second() const {
  assert(kind() == Kind::Pair);
  return node_->b;
}
inline const Session& Type::session() const {
  assert(kind() == Kind::Chan);
  return node_->s;
}
inline Linearity Type::linearity() const {
  assert(kind() == Kind::Fun);
  return node_->lin;
}
inline const Type& Type::arg() const {
  assert(kind() == Kind::Fun);
  return node_->a;
}
inline const Type& Type::result() const {
  assert(kind() == Kind::Fun);
  return node_->b;
}

inline bool operator==(const Session& a, const Session& b) {
  if (a.node_ == b.node_) return true;
  if (!a.node_ || !b.node_) return false;
  const auto& x = *a.node_;
  const auto& y = *b.node_;
  if (x.kind != y.kind) return false;
  switch (x.kind) {
    case Session::Kind::Xmit:
      return x.dir == y.dir && x.payload == y.payload && x.next == y.next;
    case Session::Kind::End:
      return x.dir == y.dir;
    case Session::Kind::Choice:
      return x.dir == y.dir && x.next == y.next;
    case Session::Kind::Mu:
      return x.next == y.next;
    case Session::Kind::Var:
      return x.index == y.index;
  }
  return false;
}

inline bool operator==(const Type& a, const Type& b) {
  if (a.node_ == b.node_) return true;
  if (!a.node_ || !b.node_) return false;
  const auto& x = *a.node_;
  const auto& y = *b.node_;
  if (x.kind != y.kind) return false;
  switch (x.kind) {
    case Type::Kind::Unit:
      return true;
    case Type::Kind::Pair:
      return x.a == y.a && x.b == y.b;
    case Type::Kind::Chan:
      return x.s == y.s;
    case Type::Kind::Fun:
      return x.lin == y.lin && x.a == y.a && x.b == y.b;
  }
  return false;
}

// Session type constructors.
namespace sess {

inline Session end(Dir d) { return Session::make({Session::Kind::End, d, {}, {}, 0}); }
inline Session xmit(Dir d, Type payload, Session cont) {
  return Session::make({Session::Kind::Xmit, d, std::move(payload), {std::move(cont)}, 0});
}
inline Session send(Type payload, Session cont) { return xmit(Dir::Snd, std::move(payload), std::move(cont)); }
inline Session recv(Type payload, Session cont) { return xmit(Dir::Rcv, std::move(payload), std::move(cont)); }
inline Session choice(Dir d, std::vector<Session> alts) {
  assert(!alts.empty());
  return Session::make({Session::Kind::Choice, d, {}, std::move(alts), 0});
}
inline Session mu(Session body) { return Session::make({Session::Kind::Mu, Dir::Snd, {}, {std::move(body)}, 0}); }
inline Session var(std::size_t k) { return Session::make({Session::Kind::Var, Dir::Snd, {}, {}, k}); }

}  // namespace sess

// Value type constructors.
namespace ty {

inline Type unit() { return Type::make({Type::Kind::Unit, Linearity::LL, {}, {}, {}}); }
inline Type pair(Type a, Type b) { return Type::make({Type::Kind::Pair, Linearity::LL, std::move(a), std::move(b), {}}); }
inline Type chan(Session s) { return Type::make({Type::Kind::Chan, Linearity::LL, {}, {}, std::move(s)}); }
inline Type fun(Linearity lin, Type arg, Type res) {
  return Type::make({Type::Kind::Fun, lin, std::move(arg), std::move(res), {}});
}

}  // namespace ty

inline Session dual(const Session& s) {
  switch (s.kind()) {
    case Session::Kind::Xmit:
      return sess::xmit(flip(s.dir()), s.payload(), dual(s.cont()));
    case Session::Kind::End:
      return sess::end(flip(s.dir()));
    case Session::Kind::Choice: {
      std::vector<Session> alts;
      alts.reserve(s.alts().size());
      for (const auto& a : s.alts()) alts.push_back(dual(a));
      return sess::choice(flip(s.dir()), std::move(alts));
    }
    case Session::Kind::Mu:
      return sess::mu(dual(s.body()));
    case Session::Kind::Var:
      return s;
  }
  return s;
}

namespace detail {

// Replaces the variable bound `depth` Mu-binders above `s` by `repl`, which
// must be closed.
inline Session substitute(const Session& s, const Session& repl, std::size_t depth) {
  switch (s.kind()) {
    case Session::Kind::Var:
      if (s.index() == depth) return repl;
      if (s.index() > depth) return sess::var(s.index() - 1);
      return s;
    case Session::Kind::End:
      return s;
    case Session::Kind::Xmit:
      return sess::xmit(s.dir(), s.payload(), substitute(s.cont(), repl, depth));
    case Session::Kind::Choice: {
      std::vector<Session> alts;
      alts.reserve(s.alts().size());
      for (const auto& a : s.alts()) alts.push_back(substitute(a, repl, depth));
      return sess::choice(s.dir(), std::move(alts));
    }
    case Session::Kind::Mu:
      return sess::mu(substitute(s.body(), repl, depth + 1));
  }
  return s;
}

}  // namespace detail

// Unrolls leading Mu binders until an Xmit, End or Choice constructor is
// exposed. Requires a closed contractive session.
inline Session unfold(Session s) {
  while (s.kind() == Session::Kind::Mu) s = detail::substitute(s.body(), s, 0);
  return s;
}

inline bool is_unrestricted(const Type& t) {
  switch (t.kind()) {
    case Type::Kind::Unit:
      return true;
    case Type::Kind::Pair:
      return is_unrestricted(t.first()) && is_unrestricted(t.second());
    case Type::Kind::Chan:
      return false;
    case Type::Kind::Fun:
      return t.linearity() == Linearity::UU;
  }
  return false;
}

bool is_well_formed(const Type& t);

// Closed under `depth` enclosing Mu binders, and every Mu guarded.
inline bool is_well_formed(const Session& s, std::size_t depth = 0) {
  switch (s.kind()) {
    case Session::Kind::Var:
      return s.index() < depth;
    case Session::Kind::End:
      return true;
    case Session::Kind::Xmit:
      // Payload types do not see enclosing recursion variables.
      return is_well_formed(s.payload()) && is_well_formed(s.cont(), depth);
    case Session::Kind::Choice:
      return std::all_of(s.alts().begin(), s.alts().end(),
                         [&](const Session& a) { return is_well_formed(a, depth); });
    case Session::Kind::Mu: {
      const Session* head = &s.body();
      while (head->kind() == Session::Kind::Mu) head = &head->body();
      if (head->kind() == Session::Kind::Var) return false;
      return is_well_formed(s.body(), depth + 1);
    }
  }
  return false;
}

inline bool is_well_formed(const Type& t) {
  switch (t.kind()) {
    case Type::Kind::Unit:
      return true;
    case Type::Kind::Pair:
      return is_well_formed(t.first()) && is_well_formed(t.second());
    case Type::Kind::Chan:
      return is_well_formed(t.session(), 0);
    case Type::Kind::Fun:
      return is_well_formed(t.arg()) && is_well_formed(t.result());
  }
  return false;
}

// ---------------------------------------------------------------------------
// Expressions

struct SourceLoc {
  std::size_t line = 0;
  std::size_t column = 0;
};

enum class ExprKind {
  Var,
  Unit,
  Pair,
  LetPair,  // binds first component at index 1, second at index 0
  Let,
  Fork,
  New,
  Close,
  Wait,
  Send,
  Recv,
  Select,
  Branch,  // each case binds the continuation channel at index 0
  Lambda,  // binds the parameter
  Rec,     // binds the function at index 1, the parameter at index 0
  App,
  Subsume,
  // Surface forms for asynchronous channels; the type checker expands them
  // into core expressions before anything runs.
  ANew,
  ASend,
  ARecv,
};

class Expr {
 public:
  Expr() = default;

  ExprKind kind() const;
  // Variable operands (de Bruijn indices), in source order.
  const std::vector<std::size_t>& vars() const;
  std::size_t var(std::size_t i = 0) const { return vars().at(i); }
  const std::vector<Expr>& subs() const;
  const Expr& sub(std::size_t i = 0) const { return subs().at(i); }
  const Session& session() const;
  const Type& type() const;
  std::size_t label() const;
  SourceLoc loc() const;
  // Sorted free variable indices.
  const std::vector<std::size_t>& free_vars() const;

  explicit operator bool() const noexcept { return node_ != nullptr; }
  const detail::ExprNode* get() const noexcept { return node_.get(); }

  static Expr make(ExprKind kind, std::vector<std::size_t> vars, std::vector<Expr> subs,
                   Session session = {}, Type type = {}, std::size_t label = 0, SourceLoc loc = {});

  Expr with_loc(SourceLoc loc) const;
  Expr with_subs(std::vector<Expr> subs) const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  std::shared_ptr<const detail::ExprNode> node_;
};

namespace detail {

struct ExprNode {
  ExprKind kind;
  std::vector<std::size_t> vars;
  std::vector<Expr> subs;
  Session session;
  Type type;
  std::size_t label = 0;
  SourceLoc loc;
  std::vector<std::size_t> free;
};

}  // namespace detail

// Number of variables each subexpression binds on top of its parent's context.
inline std::size_t binders_of(ExprKind kind, std::size_t sub_index) {
  switch (kind) {
    case ExprKind::LetPair:
      return 2;
    case ExprKind::Let:
      return sub_index == 0 ? 0 : 1;
    case ExprKind::Branch:
    case ExprKind::Lambda:
      return 1;
    case ExprKind::Rec:
      return 2;
    default:
      return 0;
  }
}

inline Expr Expr::make(ExprKind kind, std::vector<std::size_t> vars, std::vector<Expr> subs, Session session,
                       Type type, std::size_t label, SourceLoc loc) {
  std::vector<std::size_t> free = vars;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    const std::size_t n = binders_of(kind, i);
    for (std::size_t k : subs[i].free_vars())
      if (k >= n) free.push_back(k - n);
  }
  std::sort(free.begin(), free.end());
  free.erase(std::unique(free.begin(), free.end()), free.end());
  Expr e;
  e.node_ = std::make_shared<const detail::ExprNode>(detail::ExprNode{
      kind, std::move(vars), std::move(subs), std::move(session), std::move(type), label, loc, std::move(free)});
  return e;
}

inline ExprKind Expr::kind() const { return node_->kind; }
inline const std::vector<std::size_t>& Expr::vars() const { return node_->vars; }
inline const std::vector<Expr>& Expr::subs() const { return node_->subs; }
inline const Session& Expr::session() const { return node_->session; }
inline const Type& Expr::type() const { return node_->type; }
inline std::size_t Expr::label() const { return node_->label; }
inline SourceLoc Expr::loc() const { return node_->loc; }
inline const std::vector<std::size_t>& Expr::free_vars() const { return node_->free; }

inline Expr Expr::with_loc(SourceLoc loc) const {
  return make(kind(), vars(), subs(), session(), type(), label(), loc);
}

inline Expr Expr::with_subs(std::vector<Expr> subs) const {
  return make(kind(), vars(), std::move(subs), session(), type(), label(), loc());
}

inline bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  if (!a.node_ || !b.node_) return false;
  const auto& x = *a.node_;
  const auto& y = *b.node_;
  if (x.kind != y.kind || x.vars != y.vars || x.label != y.label || x.subs != y.subs) return false;
  if (static_cast<bool>(x.session) != static_cast<bool>(y.session)) return false;
  if (x.session && !(x.session == y.session)) return false;
  if (static_cast<bool>(x.type) != static_cast<bool>(y.type)) return false;
  return !x.type || x.type == y.type;
}

namespace expr {

inline Expr var(std::size_t k) { return Expr::make(ExprKind::Var, {k}, {}); }
inline Expr unit() { return Expr::make(ExprKind::Unit, {}, {}); }
inline Expr pair(std::size_t a, std::size_t b) { return Expr::make(ExprKind::Pair, {a, b}, {}); }
inline Expr letpair(std::size_t p, Expr body) { return Expr::make(ExprKind::LetPair, {p}, {std::move(body)}); }
inline Expr let(Expr bound, Expr body) { return Expr::make(ExprKind::Let, {}, {std::move(bound), std::move(body)}); }
inline Expr fork(Expr body) { return Expr::make(ExprKind::Fork, {}, {std::move(body)}); }
inline Expr new_channel(Session s) { return Expr::make(ExprKind::New, {}, {}, std::move(s)); }
inline Expr close(std::size_t c) { return Expr::make(ExprKind::Close, {c}, {}); }
inline Expr wait(std::size_t c) { return Expr::make(ExprKind::Wait, {c}, {}); }
inline Expr send(std::size_t c, std::size_t v) { return Expr::make(ExprKind::Send, {c, v}, {}); }
inline Expr recv(std::size_t c) { return Expr::make(ExprKind::Recv, {c}, {}); }
inline Expr select(std::size_t label, std::size_t c) {
  return Expr::make(ExprKind::Select, {c}, {}, {}, {}, label);
}
inline Expr branch(std::size_t c, std::vector<Expr> cases) { return Expr::make(ExprKind::Branch, {c}, std::move(cases)); }
inline Expr lambda(Type param, Expr body) {
  return Expr::make(ExprKind::Lambda, {}, {std::move(body)}, {}, std::move(param));
}
inline Expr rec(Type fun_type, Expr body) {
  return Expr::make(ExprKind::Rec, {}, {std::move(body)}, {}, std::move(fun_type));
}
inline Expr app(std::size_t f, std::size_t a) { return Expr::make(ExprKind::App, {f, a}, {}); }
inline Expr subsume(std::size_t v, Type target) { return Expr::make(ExprKind::Subsume, {v}, {}, {}, std::move(target)); }
inline Expr anew(Session s) { return Expr::make(ExprKind::ANew, {}, {}, std::move(s)); }
inline Expr asend(std::size_t c, std::size_t v) { return Expr::make(ExprKind::ASend, {c, v}, {}); }
inline Expr arecv(std::size_t c) { return Expr::make(ExprKind::ARecv, {c}, {}); }

}  // namespace expr

// Rewrites every free variable k (relative to `e`'s own context) to f(k).
template <typename F>
Expr rename_free(const Expr& e, F&& f, std::size_t depth = 0) {
  if (e.free_vars().empty() || e.free_vars().back() < depth) return e;
  std::vector<std::size_t> vars = e.vars();
  for (auto& k : vars)
    if (k >= depth) k = f(k - depth) + depth;
  std::vector<Expr> subs;
  subs.reserve(e.subs().size());
  for (std::size_t i = 0; i < e.subs().size(); ++i)
    subs.push_back(rename_free(e.subs()[i], f, depth + binders_of(e.kind(), i)));
  return Expr::make(e.kind(), std::move(vars), std::move(subs), e.session(), e.type(), e.label(), e.loc());
}

// Weakening: the expression moves under `n` fresh binders.
inline Expr shift(const Expr& e, std::size_t n) {
  if (n == 0) return e;
  return rename_free(e, [n](std::size_t k) { return k + n; });
}

}  // namespace gvm
