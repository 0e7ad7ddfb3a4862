#pragma once

// Reader for the s-expression surface syntax, with name resolution to
// de Bruijn indices. See README.md for the grammar.

#include <cctype>
#include <charconv>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gvm/syntax.hpp"

namespace gvm {

class ParseError : public std::runtime_error {
 public:
  enum class Kind { Syntax, UnboundName, NonANF, NonContractive };

  ParseError(Kind kind, SourceLoc loc, const std::string& message)
      : std::runtime_error(std::to_string(loc.line) + ":" + std::to_string(loc.column) + ": " + message),
        kind_(kind),
        loc_(loc) {}

  Kind kind() const noexcept { return kind_; }
  SourceLoc loc() const noexcept { return loc_; }

 private:
  Kind kind_;
  SourceLoc loc_;
};

inline const char* to_string(ParseError::Kind k) {
  switch (k) {
    case ParseError::Kind::Syntax:
      return "ParseError";
    case ParseError::Kind::UnboundName:
      return "UnboundName";
    case ParseError::Kind::NonANF:
      return "NonANF";
    case ParseError::Kind::NonContractive:
      return "NonContractive";
  }
  return "ParseError";
}

namespace detail {

struct SExpr {
  bool is_atom = false;
  std::string atom;
  std::vector<SExpr> items;
  SourceLoc loc;
};

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  std::vector<SExpr> read_all() {
    std::vector<SExpr> out;
    skip();
    while (pos_ < text_.size()) {
      out.push_back(read());
      skip();
    }
    return out;
  }

 private:
  SExpr read() {
    skip();
    SourceLoc here{line_, col_};
    if (pos_ >= text_.size()) throw ParseError(ParseError::Kind::Syntax, here, "unexpected end of input");
    char c = text_[pos_];
    if (c == ')') throw ParseError(ParseError::Kind::Syntax, here, "unexpected ')'");
    if (c == '(') {
      advance();
      SExpr list;
      list.loc = here;
      for (;;) {
        skip();
        if (pos_ >= text_.size()) throw ParseError(ParseError::Kind::Syntax, here, "unclosed '('");
        if (text_[pos_] == ')') {
          advance();
          return list;
        }
        list.items.push_back(read());
      }
    }
    SExpr atom;
    atom.is_atom = true;
    atom.loc = here;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) && text_[pos_] != '(' &&
           text_[pos_] != ')' && text_[pos_] != ';') {
      atom.atom.push_back(text_[pos_]);
      advance();
    }
    return atom;
  }

  void skip() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == ';') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

inline bool is_ident(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'' || c == '-')) return false;
  return s != "unit";
}

class Resolver {
 public:
  explicit Resolver(std::vector<std::string> scope = {}, std::optional<SourceLoc> loc_override = std::nullopt)
      : scope_(std::move(scope)), loc_override_(loc_override) {}

  Type type(const SExpr& x) {
    if (x.is_atom) {
      if (x.atom == "unit") return ty::unit();
      fail(ParseError::Kind::Syntax, x, "expected a type, found '" + x.atom + "'");
    }
    const std::string& head = keyword(x, "type");
    if (head == "pair") {
      arity(x, 3);
      return ty::pair(type(x.items[1]), type(x.items[2]));
    }
    if (head == "chan") {
      arity(x, 2);
      // Recursion variables of an enclosing session never reach a payload.
      std::vector<std::string> saved;
      saved.swap(rec_scope_);
      Session s = session(x.items[1]);
      saved.swap(rec_scope_);
      return ty::chan(std::move(s));
    }
    if (head == "fun") {
      arity(x, 4);
      const SExpr& lin = x.items[1];
      if (!lin.is_atom || (lin.atom != "lin" && lin.atom != "unr"))
        fail(ParseError::Kind::Syntax, lin, "expected 'lin' or 'unr'");
      return ty::fun(lin.atom == "lin" ? Linearity::LL : Linearity::UU, type(x.items[2]), type(x.items[3]));
    }
    fail(ParseError::Kind::Syntax, x, "unknown type former '" + head + "'");
  }

  Session session(const SExpr& x) {
    if (x.is_atom) {
      if (x.atom == "end!") return sess::end(Dir::Snd);
      if (x.atom == "end?") return sess::end(Dir::Rcv);
      if (!is_ident(x.atom)) fail(ParseError::Kind::Syntax, x, "expected a session type, found '" + x.atom + "'");
      for (std::size_t i = rec_scope_.size(); i-- > 0;)
        if (rec_scope_[i] == x.atom) return sess::var(rec_scope_.size() - 1 - i);
      fail(ParseError::Kind::UnboundName, x, "unbound recursion variable '" + x.atom + "'");
    }
    const std::string& head = keyword(x, "session type");
    if (head == "send" || head == "recv") {
      arity(x, 3);
      Type payload = type(x.items[1]);
      return sess::xmit(head == "send" ? Dir::Snd : Dir::Rcv, std::move(payload), session(x.items[2]));
    }
    if (head == "sel" || head == "brn") {
      if (x.items.size() < 2) fail(ParseError::Kind::Syntax, x, "choice needs at least one alternative");
      std::vector<Session> alts;
      for (std::size_t i = 1; i < x.items.size(); ++i) alts.push_back(session(x.items[i]));
      return sess::choice(head == "sel" ? Dir::Snd : Dir::Rcv, std::move(alts));
    }
    if (head == "mu") {
      arity(x, 3);
      rec_scope_.push_back(ident(x.items[1]));
      Session body = session(x.items[2]);
      rec_scope_.pop_back();
      Session m = sess::mu(std::move(body));
      if (rec_scope_.empty() && !is_well_formed(m))
        fail(ParseError::Kind::NonContractive, x, "recursive session is not contractive");
      return m;
    }
    fail(ParseError::Kind::Syntax, x, "unknown session former '" + head + "'");
  }

  Expr expr(const SExpr& x) {
    if (x.is_atom) {
      if (x.atom == "unit") return expr::unit().with_loc(loc(x));
      return expr::var(lookup(x)).with_loc(loc(x));
    }
    const std::string& head = keyword(x, "expression");
    const SourceLoc at = loc(x);
    if (head == "pair") {
      arity(x, 3);
      return expr::pair(lookup(x.items[1]), lookup(x.items[2])).with_loc(at);
    }
    if (head == "let") {
      arity(x, 4);
      std::string name = ident(x.items[1]);
      Expr bound = expr(x.items[2]);
      Expr body = scoped({name}, x.items[3]);
      return expr::let(std::move(bound), std::move(body)).with_loc(at);
    }
    if (head == "letpair") {
      arity(x, 5);
      std::string a = ident(x.items[1]);
      std::string b = ident(x.items[2]);
      std::size_t p = lookup(x.items[3]);
      return expr::letpair(p, scoped({a, b}, x.items[4])).with_loc(at);
    }
    if (head == "fork") {
      arity(x, 2);
      return expr::fork(expr(x.items[1])).with_loc(at);
    }
    if (head == "new" || head == "anew") {
      arity(x, 2);
      Session s = session(x.items[1]);
      return (head == "new" ? expr::new_channel(std::move(s)) : expr::anew(std::move(s))).with_loc(at);
    }
    if (head == "close" || head == "wait" || head == "recv" || head == "arecv") {
      arity(x, 2);
      std::size_t c = lookup(x.items[1]);
      if (head == "close") return expr::close(c).with_loc(at);
      if (head == "wait") return expr::wait(c).with_loc(at);
      if (head == "recv") return expr::recv(c).with_loc(at);
      return expr::arecv(c).with_loc(at);
    }
    if (head == "send" || head == "asend" || head == "app") {
      arity(x, 3);
      std::size_t a = lookup(x.items[1]);
      std::size_t b = lookup(x.items[2]);
      if (head == "send") return expr::send(a, b).with_loc(at);
      if (head == "asend") return expr::asend(a, b).with_loc(at);
      return expr::app(a, b).with_loc(at);
    }
    if (head == "select") {
      arity(x, 3);
      const SExpr& n = x.items[1];
      std::size_t label = 0;
      if (!n.is_atom || n.atom.empty() ||
          std::from_chars(n.atom.data(), n.atom.data() + n.atom.size(), label).ptr != n.atom.data() + n.atom.size())
        fail(ParseError::Kind::Syntax, n, "expected a label number");
      return expr::select(label, lookup(x.items[2])).with_loc(at);
    }
    if (head == "branch") {
      arity(x, 3);
      std::string c = ident(x.items[1]);
      std::size_t k = lookup(x.items[1]);
      const SExpr& cases = x.items[2];
      if (cases.is_atom || cases.items.empty()) fail(ParseError::Kind::Syntax, cases, "expected a list of cases");
      std::vector<Expr> bodies;
      for (const auto& body : cases.items) bodies.push_back(scoped({c}, body));
      return expr::branch(k, std::move(bodies)).with_loc(at);
    }
    if (head == "lambda") {
      arity(x, 4);
      std::string name = ident(x.items[1]);
      Type param = type(x.items[2]);
      return expr::lambda(std::move(param), scoped({name}, x.items[3])).with_loc(at);
    }
    if (head == "rec") {
      arity(x, 5);
      std::string f = ident(x.items[1]);
      std::string a = ident(x.items[2]);
      Type fun = type(x.items[3]);
      return expr::rec(std::move(fun), scoped({f, a}, x.items[4])).with_loc(at);
    }
    if (head == "subsume") {
      arity(x, 3);
      std::size_t v = lookup(x.items[1]);
      return expr::subsume(v, type(x.items[2])).with_loc(at);
    }
    fail(ParseError::Kind::Syntax, x, "unknown expression former '" + head + "'");
  }

 private:
  [[noreturn]] void fail(ParseError::Kind kind, const SExpr& x, const std::string& msg) const {
    throw ParseError(kind, x.loc, msg);
  }

  SourceLoc loc(const SExpr& x) const { return loc_override_ ? *loc_override_ : x.loc; }

  const std::string& keyword(const SExpr& x, const char* what) const {
    if (x.items.empty() || !x.items[0].is_atom)
      fail(ParseError::Kind::Syntax, x, std::string("malformed ") + what);
    return x.items[0].atom;
  }

  void arity(const SExpr& x, std::size_t n) const {
    if (x.items.size() != n)
      fail(ParseError::Kind::Syntax, x,
           "'" + x.items[0].atom + "' expects " + std::to_string(n - 1) + " operand(s), got " +
               std::to_string(x.items.size() - 1));
  }

  std::string ident(const SExpr& x) const {
    if (!x.is_atom) fail(ParseError::Kind::Syntax, x, "expected an identifier");
    if (!is_ident(x.atom)) fail(ParseError::Kind::Syntax, x, "'" + x.atom + "' is not an identifier");
    return x.atom;
  }

  // Operand positions accept variables only.
  std::size_t lookup(const SExpr& x) const {
    if (!x.is_atom) fail(ParseError::Kind::NonANF, x, "operand must be a variable; bind the subterm with let");
    if (x.atom == "unit") fail(ParseError::Kind::NonANF, x, "operand must be a variable; bind 'unit' with let");
    if (!is_ident(x.atom)) fail(ParseError::Kind::Syntax, x, "'" + x.atom + "' is not an identifier");
    for (std::size_t i = scope_.size(); i-- > 0;)
      if (scope_[i] == x.atom) return scope_.size() - 1 - i;
    fail(ParseError::Kind::UnboundName, x, "unbound variable '" + x.atom + "'");
  }

  Expr scoped(std::initializer_list<std::string> names, const SExpr& body) {
    for (const auto& n : names) scope_.push_back(n);
    Expr e = expr(body);
    scope_.resize(scope_.size() - names.size());
    return e;
  }

  std::vector<std::string> scope_;
  std::vector<std::string> rec_scope_;
  std::optional<SourceLoc> loc_override_;
};

inline const SExpr& single(const std::vector<SExpr>& forms, std::string_view what) {
  if (forms.size() != 1) {
    SourceLoc at = forms.empty() ? SourceLoc{1, 1} : forms[1].loc;
    throw ParseError(ParseError::Kind::Syntax, at, "expected exactly one " + std::string(what));
  }
  return forms.front();
}

}  // namespace detail

// Parses a closed program.
inline Expr parse_program(std::string_view text) {
  auto forms = detail::Reader(text).read_all();
  return detail::Resolver().expr(detail::single(forms, "expression"));
}

// Parses an expression whose free names are bound by `scope` (outermost
// first; the last name has index 0). Every node gets `loc` if provided.
inline Expr parse_expr_in_scope(std::string_view text, std::vector<std::string> scope,
                                std::optional<SourceLoc> loc = std::nullopt) {
  auto forms = detail::Reader(text).read_all();
  return detail::Resolver(std::move(scope), loc).expr(detail::single(forms, "expression"));
}

inline Session parse_session(std::string_view text) {
  auto forms = detail::Reader(text).read_all();
  return detail::Resolver().session(detail::single(forms, "session type"));
}

inline Type parse_type(std::string_view text) {
  auto forms = detail::Reader(text).read_all();
  return detail::Resolver().type(detail::single(forms, "type"));
}

}  // namespace gvm
