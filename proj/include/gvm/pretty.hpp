#pragma once

// Printing in the s-expression surface syntax. The output parses back to a
// structurally equal tree; generated binder names are x<depth> and X<depth>.

#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gvm/syntax.hpp"

namespace gvm {

void print(std::ostream& os, const Type& t);

inline void print(std::ostream& os, const Session& s, std::size_t depth = 0) {
  switch (s.kind()) {
    case Session::Kind::End:
      os << (s.dir() == Dir::Snd ? "end!" : "end?");
      return;
    case Session::Kind::Xmit:
      os << (s.dir() == Dir::Snd ? "(send " : "(recv ");
      print(os, s.payload());
      os << ' ';
      print(os, s.cont(), depth);
      os << ')';
      return;
    case Session::Kind::Choice:
      os << (s.dir() == Dir::Snd ? "(sel" : "(brn");
      for (const auto& a : s.alts()) {
        os << ' ';
        print(os, a, depth);
      }
      os << ')';
      return;
    case Session::Kind::Mu:
      os << "(mu X" << depth << ' ';
      print(os, s.body(), depth + 1);
      os << ')';
      return;
    case Session::Kind::Var:
      if (s.index() < depth)
        os << 'X' << (depth - 1 - s.index());
      else
        os << "?X" << s.index();
      return;
  }
}

inline void print(std::ostream& os, const Type& t) {
  switch (t.kind()) {
    case Type::Kind::Unit:
      os << "unit";
      return;
    case Type::Kind::Pair:
      os << "(pair ";
      print(os, t.first());
      os << ' ';
      print(os, t.second());
      os << ')';
      return;
    case Type::Kind::Chan:
      os << "(chan ";
      print(os, t.session(), 0);
      os << ')';
      return;
    case Type::Kind::Fun:
      os << "(fun " << (t.linearity() == Linearity::LL ? "lin " : "unr ");
      print(os, t.arg());
      os << ' ';
      print(os, t.result());
      os << ')';
      return;
  }
}

inline std::string to_string(const Session& s) {
  std::ostringstream os;
  print(os, s);
  return os.str();
}

inline std::string to_string(const Type& t) {
  std::ostringstream os;
  print(os, t);
  return os.str();
}

namespace detail {

class ExprPrinter {
 public:
  explicit ExprPrinter(std::ostream& os, std::vector<std::string> names = {}) : os_(os), names_(std::move(names)) {}

  void print(const Expr& e) {
    switch (e.kind()) {
      case ExprKind::Var:
        os_ << name(e.var());
        return;
      case ExprKind::Unit:
        os_ << "unit";
        return;
      case ExprKind::Pair:
        os_ << "(pair " << name(e.var(0)) << ' ' << name(e.var(1)) << ')';
        return;
      case ExprKind::Let: {
        const std::string x = fresh();
        os_ << "(let " << x << ' ';
        print(e.sub(0));
        os_ << ' ';
        scoped({x}, e.sub(1));
        os_ << ')';
        return;
      }
      case ExprKind::LetPair: {
        const std::string p = name(e.var());
        const std::string a = fresh();
        names_.push_back(a);
        const std::string b = fresh();
        names_.pop_back();
        os_ << "(letpair " << a << ' ' << b << ' ' << p << ' ';
        scoped({a, b}, e.sub());
        os_ << ')';
        return;
      }
      case ExprKind::Fork:
        os_ << "(fork ";
        print(e.sub());
        os_ << ')';
        return;
      case ExprKind::New:
        os_ << "(new ";
        gvm::print(os_, e.session());
        os_ << ')';
        return;
      case ExprKind::ANew:
        os_ << "(anew ";
        gvm::print(os_, e.session());
        os_ << ')';
        return;
      case ExprKind::Close:
        os_ << "(close " << name(e.var()) << ')';
        return;
      case ExprKind::Wait:
        os_ << "(wait " << name(e.var()) << ')';
        return;
      case ExprKind::Send:
        os_ << "(send " << name(e.var(0)) << ' ' << name(e.var(1)) << ')';
        return;
      case ExprKind::ASend:
        os_ << "(asend " << name(e.var(0)) << ' ' << name(e.var(1)) << ')';
        return;
      case ExprKind::Recv:
        os_ << "(recv " << name(e.var()) << ')';
        return;
      case ExprKind::ARecv:
        os_ << "(arecv " << name(e.var()) << ')';
        return;
      case ExprKind::Select:
        os_ << "(select " << e.label() << ' ' << name(e.var()) << ')';
        return;
      case ExprKind::Branch: {
        // Every case rebinds the channel's own name to its continuation.
        const std::string c = name(e.var());
        os_ << "(branch " << c << " (";
        bool first = true;
        for (const auto& body : e.subs()) {
          if (!first) os_ << ' ';
          first = false;
          scoped({c}, body);
        }
        os_ << "))";
        return;
      }
      case ExprKind::Lambda: {
        const std::string x = fresh();
        os_ << "(lambda " << x << ' ';
        gvm::print(os_, e.type());
        os_ << ' ';
        scoped({x}, e.sub());
        os_ << ')';
        return;
      }
      case ExprKind::Rec: {
        const std::string f = fresh();
        names_.push_back(f);
        const std::string x = fresh();
        names_.pop_back();
        os_ << "(rec " << f << ' ' << x << ' ';
        gvm::print(os_, e.type());
        os_ << ' ';
        scoped({f, x}, e.sub());
        os_ << ')';
        return;
      }
      case ExprKind::App:
        os_ << "(app " << name(e.var(0)) << ' ' << name(e.var(1)) << ')';
        return;
      case ExprKind::Subsume:
        os_ << "(subsume " << name(e.var()) << ' ';
        gvm::print(os_, e.type());
        os_ << ')';
        return;
    }
  }

 private:
  std::string name(std::size_t k) const {
    if (k < names_.size()) return names_[names_.size() - 1 - k];
    return "?x" + std::to_string(k);
  }

  std::string fresh() const { return "x" + std::to_string(names_.size()); }

  void scoped(std::initializer_list<std::string> bound, const Expr& body) {
    for (const auto& n : bound) names_.push_back(n);
    print(body);
    names_.resize(names_.size() - bound.size());
  }

  std::ostream& os_;
  std::vector<std::string> names_;
};

}  // namespace detail

inline void print(std::ostream& os, const Expr& e) { detail::ExprPrinter(os).print(e); }

inline std::string to_string(const Expr& e) {
  std::ostringstream os;
  print(os, e);
  return os.str();
}

}  // namespace gvm
