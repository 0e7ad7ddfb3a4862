#include <gtest/gtest.h>

#include "gvm/asynclib.hpp"
#include "gvm/run.hpp"
#include "support.hpp"

namespace gvm {
namespace {

const Session end_snd = sess::end(Dir::Snd);
const Session end_rcv = sess::end(Dir::Rcv);

Type promise(const Session& s) { return ty::chan(async_session(s)); }

TEST(AsyncSession, Shape) {
  EXPECT_EQ(async_session(end_snd), sess::recv(ty::chan(end_snd), end_rcv));
}

TEST(Builders, ANewIsClosedAndTyped) {
  testing::Gen gen(31);
  for (int i = 0; i < 50; ++i) {
    Session s = gen.session(4, 3);
    Expr e = build_anew(s);
    EXPECT_TRUE(e.free_vars().empty());
    EXPECT_EQ(check_in_context({}, e).type, ty::pair(promise(s), promise(dual(s)))) << to_string(s);
  }
}

TEST(Builders, ASendYieldsTheNextPromise) {
  Session s = sess::send(ty::unit(), sess::recv(ty::unit(), end_rcv));
  Expr e = build_asend(1, 0, s);
  EXPECT_EQ(e.free_vars(), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(check_in_context({promise(s), ty::unit()}, e).type, promise(sess::recv(ty::unit(), end_rcv)));
  // operands may come in either order
  EXPECT_EQ(check_in_context({ty::unit(), promise(s)}, build_asend(0, 1, s)).type,
            promise(sess::recv(ty::unit(), end_rcv)));
}

TEST(Builders, ARecvYieldsValueAndNextPromise) {
  Type payload = ty::chan(end_snd);
  Session s = sess::recv(payload, end_rcv);
  Expr e = build_arecv(0, s);
  EXPECT_EQ(check_in_context({promise(s)}, e).type, ty::pair(payload, promise(end_rcv)));
}

TEST(Builders, RecursiveProtocols) {
  Session s = sess::mu(sess::send(ty::unit(), sess::var(0)));
  EXPECT_EQ(check_in_context({promise(s), ty::unit()}, build_asend(1, 0, s)).type, promise(s));
}

TEST(Surface, SugarIsExpandedByTheChecker) {
  CheckResult r = check_program(parse_program(testing::read_program("async_basic.gv")));
  EXPECT_EQ(r.type, ty::unit());
  std::function<bool(const Expr&)> has_sugar = [&](const Expr& e) {
    if (e.kind() == ExprKind::ANew || e.kind() == ExprKind::ASend || e.kind() == ExprKind::ARecv) return true;
    for (const auto& s : e.subs())
      if (has_sugar(s)) return true;
    return false;
  };
  EXPECT_TRUE(has_sugar(parse_program(testing::read_program("async_basic.gv"))));
  EXPECT_FALSE(has_sugar(r.core));
}

TEST(Surface, Misuse) {
  auto kind_of = [](const std::string& text, const TypingContext& ctx, std::vector<std::string> names) {
    try {
      check_in_context(ctx, parse_expr_in_scope(text, std::move(names)));
    } catch (const TypeError& e) {
      return std::optional<TypeErrorKind>(e.kind());
    }
    return std::optional<TypeErrorKind>();
  };
  // a plain channel is not a promise
  EXPECT_EQ(kind_of("(asend c v)", {ty::chan(sess::send(ty::unit(), end_snd)), ty::unit()}, {"c", "v"}),
            TypeErrorKind::TypeMismatch);
  // receiving on a sending protocol
  EXPECT_EQ(kind_of("(arecv c)", {promise(sess::send(ty::unit(), end_snd))}, {"c"}), TypeErrorKind::TypeMismatch);
  EXPECT_EQ(kind_of("(asend c v)", {promise(sess::send(ty::unit(), end_snd)), ty::chan(end_snd)}, {"c", "v"}),
            TypeErrorKind::NotASubtype);
}

TEST(Runs, OnePromisePerOperation) {
  // anew opens three channels, every asend and arecv one more
  RunResult res = run(testing::load_core("async_chain.gv"), Gas::plain(1000), {true, {}});
  ASSERT_EQ(res.outcome, Outcome::Terminated);
  std::size_t fresh = 0;
  for (const auto& ts : res.trace) fresh += ts.event.kind == EventKind::NewChannel;
  EXPECT_EQ(fresh, 3u + 2u + 2u);
}

TEST(Runs, PayloadArrivesIntact) {
  RunResult res = run(testing::load_core("async_basic.gv"), Gas::plain(1000), {true, {}});
  ASSERT_EQ(res.outcome, Outcome::Terminated);
  std::size_t units = 0;
  for (const auto& ts : res.trace)
    if (ts.event.kind == EventKind::Transmitted && ts.event.payload_type == "unit") {
      EXPECT_EQ(ts.event.payload, "unit");
      ++units;
    }
  EXPECT_EQ(units, 1u);
}

TEST(Runs, AsyncProgramsAreAuditClean) {
  for (const char* name : {"async_basic.gv", "async_chain.gv", "async_recursive.gv"}) {
    RunResult res = run(testing::load_core(name), Gas::plain(2000), {true, {}});
    EXPECT_EQ(res.outcome, Outcome::Terminated) << name;
    EXPECT_FALSE(res.audit_failure) << name;
  }
}

}  // namespace
}  // namespace gvm
