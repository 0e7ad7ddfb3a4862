#include <gtest/gtest.h>

#include "gvm/machine.hpp"
#include "gvm/parser.hpp"
#include "gvm/scheduler.hpp"
#include "gvm/typecheck.hpp"
#include "support.hpp"

namespace gvm {
namespace {

const Session end_snd = sess::end(Dir::Snd);

Val chan(ChannelId id, Polarity p) { return Val::chan({id, p}); }

Expr core(const std::string& text) { return check_runnable(parse_program(text)).core; }

State after(const std::string& text, std::size_t steps) {
  State st = start(core(text));
  for (std::size_t i = 0; i < steps; ++i) step(st);
  return st;
}

TEST(Decompose, ValuesAreReady) {
  VEnv env = {Val::unit(), chan(0, Polarity::Pos)};
  EXPECT_EQ(decompose(expr::var(0), env, Cont::halt()), Command(ReadyC{chan(0, Polarity::Pos), Cont::halt()}));
  EXPECT_EQ(decompose(expr::pair(1, 0), env, Cont::halt()),
            Command(ReadyC{Val::pair(Val::unit(), chan(0, Polarity::Pos)), Cont::halt()}));
}

TEST(Decompose, EffectsSuspend) {
  VEnv env = {chan(3, Polarity::Neg)};
  EXPECT_EQ(decompose(expr::close(0), env, Cont::halt()), Command(CloseC{{3, Polarity::Neg}, Cont::halt()}));
  EXPECT_EQ(decompose(expr::wait(0), env, Cont::halt()), Command(WaitC{{3, Polarity::Neg}, Cont::halt()}));
  EXPECT_EQ(decompose(expr::recv(0), env, Cont::halt()), Command(RecvC{{3, Polarity::Neg}, Cont::halt()}));
  EXPECT_EQ(decompose(expr::select(1, 0), env, Cont::halt()), Command(SelectC{1, {3, Polarity::Neg}, Cont::halt()}));
  EXPECT_EQ(decompose(expr::new_channel(end_snd), {}, Cont::halt()), Command(NewC{end_snd, Cont::halt()}));
}

TEST(Decompose, LetPushesAFrameWithTheUsedEnvironment) {
  VEnv env = {chan(0, Polarity::Pos), Val::unit()};
  // (let z unit (close <the channel>)): the frame keeps only the channel
  Command c = decompose(expr::let(expr::unit(), expr::close(2)), env, Cont::halt());
  Cont k = Cont::bind(expr::close(1), {chan(0, Polarity::Pos)}, Cont::halt());
  EXPECT_EQ(c, Command(ReadyC{Val::unit(), k}));
}

TEST(Decompose, LetPairIsAdministrative) {
  VEnv env = {Val::pair(chan(0, Polarity::Pos), chan(0, Polarity::Neg))};
  Command c = decompose(expr::letpair(0, expr::close(1)), env, Cont::halt());
  EXPECT_EQ(c, Command(CloseC{{0, Polarity::Pos}, Cont::halt()}));
}

TEST(Decompose, ForkSplitsTheChildOff) {
  VEnv env = {chan(0, Polarity::Pos), chan(0, Polarity::Neg)};
  Command c = decompose(expr::fork(expr::close(1)), env, Cont::halt());
  const auto* f = std::get_if<ForkC>(&c);
  ASSERT_TRUE(f);
  EXPECT_EQ(channel_ends(f->child), (std::vector<ChannelEnd>{{0, Polarity::Pos}}));
  EXPECT_TRUE(f->parent.is_halt());
  // the child ignores the unit it is restarted with
  Command child = apply_cont(f->child, Val::unit());
  EXPECT_EQ(child, Command(CloseC{{0, Polarity::Pos}, Cont::halt()}));
}

TEST(Decompose, BranchSharesOneEnvironment) {
  VEnv env = {chan(1, Polarity::Pos), chan(0, Polarity::Neg)};
  Command c = decompose(expr::branch(0, {expr::let(expr::wait(0), expr::close(3)), expr::wait(0)}), env, Cont::halt());
  const auto* b = std::get_if<BranchC>(&c);
  ASSERT_TRUE(b);
  EXPECT_EQ(b->env, (VEnv{chan(1, Polarity::Pos)}));
  EXPECT_EQ(channel_ends(c), (std::vector<ChannelEnd>{{0, Polarity::Neg}, {1, Polarity::Pos}}));
}

TEST(Decompose, ApplicationEntersTheClosure) {
  VEnv env;
  Val f = Val::closure(Linearity::LL, false, expr::close(0), {});
  env = {f, chan(2, Polarity::Pos)};
  Command c = decompose(expr::app(1, 0), env, Cont::halt());
  EXPECT_EQ(c, Command(ReadyC{chan(2, Polarity::Pos), Cont::bind(expr::close(0), {}, Cont::halt())}));
}

TEST(Decompose, RecursiveClosureSeesItself) {
  Val f = Val::closure(Linearity::UU, true, expr::app(1, 0), {});
  Command c = decompose(expr::app(1, 0), {f, Val::unit()}, Cont::halt());
  EXPECT_EQ(c, Command(ReadyC{Val::unit(), Cont::bind(expr::app(1, 0), {f}, Cont::halt())}));
}

TEST(Decompose, ReferencePastEnvironmentFaults) {
  EXPECT_THROW(decompose(expr::close(0), {}, Cont::halt()), MachineFault);
  EXPECT_THROW(decompose(expr::close(0), {Val::unit()}, Cont::halt()), MachineFault);
}

TEST(ApplyCont, HaltsOnValuesWithoutEnds) {
  EXPECT_EQ(apply_cont(Cont::halt(), Val::unit()), Command(HaltC{Val::unit()}));
  EXPECT_THROW(apply_cont(Cont::halt(), chan(0, Polarity::Pos)), MachineFault);
}

TEST(ApplyCont, ResumesTheFrame) {
  Cont k = Cont::bind(expr::wait(1), {chan(4, Polarity::Neg)}, Cont::halt());
  EXPECT_EQ(apply_cont(k, Val::unit()), Command(WaitC{{4, Polarity::Neg}, Cont::halt()}));
}

TEST(Capture, KeepsOnlyUsedBindingsInOrder) {
  VEnv env = {chan(0, Polarity::Pos), Val::unit(), chan(1, Polarity::Neg)};
  Expr body = expr::pair(0, 3);  // the local binder and env[0]
  Capture c = capture(std::span(&body, 1), 1, env);
  EXPECT_EQ(c.env, (VEnv{chan(0, Polarity::Pos)}));
  EXPECT_EQ(c.bodies.front(), expr::pair(0, 1));
}

TEST(Ends, ConservedAlongRuns) {
  // every end created is held exactly once until its channel closes
  for (const auto& name : testing::race_free_programs()) {
    State st = start(testing::load_core(name));
    for (int i = 0; i < 400; ++i) {
      StepResult r = step(st);
      if (is_final(r.event.kind)) break;
      std::vector<ChannelEnd> held;
      for (const auto& c : st.pool) collect_ends(c, held);
      std::sort(held.begin(), held.end());
      std::vector<ChannelEnd> live;
      for (const auto& [id, ch] : st.table.entries)
        if (ch.avail != Avail::Gone)
          for (Polarity p : {Polarity::Pos, Polarity::Neg}) live.push_back({id, p});
      ASSERT_EQ(held, live) << name << " step " << i;
    }
  }
}

TEST(Printing, CommandsAndValues) {
  EXPECT_EQ(describe(Val::pair(Val::unit(), chan(2, Polarity::Neg))), "(pair unit (chan 2-))");
  EXPECT_EQ(shape(Val::closure(Linearity::UU, true, expr::var(0), {})), "(fun unr)");
  EXPECT_EQ(to_string(ChannelEnd{7, Polarity::Pos}), "7+");
}

// let f = (lambda x. e) in let z = f y in E   versus   let z = e[y/x] in E
TEST(Adequacy, Beta) {
  const std::string lhs =
      "(let c (new end!) (letpair y w c"
      " (let f (lambda x (chan end!) (close x))"
      "  (let z (app f y) (wait w)))))";
  const std::string rhs =
      "(let c (new end!) (letpair y w c"
      " (let z (close y) (wait w))))";
  EXPECT_EQ(after(lhs, 4), after(rhs, 2));
  EXPECT_NE(after(lhs, 3), after(rhs, 2));
}

// let p = (a, b) in let (x, y) = p in E   versus   E[a, b / x, y]
TEST(Adequacy, Pair) {
  const std::string lhs =
      "(let c (new end!) (letpair a b c"
      " (let p (pair a b) (letpair x y p"
      "  (let u (fork (close x)) (wait y))))))";
  const std::string rhs =
      "(let c (new end!) (letpair a b c"
      " (let u (fork (close a)) (wait b))))";
  EXPECT_EQ(after(lhs, 3), after(rhs, 2));
  EXPECT_NE(after(lhs, 2), after(rhs, 2));
}

TEST(Adequacy, UnitBeta) {
  const std::string lhs = "(let f (lambda x unit x) (let v unit (let z (app f v) z)))";
  const std::string rhs = "(let v unit (let z v z))";
  // both end in the same halting state
  State a = after(lhs, 5);
  State b = after(rhs, 3);
  EXPECT_EQ(a, b);
  EXPECT_TRUE(std::holds_alternative<HaltC>(a.pool.front()));
}

}  // namespace
}  // namespace gvm
