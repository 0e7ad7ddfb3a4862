#pragma once

// Cooperative scheduler: channel table, thread pool, one-step zipper with
// rendezvous matching, and the gas-driven loop.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gvm/machine.hpp"
#include "gvm/pretty.hpp"
#include "gvm/syntax.hpp"

namespace gvm {

enum class Avail { Both, PosOnly, NegOnly, Gone };

inline const char* to_string(Avail a) {
  switch (a) {
    case Avail::Both: return "Both";
    case Avail::PosOnly: return "PosOnly";
    case Avail::NegOnly: return "NegOnly";
    case Avail::Gone: return "Gone";
  }
  return "?";
}

inline bool advertises(Avail a, Polarity p) {
  return a == Avail::Both || (a == Avail::PosOnly && p == Polarity::Pos) || (a == Avail::NegOnly && p == Polarity::Neg);
}

// `sess` is the protocol of the positive end.
struct ChannelState {
  ChannelId id = 0;
  Session sess;
  Avail avail = Avail::Both;

  friend bool operator==(const ChannelState& a, const ChannelState& b) {
    return a.id == b.id && a.sess == b.sess && a.avail == b.avail;
  }
};

struct ChannelTable {
  std::map<ChannelId, ChannelState> entries;
  ChannelId next_id = 0;

  const ChannelState* find(ChannelId id) const {
    auto it = entries.find(id);
    return it == entries.end() ? nullptr : &it->second;
  }

  friend bool operator==(const ChannelTable&, const ChannelTable&) = default;
};

// Protocol seen from one end of a channel.
inline Session end_session(const ChannelTable& table, ChannelEnd end) {
  const ChannelState* st = table.find(end.id);
  if (!st) throw MachineFault("channel " + std::to_string(end.id) + " does not exist");
  return end.pol == Polarity::Pos ? st->sess : dual(st->sess);
}

using ThreadPool = std::vector<Command>;
using ThreadId = std::size_t;

struct State {
  ChannelTable table;
  ThreadPool pool;
  // Stable identity of each pooled thread, parallel to `pool`. Not part of
  // state equality.
  std::vector<ThreadId> tids;
  ThreadId next_tid = 0;

  friend bool operator==(const State& a, const State& b) { return a.table == b.table && a.pool == b.pool; }
};

// ---------------------------------------------------------------------------
// Events and reductions

enum class EventKind { Terminated, Stuck, OutOfGas, Restarted, Halted, Forked, NewChannel, Closed, Transmitted, Selected };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::Terminated: return "Terminated";
    case EventKind::Stuck: return "Stuck";
    case EventKind::OutOfGas: return "OutOfGas";
    case EventKind::Restarted: return "Restarted";
    case EventKind::Halted: return "Halted";
    case EventKind::Forked: return "Forked";
    case EventKind::NewChannel: return "NewChannel";
    case EventKind::Closed: return "Closed";
    case EventKind::Transmitted: return "Transmitted";
    case EventKind::Selected: return "Selected";
  }
  return "?";
}

struct Event {
  EventKind kind = EventKind::Terminated;
  std::optional<std::size_t> thread;  // pool position of the acting thread
  std::optional<ThreadId> tid;        // its stable identity
  std::optional<ThreadId> partner;    // the waiting / receiving / branching thread
  std::optional<ChannelId> channel;
  std::optional<std::size_t> label;
  std::string payload;  // shape of a transmitted value
  std::string payload_type;

  friend bool operator==(const Event&, const Event&) = default;
};

inline Event make_event(EventKind k) {
  Event e;
  e.kind = k;
  return e;
}

struct Reduction {
  enum class Kind { Ident, New, Internal };
  enum class Internal { End, Transmit };

  Kind kind = Kind::Ident;
  ChannelId id = 0;
  Session sess;  // RedNew only
  Internal internal = Internal::End;

  static Reduction ident() { return {}; }
  static Reduction make_new(ChannelId id, Session s) { return {Kind::New, id, std::move(s), Internal::End}; }
  static Reduction end(ChannelId id) { return {Kind::Internal, id, {}, Internal::End}; }
  static Reduction transmit(ChannelId id) { return {Kind::Internal, id, {}, Internal::Transmit}; }

  friend bool operator==(const Reduction& a, const Reduction& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
      case Kind::Ident: return true;
      case Kind::New: return a.id == b.id && a.sess == b.sess;
      case Kind::Internal: return a.id == b.id && a.internal == b.internal;
    }
    return false;
  }
};

inline std::string to_string(const Reduction& r) {
  switch (r.kind) {
    case Reduction::Kind::Ident: return "RedIdent";
    case Reduction::Kind::New: return "RedNew(" + std::to_string(r.id) + ", " + to_string(r.sess) + ")";
    case Reduction::Kind::Internal:
      return "RedInternal(" + std::to_string(r.id) + (r.internal == Reduction::Internal::End ? ", RedEnd)" : ", RedTransmit)");
  }
  return "?";
}

// What a communicating step matched, for the audit. Pool positions refer to
// both the state before and after the step: communication replaces threads
// in place.
struct Rendezvous {
  ChannelId id = 0;
  std::size_t active = 0;   // sender / selector / closer
  std::size_t passive = 0;  // receiver / brancher / waiter
  ChannelEnd active_end;
  ChannelEnd passive_end;
  Session active_session;   // unfolded, before the step
  Session passive_session;  // unfolded, before the step
  std::optional<Val> payload;
  std::optional<std::size_t> label;
};

struct StepResult {
  Event event;
  Reduction reduction;
  std::optional<Rendezvous> rendezvous;
};

// ---------------------------------------------------------------------------
// Matching

constexpr bool vcr_match(ChannelEnd a, ChannelEnd b) noexcept { return a.id == b.id && a.pol != b.pol; }

struct SendMatch {
  Type payload;
  Session cont;  // the sender's continuation
};

inline std::optional<SendMatch> vcr_match_sr(const ChannelTable& table, ChannelEnd a, ChannelEnd b) {
  if (!vcr_match(a, b)) return std::nullopt;
  Session s = unfold(end_session(table, a));
  if (s.kind() != Session::Kind::Xmit || s.dir() != Dir::Snd)
    throw MachineFault("send on channel " + std::to_string(a.id) + " whose protocol is " + to_string(s));
  return SendMatch{s.payload(), s.cont()};
}

namespace detail {

inline Session pos_view(ChannelEnd end, const Session& s) { return end.pol == Polarity::Pos ? s : dual(s); }

template <typename C, typename Pred>
std::optional<std::size_t> find_partner(const ThreadPool& pool, std::size_t self, Pred&& pred) {
  for (std::size_t j = 0; j < pool.size(); ++j) {
    if (j == self) continue;
    if (const auto* c = std::get_if<C>(&pool[j]); c && pred(*c)) return j;
  }
  return std::nullopt;
}

}  // namespace detail

// Builds the initial state for a checked program.
inline State start(const Expr& e) {
  State st;
  st.pool.push_back(decompose(e, {}, Cont::halt()));
  st.tids.push_back(st.next_tid++);
  return st;
}

// Performs a single reduction on the pool, scanning it front to back.
inline StepResult step(State& st) {
  auto& pool = st.pool;
  auto& table = st.table;
  if (st.tids.size() != pool.size()) st.tids.resize(pool.size(), 0);
  if (pool.empty()) return {make_event(EventKind::Terminated), Reduction::ident(), std::nullopt};

  for (std::size_t i = 0; i < pool.size(); ++i) {
    Event ev;
    ev.thread = i;
    ev.tid = st.tids[i];

    if (auto* c = std::get_if<ReadyC>(&pool[i])) {
      Command next = apply_cont(c->k, c->value);
      ThreadId tid = st.tids[i];
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(i));
      st.tids.erase(st.tids.begin() + static_cast<std::ptrdiff_t>(i));
      pool.push_back(std::move(next));
      st.tids.push_back(tid);
      ev.kind = EventKind::Restarted;
      return {ev, Reduction::ident(), std::nullopt};
    }
    if (std::holds_alternative<HaltC>(pool[i])) {
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(i));
      st.tids.erase(st.tids.begin() + static_cast<std::ptrdiff_t>(i));
      ev.kind = EventKind::Halted;
      return {ev, Reduction::ident(), std::nullopt};
    }
    if (auto* c = std::get_if<ForkC>(&pool[i])) {
      Command child = ReadyC{Val::unit(), c->child};
      pool[i] = ReadyC{Val::unit(), c->parent};
      pool.insert(pool.begin() + static_cast<std::ptrdiff_t>(i + 1), std::move(child));
      ThreadId child_tid = st.next_tid++;
      st.tids.insert(st.tids.begin() + static_cast<std::ptrdiff_t>(i + 1), child_tid);
      ev.kind = EventKind::Forked;
      ev.partner = child_tid;
      return {ev, Reduction::ident(), std::nullopt};
    }
    if (auto* c = std::get_if<NewC>(&pool[i])) {
      ChannelId id = table.next_id++;
      table.entries.emplace(id, ChannelState{id, c->session, Avail::Both});
      Reduction red = Reduction::make_new(id, c->session);
      pool[i] = ReadyC{Val::pair(Val::chan({id, Polarity::Pos}), Val::chan({id, Polarity::Neg})), c->k};
      ev.kind = EventKind::NewChannel;
      ev.channel = id;
      return {ev, red, std::nullopt};
    }
    if (auto* c = std::get_if<CloseC>(&pool[i])) {
      const ChannelEnd end = c->ch;
      auto j = detail::find_partner<WaitC>(pool, i, [&](const WaitC& w) { return vcr_match(end, w.ch); });
      if (!j) continue;
      auto& entry = table.entries.at(end.id);
      Session s = unfold(detail::pos_view(end, entry.sess));
      if (s.kind() != Session::Kind::End || s.dir() != Dir::Snd)
        throw MachineFault("close on channel " + std::to_string(end.id) + " whose protocol is " + to_string(s));
      Rendezvous rv{end.id, i, *j, end, std::get<WaitC>(pool[*j]).ch, s, unfold(detail::pos_view(std::get<WaitC>(pool[*j]).ch, entry.sess)), std::nullopt, std::nullopt};
      entry.avail = Avail::Gone;
      Cont kw = std::get<WaitC>(pool[*j]).k;
      pool[i] = ReadyC{Val::unit(), c->k};
      pool[*j] = ReadyC{Val::unit(), std::move(kw)};
      ev.kind = EventKind::Closed;
      ev.channel = end.id;
      ev.partner = st.tids[*j];
      return {ev, Reduction::end(end.id), rv};
    }
    if (auto* c = std::get_if<SendC>(&pool[i])) {
      const ChannelEnd end = c->ch;
      auto j = detail::find_partner<RecvC>(pool, i, [&](const RecvC& r) { return vcr_match(end, r.ch); });
      if (!j) continue;
      auto m = vcr_match_sr(table, end, std::get<RecvC>(pool[*j]).ch);
      const RecvC recv = std::get<RecvC>(pool[*j]);
      Session rs = unfold(end_session(table, recv.ch));
      if (rs.kind() != Session::Kind::Xmit || rs.dir() != Dir::Rcv)
        throw MachineFault("receive on channel " + std::to_string(end.id) + " whose protocol is " + to_string(rs));
      Rendezvous rv{end.id, i, *j, end, recv.ch, unfold(end_session(table, end)), rs, c->value, std::nullopt};
      table.entries.at(end.id).sess = detail::pos_view(end, m->cont);
      ev.kind = EventKind::Transmitted;
      ev.channel = end.id;
      ev.partner = st.tids[*j];
      ev.payload = shape(c->value);
      ev.payload_type = to_string(m->payload);
      Val v = c->value;
      pool[i] = ReadyC{Val::chan(end), c->k};
      pool[*j] = ReadyC{Val::pair(Val::chan(recv.ch), std::move(v)), recv.k};
      return {ev, Reduction::transmit(end.id), rv};
    }
    if (auto* c = std::get_if<SelectC>(&pool[i])) {
      const ChannelEnd end = c->ch;
      auto j = detail::find_partner<BranchC>(pool, i, [&](const BranchC& b) { return vcr_match(end, b.ch); });
      if (!j) continue;
      const BranchC br = std::get<BranchC>(pool[*j]);
      Session s = unfold(end_session(table, end));
      Session bs = unfold(end_session(table, br.ch));
      if (s.kind() != Session::Kind::Choice || s.dir() != Dir::Snd || c->label >= s.alts().size())
        throw MachineFault("select " + std::to_string(c->label) + " on channel " + std::to_string(end.id) +
                           " whose protocol is " + to_string(s));
      if (c->label >= br.cases.size()) throw MachineFault("branch has no case for the selected label");
      Rendezvous rv{end.id, i, *j, end, br.ch, s, bs, std::nullopt, c->label};
      table.entries.at(end.id).sess = detail::pos_view(end, s.alts()[c->label]);
      ev.kind = EventKind::Selected;
      ev.channel = end.id;
      ev.label = c->label;
      ev.partner = st.tids[*j];
      VEnv env = br.env;
      env.push_back(Val::chan(br.ch));
      pool[*j] = decompose(br.cases[c->label], std::move(env), br.k);
      pool[i] = ReadyC{Val::chan(end), c->k};
      return {ev, Reduction::transmit(end.id), rv};
    }
    // WaitC, RecvC and BranchC only move when a partner picks them.
  }
  return {make_event(EventKind::Stuck), Reduction::ident(), std::nullopt};
}

// ---------------------------------------------------------------------------
// Gas

class Gas {
 public:
  static Gas plain(std::size_t n) { return Gas(false, n, {}); }
  static Gas structured(std::vector<std::size_t> rotations) {
    std::size_t n = rotations.size();
    return Gas(true, n, std::move(rotations));
  }

  bool is_structured() const noexcept { return structured_; }
  std::size_t size() const noexcept { return n_; }
  std::size_t rotation(std::size_t i) const { return structured_ ? rotations_.at(i) : 0; }
  const std::vector<std::size_t>& rotations() const noexcept { return rotations_; }

 private:
  Gas(bool structured, std::size_t n, std::vector<std::size_t> r)
      : structured_(structured), n_(n), rotations_(std::move(r)) {}

  bool structured_;
  std::size_t n_;
  std::vector<std::size_t> rotations_;
};

inline void rotate_pool(State& st, std::size_t r) {
  if (st.pool.empty()) return;
  r %= st.pool.size();
  std::rotate(st.pool.begin(), st.pool.begin() + static_cast<std::ptrdiff_t>(r), st.pool.end());
  std::rotate(st.tids.begin(), st.tids.begin() + static_cast<std::ptrdiff_t>(r), st.tids.end());
}

enum class Outcome { Terminated, Stuck, OutOfGas };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Terminated: return "Terminated";
    case Outcome::Stuck: return "Stuck";
    case Outcome::OutOfGas: return "OutOfGas";
  }
  return "?";
}

struct TraceStep {
  std::size_t step = 0;
  std::size_t rotation = 0;
  Event event;
  Reduction reduction;
  std::size_t pool_size = 0;  // after the step
};

using Trace = std::vector<TraceStep>;

struct ScheduleResult {
  Outcome outcome = Outcome::OutOfGas;
  Trace trace;
};

inline bool is_final(EventKind k) { return k == EventKind::Terminated || k == EventKind::Stuck; }

// Drives `st` with the given gas. `observe(trace_step, step_result, before,
// after)` runs after every step; returning false aborts the run, reported as
// OutOfGas.
template <typename Observer>
ScheduleResult schedule(const Gas& gas, State& st, Observer&& observe) {
  ScheduleResult res;
  for (std::size_t i = 0; i < gas.size(); ++i) {
    const std::size_t r = gas.rotation(i);
    rotate_pool(st, r);
    State before = st;
    StepResult sr = step(st);
    TraceStep ts{i, r, sr.event, sr.reduction, st.pool.size()};
    res.trace.push_back(ts);
    if (!observe(ts, sr, before, st)) return res;
    if (is_final(sr.event.kind)) {
      res.outcome = sr.event.kind == EventKind::Terminated ? Outcome::Terminated : Outcome::Stuck;
      return res;
    }
  }
  res.outcome = Outcome::OutOfGas;
  return res;
}

inline ScheduleResult schedule(const Gas& gas, State& st) {
  return schedule(gas, st, [](const auto&...) { return true; });
}

// ---------------------------------------------------------------------------
// Printing

inline std::string describe(const Event& e) {
  std::string s = to_string(e.kind);
  switch (e.kind) {
    case EventKind::Restarted:
    case EventKind::Halted:
      s += "(" + std::to_string(e.thread.value_or(0)) + ")";
      break;
    case EventKind::NewChannel:
    case EventKind::Closed:
      s += "(" + std::to_string(e.channel.value_or(0)) + ")";
      break;
    case EventKind::Transmitted:
      s += "(" + std::to_string(e.channel.value_or(0)) + ", " + e.payload_type + " " + e.payload + ")";
      break;
    case EventKind::Selected:
      s += "(" + std::to_string(e.channel.value_or(0)) + ", " + std::to_string(e.label.value_or(0)) + ")";
      break;
    default:
      break;
  }
  return s;
}

// Canonical rendering of (table, pool); equal states give equal keys.
inline std::string state_key(const State& st) {
  std::string out = "next=" + std::to_string(st.table.next_id);
  for (const auto& [id, c] : st.table.entries)
    out += " [" + std::to_string(id) + " " + to_string(c.avail) + " " + to_string(c.sess) + "]";
  out += " |";
  for (const auto& cmd : st.pool) out += " " + describe(cmd);
  return out;
}

}  // namespace gvm
