#pragma once

// Runtime audit of resource invariants: every advertised channel end is held
// by exactly one thread, halted threads hold nothing, pending operations fit
// their channel's protocol, and each step changes the channel table in the
// way its reduction says.

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "gvm/machine.hpp"
#include "gvm/scheduler.hpp"
#include "gvm/typecheck.hpp"

namespace gvm {

enum class ViolationKind { DuplicateEnd, DanglingEnd, GhostEnd, MissingEnd, BadReduction, FidelityBreach };

inline const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::DuplicateEnd: return "DuplicateEnd";
    case ViolationKind::DanglingEnd: return "DanglingEnd";
    case ViolationKind::GhostEnd: return "GhostEnd";
    case ViolationKind::MissingEnd: return "MissingEnd";
    case ViolationKind::BadReduction: return "BadReduction";
    case ViolationKind::FidelityBreach: return "FidelityBreach";
  }
  return "?";
}

struct Violation {
  ViolationKind kind;
  std::string detail;
};

struct AuditReport {
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }
  bool has(ViolationKind k) const {
    return std::any_of(violations.begin(), violations.end(), [k](const Violation& v) { return v.kind == k; });
  }
  void add(ViolationKind k, std::string detail) { violations.push_back({k, std::move(detail)}); }
  void merge(const AuditReport& other) {
    violations.insert(violations.end(), other.violations.begin(), other.violations.end());
  }
};

inline std::string to_string(const AuditReport& r) {
  if (r.ok()) return "ok";
  std::string out;
  for (const auto& v : r.violations) {
    if (!out.empty()) out += "; ";
    out += std::string(to_string(v.kind)) + ": " + v.detail;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Runtime typing of transmitted values

// Does `v` inhabit `t`, given the protocols the table assigns to its ends?
// Closures are checked by linearity only: their bodies were checked
// statically.
inline bool conforms(const ChannelTable& table, const Val& v, const Type& t) {
  switch (t.kind()) {
    case Type::Kind::Unit:
      return v.is_unit();
    case Type::Kind::Pair: {
      const auto* p = v.as_pair();
      return p && conforms(table, p->first, t.first()) && conforms(table, p->second, t.second());
    }
    case Type::Kind::Chan: {
      const auto* c = v.as_chan();
      if (!c || !table.find(c->end.id)) return false;
      return sub_session(end_session(table, c->end), t.session());
    }
    case Type::Kind::Fun: {
      const auto* f = v.as_closure();
      return f && (t.linearity() == Linearity::LL || f->lin == Linearity::UU);
    }
  }
  return false;
}

namespace detail {

inline std::string command_name(const Command& c) {
  static const char* names[] = {"Ready", "Halt", "Fork", "New", "Close", "Wait", "Send", "Recv", "Select", "Branch"};
  return names[c.index()];
}

// The protocol shape a pending channel operation expects of its end.
inline std::optional<std::string> operation_mismatch(const ChannelTable& table, const Command& cmd) {
  auto check = [&](ChannelEnd end, auto&& fits) -> std::optional<std::string> {
    const ChannelState* st = table.find(end.id);
    if (!st || !advertises(st->avail, end.pol)) return std::nullopt;  // reported as GhostEnd
    Session s = unfold(end_session(table, end));
    if (fits(s)) return std::nullopt;
    return command_name(cmd) + " on " + to_string(end) + " whose protocol is " + to_string(s);
  };
  auto is = [](const Session& s, Session::Kind k, Dir d) { return s.kind() == k && s.dir() == d; };
  return std::visit(
      [&](const auto& c) -> std::optional<std::string> {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, CloseC>) {
          return check(c.ch, [&](const Session& s) { return is(s, Session::Kind::End, Dir::Snd); });
        } else if constexpr (std::is_same_v<T, WaitC>) {
          return check(c.ch, [&](const Session& s) { return is(s, Session::Kind::End, Dir::Rcv); });
        } else if constexpr (std::is_same_v<T, SendC>) {
          return check(c.ch, [&](const Session& s) {
            return is(s, Session::Kind::Xmit, Dir::Snd) && conforms(table, c.value, s.payload());
          });
        } else if constexpr (std::is_same_v<T, RecvC>) {
          return check(c.ch, [&](const Session& s) { return is(s, Session::Kind::Xmit, Dir::Rcv); });
        } else if constexpr (std::is_same_v<T, SelectC>) {
          return check(c.ch, [&](const Session& s) {
            return is(s, Session::Kind::Choice, Dir::Snd) && c.label < s.alts().size();
          });
        } else if constexpr (std::is_same_v<T, BranchC>) {
          return check(c.ch, [&](const Session& s) {
            return is(s, Session::Kind::Choice, Dir::Rcv) && c.cases.size() == s.alts().size();
          });
        } else {
          return std::nullopt;
        }
      },
      cmd);
}

}  // namespace detail

// Checks that the pool partitions exactly the ends the table advertises.
inline AuditReport audit_state(const ChannelTable& table, const ThreadPool& pool) {
  AuditReport report;
  std::map<ChannelEnd, std::vector<std::size_t>> holders;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (const auto& end : channel_ends(pool[i])) holders[end].push_back(i);
    if (const auto* h = std::get_if<HaltC>(&pool[i]); h && !channel_ends(h->value).empty())
      report.add(ViolationKind::DanglingEnd, "halted thread " + std::to_string(i) + " holds " + describe(h->value));
    if (const auto* r = std::get_if<ReadyC>(&pool[i]); r && r->k.is_halt() && !channel_ends(r->value).empty())
      report.add(ViolationKind::DanglingEnd,
                 "thread " + std::to_string(i) + " returns " + describe(r->value) + " to halt");
    if (auto m = detail::operation_mismatch(table, pool[i])) report.add(ViolationKind::FidelityBreach, *m);
  }
  for (const auto& [end, who] : holders) {
    if (who.size() > 1) {
      std::string list;
      for (auto t : who) list += (list.empty() ? "" : ",") + std::to_string(t);
      report.add(ViolationKind::DuplicateEnd, to_string(end) + " held " + std::to_string(who.size()) +
                                                  " times (threads " + list + ")");
    }
    const ChannelState* st = table.find(end.id);
    if (!st)
      report.add(ViolationKind::GhostEnd, to_string(end) + " refers to a channel that was never created");
    else if (st->avail == Avail::Gone)
      report.add(ViolationKind::GhostEnd, to_string(end) + " refers to a closed channel");
    else if (!advertises(st->avail, end.pol))
      report.add(ViolationKind::GhostEnd, to_string(end) + " is not available in the table");
  }
  for (const auto& [id, st] : table.entries) {
    for (Polarity p : {Polarity::Pos, Polarity::Neg}) {
      if (!advertises(st.avail, p)) continue;
      ChannelEnd end{id, p};
      if (!holders.contains(end)) report.add(ViolationKind::MissingEnd, to_string(end) + " is held by no thread");
    }
  }
  return report;
}

// Checks that the table changed exactly as `red` says.
inline AuditReport check_reduction(const ChannelTable& before, const Event& ev, const Reduction& red,
                                   const ChannelTable& after) {
  AuditReport report;
  auto bad = [&](std::string why) { report.add(ViolationKind::BadReduction, to_string(red) + ": " + why); };
  auto others_unchanged = [&](ChannelId id) {
    for (const auto& [k, st] : before.entries)
      if (k != id && (!after.find(k) || !(*after.find(k) == st))) return false;
    for (const auto& [k, st] : after.entries)
      if (k != id && !before.find(k)) return false;
    return true;
  };

  switch (red.kind) {
    case Reduction::Kind::Ident:
      if (!(before == after)) bad("the table changed");
      if (ev.kind == EventKind::NewChannel || ev.kind == EventKind::Closed || ev.kind == EventKind::Transmitted ||
          ev.kind == EventKind::Selected)
        bad(std::string("identity reduction with event ") + to_string(ev.kind));
      break;
    case Reduction::Kind::New: {
      if (ev.kind != EventKind::NewChannel || ev.channel != red.id) bad("does not match its event");
      if (before.find(red.id)) bad("channel id reused");
      if (red.id != before.next_id || after.next_id != before.next_id + 1) bad("channel id is not the next fresh id");
      const ChannelState* st = after.find(red.id);
      if (!st || !(st->sess == red.sess) || st->avail != Avail::Both) bad("new entry is not (sess, Both)");
      if (!others_unchanged(red.id)) bad("other entries changed");
      break;
    }
    case Reduction::Kind::Internal: {
      const ChannelState* b = before.find(red.id);
      const ChannelState* a = after.find(red.id);
      if (!b || !a) {
        bad("channel missing");
        break;
      }
      if (before.next_id != after.next_id || !others_unchanged(red.id)) bad("other entries changed");
      if (red.internal == Reduction::Internal::End) {
        if (ev.kind != EventKind::Closed || ev.channel != red.id) bad("does not match its event");
        if (b->avail != Avail::Both || a->avail != Avail::Gone) bad("availability is not Both to Gone");
        if (unfold(b->sess).kind() != Session::Kind::End) bad("closing a channel whose protocol is not finished");
        if (!(a->sess == b->sess)) bad("session changed on close");
      } else {
        if ((ev.kind != EventKind::Transmitted && ev.kind != EventKind::Selected) || ev.channel != red.id)
          bad("does not match its event");
        if (a->avail != b->avail) bad("availability changed");
        Session s = unfold(b->sess);
        bool stepped = false;
        if (s.kind() == Session::Kind::Xmit) stepped = a->sess == s.cont();
        if (s.kind() == Session::Kind::Choice)
          stepped = std::any_of(s.alts().begin(), s.alts().end(), [&](const Session& x) { return a->sess == x; });
        if (!stepped) bad("session did not step by one transmission");
      }
      break;
    }
  }
  return report;
}

inline bool validate_reduction(const ChannelTable& before, const Event& ev, const Reduction& red,
                               const ChannelTable& after) {
  return check_reduction(before, ev, red, after).ok();
}

// The matched ends speak dual protocols, the payload fits the declared type,
// and a selected label exists on both sides.
inline AuditReport check_fidelity(const ChannelTable& before, const Rendezvous& rv) {
  AuditReport report;
  auto breach = [&](std::string why) {
    report.add(ViolationKind::FidelityBreach, "channel " + std::to_string(rv.id) + ": " + why);
  };
  if (!vcr_match(rv.active_end, rv.passive_end)) breach("matched ends are not opposite ends");
  if (!type_equiv(dual(rv.active_session), rv.passive_session))
    breach(to_string(rv.active_session) + " is not dual to " + to_string(rv.passive_session));
  const Session& s = rv.active_session;
  if (rv.payload) {
    if (s.kind() != Session::Kind::Xmit || s.dir() != Dir::Snd)
      breach("transmission on " + to_string(s));
    else if (!conforms(before, *rv.payload, s.payload()))
      breach("payload " + describe(*rv.payload) + " does not fit " + to_string(s.payload()));
  }
  if (rv.label) {
    if (s.kind() != Session::Kind::Choice || s.dir() != Dir::Snd || *rv.label >= s.alts().size())
      breach("selection of " + std::to_string(*rv.label) + " on " + to_string(s));
    const Session& p = rv.passive_session;
    if (p.kind() != Session::Kind::Choice || *rv.label >= p.alts().size())
      breach("partner cannot accept label " + std::to_string(*rv.label));
  }
  return report;
}

// Ends move from sender to receiver only: the sender loses exactly the
// payload's ends, the receiver gains them, nobody else changes.
inline AuditReport check_transfer(const ThreadPool& before, const ThreadPool& after, const Rendezvous& rv) {
  AuditReport report;
  if (!rv.payload) return report;
  auto fail = [&](std::string why) { report.add(ViolationKind::BadReduction, "transfer: " + why); };
  if (before.size() != after.size()) {
    fail("pool size changed");
    return report;
  }
  const auto moved = channel_ends(*rv.payload);
  auto minus = [](std::vector<ChannelEnd> a, const std::vector<ChannelEnd>& b) {
    for (const auto& x : b) {
      auto it = std::find(a.begin(), a.end(), x);
      if (it == a.end()) return std::optional<std::vector<ChannelEnd>>();
      a.erase(it);
    }
    return std::optional<std::vector<ChannelEnd>>(std::move(a));
  };
  auto plus = [](std::vector<ChannelEnd> a, const std::vector<ChannelEnd>& b) {
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end());
    return a;
  };
  auto sender_after = minus(channel_ends(before[rv.active]), moved);
  if (!sender_after || *sender_after != channel_ends(after[rv.active])) fail("sender holdings are not before minus payload");
  if (plus(channel_ends(before[rv.passive]), moved) != channel_ends(after[rv.passive]))
    fail("receiver holdings are not before plus payload");
  for (std::size_t i = 0; i < before.size(); ++i)
    if (i != rv.active && i != rv.passive && channel_ends(before[i]) != channel_ends(after[i]))
      fail("thread " + std::to_string(i) + " holdings changed");
  return report;
}

}  // namespace gvm
