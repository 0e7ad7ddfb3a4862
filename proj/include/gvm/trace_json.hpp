#pragma once

// One JSON record per scheduler step.

#include <cstdlib>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "gvm/audit.hpp"
#include "gvm/run.hpp"

namespace gvm {

enum class TraceFormat { Lines, Pretty };

// GVM_TRACE_FORMAT selects "lines" (default) or "pretty".
inline TraceFormat trace_format_from_env() {
  const char* v = std::getenv("GVM_TRACE_FORMAT");
  if (v && std::string(v) == "pretty") return TraceFormat::Pretty;
  return TraceFormat::Lines;
}

inline nlohmann::json to_json(const Event& e) {
  nlohmann::json j;
  j["kind"] = to_string(e.kind);
  if (e.thread) j["thread"] = *e.thread;
  if (e.tid) j["tid"] = *e.tid;
  if (e.partner) j["partner"] = *e.partner;
  if (e.channel) j["channel"] = *e.channel;
  if (e.label) j["label"] = *e.label;
  if (e.kind == EventKind::Transmitted) {
    j["payload"] = e.payload;
    j["payload_type"] = e.payload_type;
  }
  return j;
}

inline nlohmann::json to_json(const Reduction& r) {
  nlohmann::json j;
  switch (r.kind) {
    case Reduction::Kind::Ident:
      j["kind"] = "RedIdent";
      break;
    case Reduction::Kind::New:
      j["kind"] = "RedNew";
      j["id"] = r.id;
      j["sess"] = to_string(r.sess);
      break;
    case Reduction::Kind::Internal:
      j["kind"] = "RedInternal";
      j["id"] = r.id;
      j["internal"] = r.internal == Reduction::Internal::End ? "RedEnd" : "RedTransmit";
      break;
  }
  return j;
}

inline nlohmann::json to_json(const ChannelTable& t) {
  nlohmann::json chans = nlohmann::json::array();
  for (const auto& [id, c] : t.entries)
    chans.push_back({{"id", id}, {"avail", to_string(c.avail)}, {"sess", to_string(c.sess)}});
  return chans;
}

inline nlohmann::json to_json(const AuditReport& r) {
  nlohmann::json j;
  j["ok"] = r.ok();
  nlohmann::json v = nlohmann::json::array();
  for (const auto& x : r.violations) v.push_back({{"kind", to_string(x.kind)}, {"detail", x.detail}});
  j["violations"] = v;
  return j;
}

inline nlohmann::json to_json(const StepRecord& rec) {
  nlohmann::json j;
  j["step"] = rec.step.step;
  j["rotation"] = rec.step.rotation;
  j["event"] = to_json(rec.step.event);
  j["reduction"] = to_json(rec.step.reduction);
  j["pool_size"] = rec.step.pool_size;
  j["channels"] = to_json(rec.table);
  if (rec.audit) j["audit"] = to_json(*rec.audit);
  return j;
}

inline void write_trace(std::ostream& os, const RunResult& res, TraceFormat fmt = TraceFormat::Lines) {
  for (const auto& rec : res.records) os << to_json(rec).dump(fmt == TraceFormat::Pretty ? 2 : -1) << '\n';
}

}  // namespace gvm
