#include "procbus/event_log.hpp"

#include <fstream>

namespace procbus {

std::string to_jsonl_line(const LogEntry& entry) {
  Json j;
  j["t_us"] = entry.t_us;
  j["src"] = entry.source;
  j["kind"] = entry.kind;
  if (!entry.detail.is_null() && !entry.detail.empty()) j["detail"] = entry.detail;
  return j.dump();
}

std::string EventLog::to_jsonl() const {
  std::string out;
  for (const auto& e : entries_) {
    out += to_jsonl_line(e);
    out += '\n';
  }
  return out;
}

bool EventLog::write(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) return false;
  f << to_jsonl();
  return bool(f);
}

}  // namespace procbus
