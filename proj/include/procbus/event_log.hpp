#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace procbus {

using Json = nlohmann::ordered_json;

struct LogEntry {
  uint64_t t_us = 0;
  std::string source;
  std::string kind;
  Json detail;
};

// Append-only JSON-lines log shared by every node in a run. Entry order is
// the order events executed, so two runs of the same config produce
// byte-identical files.
class EventLog {
 public:
  void record(uint64_t t_us, std::string source, std::string kind, Json detail = {}) {
    entries_.push_back({t_us, std::move(source), std::move(kind), std::move(detail)});
  }

  const std::vector<LogEntry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }

  std::string to_jsonl() const;
  bool write(const std::string& path) const;

 private:
  std::vector<LogEntry> entries_;
};

std::string to_jsonl_line(const LogEntry& entry);

}  // namespace procbus
