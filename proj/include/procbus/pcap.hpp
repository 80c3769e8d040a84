#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace procbus {

// Classic pcap writer: linktype Ethernet, microsecond timestamps.
class PcapWriter {
 public:
  struct Record {
    uint64_t ts_us = 0;
    std::vector<uint8_t> bytes;
  };

  void add(uint64_t ts_us, std::span<const uint8_t> bytes) {
    records_.push_back({ts_us, {bytes.begin(), bytes.end()}});
  }

  const std::vector<Record>& records() const { return records_; }
  size_t packet_count() const { return records_.size(); }

  std::vector<uint8_t> to_bytes() const;
  bool write(const std::string& path) const;

 private:
  std::vector<Record> records_;
};

}  // namespace procbus
