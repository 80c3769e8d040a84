#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace procbus {

using Mac = std::array<uint8_t, 6>;

inline bool is_multicast(const Mac& mac) { return (mac[0] & 0x01) != 0; }

inline std::string mac_to_string(const Mac& mac) {
  char buf[18];
  std::snprintf(buf, sizeof(buf), "%02x:%02x:%02x:%02x:%02x:%02x",
                mac[0], mac[1], mac[2], mac[3], mac[4], mac[5]);
  return buf;
}

std::optional<Mac> parse_mac(const std::string& text);

// Big-endian append/read helpers shared by the SV and PTP wire formats.
namespace be {

inline void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v & 0xFF));
}

inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v >> 24));
  out.push_back(uint8_t(v >> 16));
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v & 0xFF));
}

inline void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  put_u32(out, uint32_t(v >> 32));
  put_u32(out, uint32_t(v & 0xFFFFFFFFu));
}

inline uint16_t get_u16(const uint8_t* p) {
  return uint16_t((uint16_t(p[0]) << 8) | p[1]);
}

inline uint32_t get_u32(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) |
         (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

inline uint64_t get_u64(const uint8_t* p) {
  return (uint64_t(get_u32(p)) << 32) | get_u32(p + 4);
}

}  // namespace be

}  // namespace procbus
