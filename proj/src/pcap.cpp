#include "procbus/pcap.hpp"

#include <fstream>

namespace procbus {

namespace {

void put_u16le(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(uint8_t(v & 0xFF));
  out.push_back(uint8_t(v >> 8));
}

void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(uint8_t((v >> (8 * i)) & 0xFF));
}

}  // namespace

std::vector<uint8_t> PcapWriter::to_bytes() const {
  std::vector<uint8_t> out;
  out.reserve(24 + records_.size() * 120);

  put_u32le(out, 0xA1B2C3D4);  // magic, microsecond resolution
  put_u16le(out, 2);           // version major
  put_u16le(out, 4);           // version minor
  put_u32le(out, 0);           // thiszone
  put_u32le(out, 0);           // sigfigs
  put_u32le(out, 65535);       // snaplen
  put_u32le(out, 1);           // LINKTYPE_ETHERNET

  for (const auto& rec : records_) {
    put_u32le(out, uint32_t(rec.ts_us / 1000000));
    put_u32le(out, uint32_t(rec.ts_us % 1000000));
    put_u32le(out, uint32_t(rec.bytes.size()));
    put_u32le(out, uint32_t(rec.bytes.size()));
    out.insert(out.end(), rec.bytes.begin(), rec.bytes.end());
  }
  return out;
}

bool PcapWriter::write(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) return false;
  const auto bytes = to_bytes();
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  return bool(f);
}

}  // namespace procbus
