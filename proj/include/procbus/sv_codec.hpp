#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "procbus/bytes.hpp"

namespace procbus {

// Fixed-layout Sampled Values frame, one ASDU per frame.
// Byte map: docs/wire-format.md.

constexpr uint16_t kEthertypeSv = 0x88BA;
constexpr uint16_t kEthertypePtp = 0x88F7;

constexpr int kSvChannelCount = 8;
constexpr uint16_t kSmpCntModulus = 4000;  // counter wraps once per second at 4 kHz
constexpr size_t kMaxSvIdLen = 64;

// Channel slots, in wire order.
enum SvChannel : int {
  ChIa = 0, ChIb = 1, ChIc = 2, ChIn = 3,
  ChVa = 4, ChVb = 5, ChVc = 6, ChVn = 7,
};

enum class SmpSynch : uint8_t { None = 0, Local = 1, Global = 2 };

struct ChannelSample {
  int32_t value = 0;
  uint32_t quality = 0;  // 0 = good
  bool operator==(const ChannelSample&) const = default;
};

struct Asdu {
  std::string sv_id;
  uint16_t smp_cnt = 0;  // [0, 3999]
  uint32_t conf_rev = 1;
  SmpSynch smp_synch = SmpSynch::Global;
  std::array<ChannelSample, kSvChannelCount> channels{};
  bool operator==(const Asdu&) const = default;
};

struct SvFrame {
  Mac dst{};  // multicast bit required
  Mac src{};
  uint16_t appid = 0;
  Asdu asdu;
  bool operator==(const SvFrame&) const = default;
};

// Encoded size for a given sv_id length; constant otherwise.
constexpr size_t sv_frame_size(size_t sv_id_len) { return 94 + sv_id_len; }

// Serializes the frame. Returns false when an invariant is violated
// (smp_cnt >= 4000, sv_id over 64 bytes, non-multicast destination);
// out is left empty in that case.
bool encode_sv(const SvFrame& frame, std::vector<uint8_t>& out);

enum class SvDecodeStatus { Ok, NotSv, Malformed };

// Parses bytes produced by encode_sv. NotSv when the ethertype is not
// 0x88BA; Malformed for anything that no valid frame encodes to.
SvDecodeStatus decode_sv(std::span<const uint8_t> bytes, SvFrame& out);

const char* to_string(SvDecodeStatus status);
const char* to_string(SmpSynch synch);

// Physical <-> count quantization.
struct ScaleConvention {
  double current_scale = 0.001;  // amperes per count
  double voltage_scale = 0.01;   // volts per count
};

enum class QuantizeStatus { Ok, Saturated };

// Round-half-away-from-zero of value/scale. On overflow the output is
// clamped to the int32 range and Saturated is returned.
QuantizeStatus quantize(double value, double scale, int32_t& out);

inline double dequantize(int32_t count, double scale) { return count * scale; }

}  // namespace procbus
