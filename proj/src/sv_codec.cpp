#include "procbus/sv_codec.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace procbus {

namespace {

// Wire layout offsets after the 14-byte Ethernet header.
constexpr size_t kEthHeader = 14;
constexpr size_t kSvHeader = 8;  // appid, length, reserved1, reserved2
// APDU: svIdLen(1) + svId(L) + smpCnt(2) + confRev(4) + smpSynch(1) + channels(64)
constexpr size_t kApduFixed = 1 + 2 + 4 + 1 + size_t(kSvChannelCount) * 8;

bool valid_frame(const SvFrame& frame) {
  if (!is_multicast(frame.dst)) return false;
  if (frame.asdu.sv_id.size() > kMaxSvIdLen) return false;
  if (frame.asdu.smp_cnt >= kSmpCntModulus) return false;
  switch (frame.asdu.smp_synch) {
    case SmpSynch::None:
    case SmpSynch::Local:
    case SmpSynch::Global:
      break;
    default:
      return false;
  }
  return true;
}

}  // namespace

std::optional<Mac> parse_mac(const std::string& text) {
  Mac mac{};
  unsigned v[6];
  if (std::sscanf(text.c_str(), "%x:%x:%x:%x:%x:%x",
                  &v[0], &v[1], &v[2], &v[3], &v[4], &v[5]) != 6)
    return std::nullopt;
  for (int i = 0; i < 6; ++i) {
    if (v[i] > 0xFF) return std::nullopt;
    mac[i] = uint8_t(v[i]);
  }
  return mac;
}

bool encode_sv(const SvFrame& frame, std::vector<uint8_t>& out) {
  out.clear();
  if (!valid_frame(frame)) return false;

  const size_t sv_id_len = frame.asdu.sv_id.size();
  out.reserve(sv_frame_size(sv_id_len));

  out.insert(out.end(), frame.dst.begin(), frame.dst.end());
  out.insert(out.end(), frame.src.begin(), frame.src.end());
  be::put_u16(out, kEthertypeSv);

  be::put_u16(out, frame.appid);
  // LENGTH counts the SV header plus the APDU, mirroring 9-2 framing.
  be::put_u16(out, uint16_t(kSvHeader + kApduFixed + sv_id_len));
  be::put_u16(out, 0);  // reserved1
  be::put_u16(out, 0);  // reserved2

  out.push_back(uint8_t(sv_id_len));
  out.insert(out.end(), frame.asdu.sv_id.begin(), frame.asdu.sv_id.end());
  be::put_u16(out, frame.asdu.smp_cnt);
  be::put_u32(out, frame.asdu.conf_rev);
  out.push_back(uint8_t(frame.asdu.smp_synch));
  for (const auto& ch : frame.asdu.channels) {
    be::put_u32(out, uint32_t(ch.value));
    be::put_u32(out, ch.quality);
  }
  return true;
}

SvDecodeStatus decode_sv(std::span<const uint8_t> bytes, SvFrame& out) {
  if (bytes.size() < kEthHeader) return SvDecodeStatus::Malformed;
  if (be::get_u16(bytes.data() + 12) != kEthertypeSv) return SvDecodeStatus::NotSv;
  if (bytes.size() < kEthHeader + kSvHeader + kApduFixed) return SvDecodeStatus::Malformed;

  const uint8_t* p = bytes.data();
  SvFrame frame;
  std::copy(p, p + 6, frame.dst.begin());
  std::copy(p + 6, p + 12, frame.src.begin());
  frame.appid = be::get_u16(p + 14);

  const uint16_t length = be::get_u16(p + 16);
  if (bytes.size() != kEthHeader + length) return SvDecodeStatus::Malformed;
  if (be::get_u16(p + 18) != 0 || be::get_u16(p + 20) != 0)
    return SvDecodeStatus::Malformed;

  const uint8_t sv_id_len = p[22];
  if (sv_id_len > kMaxSvIdLen) return SvDecodeStatus::Malformed;
  if (length != kSvHeader + kApduFixed + sv_id_len) return SvDecodeStatus::Malformed;

  size_t off = 23;
  frame.asdu.sv_id.assign(reinterpret_cast<const char*>(p + off), sv_id_len);
  off += sv_id_len;
  frame.asdu.smp_cnt = be::get_u16(p + off);
  off += 2;
  frame.asdu.conf_rev = be::get_u32(p + off);
  off += 4;
  const uint8_t synch = p[off];
  off += 1;
  if (synch > uint8_t(SmpSynch::Global)) return SvDecodeStatus::Malformed;
  frame.asdu.smp_synch = SmpSynch(synch);
  for (auto& ch : frame.asdu.channels) {
    ch.value = int32_t(be::get_u32(p + off));
    ch.quality = be::get_u32(p + off + 4);
    off += 8;
  }

  if (frame.asdu.smp_cnt >= kSmpCntModulus) return SvDecodeStatus::Malformed;
  if (!is_multicast(frame.dst)) return SvDecodeStatus::Malformed;

  out = std::move(frame);
  return SvDecodeStatus::Ok;
}

const char* to_string(SvDecodeStatus status) {
  switch (status) {
    case SvDecodeStatus::Ok: return "Ok";
    case SvDecodeStatus::NotSv: return "NotSv";
    case SvDecodeStatus::Malformed: return "Malformed";
  }
  return "?";
}

const char* to_string(SmpSynch synch) {
  switch (synch) {
    case SmpSynch::None: return "none";
    case SmpSynch::Local: return "local";
    case SmpSynch::Global: return "global";
  }
  return "?";
}

QuantizeStatus quantize(double value, double scale, int32_t& out) {
  const double scaled = value / scale;
  if (scaled >= double(std::numeric_limits<int32_t>::max()) + 0.5) {
    out = std::numeric_limits<int32_t>::max();
    return QuantizeStatus::Saturated;
  }
  if (scaled <= double(std::numeric_limits<int32_t>::min()) - 0.5) {
    out = std::numeric_limits<int32_t>::min();
    return QuantizeStatus::Saturated;
  }
  out = int32_t(std::llround(scaled));
  return QuantizeStatus::Ok;
}

}  // namespace procbus
