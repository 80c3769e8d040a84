#include <random>

#include "doctest.h"
#include "procbus/sv_codec.hpp"

using namespace procbus;

namespace {

SvFrame sample_frame() {
  SvFrame f;
  f.dst = {0x01, 0x0C, 0xCD, 0x04, 0x00, 0x01};
  f.src = {0x02, 0x00, 0x00, 0x00, 0x00, 0xA1};
  f.appid = 0x4000;
  f.asdu.sv_id = "MU01";
  f.asdu.smp_cnt = 1234;
  f.asdu.conf_rev = 7;
  f.asdu.smp_synch = SmpSynch::Global;
  for (int ch = 0; ch < kSvChannelCount; ++ch)
    f.asdu.channels[ch] = {int32_t(1000 * ch - 2500), 0};
  return f;
}

SvFrame random_frame(std::mt19937& rng) {
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_int_distribution<int> cnt(0, kSmpCntModulus - 1);
  std::uniform_int_distribution<int> id_len(0, int(kMaxSvIdLen));
  std::uniform_int_distribution<int32_t> value(std::numeric_limits<int32_t>::min(),
                                               std::numeric_limits<int32_t>::max());
  std::uniform_int_distribution<int> synch(0, 2);

  SvFrame f;
  for (auto& b : f.dst) b = uint8_t(byte(rng));
  f.dst[0] |= 0x01;  // multicast
  for (auto& b : f.src) b = uint8_t(byte(rng));
  f.appid = uint16_t(byte(rng) << 8 | byte(rng));
  const int len = id_len(rng);
  for (int i = 0; i < len; ++i) f.asdu.sv_id.push_back(char('A' + byte(rng) % 26));
  f.asdu.smp_cnt = uint16_t(cnt(rng));
  f.asdu.conf_rev = uint32_t(value(rng));
  f.asdu.smp_synch = SmpSynch(synch(rng));
  for (auto& ch : f.asdu.channels) ch = {value(rng), uint32_t(value(rng))};
  return f;
}

}  // namespace

TEST_CASE("encode: all-zero channels give an all-zero measurement region") {
  SvFrame f = sample_frame();
  for (auto& ch : f.asdu.channels) ch = {0, 0};
  std::vector<uint8_t> bytes;
  REQUIRE(encode_sv(f, bytes));
  // channel block is the last 64 bytes
  for (size_t i = bytes.size() - 64; i < bytes.size(); ++i) CHECK(bytes[i] == 0);
}

TEST_CASE("encode/decode: round-trip identity") {
  const SvFrame f = sample_frame();
  std::vector<uint8_t> bytes;
  REQUIRE(encode_sv(f, bytes));
  CHECK(bytes.size() == sv_frame_size(f.asdu.sv_id.size()));

  SvFrame g;
  REQUIRE(decode_sv(bytes, g) == SvDecodeStatus::Ok);
  CHECK(g == f);
}

TEST_CASE("encode: invariant violations are rejected") {
  std::vector<uint8_t> bytes;

  SvFrame f = sample_frame();
  f.asdu.smp_cnt = 4000;
  CHECK_FALSE(encode_sv(f, bytes));

  f = sample_frame();
  f.dst[0] = 0x00;  // unicast
  CHECK_FALSE(encode_sv(f, bytes));

  f = sample_frame();
  f.asdu.sv_id.assign(65, 'x');
  CHECK_FALSE(encode_sv(f, bytes));
}

TEST_CASE("decode: ethertype 0x88F7 is not SV") {
  SvFrame f = sample_frame();
  std::vector<uint8_t> bytes;
  REQUIRE(encode_sv(f, bytes));
  bytes[12] = 0x88;
  bytes[13] = 0xF7;
  SvFrame g;
  CHECK(decode_sv(bytes, g) == SvDecodeStatus::NotSv);
}

TEST_CASE("decode: malformed inputs") {
  SvFrame g;
  CHECK(decode_sv(std::vector<uint8_t>{}, g) == SvDecodeStatus::Malformed);

  std::vector<uint8_t> bytes;
  REQUIRE(encode_sv(sample_frame(), bytes));

  SUBCASE("truncated") {
    bytes.pop_back();
    CHECK(decode_sv(bytes, g) == SvDecodeStatus::Malformed);
  }
  SUBCASE("oversized") {
    bytes.push_back(0);
    CHECK(decode_sv(bytes, g) == SvDecodeStatus::Malformed);
  }
  SUBCASE("counter out of range") {
    // smp_cnt sits right after the sv_id
    const size_t off = 23 + 4;
    bytes[off] = uint8_t(4000 >> 8);
    bytes[off + 1] = uint8_t(4000 & 0xFF);
    CHECK(decode_sv(bytes, g) == SvDecodeStatus::Malformed);
  }
  SUBCASE("bad smpSynch") {
    bytes[23 + 4 + 2 + 4] = 9;
    CHECK(decode_sv(bytes, g) == SvDecodeStatus::Malformed);
  }
  SUBCASE("unicast destination") {
    bytes[0] = 0x00;
    CHECK(decode_sv(bytes, g) == SvDecodeStatus::Malformed);
  }
  SUBCASE("nonzero reserved words") {
    bytes[18] = 1;
    CHECK(decode_sv(bytes, g) == SvDecodeStatus::Malformed);
  }
}

TEST_CASE("property: 10k random frames round-trip exactly") {
  std::mt19937 rng(42);
  for (int i = 0; i < 10000; ++i) {
    const SvFrame f = random_frame(rng);
    std::vector<uint8_t> bytes;
    REQUIRE(encode_sv(f, bytes));
    SvFrame g;
    REQUIRE(decode_sv(bytes, g) == SvDecodeStatus::Ok);
    REQUIRE(g == f);
  }
}

TEST_CASE("property: encoded length depends only on sv_id length") {
  std::mt19937 rng(7);
  for (int i = 0; i < 200; ++i) {
    const SvFrame f = random_frame(rng);
    std::vector<uint8_t> bytes;
    REQUIRE(encode_sv(f, bytes));
    CHECK(bytes.size() == sv_frame_size(f.asdu.sv_id.size()));
  }
}

TEST_CASE("quantize: reference counts") {
  ScaleConvention scale;
  int32_t count = 0;

  CHECK(quantize(0.370, scale.current_scale, count) == QuantizeStatus::Ok);
  CHECK(count == 370);

  CHECK(quantize(83.0, scale.voltage_scale, count) == QuantizeStatus::Ok);
  CHECK(count == 8300);

  CHECK(quantize(0.0, scale.current_scale, count) == QuantizeStatus::Ok);
  CHECK(count == 0);
  CHECK(quantize(0.0, scale.voltage_scale, count) == QuantizeStatus::Ok);
  CHECK(count == 0);

  // round-half-away-from-zero
  CHECK(quantize(0.0005, scale.current_scale, count) == QuantizeStatus::Ok);
  CHECK(count == 1);
  CHECK(quantize(-0.0005, scale.current_scale, count) == QuantizeStatus::Ok);
  CHECK(count == -1);
}

TEST_CASE("quantize: saturation is reported with the clamped value") {
  ScaleConvention scale;
  int32_t count = 0;
  CHECK(quantize(3.0e6, scale.current_scale, count) == QuantizeStatus::Saturated);
  CHECK(count == std::numeric_limits<int32_t>::max());
  CHECK(quantize(-3.0e6, scale.current_scale, count) == QuantizeStatus::Saturated);
  CHECK(count == std::numeric_limits<int32_t>::min());
}

TEST_CASE("property: quantization error within half a scale step") {
  ScaleConvention scale;
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> current(-100.0, 100.0);
  std::uniform_real_distribution<double> voltage(-1000.0, 1000.0);
  for (int i = 0; i < 5000; ++i) {
    int32_t count = 0;
    const double a = current(rng);
    REQUIRE(quantize(a, scale.current_scale, count) == QuantizeStatus::Ok);
    REQUIRE(std::abs(dequantize(count, scale.current_scale) - a) <=
            scale.current_scale / 2 + 1e-12);

    const double v = voltage(rng);
    REQUIRE(quantize(v, scale.voltage_scale, count) == QuantizeStatus::Ok);
    REQUIRE(std::abs(dequantize(count, scale.voltage_scale) - v) <=
            scale.voltage_scale / 2 + 1e-12);
  }
}

TEST_CASE("encode/decode: sv_id is length-prefixed binary, NUL bytes survive") {
  SvFrame f = sample_frame();
  f.asdu.sv_id = std::string("a\0b\xff", 4);
  std::vector<uint8_t> bytes;
  REQUIRE(encode_sv(f, bytes));
  SvFrame g;
  REQUIRE(decode_sv(bytes, g) == SvDecodeStatus::Ok);
  CHECK(g == f);
  CHECK(g.asdu.sv_id.size() == 4);
}
