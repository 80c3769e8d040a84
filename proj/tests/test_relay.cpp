#include <cmath>
#include <numbers>

#include "doctest.h"
#include "procbus/relay.hpp"
#include "procbus/waveform.hpp"

using namespace procbus;

namespace {

constexpr uint64_t kPeriodUs = 250;

SvFrame frame_at(uint64_t k, const WaveformSource& source,
                 const std::string& sv_id = "MU01",
                 SmpSynch synch = SmpSynch::Global) {
  const AnalogSample s = source.at(double(k) / 4000.0);
  ScaleConvention scale;
  SvFrame f;
  f.dst = {0x01, 0x0C, 0xCD, 0x04, 0x00, 0x01};
  f.src = {0x02, 0, 0, 0, 0, 0xA1};
  f.appid = 0x4000;
  f.asdu.sv_id = sv_id;
  f.asdu.smp_cnt = uint16_t(k % kSmpCntModulus);
  f.asdu.smp_synch = synch;
  for (int ph = 0; ph < 3; ++ph) {
    quantize(s.i[ph], scale.current_scale, f.asdu.channels[ph].value);
    quantize(s.v[ph], scale.voltage_scale, f.asdu.channels[4 + ph].value);
  }
  quantize(s.i[0] + s.i[1] + s.i[2], scale.current_scale, f.asdu.channels[ChIn].value);
  quantize(s.v[0] + s.v[1] + s.v[2], scale.voltage_scale, f.asdu.channels[ChVn].value);
  return f;
}

struct Rig {
  Fabric fabric;
  Relay relay;

  explicit Rig(RelaySettings settings = {})
      : relay(fabric, fabric.attach("relay"), settings, "relay") {}

  void feed(const WaveformSource& source, uint64_t from, uint64_t to,
            SmpSynch synch = SmpSynch::Global) {
    for (uint64_t k = from; k < to; ++k)
      relay.on_sv_frame(frame_at(k, source, relay.settings().subscribed_sv_id, synch),
                        k * kPeriodUs);
  }

  size_t count(RelayEventKind kind) const {
    size_t n = 0;
    for (const auto& ev : relay.events())
      if (ev.kind == kind) ++n;
    return n;
  }
};

const WaveformSource kNominal{SystemParams{}, FaultSpec{}};

WaveformSource faulted_from(double onset_s, FaultKind kind = FaultKind::ThreePhase) {
  FaultSpec fault;
  fault.kind = kind;
  fault.onset_s = onset_s;
  return WaveformSource{SystemParams{}, fault};
}

}  // namespace

TEST_CASE("elements: nominal, forged-fault and dead windows") {
  RelaySettings settings;

  // nominal: 0.262 A / 58.7 V -> 224 ohm, far outside the zone
  FaultElement el = evaluate_elements({0.262, 0.262, 0.262}, {58.7, 58.7, 58.7}, settings);
  CHECK_FALSE(el.picked_up);

  // forged fault: 22/sqrt2 A and 5/sqrt2 V -> 0.227 ohm, OC and Z
  const double i_f = 22.0 / std::numbers::sqrt2;
  const double v_f = 5.0 / std::numbers::sqrt2;
  el = evaluate_elements({i_f, i_f, i_f}, {v_f, v_f, v_f}, settings);
  CHECK(el.picked_up);
  CHECK(el.overcurrent);
  CHECK(el.under_impedance);

  // all-zero window: no current, impedance element gated off
  el = evaluate_elements({0, 0, 0}, {0, 0, 0}, settings);
  CHECK_FALSE(el.picked_up);

  // low-current zone entry is ignored below half pickup
  el = evaluate_elements({0.9, 0.0, 0.0}, {0.5, 58.7, 58.7}, settings);
  CHECK_FALSE(el.picked_up);

  // ...but honored above it
  el = evaluate_elements({1.5, 0.0, 0.0}, {0.5, 58.7, 58.7}, settings);
  CHECK(el.picked_up);
  CHECK(el.under_impedance);
  CHECK_FALSE(el.overcurrent);
}

TEST_CASE("clean stream: no events beyond the in-service marker") {
  Rig rig;
  rig.feed(kNominal, 0, 4000);
  CHECK(rig.relay.events().size() == 1);
  CHECK(rig.relay.events()[0].kind == RelayEventKind::Normal);
  CHECK_FALSE(rig.relay.blocked());
  CHECK_FALSE(rig.relay.tripped());
}

TEST_CASE("wrong sv_id and undecodable frames are ignored") {
  Rig rig;
  rig.feed(kNominal, 0, 100);
  for (uint64_t k = 100; k < 200; ++k)
    rig.relay.on_sv_frame(frame_at(k, kNominal, "OTHER"), k * kPeriodUs);
  CHECK(rig.relay.events().size() == 1);

  FrameEnvelope garbage{{0xDE, 0xAD, 0xBE, 0xEF}, 0, 50000};
  rig.relay.on_frame(garbage);
  CHECK(rig.relay.undecodable_frames() == 1);
  CHECK(rig.relay.events().size() == 1);
}

TEST_CASE("duplicate smp_cnt with different values: ALARM and BLOCK at once") {
  Rig rig;
  rig.feed(kNominal, 0, 1000);
  REQUIRE_FALSE(rig.relay.blocked());

  // replayed copy of frame 998 with tweaked Ia, two periods later
  SvFrame stale = frame_at(998, kNominal);
  stale.asdu.channels[ChIa].value += 500;
  const uint64_t t_conflict = 1000 * kPeriodUs;
  rig.relay.on_sv_frame(stale, t_conflict);

  CHECK(rig.relay.blocked());
  REQUIRE(rig.count(RelayEventKind::Alarm) == 1);
  REQUIRE(rig.count(RelayEventKind::Block) == 1);
  // no later than 2 frame periods after the conflicting frame arrived
  CHECK(*rig.relay.first_event_time(RelayEventKind::Block) <= t_conflict + 2 * kPeriodUs);
}

TEST_CASE("byte-identical duplicate is not a conflict") {
  Rig rig;
  rig.feed(kNominal, 0, 1000);
  rig.relay.on_sv_frame(frame_at(998, kNominal), 1000 * kPeriodUs);
  CHECK_FALSE(rig.relay.blocked());
}

TEST_CASE("smp_synch != GLOBAL: SYNC_LOST and BLOCK") {
  Rig rig;
  rig.feed(kNominal, 0, 100);
  rig.feed(kNominal, 100, 101, SmpSynch::None);
  CHECK(rig.relay.blocked());
  CHECK(rig.count(RelayEventKind::SyncLost) == 1);
  CHECK(rig.count(RelayEventKind::Block) == 1);

  // repeated NONE frames do not spam events
  rig.feed(kNominal, 101, 200, SmpSynch::None);
  CHECK(rig.count(RelayEventKind::SyncLost) == 1);
  CHECK(rig.count(RelayEventKind::Block) == 1);
}

TEST_CASE("unblock: hysteresis after consistency_window clean frames") {
  Rig rig;
  rig.feed(kNominal, 0, 100, SmpSynch::None);
  REQUIRE(rig.relay.blocked());

  rig.feed(kNominal, 100, 107);  // 7 clean frames, one short
  CHECK(rig.relay.blocked());
  rig.feed(kNominal, 107, 108);  // 8th
  CHECK_FALSE(rig.relay.blocked());
  CHECK(rig.count(RelayEventKind::Unblock) == 1);
}

TEST_CASE("baseline: trips once on a sustained fault, never again") {
  Rig rig;
  const auto source = faulted_from(0.5);
  rig.feed(source, 0, 8000);  // 2 s, fault from 0.5 s

  REQUIRE(rig.relay.tripped());
  REQUIRE(rig.count(RelayEventKind::Trip) == 1);
  const double trip_s = double(*rig.relay.first_event_time(RelayEventKind::Trip)) * 1e-6;
  CHECK(trip_s > 0.5);
  CHECK(trip_s < 0.56);  // pickup plus one cycle of persistence
}

TEST_CASE("baseline: a blocked relay never trips, whatever the data says") {
  RelaySettings settings;
  Rig rig(settings);
  rig.feed(kNominal, 0, 1000);

  // conflicting duplicate forces the block
  SvFrame stale = frame_at(999, kNominal);
  stale.asdu.channels[ChIa].value += 1000;
  rig.relay.on_sv_frame(stale, 1000 * kPeriodUs);
  REQUIRE(rig.relay.blocked());

  // hard fault data arrives while blocked; keep re-poisoning so the
  // hysteresis never clears, and verify no trip ever fires
  const auto source = faulted_from(0.25);
  for (uint64_t k = 1000; k < 5000; ++k) {
    rig.relay.on_sv_frame(frame_at(k, source), k * kPeriodUs);
    if (k % 4 == 0) {
      SvFrame poison = frame_at(k, source);
      poison.asdu.channels[ChIa].value += 777;
      rig.relay.on_sv_frame(poison, k * kPeriodUs + 10);
    }
  }
  CHECK(rig.relay.blocked());
  CHECK_FALSE(rig.relay.tripped());
  CHECK(rig.count(RelayEventKind::Trip) == 0);
}

TEST_CASE("resilience: dual validation truth table") {
  RelaySettings settings;
  settings.resilience_mode = true;
  settings.teleprotection.enabled = true;

  SUBCASE("forged SV alone (binary false) does not trip") {
    Rig rig(settings);
    const auto source = faulted_from(0.1);
    rig.feed(source, 0, 4000);
    CHECK_FALSE(rig.relay.tripped());
  }

  SUBCASE("binary plus local SV fault trips") {
    Rig rig(settings);
    rig.relay.on_mu_binary(true, 0);
    const auto source = faulted_from(0.1);
    rig.feed(source, 0, 4000);
    CHECK(rig.relay.tripped());
    CHECK(rig.relay.mu_binary());
  }

  SUBCASE("binary plus permissive trips without any SV fault") {
    Rig rig(settings);
    rig.feed(kNominal, 0, 1000);
    rig.relay.on_mu_binary(true, 1000 * kPeriodUs);
    CHECK_FALSE(rig.relay.tripped());
    rig.relay.on_teleprotection_permissive(1001 * kPeriodUs);
    CHECK(rig.relay.tripped());
  }

  SUBCASE("permissive alone (binary false) does not trip") {
    Rig rig(settings);
    rig.feed(kNominal, 0, 1000);
    rig.relay.on_teleprotection_permissive(1000 * kPeriodUs);
    CHECK_FALSE(rig.relay.tripped());
  }

  SUBCASE("blocked relay still trips through binary + teleprotection") {
    Rig rig(settings);
    rig.feed(kNominal, 0, 500, SmpSynch::None);
    REQUIRE(rig.relay.blocked());
    rig.relay.on_mu_binary(true, 500 * kPeriodUs);
    rig.relay.on_teleprotection_permissive(501 * kPeriodUs);
    CHECK(rig.relay.tripped());
  }
}

TEST_CASE("resilience: every trip implies the binary input was true") {
  RelaySettings settings;
  settings.resilience_mode = true;
  Rig rig(settings);
  const auto source = faulted_from(0.1);
  rig.relay.on_mu_binary(true, 0);
  rig.feed(source, 0, 2000);
  REQUIRE(rig.relay.tripped());
  CHECK(rig.relay.mu_binary());
}

TEST_CASE("teleprotection: permissive latch expires after the hold time") {
  RelaySettings settings;
  settings.resilience_mode = true;
  Rig rig(settings);
  rig.feed(kNominal, 0, 100);

  rig.relay.on_teleprotection_permissive(100 * kPeriodUs);
  // binary arrives after the hold expired: no trip
  const uint64_t expiry = 100 * kPeriodUs + settings.teleprotection.hold_us;
  rig.relay.on_mu_binary(true, expiry + 1);
  CHECK_FALSE(rig.relay.tripped());

  // fresh permissive while binary is high: trip
  rig.relay.on_teleprotection_permissive(expiry + 1000);
  CHECK(rig.relay.tripped());
}

TEST_CASE("teleprotection: sender fires on sustained local fault, refreshes while held") {
  RelaySettings settings;
  settings.teleprotection.enabled = true;
  Rig rig(settings);
  std::vector<uint64_t> sent;
  rig.relay.set_permissive_sender([&](uint64_t t) { sent.push_back(t); });

  rig.feed(kNominal, 0, 2000);
  CHECK(sent.empty());

  const auto source = faulted_from(0.5);
  rig.feed(source, 2000, 8000);
  REQUIRE_FALSE(sent.empty());
  // first send at element assertion: fault onset + pickup + persistence
  CHECK(sent.front() >= 2000 * kPeriodUs);
  CHECK(sent.front() <= uint64_t(0.55e6));
  // refreshed at half the hold cadence afterwards
  for (size_t k = 1; k < sent.size(); ++k)
    CHECK(sent[k] - sent[k - 1] >= settings.teleprotection.hold_us / 2);
  CHECK(sent.size() >= 2);
}
