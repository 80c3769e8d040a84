#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <queue>
#include <string>
#include <vector>

#include "procbus/event_log.hpp"
#include "procbus/pcap.hpp"

namespace procbus {

// Deterministic discrete-event process bus. Single-threaded by contract:
// node callbacks run inside advance() and interact only through the queue.

using PortId = uint32_t;

struct FrameEnvelope {
  std::vector<uint8_t> bytes;
  PortId ingress = 0;        // sending port
  uint64_t timestamp_us = 0; // send time for taps, delivery time at receivers
};

// A tap handler may modify, drop, delay, or multiply frames crossing its
// link. delay_us is added on top of the nominal link latency.
struct TapOutput {
  std::vector<uint8_t> bytes;
  uint64_t delay_us = 0;
};
using TapHandler = std::function<std::vector<TapOutput>(const FrameEnvelope&)>;

using FrameCallback = std::function<void(const FrameEnvelope&)>;

struct FabricConfig {
  uint64_t link_latency_us = 5;
  bool allow_hot_attach = false;
};

class Fabric {
 public:
  explicit Fabric(FabricConfig config = {}, EventLog* log = nullptr)
      : config_(config), log_(log) {}

  // Ports. Attach before the first advance() unless hot attach is enabled.
  PortId attach(const std::string& name);
  PortId attach(const std::string& name, PortId wanted);
  void set_receiver(PortId port, FrameCallback cb);

  // Multicast flood: every other port receives the frame at send time plus
  // link latency, subject to taps on the traversed links.
  void send(std::vector<uint8_t> bytes, PortId from, uint64_t at_us);
  void send(std::vector<uint8_t> bytes, PortId from) { send(std::move(bytes), from, now_); }

  // One tap per link; the link is the unordered port pair.
  void insert_tap(PortId a, PortId b, TapHandler handler);

  // Out-of-band timer, also used for tap-exempt direct channels.
  void schedule(uint64_t at_us, std::function<void()> fn);

  // Runs every queued event with time <= until_us in (time, insertion)
  // order, then sets now to until_us. Returns the log entries recorded
  // while advancing.
  std::vector<LogEntry> advance(uint64_t until_us);

  uint64_t now() const { return now_; }
  uint64_t link_latency_us() const { return config_.link_latency_us; }

  // Mirror of everything delivered to one chosen port.
  void enable_capture(PortId port);
  const PcapWriter& capture() const { return capture_; }

  uint64_t frames_sent() const { return frames_sent_; }
  uint64_t frames_delivered() const { return frames_delivered_; }

 private:
  struct Port {
    std::string name;
    FrameCallback receiver;
  };

  struct Event {
    uint64_t t_us;
    uint64_t seq;
    std::function<void()> fn;
  };
  struct EventAfter {
    bool operator()(const Event& a, const Event& b) const {
      if (a.t_us != b.t_us) return a.t_us > b.t_us;
      return a.seq > b.seq;
    }
  };

  static uint64_t link_key(PortId a, PortId b);
  void deliver(PortId dest, std::vector<uint8_t> bytes, PortId from, uint64_t at_us);

  FabricConfig config_;
  EventLog* log_ = nullptr;
  std::map<PortId, Port> ports_;
  PortId next_port_id_ = 0;
  std::map<uint64_t, TapHandler> taps_;
  std::priority_queue<Event, std::vector<Event>, EventAfter> queue_;
  uint64_t seq_ = 0;
  uint64_t now_ = 0;
  bool running_ = false;
  PcapWriter capture_;
  bool capture_enabled_ = false;
  PortId capture_port_ = 0;
  uint64_t frames_sent_ = 0;
  uint64_t frames_delivered_ = 0;
};

}  // namespace procbus
