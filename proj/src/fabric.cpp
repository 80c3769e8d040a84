#include "procbus/fabric.hpp"

#include <stdexcept>

namespace procbus {

uint64_t Fabric::link_key(PortId a, PortId b) {
  if (a > b) std::swap(a, b);
  return (uint64_t(a) << 32) | b;
}

PortId Fabric::attach(const std::string& name) {
  while (ports_.count(next_port_id_)) ++next_port_id_;
  return attach(name, next_port_id_);
}

PortId Fabric::attach(const std::string& name, PortId wanted) {
  if (running_ && !config_.allow_hot_attach)
    throw std::logic_error("fabric: attach after start without hot-attach");
  if (ports_.count(wanted))
    throw std::logic_error("fabric: duplicate port id " + std::to_string(wanted));
  ports_[wanted] = Port{name, nullptr};
  if (log_) log_->record(now_, "fabric", "attach", {{"port", wanted}, {"name", name}});
  return wanted;
}

void Fabric::set_receiver(PortId port, FrameCallback cb) {
  auto it = ports_.find(port);
  if (it == ports_.end()) throw std::logic_error("fabric: unknown port");
  it->second.receiver = std::move(cb);
}

void Fabric::insert_tap(PortId a, PortId b, TapHandler handler) {
  if (!ports_.count(a) || !ports_.count(b))
    throw std::logic_error("fabric: tap on unattached port");
  const uint64_t key = link_key(a, b);
  if (taps_.count(key)) throw std::logic_error("fabric: link already tapped");
  taps_[key] = std::move(handler);
  if (log_) log_->record(now_, "fabric", "tap_insert", {{"a", a}, {"b", b}});
}

void Fabric::schedule(uint64_t at_us, std::function<void()> fn) {
  if (at_us < now_) throw std::logic_error("fabric: schedule in the past");
  queue_.push(Event{at_us, seq_++, std::move(fn)});
}

void Fabric::deliver(PortId dest, std::vector<uint8_t> bytes, PortId from, uint64_t at_us) {
  schedule(at_us, [this, dest, bytes = std::move(bytes), from, at_us]() {
    ++frames_delivered_;
    if (capture_enabled_ && dest == capture_port_) capture_.add(at_us, bytes);
    const auto& port = ports_.at(dest);
    if (port.receiver) port.receiver(FrameEnvelope{bytes, from, at_us});
  });
}

void Fabric::send(std::vector<uint8_t> bytes, PortId from, uint64_t at_us) {
  if (!ports_.count(from)) throw std::logic_error("fabric: send from unattached port");
  if (at_us < now_) throw std::logic_error("fabric: send in the past");
  ++frames_sent_;

  const FrameEnvelope envelope{bytes, from, at_us};
  for (const auto& [id, port] : ports_) {
    if (id == from) continue;
    const uint64_t base = at_us + config_.link_latency_us;
    auto tap = taps_.find(link_key(from, id));
    if (tap != taps_.end()) {
      for (auto& out : tap->second(envelope))
        deliver(id, std::move(out.bytes), from, base + out.delay_us);
    } else {
      deliver(id, bytes, from, base);
    }
  }
}

std::vector<LogEntry> Fabric::advance(uint64_t until_us) {
  if (until_us < now_) throw std::logic_error("fabric: advance backwards");
  running_ = true;
  const size_t log_start = log_ ? log_->size() : 0;

  while (!queue_.empty() && queue_.top().t_us <= until_us) {
    // top() only exposes const access; the event is popped before running
    // so handlers may schedule freely.
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.t_us;
    ev.fn();
  }
  now_ = until_us;

  if (!log_) return {};
  return {log_->entries().begin() + std::ptrdiff_t(log_start), log_->entries().end()};
}

void Fabric::enable_capture(PortId port) {
  if (!ports_.count(port)) throw std::logic_error("fabric: capture on unattached port");
  capture_enabled_ = true;
  capture_port_ = port;
}

}  // namespace procbus
