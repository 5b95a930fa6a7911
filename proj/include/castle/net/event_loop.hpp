#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <vector>

#include "castle/sim_time.hpp"

namespace castle::net {

/// Discrete-event loop over a virtual clock. Events at equal times run in
/// scheduling order, which keeps runs reproducible.
class EventLoop {
 public:
  using Action = std::function<void()>;

  SimTime now() const noexcept { return now_; }

  void schedule(SimTime at, Action fn) { queue_.push(Event{std::max(at, now_), order_++, std::move(fn)}); }

  bool empty() const noexcept { return queue_.empty(); }

  /// Time of the earliest pending event; nullopt when idle.
  std::optional<SimTime> next_time() const {
    if (queue_.empty()) return std::nullopt;
    return queue_.top().at;
  }

  bool step() {
    if (queue_.empty()) return false;
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.at;
    ev.fn();
    return true;
  }

  /// Runs every event scheduled at or before `until`, then parks the clock there.
  void run_until(SimTime until) {
    while (!queue_.empty() && queue_.top().at <= until) step();
    if (now_ < until) now_ = until;
  }

  /// Runs until `done()` holds or the clock would pass `limit`; returns done().
  template <class Pred>
  bool run_while_not(Pred done, SimTime limit) {
    while (!done()) {
      if (queue_.empty() || queue_.top().at > limit) return done();
      step();
    }
    return true;
  }

 private:
  struct Event {
    SimTime at;
    std::uint64_t order;
    Action fn;
    bool operator>(const Event& o) const noexcept { return at != o.at ? at > o.at : order > o.order; }
  };

  SimTime now_ = SimTime::zero();
  std::uint64_t order_ = 0;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
};

}  // namespace castle::net
