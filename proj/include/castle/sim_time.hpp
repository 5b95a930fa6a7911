#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>

namespace castle {

/// Simulated (or monotonic) time since session start, microsecond resolution.
using SimTime = std::chrono::duration<std::int64_t, std::micro>;

inline SimTime from_ms(double ms) { return SimTime{static_cast<std::int64_t>(std::llround(ms * 1000.0))}; }

inline double to_ms(SimTime t) { return static_cast<double>(t.count()) / 1000.0; }

inline double to_seconds(SimTime t) { return static_cast<double>(t.count()) / 1e6; }

}  // namespace castle
