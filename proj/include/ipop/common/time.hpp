#pragma once

#include <chrono>
#include <cstdint>

namespace ipop {

// Simulated and real time are both carried as integer microseconds since an
// arbitrary epoch (simulation start, or process start for real nodes).
using Micros = std::chrono::microseconds;
using TimePoint = std::chrono::microseconds;

constexpr Micros millis(std::int64_t ms) { return Micros{ms * 1000}; }
constexpr Micros seconds(std::int64_t s) { return Micros{s * 1000000}; }

inline double to_seconds(Micros d) { return static_cast<double>(d.count()) / 1e6; }

} // namespace ipop
