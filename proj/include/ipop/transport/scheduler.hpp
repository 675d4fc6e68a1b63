#pragma once

#include "ipop/common/time.hpp"

#include <functional>

namespace ipop::transport {

/// Anything that can run a callback at a point in (simulated) time.
class Scheduler {
public:
    virtual ~Scheduler() = default;
    virtual TimePoint now() const = 0;
    virtual void schedule_at(TimePoint when, std::function<void()> fn) = 0;

    void schedule_after(Micros delay, std::function<void()> fn) { schedule_at(now() + delay, std::move(fn)); }
};

} // namespace ipop::transport
