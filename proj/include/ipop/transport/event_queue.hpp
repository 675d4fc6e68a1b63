#pragma once

#include "ipop/transport/scheduler.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace ipop::transport {

/// Deterministic discrete-event scheduler. Events run in (time, insertion
/// order); time never moves backwards.
class EventQueue final : public Scheduler {
public:
    TimePoint now() const override { return now_; }
    void schedule_at(TimePoint when, std::function<void()> fn) override;

    // Runs the earliest event. Returns false when the queue is empty.
    bool step();
    // Runs every event scheduled at or before `until`, then parks the clock
    // at `until`.
    void run_until(TimePoint until);
    void run();

    bool empty() const { return heap_.empty(); }
    std::size_t pending() const { return heap_.size(); }
    std::uint64_t executed() const { return executed_; }

private:
    struct Event {
        TimePoint when;
        std::uint64_t seq;
        std::function<void()> fn;
    };
    struct Later {
        bool operator()(const Event& a, const Event& b) const
        {
            return a.when != b.when ? a.when > b.when : a.seq > b.seq;
        }
    };

    std::vector<Event> heap_;
    TimePoint now_{};
    std::uint64_t next_seq_ = 0;
    std::uint64_t executed_ = 0;
};

} // namespace ipop::transport
