#include "ipop/node/udp_runtime.hpp"

#include <algorithm>
#include <system_error>

namespace ipop::node {

UdpRuntime::UdpRuntime(const transport::Endpoint& bind_to, std::uint64_t seed)
    : socket_(bind_to), rng_(seed), epoch_(std::chrono::steady_clock::now())
{
}

TimePoint UdpRuntime::now() const
{
    return std::chrono::duration_cast<Micros>(std::chrono::steady_clock::now() - epoch_);
}

void UdpRuntime::send(const transport::Endpoint& to, Bytes datagram)
{
    if (on_send) on_send(to, datagram);
    try {
        socket_.send(to, datagram);
    } catch (const transport::ChannelError&) {
        ++send_errors_;
    } catch (const std::system_error&) {
        ++send_errors_;
    }
}

void UdpRuntime::schedule(Micros delay, std::function<void()> fn)
{
    timers_.push_back(Timer{now() + delay, next_seq_++, std::move(fn)});
    std::push_heap(timers_.begin(), timers_.end(), Later{});
}

void UdpRuntime::run_due_timers()
{
    const TimePoint t = now();
    while (!timers_.empty() && timers_.front().when <= t) {
        std::pop_heap(timers_.begin(), timers_.end(), Later{});
        Timer timer = std::move(timers_.back());
        timers_.pop_back();
        timer.fn();
    }
}

void UdpRuntime::run_for(Micros duration, const std::function<bool()>& done)
{
    const TimePoint deadline = now() + duration;
    while (now() < deadline) {
        run_due_timers();
        if (done && done()) return;
        TimePoint wake = deadline;
        if (!timers_.empty()) wake = std::min(wake, timers_.front().when);
        Micros wait = std::max(Micros{0}, wake - now());
        if (auto dgram = socket_.receive(std::min(wait, Micros{50'000}))) {
            if (on_receive) on_receive(dgram->from, dgram->data);
            if (receiver_) receiver_(dgram->from, dgram->data);
            if (done && done()) return;
        }
    }
}

} // namespace ipop::node
