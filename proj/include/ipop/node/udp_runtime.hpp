#pragma once

#include "ipop/transport/environment.hpp"
#include "ipop/transport/udp_channel.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <vector>

namespace ipop::node {

/// Runs a node on a real UDP socket: a single-threaded loop that waits for
/// datagrams until the next timer is due.
class UdpRuntime final : public transport::NodeEnvironment {
public:
    using Receiver = std::function<void(const transport::Endpoint&, ByteView)>;

    UdpRuntime(const transport::Endpoint& bind_to, std::uint64_t seed);

    TimePoint now() const override;
    void send(const transport::Endpoint& to, Bytes datagram) override;
    void schedule(Micros delay, std::function<void()> fn) override;
    transport::Endpoint local_endpoint() const override { return socket_.local(); }
    Rng& rng() override { return rng_; }

    void set_receiver(Receiver receiver) { receiver_ = std::move(receiver); }

    // Runs until `duration` has elapsed or `done` returns true.
    void run_for(Micros duration, const std::function<bool()>& done = {});

    std::uint64_t send_errors() const { return send_errors_; }

    // Taps for tracing raw traffic.
    std::function<void(const transport::Endpoint&, ByteView)> on_send;
    std::function<void(const transport::Endpoint&, ByteView)> on_receive;

private:
    struct Timer {
        TimePoint when;
        std::uint64_t seq;
        std::function<void()> fn;
    };
    struct Later {
        bool operator()(const Timer& a, const Timer& b) const
        {
            return a.when != b.when ? a.when > b.when : a.seq > b.seq;
        }
    };

    void run_due_timers();

    transport::UdpChannel socket_;
    Rng rng_;
    std::chrono::steady_clock::time_point epoch_;
    std::vector<Timer> timers_;
    std::uint64_t next_seq_ = 0;
    std::uint64_t send_errors_ = 0;
    Receiver receiver_;
};

} // namespace ipop::node
