#pragma once

#include "ipop/common/bytes.hpp"
#include "ipop/transport/channel.hpp"
#include "ipop/transport/channel_profile.hpp"
#include "ipop/transport/scheduler.hpp"

#include <cstdint>
#include <functional>
#include <optional>

namespace ipop::transport {

struct ChannelCounters {
    std::uint64_t sent = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
    std::uint64_t reordered = 0;
    std::uint64_t bytes_sent = 0;
};

/// Timing of one delivered datagram, reported with it so that callers can
/// account for every microsecond of a path.
struct DeliveryInfo {
    TimePoint sent_at{};
    TimePoint arrived_at{};
    Micros latency{};     // sampled propagation delay
    Micros queueing{};    // wait behind earlier datagrams plus serialization
    Micros held{};        // extra delay from being reordered
    std::uint64_t tag = 0; // caller's label, passed through untouched
};

/// One direction of a simulated link. Delivery happens through the
/// scheduler after the sampled latency; drop and reorder decisions come
/// from the shared seeded generator, so a run is reproducible.
///
/// Reordering holds a datagram back until the next one is sent and then
/// delivers it immediately after that one. A held datagram with no
/// follower is released kReorderHoldLimit after its natural arrival.
class SimulatedChannel {
public:
    using Receiver = std::function<void(Bytes, const DeliveryInfo&)>;

    static constexpr Micros kReorderHoldLimit{10000};

    SimulatedChannel(Scheduler& scheduler, ChannelProfile profile, Rng& rng, Receiver receiver,
                     std::size_t mtu = kSimulatedMtu);

    void send(Bytes datagram, std::uint64_t tag = 0);
    void close() { closed_ = true; }
    bool closed() const { return closed_; }

    const ChannelCounters& counters() const { return counters_; }
    std::uint64_t in_flight() const { return counters_.sent - counters_.delivered - counters_.dropped; }
    const ChannelProfile& profile() const { return profile_; }

    // Told about every datagram the loss model discards.
    std::function<void(std::uint64_t tag)> on_drop;

private:
    struct Held {
        Bytes data;
        DeliveryInfo info;
        std::uint64_t token;
    };

    void deliver_at(TimePoint when, Bytes data, DeliveryInfo info);

    Scheduler& scheduler_;
    ChannelProfile profile_;
    Rng& rng_;
    Receiver receiver_;
    std::size_t mtu_;
    bool closed_ = false;
    TimePoint busy_until_{};
    std::optional<Held> held_;
    std::uint64_t next_token_ = 0;
    ChannelCounters counters_;
};

} // namespace ipop::transport
