#include "ipop/transport/simulated_channel.hpp"

#include <cmath>

namespace ipop::transport {

SimulatedChannel::SimulatedChannel(Scheduler& scheduler, ChannelProfile profile, Rng& rng, Receiver receiver,
                                   std::size_t mtu)
    : scheduler_(scheduler), profile_(std::move(profile)), rng_(rng), receiver_(std::move(receiver)), mtu_(mtu)
{
    profile_.validate();
}

void SimulatedChannel::send(Bytes datagram, std::uint64_t tag)
{
    if (closed_) throw ChannelError(ChannelErrc::ChannelClosed, "send on closed simulated channel");
    if (datagram.size() > mtu_)
        throw ChannelError(ChannelErrc::Oversize, "datagram of " + std::to_string(datagram.size()) +
                                                      " bytes exceeds channel MTU " + std::to_string(mtu_));

    const TimePoint now = scheduler_.now();
    ++counters_.sent;
    counters_.bytes_sent += datagram.size();

    // Draw order is fixed (drop, reorder, latency) so traces replay exactly.
    if (rng_.bernoulli(profile_.drop)) {
        ++counters_.dropped;
        if (on_drop) on_drop(tag);
        return;
    }
    const bool reorder = rng_.bernoulli(profile_.reorder);
    const Micros latency = profile_.latency.sample(rng_);

    TimePoint depart = now;
    if (profile_.bandwidth) {
        TimePoint start = busy_until_ > now ? busy_until_ : now;
        auto tx = static_cast<std::int64_t>(
            std::ceil(static_cast<double>(datagram.size()) * 1e6 / *profile_.bandwidth));
        busy_until_ = start + Micros{tx};
        depart = busy_until_;
    }

    DeliveryInfo info;
    info.sent_at = now;
    info.tag = tag;
    info.latency = latency;
    info.queueing = depart - now;
    info.arrived_at = depart + latency;

    if (held_) {
        // This datagram overtakes the held one, which follows right behind.
        Held h = std::move(*held_);
        held_.reset();
        TimePoint release = info.arrived_at > h.info.arrived_at ? info.arrived_at : h.info.arrived_at;
        deliver_at(info.arrived_at, std::move(datagram), info);
        h.info.held = release - h.info.arrived_at;
        h.info.arrived_at = release;
        deliver_at(release, std::move(h.data), h.info);
        return;
    }

    if (reorder) {
        ++counters_.reordered;
        auto token = ++next_token_;
        held_ = Held{std::move(datagram), info, token};
        scheduler_.schedule_at(info.arrived_at + kReorderHoldLimit, [this, token] {
            if (!held_ || held_->token != token) return;
            Held h = std::move(*held_);
            held_.reset();
            h.info.held = kReorderHoldLimit;
            h.info.arrived_at = scheduler_.now();
            ++counters_.delivered;
            receiver_(std::move(h.data), h.info);
        });
        return;
    }

    deliver_at(info.arrived_at, std::move(datagram), info);
}

void SimulatedChannel::deliver_at(TimePoint when, Bytes data, DeliveryInfo info)
{
    scheduler_.schedule_at(when, [this, data = std::move(data), info]() mutable {
        ++counters_.delivered;
        receiver_(std::move(data), info);
    });
}

} // namespace ipop::transport
