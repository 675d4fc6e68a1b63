#include "ipop/nat/simultaneous_open.hpp"

#include "ipop/transport/event_queue.hpp"

#include <array>
#include <memory>

namespace ipop::nat {

std::vector<Micros> RetrySchedule::draw(Rng& rng) const
{
    std::vector<Micros> out;
    for (int i = 0; i < attempts; ++i) {
        Micros offset = spacing * i;
        if (i > 0 && jitter.count() > 0) offset += Micros{rng.uniform_int(-jitter.count(), jitter.count())};
        out.push_back(offset);
    }
    return out;
}

namespace {

enum class Kind { Register, Observed, Request, Ack };

struct Message {
    Kind kind;
    Endpoint observed; // for Observed
};

struct Host {
    Endpoint local;
    std::unique_ptr<NatDevice> nat;
    Endpoint learned; // own translated endpoint as seen by the rendezvous
};

class PunchWorld {
public:
    PunchWorld(std::optional<NatType> a, std::optional<NatType> b, Micros one_way)
        : one_way_(one_way)
    {
        init(hosts_[0], a, Ipv4Address(2, 0, 0, 1), Ipv4Address(192, 168, 1, 2));
        init(hosts_[1], b, Ipv4Address(3, 0, 0, 1), Ipv4Address(192, 168, 2, 2));
    }

    OpenResult run(const RetrySchedule& schedule, Rng& rng)
    {
        for (int side = 0; side < 2; ++side) send(side, kRendezvous, {Kind::Register, {}});
        queue_.run_until(one_way_ * 4);

        const TimePoint start = queue_.now();
        start_ = start;
        for (int side = 0; side < 2; ++side) {
            for (Micros offset : schedule.draw(rng)) {
                queue_.schedule_at(start + offset, [this, side] {
                    if (result_.outcome == OpenOutcome::Connected) return;
                    ++result_.requests_sent;
                    send(side, hosts_[1 - side].learned, {Kind::Request, {}});
                });
            }
        }
        queue_.run_until(start + schedule.budget());
        return result_;
    }

private:
    static constexpr int kRendezvousSide = 2;
    static inline const Endpoint kRendezvous{Ipv4Address(1, 0, 0, 1), 5000};

    static void init(Host& h, std::optional<NatType> type, Ipv4Address public_ip, Ipv4Address private_ip)
    {
        if (type) {
            h.nat = std::make_unique<NatDevice>(*type, public_ip);
            h.local = Endpoint{private_ip, 5000};
        } else {
            h.local = Endpoint{public_ip, 5000};
        }
        h.learned = h.local;
    }

    // side 0/1 are the hosts, kRendezvousSide the public rendezvous.
    void send(int side, const Endpoint& to, Message msg)
    {
        Endpoint from = kRendezvous;
        if (side != kRendezvousSide) {
            Host& h = hosts_[side];
            from = h.nat ? h.nat->outbound(h.local, to, queue_.now()) : h.local;
        }
        queue_.schedule_after(one_way_, [this, from, to, msg] { arrive(from, to, msg); });
    }

    void arrive(const Endpoint& from, const Endpoint& to, const Message& msg)
    {
        if (to == kRendezvous) {
            if (msg.kind == Kind::Register) send(kRendezvousSide, from, {Kind::Observed, from});
            return;
        }
        for (int side = 0; side < 2; ++side) {
            Host& h = hosts_[side];
            const Ipv4Address public_ip = h.nat ? h.nat->public_ip() : h.local.ip;
            if (to.ip != public_ip) continue;
            if (h.nat && !h.nat->inbound(to, from, queue_.now())) return;
            if (!h.nat && to != h.local) return;
            handle(side, from, msg);
            return;
        }
    }

    void handle(int side, const Endpoint& from, const Message& msg)
    {
        switch (msg.kind) {
        case Kind::Observed: hosts_[side].learned = msg.observed; break;
        case Kind::Request: send(side, from, {Kind::Ack, {}}); break;
        case Kind::Ack:
            if (result_.outcome != OpenOutcome::Connected) {
                result_.outcome = OpenOutcome::Connected;
                result_.elapsed = queue_.now() - start_;
            }
            break;
        case Kind::Register: break;
        }
    }

    Micros one_way_;
    transport::EventQueue queue_;
    std::array<Host, 2> hosts_;
    TimePoint start_{};
    OpenResult result_;
};

} // namespace

OpenResult simultaneous_open(std::optional<NatType> a, std::optional<NatType> b, std::uint64_t seed,
                             const RetrySchedule& schedule, Micros one_way)
{
    Rng rng(seed);
    PunchWorld world(a, b, one_way);
    return world.run(schedule, rng);
}

} // namespace ipop::nat
