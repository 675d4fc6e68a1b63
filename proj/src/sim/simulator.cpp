#include "ipop/sim/simulator.hpp"

#include "ipop/resolver/direct_map.hpp"
#include "ipop/transport/channel.hpp"
#include "ipop/vnet/ethernet.hpp"
#include "ipop/vnet/icmp.hpp"
#include "ipop/vnet/packet_error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ipop::sim {

using overlay::NodeAddress;
using transport::Endpoint;

namespace {

constexpr std::uint16_t kNodePort = 5000;
constexpr std::size_t kRelayInnerOffset = transport::kHeaderSize + 1 + NodeAddress::kBytes;

// Offset of the IPv4 packet carried by an IP-tunnel envelope, directly or
// inside a relay wrapper.
std::optional<std::size_t> tunneled_ip_offset(ByteView d)
{
    if (d.size() < transport::kHeaderSize) return std::nullopt;
    if (d[5] == static_cast<std::uint8_t>(transport::PayloadType::IpTunnel)) return transport::kHeaderSize;
    if (d[5] == static_cast<std::uint8_t>(transport::PayloadType::OverlayControl) &&
        d.size() > transport::kHeaderSize && d[transport::kHeaderSize] == 6 &&
        d.size() >= kRelayInnerOffset + transport::kHeaderSize &&
        d[kRelayInnerOffset + 5] == static_cast<std::uint8_t>(transport::PayloadType::IpTunnel))
        return kRelayInnerOffset + transport::kHeaderSize;
    return std::nullopt;
}

std::uint32_t be32(ByteView d, std::size_t at)
{
    return (std::uint32_t{d[at]} << 24) | (std::uint32_t{d[at + 1]} << 16) | (std::uint32_t{d[at + 2]} << 8) |
           d[at + 3];
}

// (source ip, destination ip, identification) of a raw IPv4 header.
std::optional<std::tuple<std::uint32_t, std::uint32_t, std::uint16_t>> ip_key(ByteView d, std::size_t at)
{
    if (d.size() < at + vnet::kIpv4MinHeader) return std::nullopt;
    auto ident = static_cast<std::uint16_t>((d[at + 4] << 8) | d[at + 5]);
    return std::tuple{be32(d, at + 12), be32(d, at + 16), ident};
}

const char* state_name(overlay::OverlayNode::State s)
{
    switch (s) {
    case overlay::OverlayNode::State::Idle: return "idle";
    case overlay::OverlayNode::State::Joining: return "joining";
    case overlay::OverlayNode::State::Joined: return "joined";
    case overlay::OverlayNode::State::Stopped: return "stopped";
    }
    return "?";
}

} // namespace

class Simulator::Env final : public transport::NodeEnvironment {
public:
    Env(Simulator& sim, std::size_t index, Endpoint local, Rng rng)
        : sim_(sim), index_(index), local_(local), rng_(std::move(rng))
    {
    }

    TimePoint now() const override { return sim_.queue_.now(); }
    void send(const Endpoint& to, Bytes datagram) override { sim_.transmit(index_, to, std::move(datagram)); }
    void schedule(Micros delay, std::function<void()> fn) override
    {
        sim_.queue_.schedule_after(delay, [this, fn = std::move(fn)] {
            if (sim_.alive(index_)) fn();
        });
    }
    Endpoint local_endpoint() const override { return local_; }
    Rng& rng() override { return rng_; }

private:
    Simulator& sim_;
    std::size_t index_;
    Endpoint local_;
    Rng rng_;
};

struct Simulator::SimNode {
    NodeSpec spec;
    Endpoint local;
    std::optional<nat::NatDevice> nat;
    std::unique_ptr<Env> env;
    std::unique_ptr<node::IpopNode> ipop; // destroyed before env
    std::map<VirtualIp, std::unique_ptr<vnet::HostStack>> stacks;
    bool alive = true;
};

Simulator::Simulator(Scenario scenario)
    : scenario_(std::move(scenario)), rng_(scenario_.seed), workload_rng_(Rng(scenario_.seed).fork(0x776f726b))
{
    scenario_.validate();
    const auto n = static_cast<std::int64_t>(scenario_.nodes.size());
    warmup_end_ = scenario_.join_interval * (n == 0 ? 0 : n - 1) + scenario_.settle;
}

Simulator::~Simulator() = default;

node::IpopNode& Simulator::node(std::size_t i) { return *nodes_.at(i)->ipop; }
const node::IpopNode& Simulator::node(std::size_t i) const { return *nodes_.at(i)->ipop; }
bool Simulator::alive(std::size_t i) const { return nodes_.at(i)->alive; }
const nat::NatDevice* Simulator::nat_of(std::size_t i) const
{
    const auto& n = nodes_.at(i)->nat;
    return n ? &*n : nullptr;
}
Endpoint Simulator::local_endpoint(std::size_t i) const { return nodes_.at(i)->local; }

std::optional<std::size_t> Simulator::owner_of(VirtualIp ip) const
{
    auto it = vip_owner_.find(ip);
    if (it == vip_owner_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> Simulator::node_at(Ipv4Address ip) const
{
    auto it = by_public_ip_.find(ip.value());
    if (it == by_public_ip_.end()) return std::nullopt;
    return it->second;
}

// ---------------------------------------------------------------- build

void Simulator::build()
{
    if (built_) return;
    built_ = true;

    node::IpopConfig cfg;
    cfg.mode = scenario_.mode;
    cfg.subnet = scenario_.subnet;
    cfg.payload_mtu = scenario_.payload_mtu;
    cfg.overlay = scenario_.overlay;
    cfg.dht = scenario_.dht;

    const auto n = scenario_.nodes.size();
    std::map<VirtualIp, std::size_t> spec_owner;
    for (std::size_t i = 0; i < n; ++i)
        for (auto ip : scenario_.nodes[i].vips) spec_owner[ip] = i;
    for (const auto& link : scenario_.links) {
        auto a = spec_owner.at(link.a);
        auto b = spec_owner.at(link.b);
        overrides_[{a, b}] = link.profile;
        overrides_[{b, a}] = link.profile;
    }

    for (std::size_t i = 0; i < n; ++i) {
        auto sn = std::make_unique<SimNode>();
        sn->spec = scenario_.nodes[i];
        const auto offset = static_cast<std::uint32_t>(i + 1);
        if (sn->spec.nat) {
            sn->local = Endpoint{Ipv4Address(Ipv4Address(172, 16, 0, 0).value() + offset), kNodePort};
            Ipv4Address pub(Ipv4Address(100, 96, 0, 0).value() + offset);
            sn->nat.emplace(*sn->spec.nat, pub);
            by_public_ip_[pub.value()] = i;
        } else {
            Ipv4Address pub = sn->spec.public_ip.value_or(Ipv4Address(Ipv4Address(100, 64, 0, 0).value() + offset));
            sn->local = Endpoint{pub, kNodePort};
            by_public_ip_[pub.value()] = i;
        }
        sn->env = std::make_unique<Env>(*this, i, sn->local, rng_.fork(i));
        NodeAddress address = scenario_.mode == node::ResolutionMode::Direct
                                  ? resolver::direct_map(sn->spec.vips.front())
                                  : NodeAddress::random(sn->env->rng());
        sn->ipop = std::make_unique<node::IpopNode>(address, *sn->env, cfg);
        nodes_.push_back(std::move(sn));
    }

    for (std::size_t i = 0; i < n; ++i) {
        auto& ipop = *nodes_[i]->ipop;
        auto& ov = ipop.overlay();
        ov.on_joined = [this, i, prev = ov.on_joined] {
            if (prev) prev();
            MetricsLog::Record r;
            r["type"] = "join";
            r["t_us"] = now().count();
            r["node"] = i;
            r["address"] = node(i).overlay().address().to_hex();
            log_.append(std::move(r));
        };
        ov.on_route = [this, i](const transport::BrunetPacket& pkt, const overlay::RoutingDecision& d) {
            if (d.kind != overlay::RoutingDecision::Kind::Forward) return;
            ++counters_.forward_decisions;
            const auto& self = node(i).overlay().address();
            if (!(overlay::ring_distance(d.next, pkt.dst) < overlay::ring_distance(self, pkt.dst)))
                ++counters_.monotone_violations;
        };
        ov.on_drop = [this](const transport::BrunetPacket& pkt, overlay::DropKind kind) {
            if (pkt.type != transport::PayloadType::IpTunnel) return;
            if (auto key = ip_key(pkt.payload, 0)) {
                auto it = origin_keys_.find(*key);
                if (it != origin_keys_.end()) mark_dropped(it->second, overlay::to_string(kind));
            }
        };
        ipop.inject = [this, i](vnet::HostInterface& iface, Bytes frame) { inject(i, iface.ip, std::move(frame)); };
        for (auto ip : nodes_[i]->spec.vips) add_host(i, ip);
    }

    // The first bootstrap starts the ring; everyone else joins through it.
    std::size_t first = 0;
    while (!scenario_.nodes[first].bootstrap) ++first;
    const Endpoint bootstrap = nodes_[first]->local;
    std::vector<std::size_t> order{first};
    for (std::size_t i = 0; i < n; ++i)
        if (i != first) order.push_back(i);
    for (std::size_t slot = 0; slot < order.size(); ++slot) {
        const auto i = order[slot];
        queue_.schedule_at(scenario_.join_interval * static_cast<std::int64_t>(slot), [this, i, first, bootstrap] {
            if (!alive(i)) return;
            node(i).start(i == first ? std::nullopt : std::optional<Endpoint>(bootstrap));
        });
    }
}

void Simulator::add_host(std::size_t idx, VirtualIp ip)
{
    auto& sn = *nodes_[idx];
    auto& iface = sn.ipop->add_host(ip);
    auto stack = std::make_unique<vnet::HostStack>(iface, scenario_.subnet);
    stack->on_echo_reply = [this, ip](const vnet::EchoReply& r) {
        finish_echo(EchoKey{ip.value(), r.peer.value(), r.seq}, r.received_at);
    };
    stack->on_bulk = [this, ip](VirtualIp src, std::size_t bytes, TimePoint t) { bulk_received(src, ip, bytes, t); };
    sn.stacks[ip] = std::move(stack);
    vip_owner_[ip] = idx;
}

void Simulator::remove_host(std::size_t idx, VirtualIp ip)
{
    auto& sn = *nodes_[idx];
    sn.stacks.erase(ip);
    sn.ipop->remove_host(ip);
    auto it = vip_owner_.find(ip);
    if (it != vip_owner_.end() && it->second == idx) vip_owner_.erase(it);
}

// ---------------------------------------------------------------- wire

transport::SimulatedChannel& Simulator::channel(std::size_t from, std::size_t to)
{
    auto& slot = channels_[{from, to}];
    if (!slot) {
        auto ov = overrides_.find({from, to});
        const auto& profile = ov != overrides_.end() ? ov->second : scenario_.default_link;
        slot = std::make_unique<transport::SimulatedChannel>(
            queue_, profile, rng_, [this, to](Bytes d, const transport::DeliveryInfo& info) {
                arrive(to, std::move(d), info);
            });
        slot->on_drop = [this](std::uint64_t tag) {
            auto it = meta_.find(tag);
            if (it == meta_.end()) return;
            if (it->second.trace) mark_dropped(it->second.trace, "loss");
            meta_.erase(it);
        };
    }
    return *slot;
}

void Simulator::transmit(std::size_t from, const Endpoint& to, Bytes datagram)
{
    queue_.schedule_after(scenario_.processing_delay, [this, from, to, d = std::move(datagram)]() mutable {
        depart(from, to, std::move(d));
    });
}

void Simulator::depart(std::size_t from, const Endpoint& to, Bytes datagram)
{
    auto& sn = *nodes_[from];
    if (!sn.alive) return;
    const std::uint64_t trace = trace_of(datagram);
    if (auto off = tunneled_ip_offset(datagram)) {
        ++counters_.tunnel_payloads_checked;
        try {
            (void)vnet::parse_ipv4(ByteView(datagram).subspan(*off));
        } catch (const vnet::PacketError&) {
            ++counters_.overlay_non_ip_payloads;
        }
    }

    auto dst = node_at(to.ip);
    if (!dst) {
        ++counters_.unroutable;
        if (trace) mark_dropped(trace, "unroutable");
        return;
    }
    const Endpoint src = sn.nat ? sn.nat->outbound(sn.local, to, now()) : sn.local;
    const auto tag = ++next_meta_;
    meta_[tag] = Meta{src, to, trace};
    try {
        channel(from, *dst).send(std::move(datagram), tag);
    } catch (const transport::ChannelError&) {
        meta_.erase(tag);
        ++counters_.oversize;
        if (trace) mark_dropped(trace, "oversize");
    }
}

void Simulator::arrive(std::size_t at, Bytes datagram, const transport::DeliveryInfo& info)
{
    auto it = meta_.find(info.tag);
    if (it == meta_.end()) return;
    const Meta meta = it->second;
    meta_.erase(it);

    auto& sn = *nodes_[at];
    if (!sn.alive) {
        ++counters_.dead_drops;
        if (meta.trace) mark_dropped(meta.trace, "dead_node");
        return;
    }
    if (sn.nat && !sn.nat->inbound(meta.to, meta.from, now())) {
        ++counters_.nat_filtered;
        if (meta.trace) mark_dropped(meta.trace, "nat_filtered");
        return;
    }
    if (meta.trace) {
        auto& tr = traces_.at(meta.trace);
        tr.hops.push_back(PathHop{at, info.latency, info.queueing, info.held});
    }
    sn.ipop->on_datagram(meta.from, datagram);
}

std::uint64_t Simulator::trace_of(ByteView datagram) const
{
    auto off = tunneled_ip_offset(datagram);
    if (!off) return 0;
    auto key = ip_key(datagram, *off);
    if (!key) return 0;
    auto it = origin_keys_.find(*key);
    return it == origin_keys_.end() ? 0 : it->second;
}

void Simulator::mark_dropped(std::uint64_t trace, const char* reason)
{
    auto it = traces_.find(trace);
    if (it != traces_.end() && !it->second.delivered_to && !it->second.dropped) it->second.dropped = reason;
}

// ---------------------------------------------------------------- hosts

void Simulator::inject(std::size_t idx, VirtualIp ip, Bytes frame)
{
    const TimePoint at = now() + scenario_.processing_delay;
    try {
        auto eth = vnet::parse_ethernet(frame);
        if (eth.ethertype == vnet::kEtherTypeIpv4) {
            ++counters_.injections;
            bool ok = eth.src == vnet::kGatewayMac;
            try {
                (void)vnet::parse_ipv4(eth.payload);
            } catch (const vnet::PacketError&) {
                ok = false;
            }
            if (!ok) ++counters_.bad_injections;
            if (auto key = ip_key(eth.payload, 0)) {
                auto t = origin_keys_.find(*key);
                if (t != origin_keys_.end()) {
                    auto& tr = traces_.at(t->second);
                    if (!tr.delivered_to) {
                        tr.delivered_to = idx;
                        tr.delivered_at = at;
                        tr.dropped.reset();
                    }
                }
            }
        }
    } catch (const vnet::PacketError&) {
        ++counters_.bad_injections;
    }

    queue_.schedule_at(at, [this, idx, ip, frame = std::move(frame)]() mutable {
        auto& sn = *nodes_[idx];
        if (!sn.alive) return;
        auto* iface = sn.ipop->host(ip);
        auto stack = sn.stacks.find(ip);
        if (!iface || stack == sn.stacks.end()) return;
        iface->to_host.push_back(std::move(frame));
        stack->second->process_inbound(now());
        drain_host(idx);
    });
}

void Simulator::drain_host(std::size_t idx)
{
    auto& sn = *nodes_[idx];
    for (auto ip : sn.ipop->hosted_ips()) {
        auto* iface = sn.ipop->host(ip);
        while (iface && !iface->from_host.empty()) {
            Bytes frame = std::move(iface->from_host.front());
            iface->from_host.pop_front();
            note_host_frame(idx, frame);
            sn.ipop->handle_host_frame(*iface, frame);
            iface = sn.ipop->host(ip);
        }
    }
}

void Simulator::note_host_frame(std::size_t idx, ByteView frame)
{
    vnet::EthernetFrame eth;
    vnet::Ipv4Packet ip;
    try {
        eth = vnet::parse_ethernet(frame);
        if (eth.ethertype != vnet::kEtherTypeIpv4) return;
        ip = vnet::parse_ipv4(eth.payload);
    } catch (const vnet::PacketError&) {
        return;
    }
    const auto id = ++next_trace_;
    TraceRecord tr;
    tr.id = id;
    tr.origin = idx;
    tr.sent_at = now();
    tr.protocol = ip.protocol;
    traces_.emplace(id, std::move(tr));
    origin_keys_[{ip.src.value(), ip.dst.value(), ip.identification}] = id;

    if (ip.protocol != vnet::kProtoIcmp) return;
    auto echo = vnet::parse_icmp_echo(ip.payload);
    if (!echo) return;
    if (echo->type == vnet::kIcmpEchoRequest) {
        auto it = echo_pending_.find(EchoKey{ip.src.value(), ip.dst.value(), echo->seq});
        if (it != echo_pending_.end() && !it->second.emitted_at) {
            it->second.emitted_at = now();
            it->second.request_trace = id;
        }
    } else if (echo->type == vnet::kIcmpEchoReply) {
        auto it = echo_pending_.find(EchoKey{ip.dst.value(), ip.src.value(), echo->seq});
        if (it != echo_pending_.end() && !it->second.reply_trace) it->second.reply_trace = id;
    }
}

// ---------------------------------------------------------------- ping

void Simulator::ping(VirtualIp src, VirtualIp dst, Micros timeout) { start_echo(src, dst, timeout); }

void Simulator::start_echo(VirtualIp src, VirtualIp dst, Micros timeout)
{
    ++outstanding_;
    const auto seq = next_seq_[src]++;
    const EchoKey key{src.value(), dst.value(), seq};
    echo_pending_[key] = EchoPending{now(), std::nullopt, 0, 0};
    auto owner = owner_of(src);
    if (!owner || !alive(*owner)) {
        finish_echo(key, std::nullopt);
        return;
    }
    queue_.schedule_after(timeout, [this, key] { finish_echo(key, std::nullopt); });
    nodes_[*owner]->stacks.at(src)->ping(dst, seq, now());
    drain_host(*owner);
}

void Simulator::finish_echo(const EchoKey& key, std::optional<TimePoint> received_at)
{
    auto it = echo_pending_.find(key);
    if (it == echo_pending_.end()) return;
    const EchoPending p = it->second;
    echo_pending_.erase(it);
    --outstanding_;

    EchoSample s;
    s.src = VirtualIp(std::get<0>(key));
    s.dst = VirtualIp(std::get<1>(key));
    s.seq = std::get<2>(key);
    s.timed_out = !received_at;
    s.request_trace = p.request_trace;
    s.reply_trace = p.reply_trace;
    if (received_at) s.rtt = *received_at - p.emitted_at.value_or(p.requested_at);
    echoes_.push_back(s);

    MetricsLog::Record r;
    r["type"] = "echo";
    r["t_us"] = now().count();
    r["src"] = s.src.to_string();
    r["dst"] = s.dst.to_string();
    r["seq"] = s.seq;
    r["status"] = s.timed_out ? "timeout" : "ok";
    if (!s.timed_out) {
        r["rtt_us"] = s.rtt.count();
        auto hops = [this](std::uint64_t t) -> std::int64_t {
            auto tr = traces_.find(t);
            return tr == traces_.end() ? 0 : static_cast<std::int64_t>(tr->second.hops.size());
        };
        r["hops_forward"] = hops(s.request_trace);
        r["hops_reverse"] = hops(s.reply_trace);
    }
    log_.append(std::move(r));
}

// ---------------------------------------------------------------- bulk

void Simulator::start_bulk(const BulkWorkload& w)
{
    ++outstanding_;
    BulkState st;
    st.result.src = w.src;
    st.result.dst = w.dst;
    st.result.bytes_requested = w.bytes;
    st.chunk = w.chunk;
    st.window = w.window;
    st.stall_timeout = w.stall_timeout;
    st.last_progress = now();
    bulks_.push_back(std::move(st));
    const auto index = bulks_.size() - 1;
    if (w.bytes == 0) {
        finish_bulk(index);
        return;
    }
    pump_bulk(index);
    queue_.schedule_after(w.stall_timeout, [this, index] { check_bulk(index); });
}

void Simulator::pump_bulk(std::size_t index)
{
    auto& st = bulks_[index];
    auto owner = owner_of(st.result.src);
    if (st.done || !owner || !alive(*owner)) return;
    auto& stack = *nodes_[*owner]->stacks.at(st.result.src);
    while (!st.done && st.in_flight < st.window && st.bytes_sent < st.result.bytes_requested) {
        const auto size = static_cast<std::size_t>(
            std::min<std::uint64_t>(st.chunk, st.result.bytes_requested - st.bytes_sent));
        if (st.result.chunks == 0) st.result.first_send = now();
        st.bytes_sent += size;
        ++st.in_flight;
        ++st.result.chunks;
        // Loopback transfers complete inside send_bulk and may finish st.
        stack.send_bulk(st.result.dst, Bytes(size, 0x5a), now());
    }
    drain_host(*owner);
}

void Simulator::check_bulk(std::size_t index)
{
    auto& st = bulks_[index];
    if (st.done) return;
    if (now() - st.last_progress >= st.stall_timeout) {
        finish_bulk(index);
        return;
    }
    queue_.schedule_at(st.last_progress + st.stall_timeout, [this, index] { check_bulk(index); });
}

void Simulator::bulk_received(VirtualIp src, VirtualIp dst, std::size_t bytes, TimePoint t)
{
    for (std::size_t i = 0; i < bulks_.size(); ++i) {
        auto& st = bulks_[i];
        if (st.done || st.result.src != src || st.result.dst != dst) continue;
        st.result.bytes_delivered += bytes;
        if (st.in_flight > 0) --st.in_flight;
        st.result.last_delivery = t;
        st.last_progress = t;
        if (st.result.bytes_delivered >= st.result.bytes_requested) {
            finish_bulk(i);
        } else if (src != dst) {
            // Defer so the sender reacts on its own event, not inside the receiver's.
            queue_.schedule_after(Micros{0}, [this, i] { pump_bulk(i); });
        }
        return;
    }
}

void Simulator::finish_bulk(std::size_t index)
{
    auto& st = bulks_[index];
    if (st.done) return;
    st.done = true;
    --outstanding_;
    auto& r = st.result;
    r.complete = r.bytes_delivered >= r.bytes_requested;
    const Micros span = r.last_delivery - r.first_send;
    r.throughput_Bps = r.bytes_delivered == 0 || span.count() <= 0
                           ? 0.0
                           : static_cast<double>(r.bytes_delivered) / to_seconds(span);
    bulk_results_.push_back(r);

    MetricsLog::Record rec;
    rec["type"] = "bulk";
    rec["t_us"] = now().count();
    rec["src"] = r.src.to_string();
    rec["dst"] = r.dst.to_string();
    rec["bytes_requested"] = r.bytes_requested;
    rec["bytes_delivered"] = r.bytes_delivered;
    rec["chunks"] = r.chunks;
    rec["complete"] = r.complete;
    rec["duration_us"] = span.count();
    rec["throughput_Bps"] = r.throughput_Bps;
    log_.append(std::move(rec));
}

// ---------------------------------------------------------------- resolver

void Simulator::lookup(std::size_t from, VirtualIp ip, std::function<void(const LookupSample&)> done)
{
    ++outstanding_;
    if (!alive(from)) {
        resolver::LookupResult none;
        finish_lookup(from, ip, none, done);
        return;
    }
    node(from).dht().lookup(ip, [this, from, ip, done](const resolver::LookupResult& result) {
        finish_lookup(from, ip, result, done);
    });
}

void Simulator::finish_lookup(std::size_t from, VirtualIp ip, const resolver::LookupResult& result,
                              const std::function<void(const LookupSample&)>& done)
{
    --outstanding_;
    LookupSample s;
    s.finished_at = now();
    s.querier = from;
    s.ip = ip;
    s.result = result;
    if (auto owner = owner_of(ip)) s.expected = node(*owner).overlay().address();
    s.matches = s.expected && result.status == resolver::LookupStatus::Found && result.owner == *s.expected;
    lookups_.push_back(s);

    MetricsLog::Record r;
    r["type"] = "lookup";
    r["t_us"] = now().count();
    r["node"] = from;
    r["ip"] = ip.to_string();
    r["status"] = resolver::to_string(result.status);
    r["owner"] = result.status == resolver::LookupStatus::Found ? result.owner.to_hex() : "";
    r["from_cache"] = result.from_cache;
    r["matches"] = s.matches;
    log_.append(std::move(r));
    if (done) done(s);
}

void Simulator::migrate(VirtualIp ip, std::size_t to)
{
    auto from = owner_of(ip);
    if (!from || *from == to || !alive(to)) return;
    remove_host(*from, ip);
    add_host(to, ip);

    MetricsLog::Record r;
    r["type"] = "migrate";
    r["t_us"] = now().count();
    r["ip"] = ip.to_string();
    r["from"] = *from;
    r["to"] = to;
    log_.append(std::move(r));
}

// ---------------------------------------------------------------- churn

void Simulator::fail_node(std::size_t i)
{
    auto& sn = *nodes_.at(i);
    if (!sn.alive) return;
    sn.alive = false;
    sn.ipop->stop();
    for (auto it = vip_owner_.begin(); it != vip_owner_.end();)
        it = it->second == i ? vip_owner_.erase(it) : std::next(it);
}

std::vector<std::size_t> Simulator::alive_nodes() const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i]->alive) out.push_back(i);
    return out;
}

std::vector<VirtualIp> Simulator::live_vips() const
{
    std::vector<VirtualIp> out;
    for (const auto& [ip, owner] : vip_owner_)
        if (nodes_[owner]->alive) out.push_back(ip);
    return out;
}

RingReport Simulator::ring_report() const
{
    RingReport rep;
    std::vector<std::pair<NodeAddress, std::size_t>> ring;
    for (auto i : alive_nodes()) ring.emplace_back(node(i).overlay().address(), i);
    std::sort(ring.begin(), ring.end());
    const auto n = ring.size();
    const auto k = std::min(scenario_.overlay.k, n == 0 ? 0 : n - 1);
    rep.nodes = n;
    for (std::size_t pos = 0; pos < n; ++pos) {
        std::set<NodeAddress> want_right, want_left;
        for (std::size_t j = 1; j <= k; ++j) {
            want_right.insert(ring[(pos + j) % n].first);
            want_left.insert(ring[(pos + n - j) % n].first);
        }
        const auto& table = node(ring[pos].second).overlay().table();
        std::set<NodeAddress> have_right(table.near_right().begin(), table.near_right().end());
        std::set<NodeAddress> have_left(table.near_left().begin(), table.near_left().end());
        if (have_right == want_right && have_left == want_left)
            ++rep.consistent;
        else
            rep.inconsistent.push_back(ring[pos].second);
    }
    return rep;
}

void Simulator::start_churn(const ChurnWorkload& w)
{
    ++outstanding_;
    std::vector<std::size_t> candidates;
    std::size_t live = 0;
    for (auto i : alive_nodes()) {
        ++live;
        if (!nodes_[i]->spec.bootstrap) candidates.push_back(i);
    }
    auto count = static_cast<std::size_t>(std::floor(w.fraction * static_cast<double>(live)));
    count = std::min(count, candidates.size());
    for (std::size_t j = 0; j < count; ++j) {
        auto pick = static_cast<std::size_t>(workload_rng_.uniform_int(static_cast<std::int64_t>(j),
                                                                       static_cast<std::int64_t>(candidates.size() - 1)));
        std::swap(candidates[j], candidates[pick]);
    }
    candidates.resize(count);
    std::sort(candidates.begin(), candidates.end());
    for (auto i : candidates) fail_node(i);

    auto report = std::make_shared<ChurnReport>();
    report->failed_at = now();
    report->failed = candidates;

    MetricsLog::Record r;
    r["type"] = "churn";
    r["t_us"] = now().count();
    r["failed"] = candidates;
    log_.append(std::move(r));

    const auto& ov = scenario_.overlay;
    const Micros wait = w.report_after.value_or(ov.keepalive_interval + ov.ping_timeout * (ov.ping_retries + 1) +
                                                scenario_.dht.reregister_interval);
    queue_.schedule_after(wait, [this, report] {
        report->reported_at = now();
        report->ring = ring_report();
        auto queriers = alive_nodes();
        auto ips = live_vips();
        auto remaining = std::make_shared<std::size_t>(queriers.size() * ips.size());
        auto finish = [this, report] {
            churn_reports_.push_back(*report);
            MetricsLog::Record rec;
            rec["type"] = "churn_report";
            rec["t_us"] = now().count();
            rec["failed"] = report->failed.size();
            rec["ring_nodes"] = report->ring.nodes;
            rec["ring_consistent"] = report->ring.consistent;
            rec["ring_consistency"] = report->ring.fraction();
            rec["lookups"] = report->lookups;
            rec["lookups_ok"] = report->lookups_ok;
            rec["lookup_success"] = report->lookup_success();
            log_.append(std::move(rec));
            --outstanding_;
        };
        if (*remaining == 0) {
            finish();
            return;
        }
        for (auto q : queriers)
            for (auto ip : ips)
                lookup(q, ip, [report, remaining, finish](const LookupSample& s) {
                    ++report->lookups;
                    if (s.matches) ++report->lookups_ok;
                    if (--*remaining == 0) finish();
                });
    });
}

void Simulator::start_lookups(const LookupWorkload& w)
{
    std::vector<std::pair<std::size_t, VirtualIp>> pairs;
    auto queriers = alive_nodes();
    auto ips = live_vips();
    if (w.sample) {
        if (!queriers.empty() && !ips.empty())
            for (std::uint32_t j = 0; j < *w.sample; ++j) {
                auto q = queriers[static_cast<std::size_t>(
                    workload_rng_.uniform_int(0, static_cast<std::int64_t>(queriers.size() - 1)))];
                auto ip = ips[static_cast<std::size_t>(
                    workload_rng_.uniform_int(0, static_cast<std::int64_t>(ips.size() - 1)))];
                pairs.emplace_back(q, ip);
            }
    } else {
        for (auto q : queriers)
            for (auto ip : ips) pairs.emplace_back(q, ip);
    }
    for (std::size_t j = 0; j < pairs.size(); ++j) {
        ++outstanding_;
        queue_.schedule_after(w.spacing * static_cast<std::int64_t>(j), [this, p = pairs[j]] {
            --outstanding_;
            lookup(p.first, p.second);
        });
    }
}

void Simulator::start_migrations(const MigrateWorkload& w)
{
    for (const auto& [ip, to_vip] : w.moves) {
        auto to = owner_of(to_vip);
        if (to) migrate(ip, *to);
    }
    auto ips = live_vips();
    auto targets = alive_nodes();
    for (std::uint32_t j = 0; j < w.count && !ips.empty() && targets.size() > 1; ++j) {
        auto pick = static_cast<std::size_t>(workload_rng_.uniform_int(0, static_cast<std::int64_t>(ips.size() - 1)));
        const VirtualIp ip = ips[pick];
        ips.erase(ips.begin() + static_cast<std::ptrdiff_t>(pick));
        const auto from = *owner_of(ip);
        std::size_t to = from;
        while (to == from)
            to = targets[static_cast<std::size_t>(
                workload_rng_.uniform_int(0, static_cast<std::int64_t>(targets.size() - 1)))];
        migrate(ip, to);
    }
}

MetricsLog::Record Simulator::snapshot_record() const
{
    MetricsLog::Record r;
    r["type"] = "snapshot";
    r["t_us"] = now().count();
    auto nodes = MetricsLog::Record::array();
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& ov = node(i).overlay();
        MetricsLog::Record n;
        n["node"] = i;
        n["address"] = ov.address().to_hex();
        n["alive"] = nodes_[i]->alive;
        n["state"] = state_name(ov.state());
        n["connections"] = ov.table().entries().size();
        std::size_t relayed = 0;
        for (const auto& [a, c] : ov.table().entries())
            if (!c.direct()) ++relayed;
        n["relayed"] = relayed;
        n["shortcuts"] = ov.table().shortcuts().size();
        n["leaves"] = ov.leaf_count();
        n["dht_entries"] = node(i).dht().store().entries().size();
        auto near = MetricsLog::Record::array();
        for (const auto& a : ov.table().near_left()) near.push_back(a.short_hex());
        for (const auto& a : ov.table().near_right()) near.push_back(a.short_hex());
        n["near"] = std::move(near);
        nodes.push_back(std::move(n));
    }
    r["nodes"] = std::move(nodes);
    return r;
}

// ---------------------------------------------------------------- run

void Simulator::run_until(TimePoint t)
{
    build();
    queue_.run_until(t);
}

void Simulator::schedule_workload(const Workload& workload)
{
    ++outstanding_;
    std::visit(
        [this](const auto& w) {
            using W = std::decay_t<decltype(w)>;
            if constexpr (std::is_same_v<W, PingWorkload>) {
                for (std::uint32_t j = 0; j < w.count; ++j) {
                    ++outstanding_;
                    queue_.schedule_at(warmup_end_ + w.start + w.interval * static_cast<std::int64_t>(j), [this, w] {
                        --outstanding_;
                        start_echo(w.src, w.dst, w.timeout);
                    });
                }
                queue_.schedule_at(warmup_end_ + w.start, [this] { --outstanding_; });
            } else if constexpr (std::is_same_v<W, RandomPingsWorkload>) {
                for (std::uint32_t j = 0; j < w.count; ++j) {
                    ++outstanding_;
                    queue_.schedule_at(warmup_end_ + w.start + w.interval * static_cast<std::int64_t>(j), [this, w] {
                        --outstanding_;
                        auto ips = live_vips();
                        if (ips.size() < 2) return;
                        auto hi = static_cast<std::int64_t>(ips.size() - 1);
                        auto a = static_cast<std::size_t>(workload_rng_.uniform_int(0, hi));
                        auto b = static_cast<std::size_t>(workload_rng_.uniform_int(0, hi - 1));
                        if (b >= a) ++b;
                        start_echo(ips[a], ips[b], w.timeout);
                    });
                }
                queue_.schedule_at(warmup_end_ + w.start, [this] { --outstanding_; });
            } else if constexpr (std::is_same_v<W, BulkWorkload>) {
                queue_.schedule_at(warmup_end_ + w.start, [this, w] {
                    --outstanding_;
                    start_bulk(w);
                });
            } else if constexpr (std::is_same_v<W, ChurnWorkload>) {
                queue_.schedule_at(warmup_end_ + w.at, [this, w] {
                    --outstanding_;
                    start_churn(w);
                });
            } else if constexpr (std::is_same_v<W, LookupWorkload>) {
                queue_.schedule_at(warmup_end_ + w.at, [this, w] {
                    --outstanding_;
                    start_lookups(w);
                });
            } else if constexpr (std::is_same_v<W, MigrateWorkload>) {
                queue_.schedule_at(warmup_end_ + w.at, [this, w] {
                    --outstanding_;
                    start_migrations(w);
                });
            } else if constexpr (std::is_same_v<W, SnapshotWorkload>) {
                const Micros every = w.every.value_or(seconds(10));
                for (std::uint32_t j = 0; j < w.repeat; ++j) {
                    ++outstanding_;
                    queue_.schedule_at(warmup_end_ + w.at + every * static_cast<std::int64_t>(j), [this] {
                        --outstanding_;
                        log_.append(snapshot_record());
                    });
                }
                queue_.schedule_at(warmup_end_ + w.at, [this] { --outstanding_; });
            }
        },
        workload);
}

const MetricsLog& Simulator::run()
{
    build();
    for (const auto& w : scenario_.workloads) schedule_workload(w);

    if (scenario_.duration) {
        queue_.run_until(warmup_end_ + *scenario_.duration);
    } else {
        queue_.run_until(warmup_end_);
        Micros last_start{};
        for (const auto& w : scenario_.workloads)
            std::visit(
                [&](const auto& x) {
                    using W = std::decay_t<decltype(x)>;
                    Micros s{};
                    if constexpr (requires { x.start; }) s = x.start;
                    if constexpr (requires { x.at; }) s = x.at;
                    if constexpr (std::is_same_v<W, PingWorkload> || std::is_same_v<W, RandomPingsWorkload>)
                        s += x.interval * static_cast<std::int64_t>(x.count);
                    last_start = std::max(last_start, s);
                },
                w);
        const TimePoint cap = warmup_end_ + last_start + seconds(3600);
        while (outstanding_ > 0 && now() < cap) queue_.run_until(now() + seconds(1));
    }

    if (!scenario_.workloads.empty()) {
        if (scenario_.log_packets) {
            for (const auto& [id, tr] : traces_) {
                MetricsLog::Record r;
                r["type"] = "packet";
                r["id"] = id;
                r["origin"] = tr.origin;
                r["sent_us"] = tr.sent_at.count();
                r["protocol"] = tr.protocol;
                auto path = MetricsLog::Record::array();
                for (const auto& h : tr.hops) path.push_back(h.node);
                r["hops"] = tr.hops.size();
                r["path"] = std::move(path);
                if (tr.delivered_to) {
                    r["status"] = "delivered";
                    r["delivered_to"] = *tr.delivered_to;
                    r["delivered_us"] = tr.delivered_at.count();
                } else if (tr.dropped) {
                    r["status"] = "dropped";
                    r["reason"] = *tr.dropped;
                } else {
                    r["status"] = "in_flight";
                }
                log_.append(std::move(r));
            }
        }
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const auto& c = node(i).overlay().counters();
            const auto& ic = node(i).counters();
            MetricsLog::Record r;
            r["type"] = "node";
            r["node"] = i;
            r["alive"] = nodes_[i]->alive;
            r["connections"] = node(i).overlay().table().entries().size();
            r["forwarded"] = c.forwarded;
            r["delivered"] = c.delivered;
            r["ttl_drops"] = c.ttl_drops;
            r["no_route_drops"] = c.no_route_drops;
            r["relayed"] = c.relayed;
            r["links_direct"] = c.links_direct;
            r["links_relayed"] = c.links_relayed;
            r["links_failed"] = c.links_failed;
            r["failures_detected"] = c.failures_detected;
            r["arp_replies"] = ic.arp_replies;
            r["tunneled_out"] = ic.tunneled_out;
            r["tunneled_in"] = ic.tunneled_in;
            r["resolution_failures"] = ic.resolution_failures;
            log_.append(std::move(r));
        }
        append_summary();
    }
    return log_;
}

SimCounters Simulator::counters() const
{
    SimCounters c = counters_;
    for (const auto& [pair, ch] : channels_) {
        c.channel_sent += ch->counters().sent;
        c.channel_delivered += ch->counters().delivered;
        c.channel_dropped += ch->counters().dropped;
        c.channel_in_flight += ch->in_flight();
    }
    return c;
}

void Simulator::append_summary()
{
    const auto c = counters();
    MetricsLog::Record r;
    r["type"] = "summary";
    r["seed"] = scenario_.seed;
    r["nodes"] = nodes_.size();
    r["mode"] = resolver::to_string(scenario_.mode);
    r["t_end_us"] = now().count();

    std::vector<double> rtts;
    std::size_t timeouts = 0;
    for (const auto& e : echoes_) {
        if (e.timed_out)
            ++timeouts;
        else
            rtts.push_back(static_cast<double>(e.rtt.count()));
    }
    const double mean = rtts.empty() ? 0.0 : std::accumulate(rtts.begin(), rtts.end(), 0.0) / static_cast<double>(rtts.size());
    double var = 0.0;
    for (double x : rtts) var += (x - mean) * (x - mean);
    const double stddev = rtts.size() < 2 ? 0.0 : std::sqrt(var / static_cast<double>(rtts.size() - 1));
    r["pings"] = echoes_.size();
    r["pings_ok"] = rtts.size();
    r["ping_timeouts"] = timeouts;
    r["delivery_ratio"] = echoes_.empty() ? 1.0 : static_cast<double>(rtts.size()) / static_cast<double>(echoes_.size());
    r["rtt_mean_us"] = mean;
    r["rtt_stddev_us"] = stddev;

    std::map<std::size_t, std::uint64_t> histogram;
    std::uint64_t delivered = 0, dropped = 0, in_flight = 0, hop_total = 0;
    for (const auto& [id, tr] : traces_) {
        if (tr.delivered_to) {
            ++delivered;
            ++histogram[tr.hops.size()];
            hop_total += tr.hops.size();
        } else if (tr.dropped) {
            ++dropped;
        } else {
            ++in_flight;
        }
    }
    r["packets"] = traces_.size();
    r["packets_delivered"] = delivered;
    r["packets_dropped"] = dropped;
    r["packets_in_flight"] = in_flight;
    r["hop_mean"] = delivered == 0 ? 0.0 : static_cast<double>(hop_total) / static_cast<double>(delivered);
    MetricsLog::Record hist = MetricsLog::Record::object();
    for (const auto& [h, n] : histogram) hist[std::to_string(h)] = n;
    r["hop_histogram"] = std::move(hist);

    r["channel_sent"] = c.channel_sent;
    r["channel_delivered"] = c.channel_delivered;
    r["channel_dropped"] = c.channel_dropped;
    r["channel_in_flight"] = c.channel_in_flight;
    r["nat_filtered"] = c.nat_filtered;
    r["unroutable"] = c.unroutable;
    r["dead_drops"] = c.dead_drops;
    r["forward_decisions"] = c.forward_decisions;
    r["monotone_violations"] = c.monotone_violations;
    r["tunnel_payloads"] = c.tunnel_payloads_checked;
    r["non_ip_tunnel_payloads"] = c.overlay_non_ip_payloads;
    r["injections"] = c.injections;
    r["bad_injections"] = c.bad_injections;

    if (!bulk_results_.empty()) {
        auto bulks = MetricsLog::Record::array();
        for (const auto& b : bulk_results_) {
            MetricsLog::Record x;
            x["src"] = b.src.to_string();
            x["dst"] = b.dst.to_string();
            x["bytes"] = b.bytes_delivered;
            x["complete"] = b.complete;
            x["throughput_Bps"] = b.throughput_Bps;
            bulks.push_back(std::move(x));
        }
        r["bulk"] = std::move(bulks);
    }
    if (!lookups_.empty()) {
        std::size_t ok = 0;
        for (const auto& l : lookups_) ok += l.matches ? 1 : 0;
        r["lookups"] = lookups_.size();
        r["lookups_matching"] = ok;
    }
    if (!churn_reports_.empty()) {
        const auto& last = churn_reports_.back();
        r["churn_ring_consistency"] = last.ring.fraction();
        r["churn_lookup_success"] = last.lookup_success();
    }
    r["ring_consistency"] = ring_report().fraction();
    log_.append(std::move(r));
}

} // namespace ipop::sim
