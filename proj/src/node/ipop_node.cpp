#include "ipop/node/ipop_node.hpp"

#include "ipop/vnet/arp.hpp"
#include "ipop/vnet/ethernet.hpp"
#include "ipop/vnet/packet_error.hpp"

namespace ipop::node {

using transport::PayloadType;

IpopNode::IpopNode(overlay::NodeAddress address, transport::NodeEnvironment& env, IpopConfig config)
    : env_(env), config_(config), overlay_(address, env, config.overlay), dht_(overlay_, env, config.dht)
{
    inject = [](vnet::HostInterface& iface, Bytes frame) { iface.to_host.push_back(std::move(frame)); };
    overlay_.set_handler(PayloadType::IpTunnel, [this](const transport::BrunetPacket& p) { deliver_tunneled(p); });
    overlay_.set_handler(PayloadType::Dht, [this](const transport::BrunetPacket& p) { dht_.on_packet(p); });
    overlay_.on_joined = [this] { dht_.on_joined(); };
    overlay_.on_table_changed = [this] { dht_.check_handoff(); };
    overlay_.on_stabilize = [this] { dht_.check_handoff(); };
}

void IpopNode::start(std::optional<transport::Endpoint> bootstrap) { overlay_.start(bootstrap); }

void IpopNode::stop()
{
    overlay_.stop();
    dht_.stop();
}

vnet::HostInterface& IpopNode::add_host(VirtualIp ip)
{
    auto& slot = hosts_[ip];
    if (!slot) slot = std::make_unique<vnet::HostInterface>(ip);
    if (config_.mode == ResolutionMode::BrunetArp) dht_.register_ip(ip);
    return *slot;
}

void IpopNode::remove_host(VirtualIp ip)
{
    hosts_.erase(ip);
    dht_.unregister_ip(ip);
}

vnet::HostInterface* IpopNode::host(VirtualIp ip)
{
    auto it = hosts_.find(ip);
    return it == hosts_.end() ? nullptr : it->second.get();
}

std::vector<VirtualIp> IpopNode::hosted_ips() const
{
    std::vector<VirtualIp> out;
    for (const auto& [ip, iface] : hosts_) out.push_back(ip);
    return out;
}

void IpopNode::poll_hosts()
{
    for (auto& [ip, iface] : hosts_) {
        while (!iface->from_host.empty()) {
            Bytes frame = std::move(iface->from_host.front());
            iface->from_host.pop_front();
            handle_host_frame(*iface, frame);
        }
    }
}

void IpopNode::handle_host_frame(vnet::HostInterface& iface, ByteView frame)
{
    ++counters_.frames_from_host;
    vnet::EthernetFrame eth;
    try {
        eth = vnet::parse_ethernet(frame);
    } catch (const vnet::PacketError&) {
        ++counters_.bad_frames;
        return;
    }

    if (eth.ethertype == vnet::kEtherTypeArp) {
        // ARP is answered here and never crosses the overlay.
        if (auto reply = vnet::handle_arp(eth, iface)) {
            ++counters_.arp_replies;
            ++counters_.frames_to_host;
            inject(iface, vnet::serialize_ethernet(*reply));
        }
        return;
    }
    if (eth.ethertype != vnet::kEtherTypeIpv4) {
        ++counters_.non_ip_dropped;
        return;
    }

    vnet::Ipv4Packet packet;
    try {
        packet = vnet::parse_ipv4(eth.payload);
    } catch (const vnet::PacketError&) {
        ++counters_.bad_ip;
        return;
    }
    const std::size_t length = std::min<std::size_t>(packet.total_length, eth.payload.size());
    route_ip(std::move(packet), ByteView(eth.payload).first(length));
}

void IpopNode::route_ip(vnet::Ipv4Packet packet, ByteView raw)
{
    const VirtualIp dst = packet.dst;
    if (auto* local = host(dst)) {
        ++counters_.local_deliveries;
        inject_ip(*local, raw);
        return;
    }
    if (!config_.subnet.contains(dst)) {
        ++counters_.outside_subnet;
        return;
    }
    if (raw.size() > config_.payload_mtu) {
        ++counters_.oversize;
        return;
    }
    if (config_.mode == ResolutionMode::Direct) {
        send_tunneled(resolver::direct_map(dst), raw);
        return;
    }

    auto& queue = awaiting_resolution_[dst];
    if (queue.size() >= config_.pending_limit) {
        ++counters_.pending_overflow;
        return;
    }
    queue.emplace_back(raw.begin(), raw.end());
    if (queue.size() > 1) return;

    resolver::resolve(dst, config_.mode, &dht_, [this, dst](const resolver::LookupResult& result) {
        if (on_resolved) on_resolved(dst, result);
        auto it = awaiting_resolution_.find(dst);
        if (it == awaiting_resolution_.end()) return;
        auto packets = std::move(it->second);
        awaiting_resolution_.erase(it);
        if (result.status != resolver::LookupStatus::Found) {
            counters_.resolution_failures += packets.size();
            return;
        }
        for (const auto& p : packets) send_tunneled(result.owner, p);
    });
}

void IpopNode::send_tunneled(const overlay::NodeAddress& dst, ByteView raw)
{
    if (dst == overlay_.address()) {
        // Resolved to ourselves but not hosted here (stale entry).
        ++counters_.not_hosted;
        return;
    }
    ++counters_.tunneled_out;
    overlay_.send_routed(PayloadType::IpTunnel, dst, Bytes(raw.begin(), raw.end()));
}

void IpopNode::deliver_tunneled(const transport::BrunetPacket& pkt)
{
    if (on_tunnel) on_tunnel(pkt);
    vnet::Ipv4Packet packet;
    try {
        packet = vnet::decapsulate(pkt);
    } catch (const vnet::PacketError&) {
        ++counters_.bad_tunnel_payload;
        return;
    }
    auto* iface = host(packet.dst);
    if (!iface) {
        ++counters_.not_hosted;
        return;
    }
    ++counters_.tunneled_in;
    const std::size_t length = std::min<std::size_t>(packet.total_length, pkt.payload.size());
    inject_ip(*iface, ByteView(pkt.payload).first(length));
}

void IpopNode::inject_ip(vnet::HostInterface& iface, ByteView raw)
{
    vnet::EthernetFrame frame;
    frame.dst = iface.mac;
    frame.src = vnet::kGatewayMac;
    frame.ethertype = vnet::kEtherTypeIpv4;
    frame.payload.assign(raw.begin(), raw.end());
    ++counters_.frames_to_host;
    inject(iface, vnet::serialize_ethernet(frame));
}

} // namespace ipop::node
