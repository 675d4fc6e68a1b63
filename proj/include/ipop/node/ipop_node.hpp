#pragma once

#include "ipop/overlay/overlay_node.hpp"
#include "ipop/resolver/dht_service.hpp"
#include "ipop/vnet/host_interface.hpp"
#include "ipop/vnet/ipv4.hpp"
#include "ipop/vnet/tunnel.hpp"

#include <deque>
#include <functional>
#include <map>
#include <memory>

namespace ipop::node {

using resolver::ResolutionMode;
using vnet::VirtualIp;

struct IpopConfig {
    ResolutionMode mode = ResolutionMode::Direct;
    vnet::Subnet subnet = vnet::kDefaultSubnet;
    std::size_t payload_mtu = vnet::kDefaultPayloadMtu;
    std::size_t pending_limit = 1u << 16; // packets held per ip while resolving
    overlay::OverlayConfig overlay{};
    resolver::DhtConfig dht{};
};

struct IpopCounters {
    std::uint64_t frames_from_host = 0;
    std::uint64_t frames_to_host = 0;
    std::uint64_t arp_replies = 0;
    std::uint64_t non_ip_dropped = 0; // RARP and anything else that is not IPv4 or ARP
    std::uint64_t bad_frames = 0;
    std::uint64_t bad_ip = 0;
    std::uint64_t outside_subnet = 0;
    std::uint64_t local_deliveries = 0;
    std::uint64_t tunneled_out = 0;
    std::uint64_t tunneled_in = 0;
    std::uint64_t not_hosted = 0;
    std::uint64_t bad_tunnel_payload = 0;
    std::uint64_t oversize = 0;
    std::uint64_t resolution_failures = 0;
    std::uint64_t pending_overflow = 0;
};

/// The IPOP router for one overlay node: captures frames from its hosted
/// interfaces, answers ARP locally, resolves destinations, tunnels IPv4
/// over the overlay and injects arriving packets back into the right
/// interface.
class IpopNode {
public:
    using Injector = std::function<void(vnet::HostInterface&, Bytes frame)>;

    IpopNode(overlay::NodeAddress address, transport::NodeEnvironment& env, IpopConfig config = {});
    IpopNode(const IpopNode&) = delete;
    IpopNode& operator=(const IpopNode&) = delete;

    void start(std::optional<transport::Endpoint> bootstrap);
    void stop();

    // Hosts an interface for `ip`; in BrunetArp mode the ip is registered.
    vnet::HostInterface& add_host(VirtualIp ip);
    // Stops hosting `ip` (the VM left, e.g. migrated away).
    void remove_host(VirtualIp ip);
    vnet::HostInterface* host(VirtualIp ip);
    std::vector<VirtualIp> hosted_ips() const;

    void on_datagram(const transport::Endpoint& from, ByteView bytes) { overlay_.on_datagram(from, bytes); }
    // One frame read from a hosted interface.
    void handle_host_frame(vnet::HostInterface& iface, ByteView frame);
    // Drains every interface's outbound queue.
    void poll_hosts();

    overlay::OverlayNode& overlay() { return overlay_; }
    const overlay::OverlayNode& overlay() const { return overlay_; }
    resolver::DhtService& dht() { return dht_; }
    const resolver::DhtService& dht() const { return dht_; }
    const IpopCounters& counters() const { return counters_; }
    const IpopConfig& config() const { return config_; }

    // Where frames for hosts go. Defaults to appending to the interface's
    // to_host queue.
    Injector inject;
    // Every IP-tunnel envelope delivered to this node, before decapsulation.
    std::function<void(const transport::BrunetPacket&)> on_tunnel;
    // Resolution outcome for each destination lookup, for tracing.
    std::function<void(VirtualIp, const resolver::LookupResult&)> on_resolved;

private:
    void route_ip(vnet::Ipv4Packet packet, ByteView raw);
    void send_tunneled(const overlay::NodeAddress& dst, ByteView raw);
    void deliver_tunneled(const transport::BrunetPacket& pkt);
    void inject_ip(vnet::HostInterface& iface, ByteView raw);

    transport::NodeEnvironment& env_;
    IpopConfig config_;
    overlay::OverlayNode overlay_;
    resolver::DhtService dht_;
    std::map<VirtualIp, std::unique_ptr<vnet::HostInterface>> hosts_;
    std::map<VirtualIp, std::deque<Bytes>> awaiting_resolution_;
    IpopCounters counters_;
};

} // namespace ipop::node
