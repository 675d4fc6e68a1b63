#pragma once

#include "ipop/common/time.hpp"
#include "ipop/vnet/host_interface.hpp"
#include "ipop/vnet/ipv4.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

namespace ipop::vnet {

struct EchoReply {
    VirtualIp peer;
    std::uint16_t id = 0;
    std::uint16_t seq = 0;
    TimePoint received_at{};
};

struct HostStackCounters {
    std::uint64_t frames_in = 0;
    std::uint64_t frames_out = 0;
    std::uint64_t arp_requests = 0;
    std::uint64_t bad_framing = 0;   // injected frame without gateway src / interface dst
    std::uint64_t bad_checksum = 0;  // injected IPv4 that failed validation
    std::uint64_t echo_requests_answered = 0;
};

/// A minimal host IP stack sitting behind a HostInterface: ARP client
/// with a cache, ICMP echo responder and pinger, and a byte sink for the
/// bulk workload. It treats the whole virtual subnet as on-link, so it
/// ARPs for every destination and relies on IPOP answering.
class HostStack {
public:
    static constexpr std::size_t kEchoDataSize = 56;

    HostStack(HostInterface& iface, Subnet subnet);

    VirtualIp ip() const { return iface_.ip; }
    std::uint16_t echo_id() const { return static_cast<std::uint16_t>(iface_.ip.value() & 0xffff); }

    // Sends an echo request. Pings to our own address are answered by the
    // loopback path at once and never reach the interface.
    void ping(VirtualIp dst, std::uint16_t seq, TimePoint now);
    void send_bulk(VirtualIp dst, Bytes chunk, TimePoint now);
    void send_ip(VirtualIp dst, std::uint8_t protocol, Bytes payload, TimePoint now);

    // Consumes everything queued toward the host.
    void process_inbound(TimePoint now);

    std::function<void(const EchoReply&)> on_echo_reply;
    std::function<void(VirtualIp src, std::size_t bytes, TimePoint now)> on_bulk;

    const HostStackCounters& counters() const { return counters_; }

private:
    void transmit(Ipv4Packet packet, TimePoint now);
    void emit_frame(const MacAddress& dst, std::uint16_t ethertype, Bytes payload);
    void handle_ip(const Ipv4Packet& packet, TimePoint now);
    VirtualIp next_hop_ip(VirtualIp dst) const;

    HostInterface& iface_;
    Subnet subnet_;
    std::uint16_t next_ident_ = 1;
    std::map<VirtualIp, MacAddress> arp_cache_;
    std::map<VirtualIp, std::vector<Ipv4Packet>> awaiting_arp_;
    HostStackCounters counters_;
};

} // namespace ipop::vnet
