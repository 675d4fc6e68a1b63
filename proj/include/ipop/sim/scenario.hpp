#pragma once

#include "ipop/nat/nat_device.hpp"
#include "ipop/node/ipop_node.hpp"
#include "ipop/transport/channel_profile.hpp"

#include <json.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace ipop::sim {

using vnet::VirtualIp;

/// A scenario that cannot be run. `field()` is the JSON path at fault,
/// e.g. "nodes[3].vip".
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& message)
        : std::runtime_error(field + ": " + message), field_(std::move(field))
    {
    }
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

struct NodeSpec {
    std::vector<VirtualIp> vips;
    std::optional<nat::NatType> nat;
    bool bootstrap = false;
    std::optional<Ipv4Address> public_ip;
};

struct LinkOverride {
    VirtualIp a;
    VirtualIp b;
    transport::ChannelProfile profile;
};

// Workload times are offsets from the end of warm-up (all joins plus the
// settle period).
struct PingWorkload {
    VirtualIp src;
    VirtualIp dst;
    std::uint32_t count = 1000;
    Micros interval = millis(100);
    Micros start{};
    Micros timeout = seconds(5);
};

struct RandomPingsWorkload {
    std::uint32_t count = 10000;
    Micros interval = millis(1);
    Micros start{};
    Micros timeout = seconds(5);
};

struct BulkWorkload {
    VirtualIp src;
    VirtualIp dst;
    std::uint64_t bytes = 13'090'000;
    std::size_t chunk = 1332;
    std::size_t window = 64; // chunks sent but not yet received
    Micros start{};
    Micros stall_timeout = seconds(30);
};

struct ChurnWorkload {
    double fraction = 0.1;
    Micros at{};
    std::optional<Micros> report_after; // default: detection bound plus one re-registration period
};

struct LookupWorkload {
    Micros at{};
    Micros spacing = millis(1);
    // Lookups issued by every live node for every registered ip, or this
    // many random (node, ip) pairs.
    std::optional<std::uint32_t> sample;
};

struct MigrateWorkload {
    std::uint32_t count = 0; // random ips, random new owners
    std::vector<std::pair<VirtualIp, VirtualIp>> moves; // (ip, vip of a node hosting the destination)
    Micros at{};
};

struct SnapshotWorkload {
    Micros at{};
    std::optional<Micros> every;
    std::uint32_t repeat = 1;
};

using Workload = std::variant<PingWorkload, RandomPingsWorkload, BulkWorkload, ChurnWorkload, LookupWorkload,
                              MigrateWorkload, SnapshotWorkload>;

struct Scenario {
    std::uint64_t seed = 1;
    node::ResolutionMode mode = node::ResolutionMode::Direct;
    vnet::Subnet subnet = vnet::kDefaultSubnet;
    std::size_t payload_mtu = vnet::kDefaultPayloadMtu;
    overlay::OverlayConfig overlay{};
    resolver::DhtConfig dht{};
    Micros processing_delay{500};
    Micros join_interval = millis(500);
    Micros settle = seconds(60);
    std::optional<Micros> duration; // after warm-up; default runs until workloads finish
    bool log_packets = true;

    transport::ChannelProfile default_link{transport::LatencyModel::constant(millis(5)), 0.0, 0.0, std::nullopt};
    std::vector<LinkOverride> links;
    std::vector<NodeSpec> nodes;
    std::vector<Workload> workloads;

    // Throws ConfigError naming the first offending field.
    void validate() const;

    static Scenario from_json(const nlohmann::json& doc);
    static Scenario from_file(const std::string& path);
};

transport::ChannelProfile parse_profile(const nlohmann::json& doc, const std::string& field);

} // namespace ipop::sim
