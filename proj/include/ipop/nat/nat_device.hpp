#pragma once

#include "ipop/common/ipv4_address.hpp"
#include "ipop/common/time.hpp"
#include "ipop/transport/endpoint.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string_view>
#include <tuple>

namespace ipop::nat {

using transport::Endpoint;

enum class NatType { FullCone, RestrictedCone, PortRestrictedCone, Symmetric };

std::string_view to_string(NatType type);
// Accepts the scenario spellings: full_cone, restricted_cone,
// port_restricted, symmetric.
std::optional<NatType> parse_nat_type(std::string_view text);

/// One translation entry. Cone types key bindings by internal pair alone;
/// symmetric NATs also key by destination.
struct NatBinding {
    Endpoint internal;
    Endpoint external;
    std::optional<Endpoint> destination; // symmetric only
    std::set<Ipv4Address> permitted_ips;  // restricted cone
    std::set<Endpoint> permitted_pairs;   // port-restricted cone and symmetric
    TimePoint last_used{};
    Micros lifetime{};

    bool expired(TimePoint now) const { return now - last_used > lifetime; }
};

struct NatCounters {
    std::uint64_t outbound = 0;
    std::uint64_t inbound_forwarded = 0;
    std::uint64_t inbound_filtered = 0; // binding live but sender not permitted
    std::uint64_t inbound_unbound = 0;  // no live binding for the external pair
};

/// A NAT box with one public address. External ports are handed out
/// sequentially, so a run is reproducible.
class NatDevice {
public:
    static constexpr std::uint16_t kFirstPort = 40000;
    static constexpr Micros kDefaultLifetime{120'000'000};

    NatDevice(NatType type, Ipv4Address public_ip, Micros lifetime = kDefaultLifetime,
              std::uint16_t first_port = kFirstPort);

    NatType type() const { return type_; }
    Ipv4Address public_ip() const { return public_ip_; }

    // Creates or refreshes the binding and widens its filter; returns the
    // rewritten source endpoint.
    Endpoint outbound(const Endpoint& internal, const Endpoint& remote, TimePoint now);

    // The internal endpoint to deliver to, or nullopt if the packet is
    // filtered. Refreshes the binding on success.
    std::optional<Endpoint> inbound(const Endpoint& external, const Endpoint& sender, TimePoint now);

    // Live binding that `outbound(internal, remote)` would use, if any.
    const NatBinding* binding_for(const Endpoint& internal, const Endpoint& remote, TimePoint now) const;
    std::size_t binding_count() const { return bindings_.size(); }
    const NatCounters& counters() const { return counters_; }

private:
    using Key = std::tuple<Endpoint, std::optional<Endpoint>>;

    Key key_for(const Endpoint& internal, const Endpoint& remote) const;
    bool permits(const NatBinding& b, const Endpoint& sender) const;

    NatType type_;
    Ipv4Address public_ip_;
    Micros lifetime_;
    std::uint16_t next_port_;
    std::map<Key, NatBinding> bindings_;
    std::map<std::uint16_t, Key> by_port_;
    NatCounters counters_;
};

} // namespace ipop::nat
