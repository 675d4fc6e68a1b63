#include "ipop/nat/nat_device.hpp"

#include <stdexcept>

namespace ipop::nat {

std::string_view to_string(NatType type)
{
    switch (type) {
    case NatType::FullCone: return "full_cone";
    case NatType::RestrictedCone: return "restricted_cone";
    case NatType::PortRestrictedCone: return "port_restricted";
    case NatType::Symmetric: return "symmetric";
    }
    return "unknown";
}

std::optional<NatType> parse_nat_type(std::string_view text)
{
    for (auto t : {NatType::FullCone, NatType::RestrictedCone, NatType::PortRestrictedCone, NatType::Symmetric})
        if (text == to_string(t)) return t;
    return std::nullopt;
}

NatDevice::NatDevice(NatType type, Ipv4Address public_ip, Micros lifetime, std::uint16_t first_port)
    : type_(type), public_ip_(public_ip), lifetime_(lifetime), next_port_(first_port)
{
}

NatDevice::Key NatDevice::key_for(const Endpoint& internal, const Endpoint& remote) const
{
    if (type_ == NatType::Symmetric) return {internal, remote};
    return {internal, std::nullopt};
}

Endpoint NatDevice::outbound(const Endpoint& internal, const Endpoint& remote, TimePoint now)
{
    ++counters_.outbound;
    const Key key = key_for(internal, remote);
    auto it = bindings_.find(key);
    if (it != bindings_.end() && it->second.expired(now)) {
        by_port_.erase(it->second.external.port);
        bindings_.erase(it);
        it = bindings_.end();
    }
    if (it == bindings_.end()) {
        if (next_port_ == 0) throw std::runtime_error("NAT device ran out of external ports");
        NatBinding b;
        b.internal = internal;
        b.external = Endpoint{public_ip_, next_port_++};
        if (type_ == NatType::Symmetric) b.destination = remote;
        b.lifetime = lifetime_;
        by_port_[b.external.port] = key;
        it = bindings_.emplace(key, std::move(b)).first;
    }
    NatBinding& b = it->second;
    b.last_used = now;
    switch (type_) {
    case NatType::FullCone: break;
    case NatType::RestrictedCone: b.permitted_ips.insert(remote.ip); break;
    case NatType::PortRestrictedCone:
    case NatType::Symmetric: b.permitted_pairs.insert(remote); break;
    }
    return b.external;
}

bool NatDevice::permits(const NatBinding& b, const Endpoint& sender) const
{
    switch (type_) {
    case NatType::FullCone: return true;
    case NatType::RestrictedCone: return b.permitted_ips.count(sender.ip) != 0;
    case NatType::PortRestrictedCone:
    case NatType::Symmetric: return b.permitted_pairs.count(sender) != 0;
    }
    return false;
}

std::optional<Endpoint> NatDevice::inbound(const Endpoint& external, const Endpoint& sender, TimePoint now)
{
    auto port = by_port_.find(external.port);
    if (external.ip != public_ip_ || port == by_port_.end()) {
        ++counters_.inbound_unbound;
        return std::nullopt;
    }
    NatBinding& b = bindings_.at(port->second);
    if (b.expired(now)) {
        ++counters_.inbound_unbound;
        return std::nullopt;
    }
    if (!permits(b, sender)) {
        ++counters_.inbound_filtered;
        return std::nullopt;
    }
    b.last_used = now;
    ++counters_.inbound_forwarded;
    return b.internal;
}

const NatBinding* NatDevice::binding_for(const Endpoint& internal, const Endpoint& remote, TimePoint now) const
{
    auto it = bindings_.find(key_for(internal, remote));
    if (it == bindings_.end() || it->second.expired(now)) return nullptr;
    return &it->second;
}

} // namespace ipop::nat
