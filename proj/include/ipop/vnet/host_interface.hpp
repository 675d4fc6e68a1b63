#pragma once

#include "ipop/common/bytes.hpp"
#include "ipop/vnet/addresses.hpp"

#include <deque>

namespace ipop::vnet {

/// Stand-in for the tap device: a MAC/IP identity plus one frame queue per
/// direction. `to_host` is filled by IPOP and drained by the host stack;
/// `from_host` the other way round. Each queue has one producer and one
/// consumer.
struct HostInterface {
    MacAddress mac;
    VirtualIp ip;
    std::deque<Bytes> to_host;
    std::deque<Bytes> from_host;

    HostInterface() = default;
    explicit HostInterface(VirtualIp address) : mac(MacAddress::for_interface(address)), ip(address) {}
};

} // namespace ipop::vnet
