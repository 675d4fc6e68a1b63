#pragma once

#include "ipop/common/ipv4_address.hpp"
#include "ipop/overlay/node_address.hpp"

namespace ipop::resolver {

using VirtualIp = Ipv4Address;

/// SHA-1 of the four raw address bytes, read as a big-endian ring address.
overlay::NodeAddress direct_map(VirtualIp ip);

/// SHA-1 of arbitrary bytes as a ring address.
overlay::NodeAddress hash_to_address(ByteView data);

} // namespace ipop::resolver
