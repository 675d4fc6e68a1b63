#include "ipop/resolver/direct_map.hpp"

#include <openssl/sha.h>

#include <array>

namespace ipop::resolver {

overlay::NodeAddress hash_to_address(ByteView data)
{
    std::array<unsigned char, SHA_DIGEST_LENGTH> digest{};
    SHA1(data.data(), data.size(), digest.data());
    return overlay::NodeAddress::from_bytes(ByteView(digest.data(), digest.size()));
}

overlay::NodeAddress direct_map(VirtualIp ip)
{
    const std::uint32_t v = ip.value();
    const std::array<std::uint8_t, 4> raw{static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16),
                                          static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
    return hash_to_address(raw);
}

} // namespace ipop::resolver
