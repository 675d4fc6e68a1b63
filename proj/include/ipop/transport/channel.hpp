#pragma once

#include <stdexcept>
#include <string>

namespace ipop::transport {

enum class ChannelErrc { Oversize, ChannelClosed };

class ChannelError : public std::runtime_error {
public:
    ChannelError(ChannelErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ChannelErrc code() const { return code_; }

private:
    ChannelErrc code_;
};

inline constexpr std::size_t kSimulatedMtu = 1500;
inline constexpr std::size_t kUdpMaxDatagram = 65507;
inline constexpr std::size_t kStreamMaxFrame = 65535;

} // namespace ipop::transport
