#pragma once

#include "ipop/common/bytes.hpp"
#include "ipop/common/time.hpp"
#include "ipop/transport/channel.hpp"
#include "ipop/transport/endpoint.hpp"

#include <optional>

namespace ipop::transport {

struct Datagram {
    Endpoint from;
    Bytes data;
};

/// A bound IPv4 UDP socket. Bind failures throw std::system_error.
class UdpChannel {
public:
    explicit UdpChannel(const Endpoint& bind_to);
    ~UdpChannel();

    UdpChannel(const UdpChannel&) = delete;
    UdpChannel& operator=(const UdpChannel&) = delete;
    UdpChannel(UdpChannel&& other) noexcept;
    UdpChannel& operator=(UdpChannel&& other) noexcept;

    Endpoint local() const { return local_; }
    int fd() const { return fd_; }

    void send(const Endpoint& to, ByteView datagram);
    // Waits up to timeout; nullopt on timeout.
    std::optional<Datagram> receive(Micros timeout);
    void close();

private:
    int fd_ = -1;
    Endpoint local_;
};

} // namespace ipop::transport
