#include "ipop/transport/udp_channel.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <system_error>
#include <utility>

namespace ipop::transport {

namespace {

sockaddr_in to_sockaddr(const Endpoint& e)
{
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(e.port);
    sa.sin_addr.s_addr = htonl(e.ip.value());
    return sa;
}

Endpoint from_sockaddr(const sockaddr_in& sa)
{
    return Endpoint{Ipv4Address(ntohl(sa.sin_addr.s_addr)), ntohs(sa.sin_port)};
}

} // namespace

UdpChannel::UdpChannel(const Endpoint& bind_to)
{
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd_ < 0) throw std::system_error(errno, std::generic_category(), "socket");
    auto sa = to_sockaddr(bind_to);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0) {
        int err = errno;
        ::close(fd_);
        fd_ = -1;
        throw std::system_error(err, std::generic_category(), "bind " + bind_to.to_string());
    }
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    local_ = from_sockaddr(bound);
}

UdpChannel::~UdpChannel() { close(); }

UdpChannel::UdpChannel(UdpChannel&& other) noexcept
    : fd_(std::exchange(other.fd_, -1)), local_(other.local_)
{
}

UdpChannel& UdpChannel::operator=(UdpChannel&& other) noexcept
{
    if (this != &other) {
        close();
        fd_ = std::exchange(other.fd_, -1);
        local_ = other.local_;
    }
    return *this;
}

void UdpChannel::close()
{
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

void UdpChannel::send(const Endpoint& to, ByteView datagram)
{
    if (fd_ < 0) throw ChannelError(ChannelErrc::ChannelClosed, "send on closed UDP channel");
    if (datagram.size() > kUdpMaxDatagram)
        throw ChannelError(ChannelErrc::Oversize, "datagram exceeds UDP limit");
    auto sa = to_sockaddr(to);
    // UDP is lossy anyway; transient send errors are treated as drops.
    ::sendto(fd_, datagram.data(), datagram.size(), 0, reinterpret_cast<sockaddr*>(&sa), sizeof sa);
}

std::optional<Datagram> UdpChannel::receive(Micros timeout)
{
    if (fd_ < 0) throw ChannelError(ChannelErrc::ChannelClosed, "receive on closed UDP channel");
    pollfd pfd{fd_, POLLIN, 0};
    int ms = static_cast<int>((timeout.count() + 999) / 1000);
    int rc = ::poll(&pfd, 1, ms);
    if (rc <= 0 || !(pfd.revents & POLLIN)) return std::nullopt;

    Datagram d;
    d.data.resize(65536);
    sockaddr_in from{};
    socklen_t len = sizeof from;
    auto n = ::recvfrom(fd_, d.data.data(), d.data.size(), 0, reinterpret_cast<sockaddr*>(&from), &len);
    if (n < 0) return std::nullopt;
    d.data.resize(static_cast<std::size_t>(n));
    d.from = from_sockaddr(from);
    return d;
}

} // namespace ipop::transport
