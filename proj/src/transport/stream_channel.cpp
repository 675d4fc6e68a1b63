#include "ipop/transport/stream_channel.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <system_error>

namespace ipop::transport {

Bytes frame_stream_message(ByteView payload)
{
    if (payload.size() > kStreamMaxFrame) throw ChannelError(ChannelErrc::Oversize, "frame exceeds stream limit");
    ByteWriter out(4 + payload.size());
    out.u32(static_cast<std::uint32_t>(payload.size()));
    out.bytes(payload);
    return out.take();
}

void FrameDecoder::feed(ByteView chunk)
{
    buf_.insert(buf_.end(), chunk.begin(), chunk.end());
    std::size_t pos = 0;
    while (buf_.size() - pos >= 4) {
        std::uint32_t len = (std::uint32_t{buf_[pos]} << 24) | (std::uint32_t{buf_[pos + 1]} << 16) |
                            (std::uint32_t{buf_[pos + 2]} << 8) | buf_[pos + 3];
        if (len > kStreamMaxFrame) throw ChannelError(ChannelErrc::Oversize, "declared frame length too large");
        if (buf_.size() - pos - 4 < len) break;
        ready_.emplace_back(buf_.begin() + static_cast<std::ptrdiff_t>(pos + 4),
                            buf_.begin() + static_cast<std::ptrdiff_t>(pos + 4 + len));
        pos += 4 + len;
    }
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos));
}

std::optional<Bytes> FrameDecoder::next()
{
    if (ready_.empty()) return std::nullopt;
    Bytes out = std::move(ready_.front());
    ready_.pop_front();
    return out;
}

namespace {

sockaddr_in to_sockaddr(const Endpoint& e)
{
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(e.port);
    sa.sin_addr.s_addr = htonl(e.ip.value());
    return sa;
}

} // namespace

StreamChannel::StreamChannel(int connected_fd) : fd_(connected_fd) {}

StreamChannel::~StreamChannel() { close(); }

StreamChannel StreamChannel::connect(const Endpoint& to)
{
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw std::system_error(errno, std::generic_category(), "socket");
    auto sa = to_sockaddr(to);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0) {
        int err = errno;
        ::close(fd);
        throw std::system_error(err, std::generic_category(), "connect " + to.to_string());
    }
    return StreamChannel(fd);
}

void StreamChannel::send(ByteView payload)
{
    auto framed = frame_stream_message(payload);
    std::lock_guard lock(write_mutex_);
    if (closed()) throw ChannelError(ChannelErrc::ChannelClosed, "send on closed stream channel");
    std::size_t off = 0;
    while (off < framed.size()) {
        auto n = ::send(fd_, framed.data() + off, framed.size() - off, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            peer_closed_ = true;
            throw ChannelError(ChannelErrc::ChannelClosed, "stream write failed");
        }
        off += static_cast<std::size_t>(n);
    }
}

std::optional<Bytes> StreamChannel::receive(Micros timeout)
{
    if (auto ready = decoder_.next()) return ready;
    if (closed()) throw ChannelError(ChannelErrc::ChannelClosed, "receive on closed stream channel");
    int ms = static_cast<int>((timeout.count() + 999) / 1000);
    std::uint8_t buf[8192];
    while (true) {
        pollfd pfd{fd_, POLLIN, 0};
        if (::poll(&pfd, 1, ms) <= 0) return std::nullopt;
        auto n = ::recv(fd_, buf, sizeof buf, 0);
        if (n == 0) {
            peer_closed_ = true;
            return decoder_.next();
        }
        if (n < 0) {
            if (errno == EINTR) continue;
            peer_closed_ = true;
            return std::nullopt;
        }
        decoder_.feed(ByteView(buf, static_cast<std::size_t>(n)));
        if (auto ready = decoder_.next()) return ready;
    }
}

void StreamChannel::close()
{
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

StreamListener::StreamListener(const Endpoint& bind_to)
{
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw std::system_error(errno, std::generic_category(), "socket");
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    auto sa = to_sockaddr(bind_to);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0 || ::listen(fd_, 16) != 0) {
        int err = errno;
        ::close(fd_);
        fd_ = -1;
        throw std::system_error(err, std::generic_category(), "listen " + bind_to.to_string());
    }
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    local_ = Endpoint{Ipv4Address(ntohl(bound.sin_addr.s_addr)), ntohs(bound.sin_port)};
}

StreamListener::~StreamListener()
{
    if (fd_ >= 0) ::close(fd_);
}

int StreamListener::accept_fd(Micros timeout)
{
    pollfd pfd{fd_, POLLIN, 0};
    if (::poll(&pfd, 1, static_cast<int>((timeout.count() + 999) / 1000)) <= 0) return -1;
    return ::accept(fd_, nullptr, nullptr);
}

} // namespace ipop::transport
