#pragma once

#include "ipop/common/bytes.hpp"
#include "ipop/common/time.hpp"
#include "ipop/transport/channel.hpp"
#include "ipop/transport/endpoint.hpp"

#include <deque>
#include <mutex>
#include <optional>

namespace ipop::transport {

// 4-byte big-endian length prefix followed by the frame bytes.
Bytes frame_stream_message(ByteView payload);

/// Incremental parser for length-prefixed frames arriving in arbitrary
/// chunks. A declared length above kStreamMaxFrame throws Oversize.
class FrameDecoder {
public:
    void feed(ByteView chunk);
    std::optional<Bytes> next();
    std::size_t buffered() const { return buf_.size(); }

private:
    Bytes buf_;
    std::deque<Bytes> ready_;
};

/// A reliable byte stream (TCP or a socketpair) carrying framed envelopes.
/// send() writes each frame whole, under a lock, so concurrent senders
/// never interleave partial frames.
class StreamChannel {
public:
    explicit StreamChannel(int connected_fd);
    ~StreamChannel();

    StreamChannel(const StreamChannel&) = delete;
    StreamChannel& operator=(const StreamChannel&) = delete;

    static StreamChannel connect(const Endpoint& to);

    void send(ByteView payload);
    std::optional<Bytes> receive(Micros timeout);
    void close();
    bool closed() const { return fd_ < 0 || peer_closed_; }

private:
    int fd_;
    bool peer_closed_ = false;
    std::mutex write_mutex_;
    FrameDecoder decoder_;
};

/// Listening TCP socket that hands out StreamChannels.
class StreamListener {
public:
    explicit StreamListener(const Endpoint& bind_to);
    ~StreamListener();
    StreamListener(const StreamListener&) = delete;
    StreamListener& operator=(const StreamListener&) = delete;

    Endpoint local() const { return local_; }
    int accept_fd(Micros timeout); // -1 on timeout

private:
    int fd_ = -1;
    Endpoint local_;
};

} // namespace ipop::transport
