#pragma once

#include "ipop/common/bytes.hpp"
#include "ipop/common/random.hpp"
#include "ipop/common/time.hpp"
#include "ipop/transport/endpoint.hpp"

#include <functional>

namespace ipop::transport {

/// What a node's state machine sees of the world. The simulator and the
/// real UDP runtime each provide one. All calls happen on the node's own
/// serialized event stream.
class NodeEnvironment {
public:
    virtual ~NodeEnvironment() = default;

    virtual TimePoint now() const = 0;
    virtual void send(const Endpoint& to, Bytes datagram) = 0;
    virtual void schedule(Micros delay, std::function<void()> fn) = 0;
    virtual Endpoint local_endpoint() const = 0;
    virtual Rng& rng() = 0;
};

} // namespace ipop::transport
