#pragma once

#include "ipop/common/time.hpp"
#include "ipop/overlay/node_address.hpp"
#include "ipop/transport/endpoint.hpp"

#include <optional>
#include <vector>

namespace ipop::nat {

struct ObservedAddress {
    overlay::NodeAddress as_seen_by;
    transport::Endpoint external;
    TimePoint observed_at{};
};

/// Learns the node's translated endpoint from what peers echo back, and
/// decides which endpoint to advertise. Observations older than the NAT
/// binding lifetime are stale: the binding they describe may be gone.
class TranslationObserver {
public:
    TranslationObserver(transport::Endpoint local, Micros binding_lifetime)
        : local_(local), lifetime_(binding_lifetime)
    {
    }

    // Records an observation when the echo differs from the local endpoint.
    std::optional<ObservedAddress> observe(const overlay::NodeAddress& peer, const transport::Endpoint& echoed,
                                           TimePoint now);

    // Latest observed external endpoint, or the local one when no
    // translation has been seen.
    transport::Endpoint advertised() const { return latest_ ? latest_->external : local_; }
    bool translated() const { return latest_.has_value(); }
    bool stale(TimePoint now) const { return latest_ && now - latest_->observed_at > lifetime_; }

    const std::optional<ObservedAddress>& latest() const { return latest_; }
    const std::vector<ObservedAddress>& history() const { return history_; }
    const transport::Endpoint& local() const { return local_; }

private:
    static constexpr std::size_t kHistoryLimit = 64;

    transport::Endpoint local_;
    Micros lifetime_;
    std::optional<ObservedAddress> latest_;
    std::vector<ObservedAddress> history_;
};

} // namespace ipop::nat
