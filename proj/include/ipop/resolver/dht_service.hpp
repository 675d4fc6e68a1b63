#pragma once

#include "ipop/overlay/overlay_node.hpp"
#include "ipop/resolver/dht_messages.hpp"
#include "ipop/resolver/mapper_store.hpp"

#include <functional>
#include <map>
#include <vector>

namespace ipop::resolver {

struct DhtConfig {
    Micros cache_ttl = seconds(30);
    Micros reregister_interval = seconds(60);
    Micros store_timeout = seconds(5);
    // Enough attempts to outlast failure detection and repair inside one
    // re-registration period.
    int store_attempts = 12;
    Micros lookup_timeout = seconds(5);
    int lookup_attempts = 3;
};

enum class LookupStatus { Found, NotFound, Timeout };
const char* to_string(LookupStatus status);

struct LookupResult {
    LookupStatus status = LookupStatus::Timeout;
    overlay::NodeAddress owner;
    std::uint64_t version = 0;
    bool from_cache = false;
};

struct DhtCounters {
    std::uint64_t messages_sent = 0;
    std::uint64_t lookups = 0;
    std::uint64_t cache_hits = 0;
    std::uint64_t lookup_timeouts = 0;
    std::uint64_t stores_acked = 0;
    std::uint64_t store_timeouts = 0;
    std::uint64_t handoffs_sent = 0;
    std::uint64_t handoffs_received = 0;
    std::uint64_t decode_errors = 0;
};

/// IP-to-owner resolution over the ring: each ip's entry lives at the
/// root of its hashed key. Owners keep their entries alive by
/// re-registering periodically; roots hand entries over when a closer node
/// appears.
class DhtService {
public:
    using LookupCallback = std::function<void(const LookupResult&)>;

    DhtService(overlay::OverlayNode& overlay, transport::NodeEnvironment& env, DhtConfig config = {});
    DhtService(const DhtService&) = delete;
    DhtService& operator=(const DhtService&) = delete;

    // Starts (or restarts) registering `ip` as owned by this node. Stores
    // wait until the overlay has joined.
    void register_ip(VirtualIp ip);
    void unregister_ip(VirtualIp ip);
    bool registered(VirtualIp ip) const { return registrations_.count(ip) != 0; }
    // Registration whose latest store has been acknowledged.
    bool acknowledged(VirtualIp ip) const;

    void lookup(VirtualIp ip, LookupCallback done);

    // Wire-up points for the owning node.
    void on_packet(const transport::BrunetPacket& pkt);
    void on_joined();
    void check_handoff();
    void stop() { ++generation_; }

    const MapperStore& store() const { return store_; }
    ResolutionCache& cache() { return cache_; }
    const DhtCounters& counters() const { return counters_; }
    const DhtConfig& config() const { return config_; }

private:
    struct Registration {
        std::uint64_t token = 0;
        int attempts = 0;
        bool acked = false;
    };
    struct PendingLookup {
        std::vector<LookupCallback> callbacks;
        int attempts = 0;
        std::uint64_t token = 0;
    };

    void after(Micros delay, std::function<void()> fn);
    void send(const overlay::NodeAddress& dst, const DhtMessage& msg);
    void send_store(VirtualIp ip, std::uint64_t token);
    void send_lookup(VirtualIp ip, std::uint64_t token);
    void finish_lookup(VirtualIp ip, const LookupResult& result);

    overlay::OverlayNode& overlay_;
    transport::NodeEnvironment& env_;
    DhtConfig config_;
    MapperStore store_;
    ResolutionCache cache_;
    std::map<VirtualIp, Registration> registrations_;
    std::map<VirtualIp, PendingLookup> lookups_;
    std::uint64_t next_token_ = 0;
    std::uint64_t generation_ = 0;
    DhtCounters counters_;
};

enum class ResolutionMode { Direct, BrunetArp };
const char* to_string(ResolutionMode mode);

/// Direct mode answers immediately with the hashed address; BrunetArp asks
/// the DHT. `done` may run before resolve returns.
void resolve(VirtualIp ip, ResolutionMode mode, DhtService* dht, const DhtService::LookupCallback& done);

} // namespace ipop::resolver
