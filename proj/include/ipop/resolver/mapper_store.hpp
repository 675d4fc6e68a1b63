#pragma once

#include "ipop/common/time.hpp"
#include "ipop/resolver/direct_map.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>

namespace ipop::resolver {

enum class ResolveErrc { NotFound, LookupTimeout, StoreTimeout };
const char* to_string(ResolveErrc code);

class ResolveError : public std::runtime_error {
public:
    explicit ResolveError(ResolveErrc code) : std::runtime_error(to_string(code)), code_(code) {}
    ResolveErrc code() const { return code_; }

private:
    ResolveErrc code_;
};

struct DhtEntry {
    VirtualIp ip;
    overlay::NodeAddress owner;
    std::uint64_t version = 0;
    overlay::NodeAddress stored_at;
};

/// The entries a node holds as the root of their keys. Versions never
/// decrease for a given ip.
class MapperStore {
public:
    explicit MapperStore(overlay::NodeAddress self) : self_(self) {}

    // Registration or migration: the owner is (re)written and the version
    // goes up by one.
    const DhtEntry& upsert(VirtualIp ip, const overlay::NodeAddress& owner);
    // Throws ResolveError(NotFound) when the ip has no entry.
    const DhtEntry& update_on_migrate(VirtualIp ip, const overlay::NodeAddress& new_owner);
    // Takes over an entry handed off by a previous root; the higher version
    // wins.
    void absorb(const DhtEntry& entry);

    std::optional<DhtEntry> find(VirtualIp ip) const;
    bool erase(VirtualIp ip) { return entries_.erase(ip) != 0; }
    const std::map<VirtualIp, DhtEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

private:
    overlay::NodeAddress self_;
    std::map<VirtualIp, DhtEntry> entries_;
};

struct CachedResolution {
    overlay::NodeAddress owner;
    std::uint64_t version = 0;
    TimePoint expires_at{};
};

class ResolutionCache {
public:
    explicit ResolutionCache(Micros ttl) : ttl_(ttl) {}

    void put(VirtualIp ip, const overlay::NodeAddress& owner, std::uint64_t version, TimePoint now);
    // Entries at or past their expiry are never returned.
    std::optional<CachedResolution> get(VirtualIp ip, TimePoint now);
    void clear() { entries_.clear(); }
    std::size_t size() const { return entries_.size(); }
    Micros ttl() const { return ttl_; }

private:
    Micros ttl_;
    std::map<VirtualIp, CachedResolution> entries_;
};

} // namespace ipop::resolver
