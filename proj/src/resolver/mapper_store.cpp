#include "ipop/resolver/mapper_store.hpp"

namespace ipop::resolver {

const char* to_string(ResolveErrc code)
{
    switch (code) {
    case ResolveErrc::NotFound: return "not found";
    case ResolveErrc::LookupTimeout: return "lookup timed out";
    case ResolveErrc::StoreTimeout: return "store timed out";
    }
    return "unknown resolve error";
}

const DhtEntry& MapperStore::upsert(VirtualIp ip, const overlay::NodeAddress& owner)
{
    auto [it, inserted] = entries_.try_emplace(ip, DhtEntry{ip, owner, 0, self_});
    it->second.owner = owner;
    it->second.stored_at = self_;
    ++it->second.version;
    (void)inserted;
    return it->second;
}

const DhtEntry& MapperStore::update_on_migrate(VirtualIp ip, const overlay::NodeAddress& new_owner)
{
    if (!entries_.count(ip)) throw ResolveError(ResolveErrc::NotFound);
    return upsert(ip, new_owner);
}

void MapperStore::absorb(const DhtEntry& entry)
{
    auto it = entries_.find(entry.ip);
    if (it != entries_.end() && it->second.version >= entry.version) return;
    DhtEntry copy = entry;
    copy.stored_at = self_;
    entries_[entry.ip] = copy;
}

std::optional<DhtEntry> MapperStore::find(VirtualIp ip) const
{
    auto it = entries_.find(ip);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ResolutionCache::put(VirtualIp ip, const overlay::NodeAddress& owner, std::uint64_t version, TimePoint now)
{
    entries_[ip] = CachedResolution{owner, version, now + ttl_};
}

std::optional<CachedResolution> ResolutionCache::get(VirtualIp ip, TimePoint now)
{
    auto it = entries_.find(ip);
    if (it == entries_.end()) return std::nullopt;
    if (now >= it->second.expires_at) {
        entries_.erase(it);
        return std::nullopt;
    }
    return it->second;
}

} // namespace ipop::resolver
