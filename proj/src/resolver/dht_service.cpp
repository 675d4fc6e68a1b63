#include "ipop/resolver/dht_service.hpp"

namespace ipop::resolver {

const char* to_string(LookupStatus status)
{
    switch (status) {
    case LookupStatus::Found: return "found";
    case LookupStatus::NotFound: return "not_found";
    case LookupStatus::Timeout: return "timeout";
    }
    return "unknown";
}

const char* to_string(ResolutionMode mode)
{
    return mode == ResolutionMode::Direct ? "direct" : "brunet_arp";
}

DhtService::DhtService(overlay::OverlayNode& overlay, transport::NodeEnvironment& env, DhtConfig config)
    : overlay_(overlay), env_(env), config_(config), store_(overlay.address()), cache_(config.cache_ttl)
{
}

void DhtService::after(Micros delay, std::function<void()> fn)
{
    env_.schedule(delay, [this, gen = generation_, fn = std::move(fn)] {
        if (gen == generation_) fn();
    });
}

void DhtService::send(const overlay::NodeAddress& dst, const DhtMessage& msg)
{
    ++counters_.messages_sent;
    overlay_.send_routed(transport::PayloadType::Dht, dst, encode_dht(msg));
}

bool DhtService::acknowledged(VirtualIp ip) const
{
    auto it = registrations_.find(ip);
    return it != registrations_.end() && it->second.acked;
}

void DhtService::register_ip(VirtualIp ip)
{
    auto& reg = registrations_[ip];
    reg = Registration{++next_token_, 0, false};
    if (overlay_.joined()) send_store(ip, reg.token);
}

void DhtService::unregister_ip(VirtualIp ip) { registrations_.erase(ip); }

void DhtService::on_joined()
{
    for (auto& [ip, reg] : registrations_) {
        reg = Registration{++next_token_, 0, false};
        send_store(ip, reg.token);
    }
}

void DhtService::send_store(VirtualIp ip, std::uint64_t token)
{
    auto it = registrations_.find(ip);
    if (it == registrations_.end() || it->second.token != token) return;
    Registration& reg = it->second;

    if (reg.acked) {
        // Periodic refresh: a fresh round of attempts.
        reg.acked = false;
        reg.attempts = 0;
    }
    if (reg.attempts >= config_.store_attempts) {
        ++counters_.store_timeouts;
        reg.attempts = 0;
        after(config_.reregister_interval, [this, ip, token] { send_store(ip, token); });
        return;
    }
    ++reg.attempts;
    send(direct_map(ip), DhtMessage{DhtOp::Store, ip, overlay_.address(), 0});
    after(config_.store_timeout, [this, ip, token] {
        auto r = registrations_.find(ip);
        if (r != registrations_.end() && r->second.token == token && !r->second.acked) send_store(ip, token);
    });
}

void DhtService::lookup(VirtualIp ip, LookupCallback done)
{
    ++counters_.lookups;
    if (auto cached = cache_.get(ip, env_.now())) {
        ++counters_.cache_hits;
        done(LookupResult{LookupStatus::Found, cached->owner, cached->version, true});
        return;
    }
    auto& pending = lookups_[ip];
    pending.callbacks.push_back(std::move(done));
    if (pending.callbacks.size() > 1) return;
    pending.attempts = 0;
    pending.token = ++next_token_;
    send_lookup(ip, pending.token);
}

void DhtService::send_lookup(VirtualIp ip, std::uint64_t token)
{
    auto it = lookups_.find(ip);
    if (it == lookups_.end() || it->second.token != token) return;
    if (it->second.attempts >= config_.lookup_attempts) {
        ++counters_.lookup_timeouts;
        finish_lookup(ip, LookupResult{LookupStatus::Timeout, {}, 0, false});
        return;
    }
    ++it->second.attempts;
    send(direct_map(ip), DhtMessage{DhtOp::Lookup, ip, {}, 0});
    after(config_.lookup_timeout, [this, ip, token] { send_lookup(ip, token); });
}

void DhtService::finish_lookup(VirtualIp ip, const LookupResult& result)
{
    auto it = lookups_.find(ip);
    if (it == lookups_.end()) return;
    auto callbacks = std::move(it->second.callbacks);
    lookups_.erase(it);
    for (auto& cb : callbacks) cb(result);
}

void DhtService::on_packet(const transport::BrunetPacket& pkt)
{
    DhtMessage msg;
    try {
        msg = decode_dht(pkt.payload);
    } catch (const DhtDecodeError&) {
        ++counters_.decode_errors;
        return;
    }
    switch (msg.op) {
    case DhtOp::Store: {
        const DhtEntry& e = store_.upsert(msg.ip, msg.owner);
        send(pkt.src, DhtMessage{DhtOp::StoreAck, e.ip, e.owner, e.version});
        break;
    }
    case DhtOp::StoreAck: {
        auto it = registrations_.find(msg.ip);
        if (it != registrations_.end() && msg.owner == overlay_.address() && !it->second.acked) {
            it->second.acked = true;
            ++counters_.stores_acked;
            after(config_.reregister_interval, [this, ip = msg.ip, token = it->second.token] { send_store(ip, token); });
        }
        break;
    }
    case DhtOp::Lookup: {
        auto e = store_.find(msg.ip);
        DhtMessage reply{DhtOp::LookupReply, msg.ip, {}, 0};
        if (e) {
            reply.owner = e->owner;
            reply.version = e->version;
        }
        send(pkt.src, reply);
        break;
    }
    case DhtOp::LookupReply: {
        if (!lookups_.count(msg.ip)) break;
        if (msg.not_found()) {
            finish_lookup(msg.ip, LookupResult{LookupStatus::NotFound, {}, 0, false});
        } else {
            cache_.put(msg.ip, msg.owner, msg.version, env_.now());
            finish_lookup(msg.ip, LookupResult{LookupStatus::Found, msg.owner, msg.version, false});
        }
        break;
    }
    case DhtOp::Handoff:
        ++counters_.handoffs_received;
        store_.absorb(DhtEntry{msg.ip, msg.owner, msg.version, overlay_.address()});
        break;
    }
}

void DhtService::check_handoff()
{
    std::vector<DhtEntry> moving;
    for (const auto& [ip, e] : store_.entries())
        if (!overlay_.is_root_for(direct_map(ip))) moving.push_back(e);
    for (const auto& e : moving) {
        store_.erase(e.ip);
        ++counters_.handoffs_sent;
        send(direct_map(e.ip), DhtMessage{DhtOp::Handoff, e.ip, e.owner, e.version});
    }
}

void resolve(VirtualIp ip, ResolutionMode mode, DhtService* dht, const DhtService::LookupCallback& done)
{
    if (mode == ResolutionMode::Direct || dht == nullptr) {
        done(LookupResult{LookupStatus::Found, direct_map(ip), 0, false});
        return;
    }
    dht->lookup(ip, done);
}

} // namespace ipop::resolver
