#include "ipop/overlay/overlay_node.hpp"

#include "ipop/overlay/small_world.hpp"
#include "ipop/transport/forward.hpp"

#include <algorithm>
#include <set>

namespace ipop::overlay {

using transport::decode;
using transport::encode;
using transport::forward_hook;

const char* to_string(DropKind kind)
{
    switch (kind) {
    case DropKind::TtlExpired: return "ttl_expired";
    case DropKind::NoRoute: return "no_route";
    case DropKind::Misdelivered: return "misdelivered";
    case DropKind::RelayFailed: return "relay_failed";
    }
    return "unknown";
}

namespace {

template <class... Fs>
struct Overloaded : Fs... {
    using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

bool is_link_local(const ControlMessage& msg)
{
    if (const auto* req = std::get_if<ConnectRequest>(&msg)) return !req->routed();
    return !std::holds_alternative<Relay>(msg);
}

} // namespace

OverlayNode::OverlayNode(NodeAddress address, transport::NodeEnvironment& env, OverlayConfig config)
    : address_(address),
      env_(env),
      config_(config),
      table_(address, config.k),
      translation_(env.local_endpoint(), config.binding_lifetime)
{
}

void OverlayNode::after(Micros delay, std::function<void()> fn)
{
    env_.schedule(delay, [this, gen = generation_, fn = std::move(fn)] {
        if (gen == generation_ && state_ != State::Stopped) fn();
    });
}

void OverlayNode::start(std::optional<Endpoint> bootstrap)
{
    if (state_ != State::Idle) return;
    bootstrap_ = bootstrap;
    if (bootstrap_) {
        state_ = State::Joining;
        send_leaf_request();
    } else {
        state_ = State::Joined;
        if (on_joined) on_joined();
    }
    // Stagger periodic work so that nodes started together do not tick in
    // lockstep.
    auto phase = [this](Micros interval) {
        return Micros{env_.rng().uniform_int(1, std::max<std::int64_t>(1, interval.count()))};
    };
    after(phase(config_.keepalive_interval), [this] { keepalive_tick(); });
    after(phase(config_.stabilize_interval), [this] { stabilize_tick(); });
}

void OverlayNode::stop()
{
    state_ = State::Stopped;
    ++generation_;
    pending_.clear();
    liveness_.clear();
}

bool OverlayNode::is_root_for(const NodeAddress& key) const
{
    return next_hop(address_, key, table_, transport::kInitialTtl).kind == RoutingDecision::Kind::DeliverLocal;
}

Endpoint OverlayNode::advertised_endpoint()
{
    const TimePoint now = env_.now();
    if (translation_.stale(now) && now - last_rediscovery_ > config_.ping_timeout) {
        last_rediscovery_ = now;
        ++counters_.rediscoveries;
        for (const auto& [addr, c] : table_.entries()) {
            if (!c.direct()) continue;
            send_ping(addr);
            break;
        }
    }
    return translation_.advertised();
}

// ---------------------------------------------------------------- join

void OverlayNode::send_leaf_request()
{
    if (state_ != State::Joining || upstream_) return;
    if (++join_attempt_ > config_.join_attempts) {
        join_timed_out();
        return;
    }
    ConnectRequest req;
    req.purpose = LinkPurpose::Leaf;
    req.advertised = translation_.advertised();
    send_direct(*bootstrap_, make_control(NodeAddress{}, req));
    after(config_.join_spacing, [this] { send_leaf_request(); });
}

void OverlayNode::send_join_request()
{
    if (state_ != State::Joining || join_acked_ || !upstream_) return;
    if (++join_attempt_ > config_.join_attempts) {
        join_timed_out();
        return;
    }
    ConnectRequest req;
    req.purpose = LinkPurpose::Join;
    req.flags = ConnectRequest::kRouted | ConnectRequest::kInitiator;
    req.advertised = advertised_endpoint();
    req.proxy = upstream_->address;
    send_direct(upstream_->endpoint, make_control(address_, req));
    after(config_.join_spacing * 2, [this] { send_join_request(); });
}

void OverlayNode::join_timed_out()
{
    ++counters_.join_timeouts;
    upstream_.reset();
    join_attempt_ = 0;
    after(config_.join_backoff, [this] { send_leaf_request(); });
}

void OverlayNode::handle_join_ack(const BrunetPacket& pkt, const ConnectAck& ack)
{
    if (state_ != State::Joining) return;
    join_acked_ = true;
    std::vector<NeighborInfo> candidates{{pkt.src, ack.advertised}};
    candidates.insert(candidates.end(), ack.neighbors.begin(), ack.neighbors.end());
    consider_candidates(candidates);
}

// ---------------------------------------------------------------- links

bool OverlayNode::blacklisted(const NodeAddress& a) const
{
    auto it = blacklist_.find(a);
    return it != blacklist_.end() && it->second > env_.now();
}

void OverlayNode::start_link(const NodeAddress& target, const Endpoint& endpoint, LinkPurpose purpose,
                             bool announce)
{
    if (target == address_ || !endpoint.valid() || blacklisted(target)) return;
    if (const auto* c = table_.find(target); c && c->direct()) return;
    if (pending_.count(target)) return;

    const auto token = ++next_token_;
    pending_[target] = PendingLink{purpose, endpoint, token};

    if (announce) {
        // Prompts the target to punch toward us at the same time.
        ConnectRequest req;
        req.purpose = purpose;
        req.flags = ConnectRequest::kRouted | ConnectRequest::kInitiator;
        req.advertised = advertised_endpoint();
        originate_control(target, req);
    }
    for (Micros offset : config_.link_schedule.draw(env_.rng()))
        after(offset, [this, target, token] { link_attempt(target, token); });
    after(config_.link_schedule.budget(), [this, target, token] { link_exhausted(target, token); });
}

void OverlayNode::link_attempt(const NodeAddress& target, std::uint64_t token)
{
    auto it = pending_.find(target);
    if (it == pending_.end() || it->second.token != token) return;
    ConnectRequest req;
    req.purpose = it->second.purpose;
    req.advertised = advertised_endpoint();
    req.neighbors = neighbor_infos();
    send_direct(it->second.endpoint, make_control(target, req));
}

bool OverlayNode::fresh_list(const NodeAddress& peer) const
{
    auto it = neighbor_list_at_.find(peer);
    return it != neighbor_list_at_.end() && env_.now() - it->second <= config_.stabilize_interval * 3;
}

std::optional<NodeAddress> OverlayNode::find_relay(const NodeAddress& target) const
{
    // neighbor_lists_ is ordered by address, so the first match is the
    // smallest-address candidate.
    for (const auto& [via, list] : neighbor_lists_) {
        const auto* c = table_.find(via);
        if (!c || !c->direct() || !fresh_list(via)) continue;
        for (const auto& n : list)
            if (n.address == target) return via;
    }
    return std::nullopt;
}

void OverlayNode::link_exhausted(const NodeAddress& target, std::uint64_t token)
{
    auto it = pending_.find(target);
    if (it == pending_.end() || it->second.token != token) return;
    const PendingLink link = it->second;
    pending_.erase(it);

    if (link.purpose != LinkPurpose::Near) {
        ++counters_.links_failed;
        blacklist_[target] = env_.now() + config_.failed_blacklist;
        return;
    }
    if (auto via = find_relay(target)) {
        const auto left = table_.near_left();
        const auto right = table_.near_right();
        table_.add(Connection{target, link.endpoint, via, false});
        ++counters_.links_relayed;
        relay_wanted_.erase(target);
        note_near_change(left, right);
        if (state_ == State::Joining && join_acked_) {
            state_ = State::Joined;
            if (on_joined) on_joined();
        }
        return;
    }
    ++counters_.links_failed;
    relay_wanted_.emplace(target, std::make_pair(link.endpoint, env_.now()));
}

void OverlayNode::add_connection(const NodeAddress& peer, const Endpoint& endpoint, bool shortcut)
{
    if (peer == address_) return;
    const auto left = table_.near_left();
    const auto right = table_.near_right();
    const auto* existing = table_.find(peer);
    const bool was_direct = existing && existing->direct();
    const bool keep_shortcut = existing && existing->shortcut;

    table_.add(Connection{peer, endpoint, std::nullopt, shortcut || keep_shortcut});
    if (!was_direct) ++counters_.links_direct;
    pending_.erase(peer);
    relay_wanted_.erase(peer);
    blacklist_.erase(peer);
    shortcut_requests_.erase(peer);

    note_near_change(left, right);
    if (!was_direct && on_table_changed) on_table_changed();

    if (state_ == State::Joining && join_acked_) {
        state_ = State::Joined;
        if (on_joined) on_joined();
        if (config_.small_world_shortcuts) after(config_.link_schedule.budget(), [this] { top_up_shortcuts(); });
    }
}

void OverlayNode::note_near_change(const std::vector<NodeAddress>& left, const std::vector<NodeAddress>& right)
{
    if (left == table_.near_left() && right == table_.near_right()) return;
    push_neighbor_lists(false);
    if (on_table_changed) on_table_changed();
}

void OverlayNode::consider_candidates(const std::vector<NeighborInfo>& candidates)
{
    // Pick the k nearest on each side among everything known, then link to
    // those not yet linked or being linked.
    std::map<NodeAddress, Endpoint> known;
    for (const auto& [addr, c] : table_.entries()) known.emplace(addr, c.endpoint);
    for (const auto& [addr, p] : pending_) known.emplace(addr, p.endpoint);
    for (const auto& n : candidates)
        if (n.address != address_ && !blacklisted(n.address)) known.emplace(n.address, n.endpoint);

    std::vector<std::pair<NodeAddress, NodeAddress>> left, right;
    for (const auto& [addr, ep] : known) {
        left.emplace_back(clockwise_distance(addr, address_), addr);
        right.emplace_back(clockwise_distance(address_, addr), addr);
    }
    std::set<NodeAddress> wanted;
    for (auto* side : {&left, &right}) {
        std::sort(side->begin(), side->end());
        for (std::size_t i = 0; i < std::min(config_.k, side->size()); ++i) wanted.insert((*side)[i].second);
    }
    for (const auto& addr : wanted) {
        const auto* c = table_.find(addr);
        if ((c && c->direct()) || pending_.count(addr)) continue;
        start_link(addr, known.at(addr), LinkPurpose::Near, true);
    }
}

std::vector<NeighborInfo> OverlayNode::neighbor_infos() const
{
    std::vector<NeighborInfo> out;
    std::set<NodeAddress> seen;
    for (const auto* side : {&table_.near_left(), &table_.near_right()}) {
        for (const auto& a : *side) {
            const auto* c = table_.find(a);
            if (c && c->direct() && seen.insert(a).second) out.push_back({a, c->endpoint});
        }
    }
    return out;
}

// ---------------------------------------------------------------- upkeep

void OverlayNode::keepalive_tick()
{
    std::vector<NodeAddress> peers;
    for (const auto& [addr, c] : table_.entries())
        if (c.direct() && !liveness_.count(addr)) peers.push_back(addr);
    for (const auto& p : peers) send_ping(p);
    after(config_.keepalive_interval, [this] { keepalive_tick(); });
}

void OverlayNode::send_ping(const NodeAddress& peer)
{
    const auto* c = table_.find(peer);
    if (!c || !c->direct()) return;
    auto& live = liveness_[peer];
    if (live.token == 0) {
        live.nonce = static_cast<std::uint32_t>(env_.rng().next());
        live.retries_left = config_.ping_retries;
    }
    live.token = ++next_token_;
    send_direct(c->endpoint, make_control(peer, Ping{live.nonce}));
    after(config_.ping_timeout, [this, peer, token = live.token] { ping_expired(peer, token); });
}

void OverlayNode::ping_expired(const NodeAddress& peer, std::uint64_t token)
{
    auto it = liveness_.find(peer);
    if (it == liveness_.end() || it->second.token != token) return;
    if (it->second.retries_left > 0) {
        --it->second.retries_left;
        send_ping(peer);
        return;
    }
    declare_failed(peer);
}

void OverlayNode::declare_failed(const NodeAddress& peer)
{
    ++counters_.failures_detected;
    liveness_.erase(peer);
    neighbor_lists_.erase(peer);
    neighbor_list_at_.erase(peer);
    blacklist_[peer] = env_.now() + config_.failed_blacklist;

    const auto left = table_.near_left();
    const auto right = table_.near_right();
    auto result = repair(table_, peer);

    // Relayed links through the failed node are gone too.
    std::vector<NodeAddress> orphaned;
    for (const auto& [addr, c] : table_.entries())
        if (c.via == peer) orphaned.push_back(addr);
    for (const auto& a : orphaned) {
        relay_wanted_.emplace(a, std::make_pair(table_.find(a)->endpoint, env_.now()));
        table_.remove(a);
    }

    for (const auto& p : result.probes) {
        const auto* c = table_.find(p);
        NeighborList probe{NeighborList::kReplyRequested, neighbor_infos()};
        send_direct(c->endpoint, make_control(p, probe));
    }
    note_near_change(left, right);
    if (on_table_changed) on_table_changed();
}

void OverlayNode::stabilize_tick()
{
    const TimePoint now = env_.now();
    std::erase_if(blacklist_, [&](const auto& e) { return e.second <= now; });
    std::erase_if(leaves_, [&](const auto& e) { return now - e.second.last_seen > config_.leaf_lifetime; });
    std::erase_if(shortcut_requests_, [&](const auto& e) { return now - e.second > config_.stabilize_interval; });
    if (state_ == State::Joined) upstream_.reset();

    const auto left = table_.near_left();
    const auto right = table_.near_right();

    // A relayed link stays only while its relay still lists the target in
    // a recent list. The relay need not be pushing lists to us, so ask.
    std::vector<NodeAddress> stale_relays;
    std::set<NodeAddress> relays;
    for (const auto& [addr, c] : table_.entries()) {
        if (c.direct()) continue;
        const auto* via = table_.find(*c.via);
        auto list = neighbor_lists_.find(*c.via);
        bool listed = list != neighbor_lists_.end() && fresh_list(*c.via) &&
                      std::any_of(list->second.begin(), list->second.end(),
                                  [&](const NeighborInfo& n) { return n.address == addr; });
        if (!via || !via->direct() || !listed)
            stale_relays.push_back(addr);
        else
            relays.insert(*c.via);
    }
    for (const auto& r : relays)
        send_direct(table_.find(r)->endpoint,
                    make_control(r, NeighborList{NeighborList::kReplyRequested, neighbor_infos()}));
    for (const auto& a : stale_relays) {
        relay_wanted_.emplace(a, std::make_pair(table_.find(a)->endpoint, now));
        table_.remove(a);
    }

    std::vector<NodeAddress> resolved;
    std::erase_if(relay_wanted_, [&](const auto& e) { return now - e.second.second > config_.relay_retry_window; });
    for (const auto& [addr, info] : relay_wanted_) {
        if (table_.contains(addr) || !table_.would_be_near(addr)) {
            resolved.push_back(addr);
            continue;
        }
        if (auto via = find_relay(addr)) {
            table_.add(Connection{addr, info.first, via, false});
            ++counters_.links_relayed;
            resolved.push_back(addr);
        }
    }
    for (const auto& a : resolved) relay_wanted_.erase(a);

    // Drop links neither side needs any more. A peer that still wants us
    // keeps pinging and gets answered, so a one-sided prune is harmless.
    // Non-near peers do not push their lists, so ask for one first.
    // Relays carrying a relayed link are needed as well.
    std::set<NodeAddress> in_use;
    for (const auto& [addr, c] : table_.entries())
        if (c.via) in_use.insert(*c.via);
    std::vector<NodeAddress> unneeded;
    for (const auto& [addr, c] : table_.entries()) {
        if (c.shortcut || table_.is_near(addr) || in_use.count(addr)) continue;
        if (!c.direct()) {
            unneeded.push_back(addr);
            continue;
        }
        auto list = neighbor_lists_.find(addr);
        if (list == neighbor_lists_.end() || !fresh_list(addr)) {
            send_direct(c.endpoint, make_control(addr, NeighborList{NeighborList::kReplyRequested, neighbor_infos()}));
            continue;
        }
        bool needs_us = std::any_of(list->second.begin(), list->second.end(),
                                    [&](const NeighborInfo& n) { return n.address == address_; });
        if (!needs_us) unneeded.push_back(addr);
    }
    for (const auto& a : unneeded) {
        table_.remove(a);
        liveness_.erase(a);
        neighbor_lists_.erase(a);
        neighbor_list_at_.erase(a);
    }

    note_near_change(left, right);
    // Asking for replies lets a node hear about ring members its near
    // neighbors know but would never push to it, which is how a link that
    // failed while the ring was still forming gets another attempt.
    push_neighbor_lists(true);
    if (state_ == State::Joined && config_.small_world_shortcuts) top_up_shortcuts();
    if (on_stabilize) on_stabilize();
    after(config_.stabilize_interval, [this] { stabilize_tick(); });
}

void OverlayNode::push_neighbor_lists(bool reply_requested)
{
    NeighborList list{reply_requested ? NeighborList::kReplyRequested : std::uint8_t{0}, neighbor_infos()};
    for (const auto& n : list.neighbors) send_direct(n.endpoint, make_control(n.address, list));
}

void OverlayNode::top_up_shortcuts()
{
    if (state_ != State::Joined) return;
    auto estimate = estimate_network_size(table_);
    if (!estimate) return;
    const std::size_t budget = shortcut_budget(*estimate);
    std::size_t have = table_.shortcuts().size() + shortcut_requests_.size();
    for (int sent = 0; have < budget && sent < 2; ++have, ++sent) {
        NodeAddress key = sample_shortcut_target(table_, env_.rng());
        shortcut_requests_[key] = env_.now();
        request_shortcut(key);
    }
}

void OverlayNode::request_shortcut(const NodeAddress& key)
{
    ++counters_.shortcut_requests;
    ConnectRequest req;
    req.purpose = LinkPurpose::Shortcut;
    req.flags = ConnectRequest::kRouted | ConnectRequest::kInitiator;
    req.advertised = advertised_endpoint();
    originate_control(key, req);
}

// ---------------------------------------------------------------- input

void OverlayNode::on_datagram(const Endpoint& from, ByteView bytes)
{
    if (state_ == State::Stopped || state_ == State::Idle) return;
    ++counters_.datagrams_in;
    BrunetPacket pkt;
    try {
        pkt = decode(bytes);
    } catch (const transport::DecodeError&) {
        ++counters_.decode_errors;
        return;
    }
    if (pkt.type == PayloadType::OverlayControl) {
        handle_control(from, std::move(pkt));
        return;
    }
    route(std::move(pkt), false);
}

void OverlayNode::handle_control(const Endpoint& from, BrunetPacket pkt)
{
    ControlMessage msg;
    try {
        msg = decode_control(pkt.payload);
    } catch (const ControlDecodeError&) {
        ++counters_.decode_errors;
        return;
    }
    if (!is_link_local(msg)) {
        route(std::move(pkt), false);
        return;
    }
    if (auto leaf = leaves_.find(pkt.src); leaf != leaves_.end()) leaf->second.last_seen = env_.now();

    std::visit(Overloaded{
                   [&](const ConnectRequest& m) { handle_request(from, pkt, m); },
                   [&](const ConnectAck& m) { handle_ack(from, pkt, m); },
                   [&](const Ping& m) { send_direct(from, make_control(pkt.src, Pong{m.nonce, from})); },
                   [&](const Pong& m) {
                       auto it = liveness_.find(pkt.src);
                       if (it != liveness_.end() && it->second.nonce == m.nonce) liveness_.erase(it);
                       translation_.observe(pkt.src, m.observed, env_.now());
                   },
                   [&](const NeighborList& m) {
                       const auto* c = table_.find(pkt.src);
                       if (c && c->direct()) {
                           neighbor_lists_[pkt.src] = m.neighbors;
                           neighbor_list_at_[pkt.src] = env_.now();
                       }
                       if (m.reply_requested()) send_direct(from, make_control(pkt.src, NeighborList{0, neighbor_infos()}));
                       if (state_ == State::Joined) consider_candidates(m.neighbors);
                   },
                   [&](const Relay&) {},
               },
               msg);
}

void OverlayNode::handle_request(const Endpoint& from, const BrunetPacket& pkt, const ConnectRequest& req)
{
    if (pkt.src == address_) return;
    ConnectAck ack;
    ack.purpose = req.purpose;
    ack.observed = from;
    if (req.purpose == LinkPurpose::Leaf) {
        leaves_[pkt.src] = Leaf{from, env_.now()};
        ack.advertised = advertised_endpoint();
        send_direct(from, make_control(pkt.src, ack));
        return;
    }
    if (req.purpose == LinkPurpose::Join) return;
    add_connection(pkt.src, from, req.purpose == LinkPurpose::Shortcut);
    ack.advertised = advertised_endpoint();
    ack.neighbors = neighbor_infos();
    send_direct(from, make_control(pkt.src, ack));
    if (state_ == State::Joined) consider_candidates(req.neighbors);
}

void OverlayNode::handle_routed_request(const BrunetPacket& pkt, const ConnectRequest& req)
{
    const NodeAddress& sender = pkt.src;
    if (sender == address_) return;
    switch (req.purpose) {
    case LinkPurpose::Join: {
        ConnectAck ack;
        ack.purpose = LinkPurpose::Join;
        ack.advertised = advertised_endpoint();
        ack.neighbors = neighbor_infos();
        BrunetPacket inner = make_control(sender, ack);
        Relay relay{sender, encode(inner)};
        originate_control(req.proxy, relay);
        if (table_.would_be_near(sender)) start_link(sender, req.advertised, LinkPurpose::Near, false);
        break;
    }
    case LinkPurpose::Near:
        if (pkt.dst != address_) {
            drop(pkt, DropKind::Misdelivered);
            return;
        }
        start_link(sender, req.advertised, LinkPurpose::Near, false);
        break;
    case LinkPurpose::Shortcut: {
        if (table_.contains(sender) || pending_.count(sender)) return;
        start_link(sender, req.advertised, LinkPurpose::Shortcut, false);
        if (req.initiator()) {
            ConnectRequest reply;
            reply.purpose = LinkPurpose::Shortcut;
            reply.flags = ConnectRequest::kRouted;
            reply.advertised = advertised_endpoint();
            originate_control(sender, reply);
        }
        break;
    }
    case LinkPurpose::Leaf: break;
    }
}

void OverlayNode::handle_ack(const Endpoint& from, const BrunetPacket& pkt, const ConnectAck& ack)
{
    if (pkt.src == address_) return;
    switch (ack.purpose) {
    case LinkPurpose::Leaf:
        if (state_ == State::Joining && !upstream_) {
            upstream_ = Upstream{pkt.src, from};
            translation_.observe(pkt.src, ack.observed, env_.now());
            join_attempt_ = 0;
            send_join_request();
        }
        return;
    case LinkPurpose::Join:
        handle_join_ack(pkt, ack);
        return;
    case LinkPurpose::Near:
    case LinkPurpose::Shortcut: {
        // Acks only answer our own requests, so the link was wanted.
        translation_.observe(pkt.src, ack.observed, env_.now());
        add_connection(pkt.src, from, ack.purpose == LinkPurpose::Shortcut);
        if (state_ == State::Joined) consider_candidates(ack.neighbors);
        return;
    }
    }
}

void OverlayNode::handle_relay(const BrunetPacket& pkt, const Relay& relay)
{
    if (pkt.dst != address_) {
        drop(pkt, DropKind::Misdelivered);
        return;
    }
    Bytes inner = relay.inner;
    if (inner.size() < transport::kHeaderSize || inner[6] == 0) {
        ++counters_.relay_failures;
        return;
    }
    forward_hook(inner);
    if (auto leaf = leaves_.find(relay.target); leaf != leaves_.end()) {
        ++counters_.datagrams_out;
        env_.send(leaf->second.endpoint, std::move(inner));
        return;
    }
    const auto* c = table_.find(relay.target);
    if (!c || !c->direct()) {
        ++counters_.relay_failures;
        drop(pkt, DropKind::RelayFailed);
        return;
    }
    ++counters_.datagrams_out;
    env_.send(c->endpoint, std::move(inner));
}

// ---------------------------------------------------------------- routing

void OverlayNode::route(BrunetPacket pkt, bool originated)
{
    if (auto leaf = leaves_.find(pkt.dst); leaf != leaves_.end() && pkt.src != pkt.dst) {
        if (pkt.ttl == 0) {
            drop(pkt, DropKind::TtlExpired);
            return;
        }
        forward_hook(pkt);
        send_direct_hooked(leaf->second.endpoint, pkt);
        return;
    }

    const RoutingDecision decision = next_hop(address_, pkt.dst, table_, pkt.ttl);
    if (on_route) on_route(pkt, decision);

    switch (decision.kind) {
    case RoutingDecision::Kind::Forward: {
        if (pkt.type == PayloadType::IpTunnel) {
            table_.record_traffic(pkt.dst, env_.now(), config_.shortcut_window);
            if (auto target = maybe_create_shortcut(table_, pkt.dst, env_.now(), config_.shortcut_threshold,
                                                    config_.shortcut_window)) {
                ++counters_.traffic_shortcuts;
                request_shortcut(*target);
            }
        }
        if (!originated) ++counters_.forwarded;
        forward_hook(pkt);
        send_to_peer(decision.next, encode(pkt));
        return;
    }
    case RoutingDecision::Kind::Drop:
        drop(pkt, decision.reason == RoutingDecision::DropReason::TtlExpired ? DropKind::TtlExpired
                                                                              : DropKind::NoRoute);
        return;
    case RoutingDecision::Kind::DeliverLocal:
        if (originated && pkt.dst != address_ && state_ == State::Joining && upstream_) {
            // Not routable yet: let the bootstrap route on our behalf.
            forward_hook(pkt);
            send_direct_hooked(upstream_->endpoint, pkt);
            return;
        }
        deliver_local(pkt);
        return;
    }
}

void OverlayNode::deliver_local(const BrunetPacket& pkt)
{
    switch (pkt.type) {
    case PayloadType::IpTunnel:
        if (pkt.dst != address_) {
            drop(pkt, DropKind::Misdelivered);
            return;
        }
        break;
    case PayloadType::Dht: break;
    case PayloadType::OverlayControl: {
        ControlMessage msg;
        try {
            msg = decode_control(pkt.payload);
        } catch (const ControlDecodeError&) {
            ++counters_.decode_errors;
            return;
        }
        if (const auto* req = std::get_if<ConnectRequest>(&msg)) handle_routed_request(pkt, *req);
        else if (const auto* relay = std::get_if<Relay>(&msg)) handle_relay(pkt, *relay);
        return;
    }
    }
    ++counters_.delivered;
    if (auto h = handlers_.find(pkt.type); h != handlers_.end() && h->second) h->second(pkt);
}

void OverlayNode::drop(const BrunetPacket& pkt, DropKind kind)
{
    switch (kind) {
    case DropKind::TtlExpired: ++counters_.ttl_drops; break;
    case DropKind::NoRoute: ++counters_.no_route_drops; break;
    case DropKind::Misdelivered: ++counters_.misdelivered; break;
    case DropKind::RelayFailed: break;
    }
    if (on_drop) on_drop(pkt, kind);
}

// ---------------------------------------------------------------- output

BrunetPacket OverlayNode::make_control(const NodeAddress& dst, const ControlMessage& msg) const
{
    BrunetPacket pkt;
    pkt.type = PayloadType::OverlayControl;
    pkt.src = address_;
    pkt.dst = dst;
    pkt.payload = encode_control(msg);
    return pkt;
}

void OverlayNode::send_direct(const Endpoint& to, BrunetPacket pkt)
{
    forward_hook(pkt);
    send_direct_hooked(to, pkt);
}

void OverlayNode::send_direct_hooked(const Endpoint& to, const BrunetPacket& pkt)
{
    ++counters_.datagrams_out;
    env_.send(to, encode(pkt));
}

void OverlayNode::send_to_peer(const NodeAddress& peer, Bytes encoded)
{
    const auto* c = table_.find(peer);
    if (!c) return;
    ++counters_.datagrams_out;
    if (c->direct()) {
        env_.send(c->endpoint, std::move(encoded));
        return;
    }
    const auto* via = table_.find(*c->via);
    if (!via || !via->direct()) {
        ++counters_.relay_failures;
        return;
    }
    ++counters_.relayed;
    BrunetPacket wrapper = make_control(via->address, Relay{peer, std::move(encoded)});
    forward_hook(wrapper);
    env_.send(via->endpoint, encode(wrapper));
}

void OverlayNode::originate_control(const NodeAddress& dst, const ControlMessage& msg)
{
    route(make_control(dst, msg), true);
}

void OverlayNode::send_routed(PayloadType type, const NodeAddress& dst, Bytes payload)
{
    if (state_ == State::Stopped || state_ == State::Idle) return;
    BrunetPacket pkt;
    pkt.type = type;
    pkt.src = address_;
    pkt.dst = dst;
    pkt.payload = std::move(payload);
    route(std::move(pkt), true);
}

} // namespace ipop::overlay
