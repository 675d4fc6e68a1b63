#pragma once

#include "ipop/nat/simultaneous_open.hpp"
#include "ipop/nat/translation.hpp"
#include "ipop/overlay/connection_table.hpp"
#include "ipop/overlay/control_messages.hpp"
#include "ipop/transport/brunet_packet.hpp"
#include "ipop/transport/environment.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <vector>

namespace ipop::overlay {

using transport::BrunetPacket;
using transport::Endpoint;
using transport::PayloadType;

struct OverlayConfig {
    std::size_t k = 2;
    bool small_world_shortcuts = true;
    std::size_t shortcut_threshold = 100; // packets per window; 0 disables
    Micros shortcut_window = seconds(10);

    Micros keepalive_interval = seconds(30);
    Micros ping_timeout = seconds(3);
    int ping_retries = 2;
    Micros stabilize_interval = seconds(10);

    nat::RetrySchedule link_schedule{};
    int join_attempts = 5;
    Micros join_spacing = seconds(1);
    Micros join_backoff = seconds(5);

    Micros leaf_lifetime = seconds(120);
    Micros failed_blacklist = seconds(90);
    Micros relay_retry_window = seconds(120);
    Micros binding_lifetime = seconds(120);
};

struct OverlayCounters {
    std::uint64_t datagrams_in = 0;
    std::uint64_t datagrams_out = 0;
    std::uint64_t decode_errors = 0;
    std::uint64_t forwarded = 0;
    std::uint64_t delivered = 0;
    std::uint64_t ttl_drops = 0;
    std::uint64_t no_route_drops = 0;
    std::uint64_t misdelivered = 0;
    std::uint64_t relayed = 0;
    std::uint64_t relay_failures = 0;
    std::uint64_t join_timeouts = 0;
    std::uint64_t links_direct = 0;
    std::uint64_t links_relayed = 0;
    std::uint64_t links_failed = 0;
    std::uint64_t shortcut_requests = 0;
    std::uint64_t traffic_shortcuts = 0;
    std::uint64_t failures_detected = 0;
    std::uint64_t rediscoveries = 0;
};

enum class DropKind { TtlExpired, NoRoute, Misdelivered, RelayFailed };
const char* to_string(DropKind kind);

/// One overlay participant: joins the ring, keeps its near and shortcut
/// links alive, routes envelopes greedily and hands locally delivered
/// IP-tunnel and DHT payloads to registered handlers.
///
/// Everything runs on the environment's serialized event stream. Timers
/// scheduled before stop() become no-ops.
class OverlayNode {
public:
    using Handler = std::function<void(const BrunetPacket&)>;

    enum class State { Idle, Joining, Joined, Stopped };

    OverlayNode(NodeAddress address, transport::NodeEnvironment& env, OverlayConfig config = {});
    OverlayNode(const OverlayNode&) = delete;
    OverlayNode& operator=(const OverlayNode&) = delete;

    // Without a bootstrap the node forms a ring of one.
    void start(std::optional<Endpoint> bootstrap);
    void stop();

    void on_datagram(const Endpoint& from, ByteView bytes);

    // Originates a packet: stamps src, ttl and hops, then routes it.
    void send_routed(PayloadType type, const NodeAddress& dst, Bytes payload);

    void set_handler(PayloadType type, Handler handler) { handlers_[type] = std::move(handler); }

    // Asks the ring for a direct link to the root of `key`.
    void request_shortcut(const NodeAddress& key);

    const NodeAddress& address() const { return address_; }
    State state() const { return state_; }
    bool joined() const { return state_ == State::Joined; }
    const ConnectionTable& table() const { return table_; }
    const OverlayConfig& config() const { return config_; }
    const OverlayCounters& counters() const { return counters_; }
    const nat::TranslationObserver& translation() const { return translation_; }
    std::size_t leaf_count() const { return leaves_.size(); }
    std::size_t pending_links() const { return pending_.size(); }

    // True when this node is the address-root of `key` for its current table.
    bool is_root_for(const NodeAddress& key) const;

    // Endpoint put in connect requests and acks, after rediscovery if the
    // last observation is stale.
    Endpoint advertised_endpoint();

    std::function<void()> on_joined;
    std::function<void()> on_table_changed;
    std::function<void()> on_stabilize;
    std::function<void(const BrunetPacket&, const RoutingDecision&)> on_route;
    std::function<void(const BrunetPacket&, DropKind)> on_drop;

private:
    struct PendingLink {
        LinkPurpose purpose;
        Endpoint endpoint;
        std::uint64_t token;
    };
    struct Liveness {
        std::uint32_t nonce;
        int retries_left;
        std::uint64_t token;
    };
    struct Leaf {
        Endpoint endpoint;
        TimePoint last_seen;
    };
    struct Upstream {
        NodeAddress address;
        Endpoint endpoint;
    };

    void after(Micros delay, std::function<void()> fn);

    // join
    void send_leaf_request();
    void send_join_request();
    void join_timed_out();
    void handle_join_ack(const BrunetPacket& pkt, const ConnectAck& ack);

    // links
    void start_link(const NodeAddress& target, const Endpoint& endpoint, LinkPurpose purpose, bool announce);
    void link_attempt(const NodeAddress& target, std::uint64_t token);
    void link_exhausted(const NodeAddress& target, std::uint64_t token);
    std::optional<NodeAddress> find_relay(const NodeAddress& target) const;
    bool fresh_list(const NodeAddress& peer) const;
    void add_connection(const NodeAddress& peer, const Endpoint& endpoint, bool shortcut);
    void consider_candidates(const std::vector<NeighborInfo>& candidates);
    std::vector<NeighborInfo> neighbor_infos() const;
    bool blacklisted(const NodeAddress& a) const;
    void note_near_change(const std::vector<NodeAddress>& left, const std::vector<NodeAddress>& right);

    // liveness and upkeep
    void keepalive_tick();
    void send_ping(const NodeAddress& peer);
    void ping_expired(const NodeAddress& peer, std::uint64_t token);
    void declare_failed(const NodeAddress& peer);
    void stabilize_tick();
    void push_neighbor_lists(bool reply_requested);
    void top_up_shortcuts();

    // message handling
    void handle_control(const Endpoint& from, BrunetPacket pkt);
    void handle_request(const Endpoint& from, const BrunetPacket& pkt, const ConnectRequest& req);
    void handle_routed_request(const BrunetPacket& pkt, const ConnectRequest& req);
    void handle_ack(const Endpoint& from, const BrunetPacket& pkt, const ConnectAck& ack);
    void handle_relay(const BrunetPacket& pkt, const Relay& relay);
    void route(BrunetPacket pkt, bool originated);
    void deliver_local(const BrunetPacket& pkt);
    void drop(const BrunetPacket& pkt, DropKind kind);

    // output
    BrunetPacket make_control(const NodeAddress& dst, const ControlMessage& msg) const;
    // Applies the per-transmission header update, then sends.
    void send_direct(const Endpoint& to, BrunetPacket pkt);
    void send_direct_hooked(const Endpoint& to, const BrunetPacket& pkt);
    void send_to_peer(const NodeAddress& peer, Bytes encoded);
    void originate_control(const NodeAddress& dst, const ControlMessage& msg);

    NodeAddress address_;
    transport::NodeEnvironment& env_;
    OverlayConfig config_;
    ConnectionTable table_;
    nat::TranslationObserver translation_;
    State state_ = State::Idle;
    std::uint64_t generation_ = 0;
    std::uint64_t next_token_ = 0;
    OverlayCounters counters_;

    std::optional<Endpoint> bootstrap_;
    std::optional<Upstream> upstream_;
    int join_attempt_ = 0;
    bool join_acked_ = false;

    std::map<NodeAddress, PendingLink> pending_;
    std::map<NodeAddress, Liveness> liveness_;
    std::map<NodeAddress, Leaf> leaves_;
    std::map<NodeAddress, std::vector<NeighborInfo>> neighbor_lists_;
    std::map<NodeAddress, TimePoint> neighbor_list_at_;
    std::map<NodeAddress, TimePoint> blacklist_;
    std::map<NodeAddress, std::pair<Endpoint, TimePoint>> relay_wanted_;
    std::map<NodeAddress, TimePoint> shortcut_requests_;
    std::map<PayloadType, Handler> handlers_;
    TimePoint last_rediscovery_{-1};
};

} // namespace ipop::overlay
