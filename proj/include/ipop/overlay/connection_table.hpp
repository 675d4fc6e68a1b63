#pragma once

#include "ipop/common/time.hpp"
#include "ipop/overlay/node_address.hpp"
#include "ipop/transport/endpoint.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <vector>

namespace ipop::overlay {

/// One overlay edge. A relayed edge has no usable direct path; traffic for
/// it is handed to `via`, a node directly connected to both ends.
struct Connection {
    NodeAddress address;
    transport::Endpoint endpoint;
    std::optional<NodeAddress> via;
    bool shortcut = false;

    bool direct() const { return !via.has_value(); }
};

/// A node's edges: the k nearest predecessors and successors on the ring,
/// plus long-range shortcuts, plus per-destination traffic counters used to
/// decide when a shortcut is worth creating.
///
/// Near sets are derived from the full entry set, so they are always the k
/// closest known entries on each side, ordered nearest first.
class ConnectionTable {
public:
    explicit ConnectionTable(NodeAddress owner, std::size_t k = 2);

    const NodeAddress& owner() const { return owner_; }
    std::size_t k() const { return k_; }

    // Inserts or updates. Returns false (and does nothing) for the owner's
    // own address.
    bool add(Connection c);
    bool remove(const NodeAddress& address);

    const Connection* find(const NodeAddress& address) const;
    bool contains(const NodeAddress& address) const { return entries_.count(address) != 0; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::map<NodeAddress, Connection>& entries() const { return entries_; }

    const std::vector<NodeAddress>& near_left() const { return left_; }
    const std::vector<NodeAddress>& near_right() const { return right_; }
    bool is_near(const NodeAddress& address) const;
    // Entries flagged as shortcuts that are not also near neighbors.
    std::vector<NodeAddress> shortcuts() const;

    // Whether `candidate` would land in a near set if it were added.
    bool would_be_near(const NodeAddress& candidate) const;

    void record_traffic(const NodeAddress& dest, TimePoint now, Micros window);
    std::size_t traffic_count(const NodeAddress& dest, TimePoint now, Micros window) const;
    void reset_traffic(const NodeAddress& dest) { traffic_.erase(dest); }

    // no-self, uniqueness, ordering and size of the near sets
    bool invariants_hold() const;

private:
    void recompute_near();

    NodeAddress owner_;
    std::size_t k_;
    std::map<NodeAddress, Connection> entries_;
    std::vector<NodeAddress> left_;
    std::vector<NodeAddress> right_;
    std::map<NodeAddress, std::deque<TimePoint>> traffic_;
};

struct RoutingDecision {
    enum class Kind { DeliverLocal, Forward, Drop };
    enum class DropReason { TtlExpired, NoRoute };

    Kind kind = Kind::DeliverLocal;
    NodeAddress next;
    DropReason reason = DropReason::NoRoute;

    static RoutingDecision deliver_local() { return {}; }
    static RoutingDecision forward(NodeAddress to) { return {Kind::Forward, to}; }
    static RoutingDecision drop(DropReason why) { return {Kind::Drop, {}, why}; }

    bool operator==(const RoutingDecision&) const = default;
};

/// Greedy ring routing. Delivers locally when dest is the owner or when no
/// entry is strictly closer to dest than the owner; otherwise forwards to
/// the closest entry (smaller address on ties). A packet that still needs
/// forwarding with ttl 0 is dropped.
RoutingDecision next_hop(const NodeAddress& self, const NodeAddress& dest, const ConnectionTable& table,
                         std::uint8_t ttl);

struct RepairResult {
    bool removed = false;
    // Near neighbors to ask for their neighbor lists so the vacated slots
    // can be refilled.
    std::vector<NodeAddress> probes;
};

RepairResult repair(ConnectionTable& table, const NodeAddress& failed);

/// Threshold 0 disables traffic-triggered shortcuts. Returns the
/// destination to connect to when its counter exceeds the threshold and it
/// is not already in the table; the counter restarts afterwards.
std::optional<NodeAddress> maybe_create_shortcut(ConnectionTable& table, const NodeAddress& dest, TimePoint now,
                                                 std::size_t threshold, Micros window);

} // namespace ipop::overlay
