#include "ipop/overlay/connection_table.hpp"

#include <algorithm>
#include <set>

namespace ipop::overlay {

ConnectionTable::ConnectionTable(NodeAddress owner, std::size_t k) : owner_(owner), k_(k == 0 ? 1 : k) {}

bool ConnectionTable::add(Connection c)
{
    if (c.address == owner_) return false;
    auto [it, inserted] = entries_.insert_or_assign(c.address, c);
    (void)it;
    recompute_near();
    return inserted;
}

bool ConnectionTable::remove(const NodeAddress& address)
{
    if (entries_.erase(address) == 0) return false;
    recompute_near();
    return true;
}

const Connection* ConnectionTable::find(const NodeAddress& address) const
{
    auto it = entries_.find(address);
    return it == entries_.end() ? nullptr : &it->second;
}

bool ConnectionTable::is_near(const NodeAddress& address) const
{
    return std::find(left_.begin(), left_.end(), address) != left_.end() ||
           std::find(right_.begin(), right_.end(), address) != right_.end();
}

std::vector<NodeAddress> ConnectionTable::shortcuts() const
{
    std::vector<NodeAddress> out;
    for (const auto& [addr, c] : entries_)
        if (c.shortcut && !is_near(addr)) out.push_back(addr);
    return out;
}

void ConnectionTable::recompute_near()
{
    std::vector<std::pair<NodeAddress, NodeAddress>> by_left;
    std::vector<std::pair<NodeAddress, NodeAddress>> by_right;
    by_left.reserve(entries_.size());
    by_right.reserve(entries_.size());
    for (const auto& [addr, c] : entries_) {
        by_left.emplace_back(clockwise_distance(addr, owner_), addr);
        by_right.emplace_back(clockwise_distance(owner_, addr), addr);
    }
    auto take = [this](auto& v, std::vector<NodeAddress>& out) {
        std::size_t n = std::min(k_, v.size());
        std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n), v.end());
        out.clear();
        for (std::size_t i = 0; i < n; ++i) out.push_back(v[i].second);
    };
    take(by_left, left_);
    take(by_right, right_);
}

bool ConnectionTable::would_be_near(const NodeAddress& candidate) const
{
    if (candidate == owner_) return false;
    if (contains(candidate)) return is_near(candidate);
    if (left_.size() < k_ || right_.size() < k_) return true;
    auto dl = clockwise_distance(candidate, owner_);
    auto dr = clockwise_distance(owner_, candidate);
    return dl < clockwise_distance(left_.back(), owner_) || dr < clockwise_distance(owner_, right_.back());
}

void ConnectionTable::record_traffic(const NodeAddress& dest, TimePoint now, Micros window)
{
    auto& q = traffic_[dest];
    q.push_back(now);
    while (!q.empty() && q.front() + window <= now) q.pop_front();
}

std::size_t ConnectionTable::traffic_count(const NodeAddress& dest, TimePoint now, Micros window) const
{
    auto it = traffic_.find(dest);
    if (it == traffic_.end()) return 0;
    return static_cast<std::size_t>(
        std::count_if(it->second.begin(), it->second.end(), [&](TimePoint t) { return t + window > now; }));
}

bool ConnectionTable::invariants_hold() const
{
    if (entries_.count(owner_)) return false;
    auto check_side = [this](const std::vector<NodeAddress>& side, bool left) {
        if (side.size() > k_) return false;
        std::set<NodeAddress> seen(side.begin(), side.end());
        if (seen.size() != side.size()) return false;
        for (std::size_t i = 1; i < side.size(); ++i) {
            auto prev = left ? clockwise_distance(side[i - 1], owner_) : clockwise_distance(owner_, side[i - 1]);
            auto cur = left ? clockwise_distance(side[i], owner_) : clockwise_distance(owner_, side[i]);
            if (!(prev < cur)) return false;
        }
        for (const auto& a : side)
            if (!entries_.count(a)) return false;
        return true;
    };
    return check_side(left_, true) && check_side(right_, false);
}

RoutingDecision next_hop(const NodeAddress& self, const NodeAddress& dest, const ConnectionTable& table,
                         std::uint8_t ttl)
{
    if (dest == self) return RoutingDecision::deliver_local();

    const NodeAddress own = ring_distance(self, dest);
    const NodeAddress* best = nullptr;
    NodeAddress best_distance;
    for (const auto& [addr, c] : table.entries()) {
        auto d = ring_distance(addr, dest);
        // entries are visited in increasing address order, so strict < keeps
        // the smaller address on ties
        if (best == nullptr || d < best_distance) {
            best = &addr;
            best_distance = d;
        }
    }
    if (best == nullptr || !(best_distance < own)) return RoutingDecision::deliver_local();
    if (ttl == 0) return RoutingDecision::drop(RoutingDecision::DropReason::TtlExpired);
    return RoutingDecision::forward(*best);
}

RepairResult repair(ConnectionTable& table, const NodeAddress& failed)
{
    RepairResult result;
    const bool was_left = std::find(table.near_left().begin(), table.near_left().end(), failed) !=
                          table.near_left().end();
    const bool was_right = std::find(table.near_right().begin(), table.near_right().end(), failed) !=
                           table.near_right().end();
    result.removed = table.remove(failed);
    if (!result.removed || (!was_left && !was_right)) return result;

    std::set<NodeAddress> probes;
    if (was_left) probes.insert(table.near_left().begin(), table.near_left().end());
    if (was_right) probes.insert(table.near_right().begin(), table.near_right().end());
    if (probes.empty()) {
        probes.insert(table.near_left().begin(), table.near_left().end());
        probes.insert(table.near_right().begin(), table.near_right().end());
    }
    for (const auto& p : probes)
        if (table.find(p) && table.find(p)->direct()) result.probes.push_back(p);
    return result;
}

std::optional<NodeAddress> maybe_create_shortcut(ConnectionTable& table, const NodeAddress& dest, TimePoint now,
                                                 std::size_t threshold, Micros window)
{
    if (threshold == 0 || dest == table.owner()) return std::nullopt;
    if (table.contains(dest)) return std::nullopt;
    if (table.traffic_count(dest, now, window) <= threshold) return std::nullopt;
    table.reset_traffic(dest);
    return dest;
}

} // namespace ipop::overlay
