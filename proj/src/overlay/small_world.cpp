#include "ipop/overlay/small_world.hpp"

#include <algorithm>
#include <cmath>

namespace ipop::overlay {

namespace {

constexpr double kRingSize = 1.4615016373309029e48; // 2^160

}

std::optional<double> estimate_network_size(const ConnectionTable& table)
{
    if (table.near_left().empty() || table.near_right().empty()) return std::nullopt;
    const auto& self = table.owner();
    double span = clockwise_distance(table.near_left().back(), self).to_double() +
                  clockwise_distance(self, table.near_right().back()).to_double();
    if (span <= 0.0) return std::nullopt;
    auto members = static_cast<double>(table.near_left().size() + table.near_right().size());
    return std::clamp(members * kRingSize / span, 1.0, kRingSize);
}

std::size_t shortcut_budget(double network_size)
{
    if (network_size < 2.0) return 0;
    return static_cast<std::size_t>(std::ceil(std::log2(network_size) - 1e-9));
}

NodeAddress sample_shortcut_target(const ConnectionTable& table, Rng& rng)
{
    const auto& self = table.owner();
    double nearest_far = 1.0;
    for (const auto& a : table.near_left())
        nearest_far = std::max(nearest_far, clockwise_distance(a, self).to_double());
    for (const auto& a : table.near_right())
        nearest_far = std::max(nearest_far, clockwise_distance(self, a).to_double());

    double lo = std::min(std::log2(nearest_far), 159.0);
    double x = rng.uniform(lo, 159.0);
    NodeAddress d = NodeAddress::from_log2(x);
    return rng.bernoulli(0.5) ? self + d : self - d;
}

} // namespace ipop::overlay
