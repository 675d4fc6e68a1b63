#pragma once

#include "ipop/common/random.hpp"
#include "ipop/overlay/connection_table.hpp"

#include <cstddef>
#include <optional>

namespace ipop::overlay {

/// Network size estimated from how much of the ring the near sets span:
/// 2k neighbors covering `span` suggests 2k * 2^160 / span nodes overall.
/// Needs at least one neighbor on each side.
std::optional<double> estimate_network_size(const ConnectionTable& table);

/// ceil(log2 n) for n >= 2; 0 below that.
std::size_t shortcut_budget(double network_size);

/// A ring key for a long-range link: self +/- d where log2(d) is uniform
/// between log2 of the distance to the farthest near neighbor and 159. The
/// resulting density of links at distance d is proportional to 1/d.
NodeAddress sample_shortcut_target(const ConnectionTable& table, Rng& rng);

} // namespace ipop::overlay
