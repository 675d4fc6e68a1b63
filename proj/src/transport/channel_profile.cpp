#include "ipop/transport/channel_profile.hpp"

#include <cmath>
#include <stdexcept>

namespace ipop::transport {

Micros LatencyModel::sample(Rng& rng) const
{
    switch (kind) {
    case Kind::Fixed:
        return fixed;
    case Kind::Uniform:
        return Micros{rng.uniform_int(min.count(), max.count())};
    case Kind::Normal: {
        double v = rng.normal(static_cast<double>(mean.count()), static_cast<double>(stddev.count()));
        return Micros{v < 0 ? 0 : static_cast<std::int64_t>(std::llround(v))};
    }
    }
    return fixed;
}

void ChannelProfile::validate() const
{
    if (!(drop >= 0.0 && drop <= 1.0)) throw std::invalid_argument("drop probability must be in [0,1]");
    if (!(reorder >= 0.0 && reorder <= 1.0)) throw std::invalid_argument("reorder probability must be in [0,1]");
    if (bandwidth && !(*bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be positive");
    switch (latency.kind) {
    case LatencyModel::Kind::Fixed:
        if (latency.fixed.count() < 0) throw std::invalid_argument("latency must be non-negative");
        break;
    case LatencyModel::Kind::Uniform:
        if (latency.min.count() < 0 || latency.max < latency.min)
            throw std::invalid_argument("latency range must satisfy 0 <= min <= max");
        break;
    case LatencyModel::Kind::Normal:
        if (latency.stddev.count() < 0) throw std::invalid_argument("latency stddev must be non-negative");
        break;
    }
}

} // namespace ipop::transport
