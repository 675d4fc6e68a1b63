#pragma once

#include "ipop/common/random.hpp"
#include "ipop/common/time.hpp"

#include <optional>

namespace ipop::transport {

struct LatencyModel {
    enum class Kind { Fixed, Uniform, Normal };

    Kind kind = Kind::Fixed;
    Micros fixed{1000};
    Micros min{0};
    Micros max{0};
    Micros mean{0};
    Micros stddev{0};

    static LatencyModel constant(Micros value) { return {Kind::Fixed, value}; }
    static LatencyModel uniform(Micros lo, Micros hi)
    {
        LatencyModel m;
        m.kind = Kind::Uniform;
        m.min = lo;
        m.max = hi;
        return m;
    }
    static LatencyModel normal(Micros mu, Micros sigma)
    {
        LatencyModel m;
        m.kind = Kind::Normal;
        m.mean = mu;
        m.stddev = sigma;
        return m;
    }

    // Never negative. Fixed models draw nothing from the generator.
    Micros sample(Rng& rng) const;
};

struct ChannelProfile {
    LatencyModel latency;
    double drop = 0.0;
    double reorder = 0.0;
    std::optional<double> bandwidth; // bytes per simulated second

    // Throws std::invalid_argument naming the bad field.
    void validate() const;
};

} // namespace ipop::transport
