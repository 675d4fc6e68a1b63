#pragma once

#include "ipop/common/random.hpp"
#include "ipop/common/time.hpp"
#include "ipop/nat/nat_device.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace ipop::nat {

/// When each side of a hole punch sends its connect requests. Both sides
/// follow the same schedule, each with its own jitter.
struct RetrySchedule {
    int attempts = 5;
    Micros spacing{1'000'000};
    Micros jitter{100'000};

    // Offsets from the start of the punch; the first attempt is immediate.
    std::vector<Micros> draw(Rng& rng) const;
    // How long after the start the punch is given up.
    Micros budget() const { return spacing * attempts; }
};

enum class OpenOutcome { Connected, Relayed };

struct OpenResult {
    OpenOutcome outcome = OpenOutcome::Relayed;
    // Simulated time from the start of the punch to the first ack.
    std::optional<Micros> elapsed;
    int requests_sent = 0;
};

/// Runs a hole punch between two hosts behind the given NATs (nullopt is a
/// public host). Both first register with a public rendezvous host to learn
/// their translated endpoints, then exchange connect requests on the retry
/// schedule. Connected as soon as either side receives an ack.
OpenResult simultaneous_open(std::optional<NatType> a, std::optional<NatType> b, std::uint64_t seed,
                             const RetrySchedule& schedule = {}, Micros one_way = Micros{10'000});

} // namespace ipop::nat
