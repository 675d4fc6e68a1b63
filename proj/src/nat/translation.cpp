#include "ipop/nat/translation.hpp"

namespace ipop::nat {

std::optional<ObservedAddress> TranslationObserver::observe(const overlay::NodeAddress& peer,
                                                            const transport::Endpoint& echoed, TimePoint now)
{
    if (!echoed.valid() || echoed == local_) return std::nullopt;
    ObservedAddress obs{peer, echoed, now};
    latest_ = obs;
    if (history_.size() == kHistoryLimit) history_.erase(history_.begin());
    history_.push_back(obs);
    return obs;
}

} // namespace ipop::nat
