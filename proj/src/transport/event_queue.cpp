#include "ipop/transport/event_queue.hpp"

#include <algorithm>

namespace ipop::transport {

void EventQueue::schedule_at(TimePoint when, std::function<void()> fn)
{
    if (when < now_) when = now_;
    heap_.push_back(Event{when, next_seq_++, std::move(fn)});
    std::push_heap(heap_.begin(), heap_.end(), Later{});
}

bool EventQueue::step()
{
    if (heap_.empty()) return false;
    std::pop_heap(heap_.begin(), heap_.end(), Later{});
    Event ev = std::move(heap_.back());
    heap_.pop_back();
    now_ = ev.when;
    ++executed_;
    ev.fn();
    return true;
}

void EventQueue::run_until(TimePoint until)
{
    while (!heap_.empty() && heap_.front().when <= until) step();
    if (now_ < until) now_ = until;
}

void EventQueue::run()
{
    while (step()) {
    }
}

} // namespace ipop::transport
