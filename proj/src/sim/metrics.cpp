#include "ipop/sim/metrics.hpp"

namespace ipop::sim {

std::vector<const MetricsLog::Record*> MetricsLog::of_type(const std::string& type) const
{
    std::vector<const Record*> out;
    for (const auto& r : records_)
        if (r.value("type", "") == type) out.push_back(&r);
    return out;
}

std::string MetricsLog::to_jsonl() const
{
    std::string out;
    for (const auto& r : records_) {
        out += r.dump();
        out += '\n';
    }
    return out;
}

namespace {

void flatten(const MetricsLog::Record& value, const std::string& prefix, std::string& out)
{
    if (value.is_object()) {
        for (const auto& [key, child] : value.items())
            flatten(child, prefix.empty() ? key : prefix + "." + key, out);
        return;
    }
    out += prefix;
    out += ',';
    out += value.is_string() ? value.get<std::string>() : value.dump();
    out += '\n';
}

} // namespace

std::string MetricsLog::to_csv_summary() const
{
    std::string out = "metric,value\n";
    for (const auto* r : of_type("summary")) {
        MetricsLog::Record copy = *r;
        copy.erase("type");
        flatten(copy, "", out);
    }
    return out;
}

} // namespace ipop::sim
