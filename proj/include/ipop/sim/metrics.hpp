#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace ipop::sim {

/// Append-only run record: one JSON object per event, serialized with a
/// fixed key order so that equal runs produce equal bytes.
class MetricsLog {
public:
    using Record = nlohmann::ordered_json;

    void append(Record record) { records_.push_back(std::move(record)); }
    const std::vector<Record>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }

    std::vector<const Record*> of_type(const std::string& type) const;

    std::string to_jsonl() const;
    // Flat key,value rows taken from the summary record.
    std::string to_csv_summary() const;

private:
    std::vector<Record> records_;
};

} // namespace ipop::sim
