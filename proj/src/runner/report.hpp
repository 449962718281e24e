#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bplab::runner {

struct RunRecord {
    std::string rep;   // objective name, "end-to-end", or a baseline name
    std::string task;  // "objectnav" / "leavereturn"
    int seed = 0;
    double accuracy = 0.0;
    uint64_t fingerprint = 0;  // config fingerprint of the producing run

    bool operator==(const RunRecord&) const = default;
};

// records.jsonl under dir, one JSON object per line, append-only
void append_record(const std::string& dir, const RunRecord& r);
std::vector<RunRecord> read_records(const std::string& dir);

// Max over seeds per (rep, task). Rows follow the objective declaration order,
// then end-to-end, then the baselines; columns objectnav before leavereturn.
std::string report_csv(const std::vector<RunRecord>& records);
std::string report_text(const std::vector<RunRecord>& records);

} // namespace bplab::runner
