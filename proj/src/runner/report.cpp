#include "runner/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "common/binio.hpp"
#include "common/error.hpp"
#include "objectives/objectives.hpp"
#include "runner/triplet.hpp"

namespace bplab::runner {

using nlohmann::json;

namespace {

std::string records_path(const std::string& dir) { return dir + "/records.jsonl"; }

std::vector<std::string> canonical_rows() {
    std::vector<std::string> rows;
    for (objectives::ObjectiveKind k : objectives::objective_order())
        rows.push_back(objectives::objective_name(k));
    rows.push_back("end-to-end");
    rows.push_back(baseline_name(BaselineKind::MoveAhead));
    rows.push_back(baseline_name(BaselineKind::ModalA));
    rows.push_back(baseline_name(BaselineKind::ModalT));
    return rows;
}

struct Grid {
    std::vector<std::string> rows;
    std::vector<std::string> cols;
    std::map<std::pair<std::string, std::string>, double> best;
};

Grid collect(const std::vector<RunRecord>& records) {
    Grid g;
    for (const std::string& r : canonical_rows())
        if (std::any_of(records.begin(), records.end(),
                        [&](const RunRecord& rec) { return rec.rep == r; }))
            g.rows.push_back(r);
    for (const RunRecord& rec : records)
        if (std::find(g.rows.begin(), g.rows.end(), rec.rep) == g.rows.end())
            g.rows.push_back(rec.rep);
    for (const std::string& c : {std::string("objectnav"), std::string("leavereturn")})
        if (std::any_of(records.begin(), records.end(),
                        [&](const RunRecord& rec) { return rec.task == c; }))
            g.cols.push_back(c);
    for (const RunRecord& rec : records)
        if (std::find(g.cols.begin(), g.cols.end(), rec.task) == g.cols.end())
            g.cols.push_back(rec.task);
    for (const RunRecord& rec : records) {
        auto key = std::make_pair(rec.rep, rec.task);
        auto it = g.best.find(key);
        if (it == g.best.end() || rec.accuracy > it->second) g.best[key] = rec.accuracy;
    }
    return g;
}

std::string fmt_acc(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

} // namespace

void append_record(const std::string& dir, const RunRecord& r) {
    std::filesystem::create_directories(dir);
    json j = {{"rep", r.rep},
              {"task", r.task},
              {"seed", r.seed},
              {"accuracy", r.accuracy},
              {"fingerprint", r.fingerprint}};
    std::ofstream out(records_path(dir), std::ios::app);
    check(out.good(), ErrorCode::Io, "cannot append to " + records_path(dir));
    out << j.dump() << "\n";
}

std::vector<RunRecord> read_records(const std::string& dir) {
    std::ifstream in(records_path(dir));
    check(in.good(), ErrorCode::Io, "cannot read " + records_path(dir));
    std::vector<RunRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            fail(ErrorCode::CorruptRecord, std::string("record parse: ") + e.what());
        }
        RunRecord r;
        r.rep = j.at("rep").get<std::string>();
        r.task = j.at("task").get<std::string>();
        r.seed = j.at("seed").get<int>();
        r.accuracy = j.at("accuracy").get<double>();
        r.fingerprint = j.value("fingerprint", uint64_t{0});
        out.push_back(r);
    }
    return out;
}

std::string report_csv(const std::vector<RunRecord>& records) {
    check(!records.empty(), ErrorCode::EmptyDataset, "no records to report");
    Grid g = collect(records);
    std::ostringstream out;
    out << "representation";
    for (const std::string& c : g.cols) out << "," << c;
    out << "\n";
    for (const std::string& r : g.rows) {
        out << r;
        for (const std::string& c : g.cols) {
            out << ",";
            auto it = g.best.find({r, c});
            if (it != g.best.end()) out << fmt_acc(it->second);
        }
        out << "\n";
    }
    return out.str();
}

std::string report_text(const std::vector<RunRecord>& records) {
    check(!records.empty(), ErrorCode::EmptyDataset, "no records to report");
    Grid g = collect(records);
    size_t name_w = std::string("representation").size();
    for (const std::string& r : g.rows) name_w = std::max(name_w, r.size());
    std::ostringstream out;
    out << std::string(name_w - std::string("representation").size(), ' ') << "representation";
    for (const std::string& c : g.cols)
        out << "  " << std::string(c.size() < 6 ? 6 - c.size() : 0, ' ') << c;
    out << "\n";
    for (const std::string& r : g.rows) {
        out << std::string(name_w - r.size(), ' ') << r;
        for (const std::string& c : g.cols) {
            auto it = g.best.find({r, c});
            const std::string cell = it != g.best.end() ? fmt_acc(it->second) : "-";
            const size_t w = std::max<size_t>(c.size(), 6);
            out << "  " << std::string(w > cell.size() ? w - cell.size() : 0, ' ') << cell;
        }
        out << "\n";
    }
    std::vector<uint64_t> prints;
    for (const RunRecord& rec : records)
        if (rec.fingerprint &&
            std::find(prints.begin(), prints.end(), rec.fingerprint) == prints.end())
            prints.push_back(rec.fingerprint);
    if (!prints.empty()) {
        out << "config fingerprints:";
        char buf[24];
        for (uint64_t f : prints) {
            std::snprintf(buf, sizeof buf, " %016llx", static_cast<unsigned long long>(f));
            out << buf;
        }
        out << "\n";
    }
    return out.str();
}

} // namespace bplab::runner
