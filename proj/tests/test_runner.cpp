#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "common/binio.hpp"
#include "common/error.hpp"
#include "config/config.hpp"
#include "runner/report.hpp"
#include "runner/train.hpp"
#include "runner/triplet.hpp"
#include "tensor/checkpoint.hpp"

using namespace bplab;
using namespace bplab::runner;
using sim::Action;
using sim::Task;

namespace {

std::string temp_dir(const char* name) {
    auto dir = std::filesystem::temp_directory_path() / "bplab_tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

sim::GenParams small_world() {
    sim::GenParams p;
    p.min_size = 12;
    p.max_size = 16;
    p.max_rooms = 4;
    return p;
}

// tiny but structurally complete experiment
config::ExperimentConfig tiny_config() {
    config::ExperimentConfig cfg;
    cfg.gen = small_world();
    cfg.dims.cv = 8;
    cfg.dims.hb = 16;
    cfg.dims.compress_hidden = 16;
    cfg.dims.fuse_hidden = 16;
    cfg.budget.pretrain_frames = 300;
    cfg.budget.downstream_frames = 300;
    cfg.budget.houses = 4;
    cfg.budget.episodes_per_house = 2;
    cfg.budget.downstream_houses = 4;
    cfg.budget.downstream_episodes_per_house = 2;
    cfg.budget.batch_episodes = 2;
    cfg.budget.eval_every = 2;
    cfg.budget.max_episode_len = 40;
    cfg.val_fraction = 0.25;
    return cfg;
}

data::Dataset tiny_dataset(const config::ExperimentConfig& cfg, Task task) {
    return data::build_dataset(task, cfg.budget.houses, cfg.budget.episodes_per_house, cfg.seed,
                               cfg.gen, cfg.encoder_seed);
}

// independent recount of the modal tables, map-based with explicit tie scan
struct OracleCounts {
    std::map<int, int64_t> global;
    std::map<std::pair<int, int>, int64_t> by_prev;     // (prev action, label)
    std::map<std::pair<int, int>, int64_t> by_triple;   // (key, label)
};

OracleCounts oracle_count(const data::Dataset& ds) {
    OracleCounts c;
    for (const sim::Episode& ep : ds.episodes) {
        std::vector<Action> acts;
        for (Action a : ep.actions)
            if (a != Action::Subdone) acts.push_back(a);
        for (int t = 0; t < static_cast<int>(acts.size()); ++t) {
            const int y = encode_triplet(acts, t);
            ++c.global[y];
            if (t >= 1) ++c.by_prev[{static_cast<int>(acts[t - 1]), y}];
            if (t >= 3) {
                const int key = static_cast<int>(acts[t - 3]) * 36 +
                                static_cast<int>(acts[t - 2]) * 6 + static_cast<int>(acts[t - 1]);
                ++c.by_triple[{key, y}];
            }
        }
    }
    return c;
}

int oracle_modal(const std::map<int, int64_t>& counts) {
    int best = -1;
    int64_t best_n = 0;
    for (int id = 0; id < kTripletVocab; ++id) {
        auto it = counts.find(id);
        if (it != counts.end() && it->second > best_n) {
            best = id;
            best_n = it->second;
        }
    }
    return best;
}

} // namespace

TEST_CASE("triplet ids form a bijection over the declared vocabulary") {
    std::set<int> seen;
    int full = 0, two = 0, one = 0, done = 0;
    for (int id = 0; id < kTripletVocab; ++id) {
        const Triplet t = decode_triplet(id);
        CHECK(triplet_id(t) == id);
        CHECK(seen.insert(id).second);
        if (t[0] == Action::Done) ++done;
        else if (t[1] == Action::Done) ++one;
        else if (t[2] == Action::Done) ++two;
        else ++full;
    }
    // enumeration oracle: 6^3 + 6^2 + 6 + 1
    CHECK(full == 216);
    CHECK(two == 36);
    CHECK(one == 6);
    CHECK(done == 1);
    CHECK(full + two + one + done == 259);

    CHECK(triplet_id({Action::MoveAhead, Action::MoveAhead, Action::MoveAhead}) == 0);
    CHECK_THROWS_AS(decode_triplet(259), Error);
    CHECK_THROWS_AS((void)triplet_id({Action::Subdone, Action::Done, Action::Done}), Error);
}

TEST_CASE("encode_triplet truncates at episode end") {
    const std::vector<Action> acts = {Action::MoveAhead, Action::RotateRight,
                                      Action::SmallRotateRight, Action::RotateLeft, Action::Done};
    CHECK(encode_triplet(acts, 0) == 0 * 36 + 1 * 6 + 2);
    CHECK(encode_triplet(acts, 1) == 1 * 36 + 2 * 6 + 3);
    CHECK(encode_triplet(acts, 2) == 216 + 2 * 6 + 3);
    CHECK(encode_triplet(acts, 3) == 252 + 3);
    CHECK(encode_triplet(acts, 4) == 258);
    CHECK_THROWS_AS(encode_triplet(acts, 5), Error);

    const std::vector<Action> bad = {Action::MoveAhead, Action::Subdone, Action::Done};
    CHECK_THROWS_AS(encode_triplet(bad, 0), Error);

    // every expert episode ends with the lone-Done label
    auto cfg = tiny_config();
    for (Task task : {Task::Explore, Task::ObjectNav, Task::LeaveReturn}) {
        data::Dataset ds = tiny_dataset(cfg, task);
        for (const sim::Episode& ep : ds.episodes) {
            std::vector<Action> acts2;
            for (Action a : ep.actions)
                if (a != Action::Subdone) acts2.push_back(a);
            CHECK(encode_triplet(acts2, static_cast<int>(acts2.size()) - 1) == 258);
        }
    }
}

TEST_CASE("modal tables match hand recounts") {
    SUBCASE("three-step episode from the spec") {
        data::Dataset ds;
        sim::Episode ep;
        ep.actions = {Action::MoveAhead, Action::MoveAhead, Action::Done};
        ds.episodes.push_back(ep);
        ModalTables tables = build_modal_tables(ds);
        // labels are (M,M,Done)=216, (M,Done)=252, (Done)=258, all once; ties
        // resolve to the lowest id
        CHECK(tables.global == 216);
        CHECK(tables.by_prev_action[static_cast<int>(Action::MoveAhead)] == 252);
        for (int a = 1; a < sim::kDownstreamActions; ++a) CHECK(tables.by_prev_action[a] == -1);
        for (int k = 0; k < 216; ++k) CHECK(tables.by_prev_key[k] == -1);
    }
    SUBCASE("tie breaks to the lowest label id") {
        data::Dataset ds;
        sim::Episode ep;
        ep.actions = {Action::RotateRight, Action::Done};
        ds.episodes.push_back(ep);
        ModalTables tables = build_modal_tables(ds);
        CHECK(tables.global == 252 + 1); // (R,Done)=253 vs (Done)=258, both count 1
    }
    SUBCASE("counting oracle on generated exploration data") {
        auto cfg = tiny_config();
        data::Dataset ds = tiny_dataset(cfg, Task::Explore);
        ModalTables tables = build_modal_tables(ds);
        OracleCounts oc = oracle_count(ds);
        CHECK(tables.global == oracle_modal(oc.global));
        for (int a = 0; a < sim::kDownstreamActions; ++a) {
            std::map<int, int64_t> sub;
            for (const auto& [key, n] : oc.by_prev)
                if (key.first == a) sub[key.second] = n;
            CHECK(tables.by_prev_action[a] == oracle_modal(sub));
        }
        for (int k = 0; k < 216; ++k) {
            std::map<int, int64_t> sub;
            for (const auto& [key, n] : oc.by_triple)
                if (key.first == k) sub[key.second] = n;
            CHECK(tables.by_prev_key[k] == oracle_modal(sub));
        }
        CHECK(build_modal_tables(ds) == tables);
    }
}

TEST_CASE("baseline accuracies equal brute-force recounts") {
    auto cfg = tiny_config();
    data::Dataset pretrain_ds = tiny_dataset(cfg, Task::Explore);
    ModalTables tables = build_modal_tables(pretrain_ds);
    for (Task task : {Task::ObjectNav, Task::LeaveReturn}) {
        data::Dataset eval_ds = tiny_dataset(cfg, task);
        for (BaselineKind kind :
             {BaselineKind::MoveAhead, BaselineKind::ModalA, BaselineKind::ModalT}) {
            EvalResult res = baseline_eval(kind, tables, eval_ds);
            int64_t hits = 0, steps = 0;
            std::array<int64_t, 3> pos{};
            for (const sim::Episode& ep : eval_ds.episodes)
                for (int t = 0; t < ep.length(); ++t) {
                    int pred;
                    if (kind == BaselineKind::MoveAhead) {
                        pred = 0;
                    } else if (kind == BaselineKind::ModalA) {
                        pred = t == 0 ? tables.global
                                      : tables.by_prev_action[static_cast<int>(ep.actions[t - 1])];
                        if (pred < 0) pred = tables.global;
                    } else {
                        pred = -1;
                        if (t >= 3)
                            pred = tables.by_prev_key[prev_key(ep.actions[t - 3], ep.actions[t - 2],
                                                               ep.actions[t - 1])];
                        if (pred < 0 && t >= 1)
                            pred = tables.by_prev_action[static_cast<int>(ep.actions[t - 1])];
                        if (pred < 0) pred = tables.global;
                    }
                    const int truth = encode_triplet(ep.actions, t);
                    hits += pred == truth;
                    for (int j = 0; j < 3; ++j)
                        pos[j] += decode_triplet(pred)[j] == decode_triplet(truth)[j];
                    ++steps;
                }
            CHECK(res.steps == steps);
            CHECK(res.accuracy == static_cast<double>(hits) / steps);
            for (int j = 0; j < 3; ++j)
                CHECK(res.pos_accuracy[j] == static_cast<double>(pos[j]) / steps);
        }
    }
}

TEST_CASE("move-ahead baseline is perfect on an all-ahead dataset") {
    data::Dataset ds;
    ds.manifest.task = Task::ObjectNav;
    sim::Episode ep;
    // triplet labels stay (M,M,M) until the tail truncation
    ep.actions.assign(12, Action::MoveAhead);
    ds.episodes.push_back(ep);
    ModalTables tables; // MoveAhead ignores tables
    EvalResult res = baseline_eval(BaselineKind::MoveAhead, tables, ds);
    // truncation turns the last two labels into (M,M,Done) and (M,Done)
    CHECK(res.accuracy == doctest::Approx(10.0 / 12.0));
    CHECK(res.pos_accuracy[0] == doctest::Approx(1.0));
    CHECK(res.pos_accuracy[1] == doctest::Approx(11.0 / 12.0));
    CHECK(res.pos_accuracy[2] == doctest::Approx(10.0 / 12.0));
}

TEST_CASE("config round-trips through json and fingerprints canonically") {
    config::ExperimentConfig cfg = tiny_config();
    cfg.objective.kind = objectives::ObjectiveKind::CPCA;
    cfg.objective.k = 8;
    config::ExperimentConfig back = config::from_json(config::to_json(cfg));
    CHECK(back == cfg);
    CHECK(config::fingerprint(back) == config::fingerprint(cfg));

    config::ExperimentConfig other = cfg;
    other.optim.lr = 2e-3;
    CHECK(config::fingerprint(other) != config::fingerprint(cfg));

    // partial json keeps defaults elsewhere
    config::ExperimentConfig sparse = config::from_json(R"({"seed": 9})");
    CHECK(sparse.seed == 9);
    CHECK(sparse.dims.hb == config::ExperimentConfig{}.dims.hb);

    CHECK(config::preset("paper").dims.cv == 2048);
    CHECK_THROWS_AS(config::preset("warehouse"), Error);

    config::ExperimentConfig broken = cfg;
    broken.dims.obs_channels = 7;
    CHECK_THROWS_AS(config::validate(broken), Error);
    broken = cfg;
    broken.objective.goal_dim = 12;
    CHECK_THROWS_AS(config::validate(broken), Error);
}

TEST_CASE("report aggregates max over seeds in declaration order") {
    std::vector<RunRecord> rs = {
        {"move-ahead", "objectnav", 0, 0.10},
        {"cpca", "leavereturn", 1, 0.40},
        {"cpca", "objectnav", 0, 0.30},
        {"cpca", "objectnav", 1, 0.35},
        {"imitation", "objectnav", 0, 0.20},
    };
    const std::string csv = report_csv(rs);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "representation,objectnav,leavereturn");
    std::getline(in, line);
    CHECK(line == "imitation,0.2000,"); // declared before cpca
    std::getline(in, line);
    CHECK(line == "cpca,0.3500,0.4000"); // max over seeds
    std::getline(in, line);
    CHECK(line == "move-ahead,0.1000,");

    const std::string text = report_text(rs);
    CHECK(text.find("representation") != std::string::npos);
    CHECK(text.find("0.3500") != std::string::npos);

    const std::string dir = temp_dir("records");
    for (const RunRecord& r : rs) append_record(dir, r);
    CHECK(read_records(dir) == rs);
}

TEST_CASE("pretrain trains, selects on validation, and is deterministic") {
    config::ExperimentConfig cfg = tiny_config();
    data::Dataset ds = tiny_dataset(cfg, Task::Explore);
    const std::string dir = temp_dir("pretrain");

    std::ostringstream metrics;
    PretrainResult res = pretrain(cfg, ds, dir + "/imitation.bpck", &metrics);
    CHECK(res.objective == "imitation");
    CHECK(res.metric == "acc");
    CHECK(res.frames >= cfg.budget.pretrain_frames);
    CHECK(res.updates > 0);
    CHECK(res.best >= 0.0);
    CHECK(res.best <= 1.0);
    CHECK(metrics.str().find("val_acc") != std::string::npos);

    tensor::ParamStore<float> loaded(0);
    tensor::CheckpointMeta meta = tensor::load_checkpoint(loaded, dir + "/imitation.bpck");
    CHECK(meta.extra.at("objective") == "imitation");
    CHECK(meta.config_fingerprint == config::fingerprint(cfg));
    CHECK(loaded.contains("compress/w1"));
    CHECK(loaded.contains("gru/w_n"));
    CHECK(loaded.contains("readout/w"));

    pretrain(cfg, ds, dir + "/again.bpck", nullptr);
    CHECK(read_file(dir + "/imitation.bpck") == read_file(dir + "/again.bpck"));

    SUBCASE("wrong task is rejected") {
        data::Dataset wrong = tiny_dataset(cfg, Task::ObjectNav);
        CHECK_THROWS_AS(pretrain(cfg, wrong, dir + "/x.bpck", nullptr), Error);
    }
    SUBCASE("encoder seed mismatch is rejected") {
        config::ExperimentConfig other = cfg;
        other.encoder_seed = 99;
        CHECK_THROWS_AS(pretrain(other, ds, dir + "/x.bpck", nullptr), Error);
    }
}

TEST_CASE("downstream transfer freezes the backbone and evaluates") {
    config::ExperimentConfig cfg = tiny_config();
    data::Dataset explore = tiny_dataset(cfg, Task::Explore);
    const std::string dir = temp_dir("transfer");
    const std::string ckpt = dir + "/pre.bpck";
    pretrain(cfg, explore, ckpt, nullptr);

    for (Task task : {Task::ObjectNav, Task::LeaveReturn}) {
        CAPTURE(sim::task_name(task));
        data::Dataset task_ds = tiny_dataset(cfg, task);
        TransferResult res = train_downstream(cfg, ckpt, task_ds, 0, false, nullptr);
        CHECK(res.frozen_hash_before == res.frozen_hash_after);
        CHECK(res.eval.task == task);
        CHECK(res.eval.accuracy >= 0.0);
        CHECK(res.eval.accuracy <= 1.0);
        CHECK(res.eval.steps > 0);
        CHECK(res.eval.episodes > 0);
        CHECK(res.updates > 0);

        // same config, same bytes in, same result out
        TransferResult res2 = train_downstream(cfg, ckpt, task_ds, 0, false, nullptr);
        CHECK(res2.eval.accuracy == res.eval.accuracy);
        CHECK(res2.eval.pos_accuracy == res.eval.pos_accuracy);
    }

    SUBCASE("explore dataset is a task mismatch") {
        CHECK_THROWS_AS(train_downstream(cfg, ckpt, explore, 0, false, nullptr), Error);
    }
    SUBCASE("missing frozen params are reported") {
        tensor::ParamStore<float> empty(0);
        tensor::save_checkpoint(empty, tensor::CheckpointMeta{}, dir + "/empty.bpck");
        data::Dataset task_ds = tiny_dataset(cfg, Task::ObjectNav);
        CHECK_THROWS_WITH_AS(train_downstream(cfg, dir + "/empty.bpck", task_ds, 0, false, nullptr),
                             doctest::Contains("checkpoint lacks"), Error);
    }
    SUBCASE("checkpoint shape mismatch is reported") {
        config::ExperimentConfig wide = cfg;
        wide.dims.cv = 12;
        data::Dataset ds2 = tiny_dataset(wide, Task::Explore);
        pretrain(wide, ds2, dir + "/wide.bpck", nullptr);
        data::Dataset task_ds = tiny_dataset(cfg, Task::ObjectNav);
        CHECK_THROWS_AS(train_downstream(cfg, dir + "/wide.bpck", task_ds, 0, false, nullptr),
                        Error);
    }
    SUBCASE("end-to-end variant trains everything") {
        data::Dataset task_ds = tiny_dataset(cfg, Task::ObjectNav);
        TransferResult res = train_downstream(cfg, "", task_ds, 1, true, nullptr);
        // nothing frozen: training moves the compress and gru weights
        CHECK(res.frozen_hash_before != res.frozen_hash_after);
        CHECK(res.eval.accuracy >= 0.0);
    }
}
