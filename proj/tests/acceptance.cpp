// Acceptance gate. Each criterion of the build contract runs at its stated
// tolerance and ends in exactly one verdict line:
//
//   acceptance                      run every criterion
//   acceptance gradient oracle ...  run a subset
//   acceptance overfit imitation    run one objective of the overfit suite
//
// Exit status is 0 iff nothing failed (WARN does not fail).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "common/binio.hpp"
#include "common/error.hpp"
#include "config/config.hpp"
#include "data/dataset.hpp"
#include "objectives/batch.hpp"
#include "objectives/objectives.hpp"
#include "runner/gradcheck.hpp"
#include "runner/report.hpp"
#include "runner/train.hpp"
#include "runner/triplet.hpp"
#include "sim/planner.hpp"
#include "tensor/checkpoint.hpp"

using namespace bplab;
using namespace bplab::runner;
using objectives::ObjectiveKind;
using sim::Action;
using sim::Task;

namespace {

double secs_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string accept_dir(const char* name) {
    auto dir = std::filesystem::temp_directory_path() / "bplab_accept" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

bool verdict(bool ok, const std::string& line) {
    std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", line.c_str());
    std::fflush(stdout);
    return ok;
}

void warn_or_pass(bool ok, const std::string& line) {
    std::printf("[%s] %s\n", ok ? "PASS" : "WARN", line.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

// ---- gradient suite ---------------------------------------------------------

bool run_gradient() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0;
    std::string worst_obj;
    bool ok = true;
    for (ObjectiveKind kind : objectives::objective_order()) {
        const GradAudit a = gradcheck_objective(kind);
        std::printf("  %-16s max rel err %.3e  (%s, %zu coords)\n", a.objective.c_str(),
                    a.max_rel_err, a.worst_param.c_str(), a.coords_checked);
        std::fflush(stdout);
        if (a.max_rel_err > worst) {
            worst = a.max_rel_err;
            worst_obj = a.objective;
        }
        ok = ok && a.max_rel_err < 1e-4;
    }
    const double secs = secs_since(t0);
    ok = ok && secs < 300.0;
    return verdict(ok, fmt("gradient: 11 objectives, worst rel err %.3e (%s) < 1e-4, %.0fs < 300s",
                           worst, worst_obj.c_str(), secs));
}

// ---- oracle suite -----------------------------------------------------------

// Independent shortest-path oracle: BFS over (x, y, heading) with the action
// contract re-derived from scratch rather than step_dynamics.
int bfs_oracle(const sim::House& h, const sim::Pose& start, const sim::GoalPredicate& goal) {
    static constexpr int ox[8] = {0, 1, 1, 1, 0, -1, -1, -1};
    static constexpr int oy[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
    auto idx = [&](int x, int y, int hd) { return (y * h.width + x) * 8 + hd; };
    std::vector<int> dist(static_cast<size_t>(h.width) * h.height * 8, -1);
    std::queue<int> q;
    dist[idx(start.x, start.y, start.heading)] = 0;
    q.push(idx(start.x, start.y, start.heading));
    while (!q.empty()) {
        const int s = q.front();
        q.pop();
        const int hd = s % 8, x = (s / 8) % h.width, y = (s / 8) / h.width;
        const int d = dist[s];
        if (goal(sim::Pose{x, y, hd})) return d;
        auto relax = [&](int nx, int ny, int nh) {
            if (nx < 0 || nx >= h.width || ny < 0 || ny >= h.height) return;
            if (h.at(nx, ny) == sim::Cell::Wall) return;
            const int t = idx(nx, ny, nh);
            if (dist[t] < 0) {
                dist[t] = d + 1;
                q.push(t);
            }
        };
        for (int dh : {1, 2, 6, 7}) relax(x, y, (hd + dh) % 8);
        relax(x + ox[hd], y + oy[hd], hd);
        relax(x - ox[hd], y - oy[hd], hd);
    }
    return -1;
}

// map-based recount of the modal tables, independent of build_modal_tables
struct Recount {
    std::map<int, int64_t> global;
    std::map<std::pair<int, int>, int64_t> by_prev;
    std::map<std::pair<int, int>, int64_t> by_key;
};

Recount recount_tables(const data::Dataset& ds) {
    Recount c;
    for (const sim::Episode& ep : ds.episodes) {
        std::vector<Action> acts;
        for (Action a : ep.actions)
            if (a != Action::Subdone) acts.push_back(a);
        for (int t = 0; t < static_cast<int>(acts.size()); ++t) {
            const int y = encode_triplet(acts, t);
            ++c.global[y];
            if (t >= 1) ++c.by_prev[{static_cast<int>(acts[t - 1]), y}];
            if (t >= 3)
                ++c.by_key[{static_cast<int>(acts[t - 3]) * 36 + static_cast<int>(acts[t - 2]) * 6 +
                                static_cast<int>(acts[t - 1]),
                            y}];
        }
    }
    return c;
}

int recount_mode(const std::map<int, int64_t>& counts) {
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

bool run_oracle() {
    bool ok = true;

    // (a) planner vs independent shortest-path oracle
    sim::GenParams p;
    p.min_size = 12;
    p.max_size = 18;
    p.max_rooms = 5;
    Rng rng = Rng::stream(4242, "oracle");
    int mismatches = 0;
    for (int i = 0; i < 100; ++i) {
        const sim::House h = sim::generate_house(rng.next_u64(), p);
        const sim::Pose start = sim::random_walkable_pose(h, rng);
        const sim::GridPos gcell = sim::random_walkable_pose(h, rng).cell();
        auto goal = [&](const sim::Pose& q) { return q.cell() == gcell; };
        auto plan = sim::bfs_plan(h, start, goal);
        const int oracle = bfs_oracle(h, start, goal);
        if (!plan || static_cast<int>(plan->actions.size()) != oracle) ++mismatches;
    }
    std::printf("  planner vs oracle: %d mismatches over 100 instances\n", mismatches);
    ok = ok && mismatches == 0;

    // (b) modal tables and baseline accuracies vs brute-force recounts
    sim::GenParams small = p;
    const data::Dataset pre = data::build_dataset(Task::Explore, 12, 4, 909, small, 7);
    const data::Dataset ev = data::build_dataset(Task::ObjectNav, 8, 3, 910, small, 7);
    const ModalTables tables = build_modal_tables(pre);
    const Recount rc = recount_tables(pre);

    bool tables_match = tables.global == recount_mode(rc.global);
    for (int a = 0; a < sim::kDownstreamActions; ++a) {
        std::map<int, int64_t> slice;
        for (const auto& [key, n] : rc.by_prev)
            if (key.first == a) slice[key.second] = n;
        tables_match = tables_match && tables.by_prev_action[a] == recount_mode(slice);
    }
    for (int k = 0; k < 216; ++k) {
        std::map<int, int64_t> slice;
        for (const auto& [key, n] : rc.by_key)
            if (key.first == k) slice[key.second] = n;
        tables_match = tables_match && tables.by_prev_key[k] == recount_mode(slice);
    }
    std::printf("  modal tables: %s (1 global + 6 prev-action + 216 prev-key entries)\n",
                tables_match ? "exact match" : "MISMATCH");
    ok = ok && tables_match;

    // accuracy tally recount with an independently coded fallback chain
    auto mode_for = [&](const std::map<std::pair<int, int>, int64_t>& counts, int first) {
        std::map<int, int64_t> slice;
        for (const auto& [key, n] : counts)
            if (key.first == first) slice[key.second] = n;
        return recount_mode(slice);
    };
    auto recount_predict = [&](BaselineKind kind, const std::vector<Action>& acts, int t) {
        if (kind == BaselineKind::MoveAhead) return 0; // (MoveAhead, MoveAhead, MoveAhead)
        if (kind == BaselineKind::ModalT && t >= 3) {
            const int m = mode_for(rc.by_key, static_cast<int>(acts[t - 3]) * 36 +
                                                  static_cast<int>(acts[t - 2]) * 6 +
                                                  static_cast<int>(acts[t - 1]));
            if (m >= 0) return m;
        }
        if (t >= 1) {
            const int m = mode_for(rc.by_prev, static_cast<int>(acts[t - 1]));
            if (m >= 0) return m;
        }
        return recount_mode(rc.global);
    };
    bool acc_match = true;
    for (BaselineKind kind : {BaselineKind::MoveAhead, BaselineKind::ModalA, BaselineKind::ModalT}) {
        int64_t hits = 0, steps = 0;
        for (const sim::Episode& ep : ev.episodes)
            for (int t = 0; t < ep.length(); ++t) {
                hits += recount_predict(kind, ep.actions, t) == encode_triplet(ep.actions, t);
                ++steps;
            }
        const EvalResult r = baseline_eval(kind, tables, ev);
        const double recounted = static_cast<double>(hits) / static_cast<double>(steps);
        const bool same = r.steps == steps && r.accuracy == recounted;
        std::printf("  %-10s accuracy %.6f recount %.6f %s\n", baseline_name(kind), r.accuracy,
                    recounted, same ? "==" : "MISMATCH");
        acc_match = acc_match && same;
    }
    ok = ok && acc_match;

    // (c) cross entropy of uniform logits over the triplet vocabulary
    tensor::Tape<double> t;
    const int one = t.softmax_ce(t.zeros({1, kTripletVocab}), {0});
    const int many = t.softmax_ce(t.zeros({3, kTripletVocab}), {5, 100, 258});
    const double want = std::log(259.0);
    const double err =
        std::max(std::abs(t.val(one)[0] - want), std::abs(t.val(many)[0] - want));
    std::printf("  softmax_ce(uniform, 259) err %.3e vs ln(259)\n", err);
    ok = ok && err < 1e-9;

    return verdict(ok, fmt("oracle: planner %d mismatches, modal recounts %s, ce err %.1e",
                           mismatches, tables_match && acc_match ? "exact" : "WRONG", err));
}

// ---- structural suite -------------------------------------------------------

bool run_structural() {
    bool ok = true;
    sim::GenParams gen; // desk world

    const data::Dataset ex = data::build_dataset(Task::Explore, 20, 2, 1111, gen, 7);
    int bad_subdone = 0;
    for (const sim::Episode& ep : ex.episodes) {
        const sim::House h = sim::generate_house(ep.house_seed, ex.manifest.gen_params);
        const int64_t subdones = std::count(ep.actions.begin(), ep.actions.end(), Action::Subdone);
        if (subdones != static_cast<int64_t>(h.rooms.size())) ++bad_subdone;
    }
    std::printf("  explore: %d/%zu episodes with a wrong Subdone count\n", bad_subdone,
                ex.episodes.size());
    ok = ok && bad_subdone == 0;

    const data::Dataset lr = data::build_dataset(Task::LeaveReturn, 20, 2, 1112, gen, 7);
    int bad_return = 0;
    for (const sim::Episode& ep : lr.episodes) {
        const sim::House h = sim::generate_house(ep.house_seed, lr.manifest.gen_params);
        const sim::ReplayOutcome out = sim::replay_actions(h, ep.start, ep.actions);
        if (sim::chebyshev(out.end.cell(), ep.start.cell()) > gen.return_radius) ++bad_return;
    }
    std::printf("  leavereturn: %d/%zu episodes ending outside the return radius\n", bad_return,
                lr.episodes.size());
    ok = ok && bad_return == 0;

    const std::string dir_a = accept_dir("roundtrip_a");
    const std::string dir_b = accept_dir("roundtrip_b");
    data::write_dataset(ex, dir_a);
    const data::Dataset back = data::read_dataset(dir_a);
    data::write_dataset(back, dir_b);
    bool bytes_equal = true;
    for (const char* f : {"episodes.bplb", "manifest.json"})
        bytes_equal = bytes_equal && read_file(dir_a + "/" + f) == read_file(dir_b + "/" + f);
    bool episodes_equal = back.episodes == ex.episodes && back.manifest == ex.manifest;
    for (const sim::Episode& ep : ex.episodes)
        episodes_equal =
            episodes_equal && data::deserialize_episode(data::serialize_episode(ep)) == ep;
    std::printf("  round trip: bytes %s, episodes %s\n", bytes_equal ? "identical" : "DIFFER",
                episodes_equal ? "identical" : "DIFFER");
    ok = ok && bytes_equal && episodes_equal;

    // frozen params must survive downstream training untouched
    config::ExperimentConfig cfg;
    cfg.gen.min_size = 12;
    cfg.gen.max_size = 16;
    cfg.gen.max_rooms = 4;
    cfg.dims.cv = 8;
    cfg.dims.hb = 16;
    cfg.dims.compress_hidden = 16;
    cfg.dims.fuse_hidden = 16;
    cfg.budget.pretrain_frames = 240;
    cfg.budget.downstream_frames = 240;
    cfg.budget.houses = 4;
    cfg.budget.episodes_per_house = 2;
    cfg.budget.batch_episodes = 2;
    cfg.budget.eval_every = 2;
    cfg.budget.max_episode_len = 40;
    cfg.val_fraction = 0.25;
    const std::string ck = accept_dir("structural") + "/imitation.bpck";
    const data::Dataset pre =
        data::build_dataset(Task::Explore, 4, 2, cfg.seed, cfg.gen, cfg.encoder_seed);
    pretrain(cfg, pre, ck, nullptr);
    bool hashes_ok = true;
    for (Task task : {Task::ObjectNav, Task::LeaveReturn}) {
        const data::Dataset ds = data::build_dataset(task, 4, 2, 77, cfg.gen, cfg.encoder_seed);
        const TransferResult r = train_downstream(cfg, ck, ds, 0, false, nullptr);
        std::printf("  %s frozen hash %016llx -> %016llx\n", sim::task_name(task),
                    static_cast<unsigned long long>(r.frozen_hash_before),
                    static_cast<unsigned long long>(r.frozen_hash_after));
        hashes_ok = hashes_ok && r.frozen_hash_before == r.frozen_hash_after &&
                    r.frozen_hash_before != 0;
    }
    ok = ok && hashes_ok;

    return verdict(ok, "structural: Subdone per room, return radius, bit-exact round trip, "
                       "frozen hashes unchanged");
}

// ---- overfit suite ----------------------------------------------------------

const data::Dataset& overfit_dataset() {
    static const data::Dataset ds = data::build_dataset(Task::Explore, 5, 2, 2024,
                                                        sim::GenParams{}, 7);
    return ds;
}

const std::vector<objectives::EpisodeFrames>& overfit_frames() {
    static const std::vector<objectives::EpisodeFrames> frames = [] {
        std::vector<objectives::EpisodeFrames> out;
        for (const sim::Episode& ep : overfit_dataset().episodes)
            out.push_back(objectives::replay_frames(ep, overfit_dataset().manifest.gen_params));
        return out;
    }();
    return frames;
}

struct OverfitOutcome {
    std::string metric;
    double value = 0;
    int updates = 0;
    double secs = 0;
    bool ok = false;
};

OverfitOutcome overfit_one(ObjectiveKind kind) {
    const auto t0 = std::chrono::steady_clock::now();
    agent::Dims d;
    d.hb = 64; // contract pins H_B=64 for this suite, everything else desk
    objectives::ObjectiveSpec sp;
    sp.kind = kind;

    tensor::ParamStore<float> store(
        Rng::stream(3000, "overfit-init", static_cast<uint64_t>(kind)).next_u64());
    objectives::make_objective_params(store, sp, d);
    const agent::FrozenBackbone bb(7, d.obs_channels, d.cv);
    std::vector<const objectives::EpisodeFrames*> eps;
    for (const auto& f : overfit_frames()) eps.push_back(&f);
    const auto batch = objectives::make_batch<float>(eps, bb, d.window, 32);
    Rng prng = Rng::stream(3001, "overfit-plan", static_cast<uint64_t>(kind));
    objectives::BatchPlan plan = objectives::make_plan(sp, batch.packed.lengths, prng);
    if (kind == ObjectiveKind::CPCASoftmax) {
        // Subdone keeps the pose, so a window straddling one holds duplicate
        // observations the within-window softmax cannot split no matter the
        // capacity. Redraw those anchors; this suite measures fitting power.
        auto degenerate = [&](const objectives::PairSample& s) {
            for (int j = 0; j < sp.k; ++j)
                if (batch.actions[batch.packed.row(s.e, s.t + j)] ==
                    static_cast<int>(Action::Subdone))
                    return true;
            return false;
        };
        for (objectives::PairSample& s : plan.anchors)
            while (degenerate(s))
                s.t = static_cast<int>(
                    prng.below(static_cast<uint64_t>(batch.packed.lengths[s.e] - sp.k)));
    }

    tensor::Adam<float> adam;
    adam.lr = 3e-3;
    OverfitOutcome out;
    for (int u = 0; u < 5000; ++u) {
        tensor::Tape<float> t;
        const objectives::LossResult r = objectives::objective_loss(t, store, sp, d, batch, plan);
        out.metric = r.metric;
        out.value = r.metric_value;
        out.updates = u;
        if (!std::isfinite(t.val(r.loss)[0])) break;
        out.ok = std::strcmp(r.metric, "acc") == 0 ? r.metric_value >= 0.95
                                                   : r.metric_value <= 1e-2;
        if (out.ok) break;
        t.backward(r.loss);
        adam.step(store);
    }
    out.secs = secs_since(t0);
    out.ok = out.ok && out.secs < 600.0;
    return out;
}

bool run_overfit(const std::vector<ObjectiveKind>& kinds) {
    size_t passed = 0;
    std::string tail;
    for (ObjectiveKind kind : kinds) {
        const OverfitOutcome o = overfit_one(kind);
        std::printf("  %-16s %s %.4f after %d updates, %.0fs%s\n",
                    objectives::objective_name(kind), o.metric.c_str(), o.value, o.updates, o.secs,
                    o.ok ? "" : "  THRESHOLD MISSED");
        std::fflush(stdout);
        passed += o.ok;
        tail = fmt("%s %.4f after %d updates, %.0fs", o.metric.c_str(), o.value, o.updates,
                   o.secs);
    }
    const bool ok = passed == kinds.size();
    if (kinds.size() == 1)
        return verdict(ok, fmt("overfit %s: %s", objectives::objective_name(kinds[0]),
                               tail.c_str()));
    return verdict(ok, fmt("overfit: %zu/%zu objectives at >=0.95 acc or <=1e-2 mse within "
                           "5000 updates",
                           passed, kinds.size()));
}

// ---- directional study ------------------------------------------------------

// MoveAhead/modal accuracy over the val-house episodes, scoring exactly the
// steps the transfer eval scores (frames clipped to max_episode_len, labels
// from the uncut action sequence).
double baseline_val_accuracy(BaselineKind kind, const ModalTables& tables,
                             const data::Dataset& ds, double val_fraction, int max_len) {
    std::vector<int> train_ids, val_ids;
    data::episode_split(ds, data::split_train_val(ds.manifest, val_fraction), train_ids, val_ids);
    int64_t hits = 0, steps = 0;
    for (int id : val_ids) {
        const sim::Episode& ep = ds.episodes[id];
        const int n = std::min(ep.length(), max_len);
        for (int t = 0; t < n; ++t) {
            hits += baseline_predict(kind, tables, ep.actions, t) == encode_triplet(ep.actions, t);
            ++steps;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(steps);
}

bool run_directional() {
    const auto t0 = std::chrono::steady_clock::now();
    config::ExperimentConfig cfg = config::preset("desk");
    // Desk preset pretraining budget; downstream trimmed from the preset's
    // 100k so the 66-run study stays inside the contract's 1-2 h envelope on
    // one core.
    cfg.budget.downstream_frames = 60000;
    const std::string dir = accept_dir("directional");

    auto data_seed = [&](Task t) {
        return Rng::stream(cfg.seed, "data", static_cast<uint64_t>(t)).next_u64();
    };
    std::printf("  generating datasets (%d pretrain houses, %d downstream houses)\n",
                cfg.budget.houses, cfg.budget.downstream_houses);
    std::fflush(stdout);
    const data::Dataset explore =
        data::build_dataset(Task::Explore, cfg.budget.houses, cfg.budget.episodes_per_house,
                            data_seed(Task::Explore), cfg.gen, cfg.encoder_seed);
    std::map<Task, data::Dataset> tasks;
    for (Task t : {Task::ObjectNav, Task::LeaveReturn})
        tasks.emplace(t, data::build_dataset(t, cfg.budget.downstream_houses,
                                             cfg.budget.downstream_episodes_per_house,
                                             data_seed(t), cfg.gen, cfg.encoder_seed));

    const ModalTables tables = build_modal_tables(explore);
    std::map<Task, std::map<BaselineKind, double>> base;
    for (auto& [task, ds] : tasks)
        for (BaselineKind k : {BaselineKind::MoveAhead, BaselineKind::ModalA, BaselineKind::ModalT})
            base[task][k] = baseline_val_accuracy(k, tables, ds, cfg.val_fraction,
                                                  cfg.budget.max_episode_len);

    // one pretraining run per objective
    std::map<ObjectiveKind, PretrainResult> pre;
    std::map<ObjectiveKind, std::string> ckpt;
    int step = 0;
    for (ObjectiveKind kind : objectives::objective_order()) {
        config::ExperimentConfig c = cfg;
        c.objective.kind = kind;
        const auto ts = std::chrono::steady_clock::now();
        const std::string path =
            dir + "/" + std::string(objectives::objective_name(kind)) + ".bpck";
        pre[kind] = pretrain(c, explore, path, nullptr);
        ckpt[kind] = path;
        std::printf("  [%2d/11] pretrain %-16s val %s %.4f  %.0fs\n", ++step,
                    objectives::objective_name(kind), pre[kind].metric.c_str(), pre[kind].best,
                    secs_since(ts));
        std::fflush(stdout);
    }

    // 11 representations x 2 tasks x 3 seeds, best accuracy over seeds
    std::vector<RunRecord> records;
    std::map<std::pair<ObjectiveKind, Task>, double> best;
    step = 0;
    for (ObjectiveKind kind : objectives::objective_order())
        for (auto& [task, ds] : tasks)
            for (int seed_tag = 0; seed_tag < 3; ++seed_tag) {
                const auto ts = std::chrono::steady_clock::now();
                const TransferResult r =
                    train_downstream(cfg, ckpt[kind], ds, seed_tag, false, nullptr);
                records.push_back({objectives::objective_name(kind), sim::task_name(task),
                                   seed_tag, r.eval.accuracy, config::fingerprint(cfg)});
                auto [it, fresh] = best.try_emplace({kind, task}, r.eval.accuracy);
                if (!fresh) it->second = std::max(it->second, r.eval.accuracy);
                std::printf("  [%2d/66] %-16s %-11s seed %d  acc %.4f  %.0fs\n", ++step,
                            objectives::objective_name(kind), sim::task_name(task), seed_tag,
                            r.eval.accuracy, secs_since(ts));
                std::fflush(stdout);
            }
    for (auto& [task, kinds] : base)
        for (auto& [k, acc] : kinds)
            records.push_back({baseline_name(k), sim::task_name(task), 0, acc,
                               config::fingerprint(cfg)});
    std::printf("%s", report_text(records).c_str());

    bool ok1 = true;
    for (ObjectiveKind kind : objectives::objective_order())
        for (auto& [task, ds] : tasks)
            if (best[{kind, task}] <= base[task][BaselineKind::MoveAhead]) {
                std::printf("  %s does not exceed move-ahead %.4f on %s\n",
                            objectives::objective_name(kind),
                            base[task][BaselineKind::MoveAhead], sim::task_name(task));
                ok1 = false;
            }
    verdict(ok1, fmt("directional(1): every representation beats move-ahead on both tasks "
                     "(%.0fs total)",
                     secs_since(t0)));

    std::printf("  pretraining validation, held-out houses:\n");
    for (ObjectiveKind kind : objectives::objective_order())
        std::printf("    %-16s %s %.4f\n", objectives::objective_name(kind),
                    pre[kind].metric.c_str(), pre[kind].best);
    const double imit = pre[ObjectiveKind::Imitation].best;
    const bool ok2 = pre[ObjectiveKind::SimpleInvDyn].best > imit &&
                     pre[ObjectiveKind::HindsightTraj].best > imit;
    warn_or_pass(ok2, fmt("directional(2): simple-invdyn %.4f and hindsight-traj %.4f vs "
                          "imitation %.4f",
                          pre[ObjectiveKind::SimpleInvDyn].best,
                          pre[ObjectiveKind::HindsightTraj].best, imit));
    return ok1;
}

// ---- determinism ------------------------------------------------------------

bool run_determinism() {
    bool ok = true;
    config::ExperimentConfig cfg;
    cfg.gen.min_size = 12;
    cfg.gen.max_size = 16;
    cfg.gen.max_rooms = 4;
    cfg.dims.cv = 8;
    cfg.dims.hb = 16;
    cfg.dims.compress_hidden = 16;
    cfg.dims.fuse_hidden = 16;
    cfg.budget.pretrain_frames = 240;
    cfg.budget.downstream_frames = 240;
    cfg.budget.houses = 4;
    cfg.budget.episodes_per_house = 2;
    cfg.budget.batch_episodes = 2;
    cfg.budget.eval_every = 2;
    cfg.budget.max_episode_len = 40;
    cfg.val_fraction = 0.25;
    const std::string dir = accept_dir("determinism");

    const data::Dataset d1 =
        data::build_dataset(Task::Explore, 4, 2, 11, cfg.gen, cfg.encoder_seed);
    const data::Dataset d2 =
        data::build_dataset(Task::Explore, 4, 2, 11, cfg.gen, cfg.encoder_seed);
    data::write_dataset(d1, dir + "/a");
    data::write_dataset(d2, dir + "/b");
    bool ds_ok = true;
    for (const char* f : {"episodes.bplb", "manifest.json"})
        ds_ok = ds_ok && read_file(dir + "/a/" + f) == read_file(dir + "/b/" + f);
    std::printf("  dataset bytes %s\n", ds_ok ? "identical" : "DIFFER");
    ok = ok && ds_ok;

    pretrain(cfg, d1, dir + "/a.bpck", nullptr);
    pretrain(cfg, d1, dir + "/b.bpck", nullptr);
    const bool ck_ok = read_file(dir + "/a.bpck") == read_file(dir + "/b.bpck");
    std::printf("  checkpoint bytes %s\n", ck_ok ? "identical" : "DIFFER");
    ok = ok && ck_ok;

    const data::Dataset task =
        data::build_dataset(Task::ObjectNav, 4, 2, 12, cfg.gen, cfg.encoder_seed);
    const TransferResult r1 = train_downstream(cfg, dir + "/a.bpck", task, 0, false, nullptr);
    const TransferResult r2 = train_downstream(cfg, dir + "/a.bpck", task, 0, false, nullptr);
    const bool ev_ok = r1.eval.accuracy == r2.eval.accuracy &&
                       r1.eval.pos_accuracy == r2.eval.pos_accuracy &&
                       r1.eval.steps == r2.eval.steps && r1.eval.episodes == r2.eval.episodes &&
                       r1.train_loss == r2.train_loss &&
                       r1.frozen_hash_after == r2.frozen_hash_after;
    std::printf("  eval result %s (acc %.6f)\n", ev_ok ? "identical" : "DIFFER",
                r1.eval.accuracy);
    ok = ok && ev_ok;

    return verdict(ok, "determinism: dataset bytes, checkpoint bytes, eval results reproduce");
}

} // namespace

int main(int argc, char** argv) {
    struct Entry {
        const char* name;
        bool (*fn)();
    };
    const Entry entries[] = {
        {"gradient", run_gradient},       {"oracle", run_oracle},
        {"structural", run_structural},   {"directional", run_directional},
        {"determinism", run_determinism},
    };

    std::vector<std::string> want(argv + 1, argv + argc);
    bool all_ok = true;
    try {
        if (want.empty()) {
            all_ok = run_gradient() && all_ok;
            all_ok = run_oracle() && all_ok;
            all_ok = run_structural() && all_ok;
            all_ok = run_overfit(objectives::objective_order()) && all_ok;
            all_ok = run_directional() && all_ok;
            all_ok = run_determinism() && all_ok;
        } else {
            for (size_t i = 0; i < want.size(); ++i) {
                if (want[i] == "overfit") {
                    std::vector<ObjectiveKind> kinds;
                    while (i + 1 < want.size()) {
                        bool is_obj = false;
                        for (ObjectiveKind k : objectives::objective_order())
                            if (want[i + 1] == objectives::objective_name(k)) is_obj = true;
                        if (!is_obj) break;
                        kinds.push_back(objectives::parse_objective(want[++i]));
                    }
                    if (kinds.empty())
                        kinds.assign(objectives::objective_order().begin(),
                                     objectives::objective_order().end());
                    all_ok = run_overfit(kinds) && all_ok;
                    continue;
                }
                bool found = false;
                for (const Entry& e : entries)
                    if (want[i] == e.name) {
                        all_ok = e.fn() && all_ok;
                        found = true;
                    }
                if (!found) {
                    std::fprintf(stderr, "unknown criterion: %s\n", want[i].c_str());
                    return 2;
                }
            }
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error %d: %s\n", static_cast<int>(e.code()), e.what());
        return 1;
    }
    return all_ok ? 0 : 1;
}
