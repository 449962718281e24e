#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "agent/net.hpp"
#include "common/error.hpp"
#include "common/rng.hpp"
#include "sim/world.hpp"
#include "tensor/gru.hpp"
#include "tensor/tape.hpp"

namespace bplab::objectives {

using agent::AgentNodes;
using agent::Dims;
using agent::Packed;
using tensor::ParamStore;
using tensor::Tape;

enum class ObjectiveKind {
    Imitation,
    TempDist,
    SimpleTempDist,
    InvDyn,
    SimpleInvDyn,
    FwdDyn,
    SimpleFwdDyn,
    CPCA,
    CPCASoftmax,
    HindsightObs,
    HindsightTraj,
};

inline constexpr int kObjectiveCount = 11;
const std::vector<ObjectiveKind>& objective_order();
const char* objective_name(ObjectiveKind k);
ObjectiveKind parse_objective(const std::string& name);

// classification objectives select checkpoints by accuracy, regression by -loss
bool is_classification(ObjectiveKind k);

struct ObjectiveSpec {
    ObjectiveKind kind = ObjectiveKind::Imitation;
    int k = 4;                    // CPCA rollout horizon
    int cap = 20;                 // hindsight distance cap
    int d_max = 20;               // max temporal distance
    int goal_dim = 8;
    int n_pairs = 64;             // tempdist / invdyn / fwddyn samples per update
    int anchors_per_episode = 4;  // cpca

    bool operator==(const ObjectiveSpec&) const = default;
};

void validate(const ObjectiveSpec& s);

// (t, d): TempDist reads O_{t-d} against B_t; dynamics losses pair steps t and t+1
struct PairSample {
    int e = 0;
    int t = 0;
    int d = 0;
};

struct HindsightSample {
    int t = 0;
    int tprime = 0; // Obs mode
    int n = 0;      // Traj mode
};

enum class HindsightMode { Obs, Traj };

// Obs: t' ~ U{t+1 .. min(t+cap, T-1)}; Traj: n ~ U{1 .. min(cap, T-1-t)}.
// Requires t <= T-2 so the choice set is nonempty.
HindsightSample sample_hindsight(int T, int t, int cap, Rng& rng, HindsightMode mode);

// One update's worth of replayed frames, episode-major packed rows. Episodes
// are clipped to max_len and sorted by descending length before packing.
template <class Real>
struct BatchData {
    Packed packed;
    std::vector<int> actions;  // [n] episode-major, action id per frame
    std::vector<Real> v;       // [n, cv*win*win] backbone features
    std::vector<Real> v_mean;  // [n, cv] spatial means (fwddyn targets)
    std::vector<int> order;    // packed episode slot -> caller episode index
    int cv = 0;
    int window = 0;

    int n() const { return packed.total; }
    int episodes() const { return packed.episodes(); }
};

// Every random draw an update makes, fixed before graph construction so the
// loss is a pure function of the parameters (grad_check replays it).
struct BatchPlan {
    std::vector<PairSample> pairs;        // tempdist / invdyn / fwddyn
    std::vector<PairSample> anchors;      // cpca (d unused)
    std::vector<int> cpc_negatives;       // flat row per positive, anchor-major
    std::vector<int> hindsight_tprime;    // per flat row; -1 on final steps
    std::vector<HindsightSample> windows; // hindsight-traj, one per episode
};

BatchPlan make_plan(const ObjectiveSpec& spec, const std::vector<int>& lengths, Rng& rng);

struct LossResult {
    int loss = -1;
    const char* metric = "loss";
    double metric_value = 0; // batch mean
    int count = 0;           // items behind the mean
};

// ---- parameter sets -------------------------------------------------------

template <class Real>
void make_objective_params(ParamStore<Real>& store, const ObjectiveSpec& spec, const Dims& d) {
    validate(spec);
    agent::make_agent_params(store, d);
    const int flat = d.o_flat();
    switch (spec.kind) {
    case ObjectiveKind::Imitation:
        store.create_init("readout/w", {sim::kActionCount, d.hb}, d.hb);
        store.create("readout/b", {sim::kActionCount});
        break;
    case ObjectiveKind::TempDist:
        store.create_init("tdist/proj_w", {d.hb, flat}, flat);
        store.create_init("tdist/out_w", {1, 2 * d.hb}, 2 * d.hb);
        store.create("tdist/out_b", {1});
        break;
    case ObjectiveKind::SimpleTempDist:
        store.create_init("tdist/proj_w", {d.hb, flat}, flat);
        store.create_init("tdist/h_w", {128, d.hb}, d.hb);
        store.create("tdist/h_b", {128});
        store.create_init("tdist/out_w", {1, 128}, 128);
        store.create("tdist/out_b", {1});
        break;
    case ObjectiveKind::InvDyn:
    case ObjectiveKind::SimpleInvDyn: {
        const int in = spec.kind == ObjectiveKind::InvDyn ? 2 * flat : d.hb + flat;
        store.create_init("invdyn/h_w", {128, in}, in);
        store.create("invdyn/h_b", {128});
        store.create_init("invdyn/out_w", {sim::kActionCount, 128}, 128);
        store.create("invdyn/out_b", {sim::kActionCount});
        break;
    }
    case ObjectiveKind::FwdDyn:
    case ObjectiveKind::SimpleFwdDyn: {
        store.create_init("actemb/table", {sim::kActionCount, d.act_embed}, d.act_embed);
        const int in = (spec.kind == ObjectiveKind::FwdDyn ? flat : d.hb) + d.act_embed;
        store.create_init("fwddyn/h_w", {128, in}, in);
        store.create("fwddyn/h_b", {128});
        store.create_init("fwddyn/out_w", {d.cv, 128}, 128);
        store.create("fwddyn/out_b", {d.cv});
        break;
    }
    case ObjectiveKind::CPCA:
    case ObjectiveKind::CPCASoftmax:
        store.create_init("actemb/table", {sim::kActionCount, d.act_embed}, d.act_embed);
        tensor::make_gru_params(store, "auxgru", d.act_embed, d.hb);
        store.create_init("cpc/proj_w", {d.hb, flat}, flat);
        break;
    case ObjectiveKind::HindsightObs:
        store.create_init("hgoal/h_w", {128, 2 * flat}, 2 * flat);
        store.create("hgoal/h_b", {128});
        store.create_init("hgoal/out_w", {spec.goal_dim, 128}, 128);
        store.create("hgoal/out_b", {spec.goal_dim});
        store.create_init("readout/w", {sim::kActionCount, d.hb}, d.hb);
        store.create("readout/b", {sim::kActionCount});
        break;
    case ObjectiveKind::HindsightTraj:
        tensor::make_gru_params(store, "auxgru", flat, d.hb);
        store.create_init("hgoal/out_w", {spec.goal_dim, d.hb}, d.hb);
        store.create("hgoal/out_b", {spec.goal_dim});
        store.create_init("readout/w", {sim::kActionCount, d.hb}, d.hb);
        store.create("readout/b", {sim::kActionCount});
        break;
    }
}

// ---- loss construction ----------------------------------------------------

namespace detail {

template <class Real>
double accuracy(const Tape<Real>& t, int logits, const std::vector<int>& targets) {
    const auto& s = t.shape(logits);
    const auto& v = t.val(logits);
    const int m = s[0], n = s[1];
    int hit = 0;
    for (int i = 0; i < m; ++i) {
        int best = 0;
        for (int j = 1; j < n; ++j)
            if (v[static_cast<size_t>(i) * n + j] > v[static_cast<size_t>(i) * n + best]) best = j;
        if (best == targets[i]) ++hit;
    }
    return m > 0 ? static_cast<double>(hit) / m : 0.0;
}

// full-episode belief rollout with a zero (or computed) goal at every step
template <class Real>
int beliefs_full(Tape<Real>& t, const AgentNodes<Real>& a, const Dims& d,
                 const BatchData<Real>& batch, int o4d, int g) {
    const int x = agent::fuse_forward(t, a, o4d, g);
    return agent::encode_packed(t, a.gru, x, batch.packed, d.hb);
}

} // namespace detail

template <class Real>
LossResult objective_loss(Tape<Real>& t, ParamStore<Real>& store, const ObjectiveSpec& spec,
                          const Dims& d, const BatchData<Real>& batch, const BatchPlan& plan) {
    validate(spec);
    check(batch.cv == d.cv && batch.window == d.window, ErrorCode::ShapeMismatch,
          "batch dims disagree with model dims");
    const Packed& pk = batch.packed;
    const int n = batch.n();

    AgentNodes<Real> a = agent::agent_nodes(t, store);
    const int v4d = t.constant({n, d.cv, d.window, d.window}, batch.v);
    const int o4d = agent::compress_forward(t, a, v4d);
    const int o_flat = t.reshape(o4d, {n, d.o_flat()});

    LossResult r;
    switch (spec.kind) {
    case ObjectiveKind::Imitation: {
        const int b = detail::beliefs_full(t, a, d, batch, o4d, t.zeros({n, spec.goal_dim}));
        const int logits = t.linear(b, t.param(store.get("readout/w")), t.param(store.get("readout/b")));
        r.loss = t.softmax_ce(logits, batch.actions);
        r.metric = "acc";
        r.metric_value = detail::accuracy(t, logits, batch.actions);
        r.count = n;
        break;
    }
    case ObjectiveKind::TempDist:
    case ObjectiveKind::SimpleTempDist: {
        const int b = detail::beliefs_full(t, a, d, batch, o4d, t.zeros({n, spec.goal_dim}));
        const int m = static_cast<int>(plan.pairs.size());
        check(m > 0, ErrorCode::InvalidPair, "no temporal-distance pairs");
        std::vector<int> anchor_ids(m), past_ids(m);
        std::vector<Real> target(m);
        for (int i = 0; i < m; ++i) {
            const PairSample& p = plan.pairs[i];
            check(p.d >= 0 && p.d <= spec.d_max && p.t - p.d >= 0 && p.t < pk.lengths[p.e],
                  ErrorCode::InvalidPair, "pair outside episode");
            anchor_ids[i] = pk.row(p.e, p.t);
            past_ids[i] = pk.row(p.e, p.t - p.d);
            target[i] = static_cast<Real>(p.d) / static_cast<Real>(spec.d_max);
        }
        const int po = t.linear(t.gather_rows(o_flat, past_ids), t.param(store.get("tdist/proj_w")));
        const int ba = t.gather_rows(b, anchor_ids);
        int pred;
        if (spec.kind == ObjectiveKind::SimpleTempDist) {
            const int h = t.relu(t.linear(t.mul(ba, po), t.param(store.get("tdist/h_w")),
                                          t.param(store.get("tdist/h_b"))));
            pred = t.linear(h, t.param(store.get("tdist/out_w")), t.param(store.get("tdist/out_b")));
        } else {
            pred = t.linear(t.concat_cols(po, ba), t.param(store.get("tdist/out_w")),
                            t.param(store.get("tdist/out_b")));
        }
        r.loss = t.mse(pred, t.constant({m, 1}, target));
        r.metric = "mse";
        r.metric_value = t.val(r.loss)[0];
        r.count = m;
        break;
    }
    case ObjectiveKind::InvDyn:
    case ObjectiveKind::SimpleInvDyn: {
        const int m = static_cast<int>(plan.pairs.size());
        check(m > 0, ErrorCode::EpisodeTooShort, "no invdyn pairs");
        std::vector<int> ids_t(m), ids_t1(m), tgt(m);
        for (int i = 0; i < m; ++i) {
            const PairSample& p = plan.pairs[i];
            check(p.t + 1 < pk.lengths[p.e], ErrorCode::InvalidPair, "pair needs a next frame");
            ids_t[i] = pk.row(p.e, p.t);
            ids_t1[i] = pk.row(p.e, p.t + 1);
            tgt[i] = batch.actions[ids_t[i]];
        }
        int left;
        if (spec.kind == ObjectiveKind::SimpleInvDyn) {
            const int b = detail::beliefs_full(t, a, d, batch, o4d, t.zeros({n, spec.goal_dim}));
            left = t.gather_rows(b, ids_t);
        } else {
            left = t.gather_rows(o_flat, ids_t);
        }
        const int in = t.concat_cols(left, t.gather_rows(o_flat, ids_t1));
        const int h = t.relu(t.linear(in, t.param(store.get("invdyn/h_w")),
                                      t.param(store.get("invdyn/h_b"))));
        const int logits = t.linear(h, t.param(store.get("invdyn/out_w")),
                                    t.param(store.get("invdyn/out_b")));
        r.loss = t.softmax_ce(logits, tgt);
        r.metric = "acc";
        r.metric_value = detail::accuracy(t, logits, tgt);
        r.count = m;
        break;
    }
    case ObjectiveKind::FwdDyn:
    case ObjectiveKind::SimpleFwdDyn: {
        const int m = static_cast<int>(plan.pairs.size());
        check(m > 0, ErrorCode::EpisodeTooShort, "no fwddyn pairs");
        std::vector<int> ids_t(m), act_ids(m);
        std::vector<Real> target(static_cast<size_t>(m) * d.cv);
        for (int i = 0; i < m; ++i) {
            const PairSample& p = plan.pairs[i];
            check(p.t + 1 < pk.lengths[p.e], ErrorCode::InvalidPair, "pair needs a next frame");
            ids_t[i] = pk.row(p.e, p.t);
            act_ids[i] = batch.actions[ids_t[i]];
            const Real* src = batch.v_mean.data() + static_cast<size_t>(pk.row(p.e, p.t + 1)) * d.cv;
            std::copy(src, src + d.cv, target.begin() + static_cast<size_t>(i) * d.cv);
        }
        const int aemb = t.gather_rows(t.param(store.get("actemb/table")), act_ids);
        int left;
        if (spec.kind == ObjectiveKind::SimpleFwdDyn) {
            const int b = detail::beliefs_full(t, a, d, batch, o4d, t.zeros({n, spec.goal_dim}));
            left = t.gather_rows(b, ids_t);
        } else {
            left = t.gather_rows(o_flat, ids_t);
        }
        const int in = t.concat_cols(left, aemb);
        const int h = t.relu(t.linear(in, t.param(store.get("fwddyn/h_w")),
                                      t.param(store.get("fwddyn/h_b"))));
        const int pred = t.linear(h, t.param(store.get("fwddyn/out_w")),
                                  t.param(store.get("fwddyn/out_b")));
        r.loss = t.mse(pred, t.constant({m, d.cv}, target));
        r.metric = "mse";
        r.metric_value = t.val(r.loss)[0];
        r.count = m;
        break;
    }
    case ObjectiveKind::CPCA:
    case ObjectiveKind::CPCASoftmax: {
        const int b = detail::beliefs_full(t, a, d, batch, o4d, t.zeros({n, spec.goal_dim}));
        const int na = static_cast<int>(plan.anchors.size());
        check(na > 0, ErrorCode::EpisodeTooShort, "no cpc anchors");
        const int k = spec.k;
        std::vector<int> b0_ids(na);
        std::vector<int> act_ids(static_cast<size_t>(na) * k), pos_ids(static_cast<size_t>(na) * k);
        for (int i = 0; i < na; ++i) {
            const PairSample& p = plan.anchors[i];
            check(p.t + k < pk.lengths[p.e], ErrorCode::EpisodeTooShort, "cpc window exceeds episode");
            b0_ids[i] = pk.row(p.e, p.t);
            for (int j = 0; j < k; ++j) {
                act_ids[static_cast<size_t>(i) * k + j] = batch.actions[pk.row(p.e, p.t + j)];
                pos_ids[static_cast<size_t>(i) * k + j] = pk.row(p.e, p.t + j + 1);
            }
        }
        tensor::GruNodes aux = tensor::gru_nodes(t, store, "auxgru");
        const int aemb = t.gather_rows(t.param(store.get("actemb/table")), act_ids);
        const int baux = agent::encode_packed(t, aux, aemb,
                                              agent::make_packed(std::vector<int>(na, k)), d.hb,
                                              t.gather_rows(b, b0_ids));
        const int proj = t.linear(t.gather_rows(o_flat, pos_ids), t.param(store.get("cpc/proj_w")));
        if (spec.kind == ObjectiveKind::CPCA) {
            check(plan.cpc_negatives.size() == pos_ids.size(), ErrorCode::InvalidArgument,
                  "one negative per positive");
            const int proj_neg =
                t.linear(t.gather_rows(o_flat, plan.cpc_negatives), t.param(store.get("cpc/proj_w")));
            const int s_pos = t.rowdot(baux, proj);
            const int s_neg = t.rowdot(baux, proj_neg);
            const int scores = t.concat_rows({s_pos, s_neg});
            const int m = na * k;
            std::vector<Real> labels(static_cast<size_t>(2) * m, Real(0));
            std::fill(labels.begin(), labels.begin() + m, Real(1));
            r.loss = t.bce_logits(scores, labels);
            const auto& sv = t.val(scores);
            int hit = 0;
            for (int i = 0; i < 2 * m; ++i)
                if ((sv[i] > 0) == (i < m)) ++hit;
            r.metric = "acc";
            r.metric_value = static_cast<double>(hit) / (2 * m);
            r.count = 2 * m;
        } else {
            std::vector<int> blocks;
            std::vector<int> tgt(static_cast<size_t>(na) * k);
            for (int i = 0; i < na; ++i) {
                std::vector<int> rows(k);
                for (int j = 0; j < k; ++j) {
                    rows[j] = i * k + j;
                    tgt[static_cast<size_t>(i) * k + j] = j;
                }
                blocks.push_back(t.matmul_nt(t.gather_rows(baux, rows), t.gather_rows(proj, rows)));
            }
            const int logits = t.concat_rows(blocks);
            r.loss = t.softmax_ce(logits, tgt);
            r.metric = "acc";
            r.metric_value = detail::accuracy(t, logits, tgt);
            r.count = na * k;
        }
        break;
    }
    case ObjectiveKind::HindsightObs: {
        check(static_cast<int>(plan.hindsight_tprime.size()) == n, ErrorCode::InvalidArgument,
              "hindsight plan must cover every frame");
        std::vector<int> valid_ids, tprime_ids, perm(n);
        valid_ids.reserve(n);
        tprime_ids.reserve(n);
        for (int row = 0; row < n; ++row)
            if (plan.hindsight_tprime[row] >= 0) {
                perm[row] = static_cast<int>(valid_ids.size());
                valid_ids.push_back(row);
                tprime_ids.push_back(plan.hindsight_tprime[row]);
            }
        const int nv = static_cast<int>(valid_ids.size());
        int skipped = 0;
        for (int row = 0; row < n; ++row)
            if (plan.hindsight_tprime[row] < 0) perm[row] = nv + skipped++;
        const int gin = t.concat_cols(t.gather_rows(o_flat, valid_ids), t.gather_rows(o_flat, tprime_ids));
        const int gh = t.relu(t.linear(gin, t.param(store.get("hgoal/h_w")),
                                       t.param(store.get("hgoal/h_b"))));
        const int gval = t.linear(gh, t.param(store.get("hgoal/out_w")),
                                  t.param(store.get("hgoal/out_b")));
        // final steps have no future frame; they keep a zero goal but still
        // contribute to the action loss
        const int g = t.gather_rows(t.concat_rows({gval, t.zeros({n - nv, spec.goal_dim})}), perm);
        const int b = detail::beliefs_full(t, a, d, batch, o4d, g);
        const int logits = t.linear(b, t.param(store.get("readout/w")), t.param(store.get("readout/b")));
        r.loss = t.softmax_ce(logits, batch.actions);
        r.metric = "acc";
        r.metric_value = detail::accuracy(t, logits, batch.actions);
        r.count = n;
        break;
    }
    case ObjectiveKind::HindsightTraj: {
        const int ne = batch.episodes();
        check(static_cast<int>(plan.windows.size()) == ne, ErrorCode::InvalidArgument,
              "one window per episode");
        // windows re-sorted by their own length for packing
        std::vector<int> worder(ne);
        std::iota(worder.begin(), worder.end(), 0);
        std::stable_sort(worder.begin(), worder.end(), [&](int x, int y) {
            return plan.windows[x].n > plan.windows[y].n;
        });
        std::vector<int> aux_lens(ne), main_lens(ne), aux_rows, main_rows, last_rows(ne), tgt;
        for (int i = 0; i < ne; ++i) {
            const int e = worder[i];
            const HindsightSample& w = plan.windows[e];
            check(w.n >= 1 && w.n <= spec.cap && w.t + w.n < pk.lengths[e],
                  ErrorCode::EpisodeTooShort, "window outside episode");
            aux_lens[i] = w.n + 1;
            main_lens[i] = w.n;
            for (int j = 0; j <= w.n; ++j) aux_rows.push_back(pk.row(e, w.t + j));
            for (int j = 0; j < w.n; ++j) {
                main_rows.push_back(pk.row(e, w.t + j));
                tgt.push_back(batch.actions[pk.row(e, w.t + j)]);
            }
        }
        const Packed aux_pk = agent::make_packed(aux_lens);
        for (int i = 0; i < ne; ++i) last_rows[i] = aux_pk.row(i, aux_lens[i] - 1);
        tensor::GruNodes aux = tensor::gru_nodes(t, store, "auxgru");
        const int aux_b = agent::encode_packed(t, aux, t.gather_rows(o_flat, aux_rows), aux_pk, d.hb);
        const int g = t.linear(t.gather_rows(aux_b, last_rows), t.param(store.get("hgoal/out_w")),
                               t.param(store.get("hgoal/out_b")));
        const Packed main_pk = agent::make_packed(main_lens);
        std::vector<int> g_of_row(main_pk.total);
        for (int i = 0; i < ne; ++i)
            for (int j = 0; j < main_lens[i]; ++j) g_of_row[main_pk.row(i, j)] = i;
        const int o_win = t.reshape(t.gather_rows(o_flat, main_rows),
                                    {main_pk.total, d.o_channels(), d.window, d.window});
        const int x = agent::fuse_forward(t, a, o_win, t.gather_rows(g, g_of_row));
        const int bwin = agent::encode_packed(t, a.gru, x, main_pk, d.hb);
        const int logits = t.linear(bwin, t.param(store.get("readout/w")),
                                    t.param(store.get("readout/b")));
        r.loss = t.softmax_ce(logits, tgt);
        r.metric = "acc";
        r.metric_value = detail::accuracy(t, logits, tgt);
        r.count = main_pk.total;
        break;
    }
    }
    return r;
}

} // namespace bplab::objectives
