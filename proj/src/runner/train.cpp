#include "runner/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "objectives/batch.hpp"
#include "tensor/checkpoint.hpp"
#include "tensor/gru.hpp"

namespace bplab::runner {

using config::ExperimentConfig;
using objectives::BatchData;
using objectives::EpisodeFrames;
using tensor::ParamStore;
using tensor::Tape;

namespace {

void log_metric(std::ostream* metrics, int step, const char* name, double value) {
    if (!metrics) return;
    nlohmann::json j = {{"step", step}, {"metric", name}, {"value", value}};
    *metrics << j.dump() << "\n" << std::flush;
}

void check_dataset(const ExperimentConfig& cfg, const data::Dataset& ds) {
    check(ds.manifest.encoder_seed == cfg.encoder_seed, ErrorCode::ValidationFailed,
          "dataset encoder seed disagrees with config");
    check(ds.manifest.gen_params == cfg.gen, ErrorCode::ValidationFailed,
          "dataset world params disagree with config");
    check(!ds.episodes.empty(), ErrorCode::EmptyDataset, "dataset has no episodes");
}

// Replays episodes lazily; one pretraining run touches most of them anyway.
class ReplayCache {
public:
    ReplayCache(const data::Dataset& ds, const sim::GenParams& gen) : ds_(ds), gen_(gen) {
        cache_.resize(ds.episodes.size());
    }

    const EpisodeFrames* get(int id) {
        if (!cache_[id])
            cache_[id] = std::make_unique<EpisodeFrames>(
                objectives::replay_frames(ds_.episodes[id], gen_));
        return cache_[id].get();
    }

private:
    const data::Dataset& ds_;
    sim::GenParams gen_;
    std::vector<std::unique_ptr<EpisodeFrames>> cache_;
};

// Endless pass over train_ids, reshuffled per epoch from its own stream.
class BatchSchedule {
public:
    BatchSchedule(std::vector<int> ids, uint64_t seed) : ids_(std::move(ids)), seed_(seed) {}

    std::vector<int> next(int n) {
        std::vector<int> out;
        out.reserve(n);
        while (static_cast<int>(out.size()) < n) {
            if (cursor_ == order_.size()) {
                order_ = ids_;
                Rng rng = Rng::stream(seed_, "order", epoch_++);
                rng.shuffle(order_);
                cursor_ = 0;
            }
            out.push_back(order_[cursor_++]);
        }
        return out;
    }

private:
    std::vector<int> ids_;
    uint64_t seed_;
    std::vector<int> order_;
    size_t cursor_ = 0;
    uint64_t epoch_ = 0;
};

std::vector<std::vector<int>> chunk(const std::vector<int>& ids, int n) {
    std::vector<std::vector<int>> out;
    for (size_t i = 0; i < ids.size(); i += n)
        out.emplace_back(ids.begin() + i, ids.begin() + std::min(ids.size(), i + n));
    return out;
}

uint64_t frozen_hash(const ParamStore<float>& store) {
    const uint64_t hc = store.value_hash("compress/");
    const uint64_t hg = store.value_hash("gru/");
    return fnv1a(&hg, sizeof hg, fnv1a(&hc, sizeof hc));
}

} // namespace

PretrainResult pretrain(const ExperimentConfig& cfg, const data::Dataset& ds,
                        const std::string& ckpt_path, std::ostream* metrics) {
    config::validate(cfg);
    check(ds.manifest.task == sim::Task::Explore, ErrorCode::TaskMismatch,
          "pretraining expects exploration data");
    check_dataset(cfg, ds);

    std::vector<int> train_ids, val_ids;
    data::HouseSplit split = data::split_train_val(ds.manifest, cfg.val_fraction);
    data::episode_split(ds, split, train_ids, val_ids);
    check(!train_ids.empty() && !val_ids.empty(), ErrorCode::EmptyDataset,
          "house split left a side empty");

    const objectives::ObjectiveSpec& spec = cfg.objective;
    const agent::Dims& dims = cfg.dims;
    const bool classify = objectives::is_classification(spec.kind);
    agent::FrozenBackbone bb(cfg.encoder_seed, dims.obs_channels, dims.cv);
    ParamStore<float> store(
        Rng::stream(cfg.seed, "pretrain-init", static_cast<uint64_t>(spec.kind)).next_u64());
    objectives::make_objective_params(store, spec, dims);
    tensor::Adam<float> adam;
    adam.lr = cfg.optim.lr;
    adam.beta1 = cfg.optim.beta1;
    adam.beta2 = cfg.optim.beta2;
    adam.eps = cfg.optim.eps;

    ReplayCache cache(ds, cfg.gen);
    BatchSchedule schedule(train_ids, cfg.seed);
    const auto val_chunks = chunk(val_ids, cfg.budget.batch_episodes);

    auto gather = [&](const std::vector<int>& ids) {
        std::vector<const EpisodeFrames*> eps;
        eps.reserve(ids.size());
        for (int id : ids) eps.push_back(cache.get(id));
        return eps;
    };

    // weighted val metric plus loss; plans are fixed per chunk so successive
    // evals see identical draws
    auto run_val = [&]() {
        double wsum = 0, msum = 0, lsum = 0;
        for (size_t c = 0; c < val_chunks.size(); ++c) {
            Tape<float> t;
            BatchData<float> batch = objectives::make_batch<float>(
                gather(val_chunks[c]), bb, dims.window, cfg.budget.max_episode_len);
            Rng rng = Rng::stream(cfg.seed, "valplan", c);
            objectives::BatchPlan plan = objectives::make_plan(spec, batch.packed.lengths, rng);
            objectives::LossResult r = objective_loss(t, store, spec, dims, batch, plan);
            const double w = r.count;
            wsum += w;
            msum += r.metric_value * w;
            lsum += static_cast<double>(t.val(r.loss)[0]) * w;
        }
        struct {
            double metric, loss;
        } out{msum / wsum, lsum / wsum};
        return out;
    };

    PretrainResult res;
    res.objective = objectives::objective_name(spec.kind);
    res.metric = classify ? "acc" : "mse";
    double best_sel = -std::numeric_limits<double>::infinity();
    std::map<std::string, std::vector<float>> best_values;
    double window_loss = 0;
    int window_n = 0;

    int update = 0;
    while (res.frames < cfg.budget.pretrain_frames) {
        Tape<float> t;
        BatchData<float> batch = objectives::make_batch<float>(
            gather(schedule.next(cfg.budget.batch_episodes)), bb, dims.window,
            cfg.budget.max_episode_len);
        Rng rng = Rng::stream(cfg.seed, "batch", update);
        objectives::BatchPlan plan = objectives::make_plan(spec, batch.packed.lengths, rng);
        objectives::LossResult r = objective_loss(t, store, spec, dims, batch, plan);
        const double loss = t.val(r.loss)[0];
        check(std::isfinite(loss), ErrorCode::Divergence, "pretraining loss is not finite");
        t.backward(r.loss);
        adam.step(store);
        res.frames += batch.n();
        ++update;
        window_loss += loss;
        ++window_n;

        const bool last = res.frames >= cfg.budget.pretrain_frames;
        if (update % cfg.budget.eval_every == 0 || last) {
            auto v = run_val();
            check(std::isfinite(v.loss), ErrorCode::Divergence, "validation loss is not finite");
            log_metric(metrics, update, "train_loss", window_loss / window_n);
            log_metric(metrics, update, classify ? "val_acc" : "val_mse", v.metric);
            log_metric(metrics, update, "val_loss", v.loss);
            window_loss = 0;
            window_n = 0;
            const double sel = classify ? v.metric : -v.loss;
            if (sel > best_sel) {
                best_sel = sel;
                res.best = classify ? v.metric : v.loss;
                best_values.clear();
                for (const auto& [name, p] : store) best_values[name] = p->value;
            }
            if (last) break;
        }
    }
    res.updates = update;

    for (auto& [name, values] : best_values) store.get(name)->value = values;
    tensor::CheckpointMeta meta;
    meta.config_fingerprint = config::fingerprint(cfg);
    meta.extra["objective"] = res.objective;
    meta.extra["metric"] = res.metric;
    meta.extra["best"] = std::to_string(res.best);
    meta.extra["updates"] = std::to_string(res.updates);
    meta.extra["frames"] = std::to_string(res.frames);
    tensor::save_checkpoint(store, meta, ckpt_path);
    return res;
}

namespace {

// One downstream batch: packed frames plus triplet labels and goal inputs
// aligned to the packed episode order.
struct DsBatch {
    BatchData<float> data;
    std::vector<int> labels;    // triplet id per packed row
    std::vector<int> category;  // per packed slot (ObjectNav)
    std::vector<int> prefix;    // per packed slot, leg-1 frame count (LeaveReturn)
};

DsBatch make_ds_batch(const std::vector<const EpisodeFrames*>& eps,
                      const std::vector<const sim::Episode*>& src, sim::Task task,
                      const agent::FrozenBackbone& bb, int window, int max_len) {
    DsBatch b;
    b.data = objectives::make_batch<float>(eps, bb, window, max_len);
    const int ne = b.data.episodes();
    b.category.resize(ne, 0);
    b.prefix.resize(ne, 1);
    b.labels.reserve(b.data.n());
    for (int i = 0; i < ne; ++i) {
        const sim::Episode& ep = *src[b.data.order[i]];
        const int len = b.data.packed.lengths[i];
        if (task == sim::Task::ObjectNav) {
            check(ep.target_category >= 0, ErrorCode::ValidationFailed,
                  "ObjectNav episode lacks a target");
            b.category[i] = ep.target_category;
        } else {
            check(ep.split_index >= 0, ErrorCode::ValidationFailed,
                  "LeaveReturn episode lacks a split");
            b.prefix[i] = std::clamp(ep.split_index + 1, 1, len);
        }
        for (int j = 0; j < len; ++j) b.labels.push_back(encode_triplet(ep.actions, j));
    }
    return b;
}

int downstream_logits(Tape<float>& t, ParamStore<float>& store, const agent::Dims& d,
                      sim::Task task, const DsBatch& batch) {
    const agent::Packed& pk = batch.data.packed;
    const int n = pk.total;
    const int ne = pk.episodes();
    agent::AgentNodes<float> a = agent::agent_nodes(t, store);
    const int v4d = t.constant({n, d.cv, d.window, d.window}, batch.data.v);
    const int o4d = agent::compress_forward(t, a, v4d);

    int g_small; // [ne, 32] in some episode order, g_of_row maps rows into it
    std::vector<int> g_of_row(n);
    if (task == sim::Task::ObjectNav) {
        g_small = t.gather_rows(t.param(store.get("goalemb/table")), batch.category);
        for (int e = 0; e < ne; ++e)
            for (int j = 0; j < pk.lengths[e]; ++j) g_of_row[pk.row(e, j)] = e;
    } else {
        // first-leg frames, re-sorted by prefix length for the aux encoder
        const int o_flat = t.reshape(o4d, {n, d.o_flat()});
        std::vector<int> worder(ne);
        std::iota(worder.begin(), worder.end(), 0);
        std::stable_sort(worder.begin(), worder.end(),
                         [&](int x, int y) { return batch.prefix[x] > batch.prefix[y]; });
        std::vector<int> aux_lens(ne), aux_rows, last_rows(ne), inv(ne);
        for (int i = 0; i < ne; ++i) {
            const int e = worder[i];
            inv[e] = i;
            aux_lens[i] = batch.prefix[e];
            for (int j = 0; j < aux_lens[i]; ++j) aux_rows.push_back(pk.row(e, j));
        }
        const agent::Packed aux_pk = agent::make_packed(aux_lens);
        for (int i = 0; i < ne; ++i) last_rows[i] = aux_pk.row(i, aux_lens[i] - 1);
        tensor::GruNodes aux = tensor::gru_nodes(t, store, "goalgru");
        const int aux_b =
            agent::encode_packed(t, aux, t.gather_rows(o_flat, aux_rows), aux_pk, d.hb);
        g_small = t.linear(t.gather_rows(aux_b, last_rows), t.param(store.get("goalproj/w")),
                           t.param(store.get("goalproj/b")));
        for (int e = 0; e < ne; ++e)
            for (int j = 0; j < pk.lengths[e]; ++j) g_of_row[pk.row(e, j)] = inv[e];
    }
    const int g = t.gather_rows(g_small, g_of_row);
    const int x = agent::fuse_forward(t, a, o4d, g);
    const int b = agent::encode_packed(t, a.gru, x, pk, d.hb);
    return t.linear(b, t.param(store.get("readout/w")), t.param(store.get("readout/b")));
}

void tally(const Tape<float>& t, int logits, const std::vector<int>& labels, int64_t& hits,
           std::array<int64_t, 3>& pos_hits, int64_t& steps) {
    const auto& v = t.val(logits);
    const int m = t.shape(logits)[0];
    for (int i = 0; i < m; ++i) {
        const float* row = v.data() + static_cast<size_t>(i) * kTripletVocab;
        int best = 0;
        for (int j = 1; j < kTripletVocab; ++j)
            if (row[j] > row[best]) best = j;
        hits += best == labels[i];
        const Triplet pd = decode_triplet(best);
        const Triplet td = decode_triplet(labels[i]);
        for (int j = 0; j < 3; ++j) pos_hits[j] += pd[j] == td[j];
        ++steps;
    }
}

} // namespace

TransferResult train_downstream(const ExperimentConfig& cfg, const std::string& ckpt_path,
                                const data::Dataset& task_ds, int seed_tag, bool end_to_end,
                                std::ostream* metrics) {
    config::validate(cfg);
    const sim::Task task = task_ds.manifest.task;
    check(task != sim::Task::Explore, ErrorCode::TaskMismatch,
          "transfer expects a downstream task dataset");
    check_dataset(cfg, task_ds);

    agent::Dims dims = cfg.dims;
    dims.goal_dim = kDownstreamGoalDim;
    ParamStore<float> store(
        Rng::stream(cfg.seed, "transfer-init", static_cast<uint64_t>(task), seed_tag).next_u64());
    agent::make_agent_params(store, dims);
    store.create_init("readout/w", {kTripletVocab, dims.hb}, dims.hb);
    store.create("readout/b", {kTripletVocab});
    if (task == sim::Task::ObjectNav) {
        store.create_init("goalemb/table", {cfg.gen.categories, kDownstreamGoalDim},
                          kDownstreamGoalDim);
    } else {
        tensor::make_gru_params(store, "goalgru", dims.o_flat(), dims.hb);
        store.create_init("goalproj/w", {kDownstreamGoalDim, dims.hb}, dims.hb);
        store.create("goalproj/b", {kDownstreamGoalDim});
    }

    if (!end_to_end) {
        ParamStore<float> pre(0);
        tensor::load_checkpoint(pre, ckpt_path);
        for (const std::string& name : store.names()) {
            if (name.rfind("compress/", 0) != 0 && name.rfind("gru/", 0) != 0) continue;
            check(pre.contains(name), ErrorCode::MissingFrozenParam,
                  "checkpoint lacks " + name);
            const auto* src = pre.get(name);
            auto* dst = store.get(name);
            check(src->shape == dst->shape, ErrorCode::ShapeMismatch,
                  "checkpoint shape mismatch for " + name);
            dst->value = src->value;
        }
        store.freeze_prefix("compress/");
        store.freeze_prefix("gru/");
    }

    TransferResult res;
    res.frozen_hash_before = frozen_hash(store);

    std::vector<int> train_ids, val_ids;
    data::HouseSplit split = data::split_train_val(task_ds.manifest, cfg.val_fraction);
    data::episode_split(task_ds, split, train_ids, val_ids);
    check(!train_ids.empty() && !val_ids.empty(), ErrorCode::EmptyDataset,
          "house split left a side empty");

    agent::FrozenBackbone bb(cfg.encoder_seed, dims.obs_channels, dims.cv);
    ReplayCache cache(task_ds, cfg.gen);
    BatchSchedule schedule(
        train_ids,
        Rng::stream(cfg.seed, "transfer-order", static_cast<uint64_t>(task), seed_tag).next_u64());
    tensor::Adam<float> adam;
    adam.lr = cfg.optim.lr;
    adam.beta1 = cfg.optim.beta1;
    adam.beta2 = cfg.optim.beta2;
    adam.eps = cfg.optim.eps;

    auto build = [&](const std::vector<int>& ids) {
        std::vector<const EpisodeFrames*> eps;
        std::vector<const sim::Episode*> src;
        for (int id : ids) {
            eps.push_back(cache.get(id));
            src.push_back(&task_ds.episodes[id]);
        }
        return make_ds_batch(eps, src, task, bb, dims.window, cfg.budget.max_episode_len);
    };

    double window_loss = 0;
    int window_n = 0;
    int update = 0;
    while (res.frames < cfg.budget.downstream_frames) {
        Tape<float> t;
        DsBatch batch = build(schedule.next(cfg.budget.batch_episodes));
        const int logits = downstream_logits(t, store, dims, task, batch);
        const int loss = t.softmax_ce(logits, batch.labels);
        const double lv = t.val(loss)[0];
        check(std::isfinite(lv), ErrorCode::Divergence, "downstream loss is not finite");
        t.backward(loss);
        adam.step(store);
        res.frames += batch.data.n();
        ++update;
        window_loss += lv;
        ++window_n;
        if (update % cfg.budget.eval_every == 0 ||
            res.frames >= cfg.budget.downstream_frames) {
            res.train_loss = window_loss / window_n;
            log_metric(metrics, update, "train_loss", res.train_loss);
            window_loss = 0;
            window_n = 0;
        }
    }
    res.updates = update;
    res.frozen_hash_after = frozen_hash(store);

    int64_t hits = 0, steps = 0;
    std::array<int64_t, 3> pos_hits{};
    int episodes = 0;
    for (const std::vector<int>& ids : chunk(val_ids, cfg.budget.batch_episodes)) {
        Tape<float> t;
        DsBatch batch = build(ids);
        tally(t, downstream_logits(t, store, dims, task, batch), batch.labels, hits, pos_hits,
              steps);
        episodes += batch.data.episodes();
    }
    res.eval.task = task;
    res.eval.seed = seed_tag;
    res.eval.episodes = episodes;
    res.eval.steps = steps;
    res.eval.accuracy = static_cast<double>(hits) / static_cast<double>(steps);
    for (int j = 0; j < 3; ++j)
        res.eval.pos_accuracy[j] = static_cast<double>(pos_hits[j]) / static_cast<double>(steps);
    log_metric(metrics, update, "eval_acc", res.eval.accuracy);
    return res;
}

} // namespace bplab::runner
