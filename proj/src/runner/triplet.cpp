#include "runner/triplet.hpp"

#include <algorithm>

#include "common/error.hpp"

namespace bplab::runner {

using sim::Action;

namespace {

int base6(Action a) {
    const int v = static_cast<int>(a);
    check(v < sim::kDownstreamActions, ErrorCode::InvalidAction,
          std::string("not a downstream action: ") + sim::action_name(a));
    return v;
}

} // namespace

int triplet_id(const Triplet& t) {
    if (t[0] == Action::Done) return 258;
    if (t[1] == Action::Done) return 252 + base6(t[0]);
    if (t[2] == Action::Done) return 216 + base6(t[0]) * 6 + base6(t[1]);
    return base6(t[0]) * 36 + base6(t[1]) * 6 + base6(t[2]);
}

Triplet decode_triplet(int id) {
    check(id >= 0 && id < kTripletVocab, ErrorCode::IndexOutOfRange, "triplet id out of range");
    if (id == 258) return {Action::Done, Action::Done, Action::Done};
    if (id >= 252) return {static_cast<Action>(id - 252), Action::Done, Action::Done};
    if (id >= 216) {
        const int r = id - 216;
        return {static_cast<Action>(r / 6), static_cast<Action>(r % 6), Action::Done};
    }
    return {static_cast<Action>(id / 36), static_cast<Action>((id / 6) % 6),
            static_cast<Action>(id % 6)};
}

int encode_triplet(const std::vector<Action>& actions, int t) {
    const int n = static_cast<int>(actions.size());
    check(t >= 0 && t < n, ErrorCode::IndexOutOfRange, "step index outside episode");
    Triplet trip = {Action::Done, Action::Done, Action::Done};
    for (int j = 0; j < 3 && t + j < n; ++j) {
        check(actions[t + j] != Action::Subdone, ErrorCode::InvalidAction,
              "Subdone has no triplet label");
        trip[j] = actions[t + j];
        if (trip[j] == Action::Done) break;
    }
    return triplet_id(trip);
}

const char* baseline_name(BaselineKind k) {
    switch (k) {
        case BaselineKind::MoveAhead: return "move-ahead";
        case BaselineKind::ModalA: return "modal-a";
        case BaselineKind::ModalT: return "modal-t";
    }
    fail(ErrorCode::InvalidArgument, "bad baseline kind");
}

namespace {

int argmax_count(const std::vector<int64_t>& counts) {
    int best = -1;
    int64_t best_count = 0;
    for (int id = 0; id < static_cast<int>(counts.size()); ++id)
        if (counts[id] > best_count) {
            best = id;
            best_count = counts[id];
        }
    return best; // -1 when nothing counted; lowest id wins ties by scan order
}

} // namespace

ModalTables build_modal_tables(const data::Dataset& pretrain_ds) {
    check(!pretrain_ds.episodes.empty(), ErrorCode::EmptyDataset, "no episodes to count");
    std::vector<int64_t> global(kTripletVocab, 0);
    std::vector<std::vector<int64_t>> per_action(sim::kDownstreamActions,
                                                 std::vector<int64_t>(kTripletVocab, 0));
    std::vector<std::vector<int64_t>> per_key(216, std::vector<int64_t>(kTripletVocab, 0));

    std::vector<Action> filtered;
    for (const sim::Episode& ep : pretrain_ds.episodes) {
        filtered.clear();
        for (Action a : ep.actions)
            if (a != Action::Subdone) filtered.push_back(a);
        const int n = static_cast<int>(filtered.size());
        for (int t = 0; t < n; ++t) {
            const int y = encode_triplet(filtered, t);
            ++global[y];
            if (t >= 1) ++per_action[base6(filtered[t - 1])][y];
            if (t >= 3)
                ++per_key[prev_key(filtered[t - 3], filtered[t - 2], filtered[t - 1])][y];
        }
    }

    ModalTables tables;
    tables.global = argmax_count(global);
    check(tables.global >= 0, ErrorCode::EmptyDataset, "no labeled steps");
    for (int a = 0; a < sim::kDownstreamActions; ++a)
        tables.by_prev_action[a] = argmax_count(per_action[a]);
    tables.by_prev_key.resize(216);
    for (int k = 0; k < 216; ++k) tables.by_prev_key[k] = argmax_count(per_key[k]);
    return tables;
}

int baseline_predict(BaselineKind kind, const ModalTables& tables,
                     const std::vector<Action>& actions, int t) {
    switch (kind) {
        case BaselineKind::MoveAhead:
            return triplet_id({Action::MoveAhead, Action::MoveAhead, Action::MoveAhead});
        case BaselineKind::ModalA: {
            if (t < 1) return tables.global;
            const int m = tables.by_prev_action[base6(actions[t - 1])];
            return m >= 0 ? m : tables.global;
        }
        case BaselineKind::ModalT: {
            if (t >= 3) {
                const int m =
                    tables.by_prev_key[prev_key(actions[t - 3], actions[t - 2], actions[t - 1])];
                if (m >= 0) return m;
            }
            if (t >= 1) {
                const int m = tables.by_prev_action[base6(actions[t - 1])];
                if (m >= 0) return m;
            }
            return tables.global;
        }
    }
    fail(ErrorCode::InvalidArgument, "bad baseline kind");
}

EvalResult baseline_eval(BaselineKind kind, const ModalTables& tables,
                         const data::Dataset& eval_ds) {
    check(!eval_ds.episodes.empty(), ErrorCode::EmptyDataset, "no eval episodes");
    EvalResult res;
    res.task = eval_ds.manifest.task;
    res.episodes = static_cast<int>(eval_ds.episodes.size());
    int64_t hits = 0;
    std::array<int64_t, 3> pos_hits{};
    for (const sim::Episode& ep : eval_ds.episodes) {
        for (int t = 0; t < ep.length(); ++t) {
            const int truth = encode_triplet(ep.actions, t);
            const int pred = baseline_predict(kind, tables, ep.actions, t);
            hits += pred == truth;
            const Triplet td = decode_triplet(truth);
            const Triplet pd = decode_triplet(pred);
            for (int j = 0; j < 3; ++j) pos_hits[j] += td[j] == pd[j];
            ++res.steps;
        }
    }
    res.accuracy = static_cast<double>(hits) / static_cast<double>(res.steps);
    for (int j = 0; j < 3; ++j)
        res.pos_accuracy[j] = static_cast<double>(pos_hits[j]) / static_cast<double>(res.steps);
    return res;
}

} // namespace bplab::runner
