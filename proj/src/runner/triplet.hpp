#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "data/dataset.hpp"
#include "sim/experts.hpp"

namespace bplab::runner {

// Label space for the 3-step readout: 216 full triplets over the six
// downstream actions, 36 (a,b,Done), 6 (a,Done), 1 (Done).
inline constexpr int kTripletVocab = 259;

// Decoded form; positions past the Done truncation are padded with Done.
using Triplet = std::array<sim::Action, 3>;

int triplet_id(const Triplet& t);
Triplet decode_triplet(int id);

// Label at step t with end-of-episode truncation. Subdone in the window is
// InvalidAction: the downstream vocabulary excludes it.
int encode_triplet(const std::vector<sim::Action>& actions, int t);

struct ModalTables {
    int global = 0;
    std::array<int, sim::kDownstreamActions> by_prev_action{};  // -1 where unseen
    std::vector<int> by_prev_key;                               // 216 keys, -1 where unseen

    bool operator==(const ModalTables&) const = default;
};

// Key for ModalT: the previous three executed actions, all non-Done.
inline int prev_key(sim::Action a, sim::Action b, sim::Action c) {
    return static_cast<int>(a) * 36 + static_cast<int>(b) * 6 + static_cast<int>(c);
}

// Counts following-triplets in the pretraining exploration data. Subdone steps
// are dropped before counting; ties resolve to the lowest label id.
ModalTables build_modal_tables(const data::Dataset& pretrain_ds);

enum class BaselineKind { MoveAhead, ModalA, ModalT };

const char* baseline_name(BaselineKind k);

struct EvalResult {
    sim::Task task = sim::Task::ObjectNav;
    int seed = 0;
    double accuracy = 0.0;
    std::array<double, 3> pos_accuracy{};
    int episodes = 0;
    int64_t steps = 0;
};

// Prediction for one step given the executed-action history before t.
int baseline_predict(BaselineKind kind, const ModalTables& tables,
                     const std::vector<sim::Action>& actions, int t);

EvalResult baseline_eval(BaselineKind kind, const ModalTables& tables,
                         const data::Dataset& eval_ds);

} // namespace bplab::runner
