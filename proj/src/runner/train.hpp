#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "config/config.hpp"
#include "data/dataset.hpp"
#include "runner/triplet.hpp"

namespace bplab::runner {

inline constexpr int kDownstreamGoalDim = 32;

struct PretrainResult {
    std::string objective;
    std::string metric;   // "acc" or "mse"
    double best = 0.0;    // validation value at the selected checkpoint
    int updates = 0;
    int64_t frames = 0;
};

// Trains one self-supervised objective on exploration data and writes the
// best-validation checkpoint (highest accuracy for classification objectives,
// lowest loss otherwise). metrics, when given, receives line-delimited JSON.
PretrainResult pretrain(const config::ExperimentConfig& cfg, const data::Dataset& ds,
                        const std::string& ckpt_path, std::ostream* metrics);

struct TransferResult {
    EvalResult eval;
    double train_loss = 0.0;  // mean over the last logging window
    int updates = 0;
    int64_t frames = 0;
    uint64_t frozen_hash_before = 0;  // compress + gru value hash
    uint64_t frozen_hash_after = 0;
};

// Frozen-representation transfer: compress and gru load from the checkpoint
// and stay fixed while the goal machinery, fusion, and triplet readout train
// fresh. Evaluates teacher-forced on the held-out houses of task_ds.
// end_to_end ignores the checkpoint and trains everything from random init.
TransferResult train_downstream(const config::ExperimentConfig& cfg, const std::string& ckpt_path,
                                const data::Dataset& task_ds, int seed_tag, bool end_to_end,
                                std::ostream* metrics);

} // namespace bplab::runner
