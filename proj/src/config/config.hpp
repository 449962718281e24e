#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "agent/net.hpp"
#include "objectives/objectives.hpp"
#include "sim/world.hpp"

namespace bplab::config {

struct OptimConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    bool operator==(const OptimConfig&) const = default;
};

struct BudgetConfig {
    int64_t pretrain_frames = 200000;
    int64_t downstream_frames = 100000;
    int houses = 200;                // pretraining houses
    int episodes_per_house = 10;
    int downstream_houses = 60;
    int downstream_episodes_per_house = 6;
    int batch_episodes = 8;
    int eval_every = 50;             // updates between validation passes
    int max_episode_len = 128;

    bool operator==(const BudgetConfig&) const = default;
};

struct ExperimentConfig {
    uint64_t seed = 1;
    uint64_t encoder_seed = 7;
    std::string preset = "desk";
    sim::GenParams gen;
    agent::Dims dims;
    objectives::ObjectiveSpec objective;
    OptimConfig optim;
    BudgetConfig budget;
    double val_fraction = 0.1;

    bool operator==(const ExperimentConfig&) const = default;
};

// dims.obs_channels must track the world's category count
void validate(const ExperimentConfig& cfg);

// "desk" is the runnable scale; "paper" records the published scale for
// documentation and is not meant to run here.
ExperimentConfig preset(const std::string& name);

std::string to_json(const ExperimentConfig& cfg);
ExperimentConfig from_json(const std::string& text);
ExperimentConfig load_file(const std::string& path);

// stable across processes: hash of the canonical serialization
uint64_t fingerprint(const ExperimentConfig& cfg);

} // namespace bplab::config
