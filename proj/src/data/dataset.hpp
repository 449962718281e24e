#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sim/experts.hpp"
#include "sim/obs.hpp"

namespace bplab::data {

inline constexpr uint16_t kFormatVersion = 1;

struct DatasetManifest {
    uint16_t format_version = kFormatVersion;
    sim::Task task = sim::Task::Explore;
    uint64_t seed = 0;
    uint32_t episode_count = 0;
    std::vector<uint64_t> house_seeds;
    double val_house_fraction = 0.1;
    sim::GenParams gen_params;
    uint64_t encoder_seed = 0;

    bool operator==(const DatasetManifest&) const = default;
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<sim::Episode> episodes;
};

// Generates houses and expert episodes for one task. Episode i of house j
// uses an independent PRNG stream, so results do not depend on worker count.
Dataset build_dataset(sim::Task task, int n_houses, int episodes_per_house, uint64_t seed,
                      const sim::GenParams& params, uint64_t encoder_seed);

// dir gets manifest.json plus episodes.bplb.
void write_dataset(const Dataset& ds, const std::string& dir);
Dataset read_dataset(const std::string& dir);

std::vector<uint8_t> serialize_episode(const sim::Episode& ep);
sim::Episode deserialize_episode(const std::vector<uint8_t>& payload);

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text);

struct ReplayedStep {
    sim::RawObs obs;   // observation before the action
    sim::Action action;
};

// Regenerates the house from its seed and steps through the episode. Throws
// ReplayDivergence when a recorded success flag disagrees with simulation.
std::vector<ReplayedStep> replay_episode(const sim::Episode& ep, const sim::GenParams& params);

struct HouseSplit {
    std::vector<uint64_t> train_houses;
    std::vector<uint64_t> val_houses;
};

// Split by house, never by episode. Deterministic in manifest.seed.
HouseSplit split_train_val(const DatasetManifest& m, double val_house_fraction);

// Episode indices belonging to each side of a house split.
void episode_split(const Dataset& ds, const HouseSplit& split, std::vector<int>& train_ids,
                   std::vector<int>& val_ids);

} // namespace bplab::data
