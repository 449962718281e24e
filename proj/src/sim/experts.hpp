#pragma once

#include <cstdint>
#include <vector>

#include "sim/world.hpp"

namespace bplab::sim {

enum class Task : uint8_t { Explore = 0, ObjectNav = 1, LeaveReturn = 2 };

const char* task_name(Task t);

struct Episode {
    uint64_t house_seed = 0;
    Task task = Task::Explore;
    Pose start;
    std::vector<Action> actions;
    std::vector<uint8_t> success_flags; // one per action
    int target_category = -1;           // ObjectNav
    int split_index = -1;               // LeaveReturn: step index of B arrival
    std::vector<int> room_visit_order;  // Explore

    int length() const { return static_cast<int>(actions.size()); }
    bool operator==(const Episode&) const = default;
};

// Visits every room center in nearest-first order, Subdone at each center.
Episode run_explore_expert(const House& house, uint64_t rng_seed);

// Shortest path to a pose adjacent to and facing an instance of a uniformly
// sampled object category.
Episode run_objectnav_expert(const House& house, uint64_t rng_seed);

// Shortest path start A -> sampled B, then back to within the return radius
// of A. split_index marks the arrival step at B.
Episode run_leave_return_expert(const House& house, uint64_t rng_seed);

Pose random_walkable_pose(const House& house, Rng& rng);

// Replays recorded actions through step_dynamics. Returns per-step success
// flags and the final pose.
struct ReplayOutcome {
    std::vector<uint8_t> success_flags;
    Pose end;
};
ReplayOutcome replay_actions(const House& house, const Pose& start,
                             const std::vector<Action>& actions);

} // namespace bplab::sim
