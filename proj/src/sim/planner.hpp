#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "sim/world.hpp"

namespace bplab::sim {

using GoalPredicate = std::function<bool(const Pose&)>;

struct Plan {
    std::vector<Action> actions;
    Pose end;
};

// Unit-cost BFS over (x, y, heading). Only movement actions are expanded;
// ties break by ascending action id, so the returned shortest path is the
// lexicographically smallest one. Returns nullopt when no state satisfies
// the goal.
std::optional<Plan> bfs_plan(const House& house, const Pose& start, const GoalPredicate& goal);

} // namespace bplab::sim
