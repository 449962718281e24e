#include "sim/planner.hpp"

#include <algorithm>
#include <queue>

namespace bplab::sim {

namespace {

inline int state_index(const House& house, const Pose& p) {
    return (p.y * house.width + p.x) * kHeadings + p.heading;
}

inline Pose state_pose(const House& house, int idx) {
    Pose p;
    p.heading = idx % kHeadings;
    int cell = idx / kHeadings;
    p.x = cell % house.width;
    p.y = cell / house.width;
    return p;
}

constexpr Action kMoveActions[] = {
    Action::MoveAhead,       Action::RotateRight, Action::SmallRotateRight,
    Action::RotateLeft,      Action::SmallRotateLeft,
    Action::MoveBack,
};

} // namespace

std::optional<Plan> bfs_plan(const House& house, const Pose& start, const GoalPredicate& goal) {
    if (goal(start)) return Plan{{}, start};
    const int n_states = house.width * house.height * kHeadings;
    std::vector<int8_t> parent_action(n_states, -1);
    std::vector<int> parent_state(n_states, -1);
    std::vector<uint8_t> visited(n_states, 0);
    std::queue<int> frontier;
    const int s0 = state_index(house, start);
    visited[s0] = 1;
    frontier.push(s0);
    while (!frontier.empty()) {
        const int cur = frontier.front();
        frontier.pop();
        const Pose p = state_pose(house, cur);
        for (Action a : kMoveActions) {
            StepResult r = step_dynamics(house, p, a);
            if (!r.success) continue;
            const int nxt = state_index(house, r.pose);
            if (visited[nxt]) continue;
            visited[nxt] = 1;
            parent_action[nxt] = static_cast<int8_t>(a);
            parent_state[nxt] = cur;
            if (goal(r.pose)) {
                std::vector<Action> actions;
                for (int s = nxt; s != s0; s = parent_state[s])
                    actions.push_back(static_cast<Action>(parent_action[s]));
                std::reverse(actions.begin(), actions.end());
                return Plan{std::move(actions), r.pose};
            }
            frontier.push(nxt);
        }
    }
    return std::nullopt;
}

} // namespace bplab::sim
