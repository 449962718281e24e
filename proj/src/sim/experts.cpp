#include "sim/experts.hpp"

#include <algorithm>

#include "common/error.hpp"
#include "sim/planner.hpp"

namespace bplab::sim {

const char* task_name(Task t) {
    switch (t) {
        case Task::Explore: return "explore";
        case Task::ObjectNav: return "objectnav";
        case Task::LeaveReturn: return "leavereturn";
    }
    return "?";
}

Pose random_walkable_pose(const House& house, Rng& rng) {
    std::vector<GridPos> cells;
    for (int y = 0; y < house.height; ++y)
        for (int x = 0; x < house.width; ++x)
            if (house.walkable(x, y)) cells.push_back({x, y});
    check(!cells.empty(), ErrorCode::GenerationFailed, "house has no walkable cells");
    GridPos c = cells[rng.below(cells.size())];
    Pose p;
    p.x = c.x;
    p.y = c.y;
    p.heading = static_cast<int>(rng.below(kHeadings));
    return p;
}

ReplayOutcome replay_actions(const House& house, const Pose& start,
                             const std::vector<Action>& actions) {
    ReplayOutcome out;
    out.success_flags.reserve(actions.size());
    Pose pose = start;
    for (Action a : actions) {
        StepResult r = step_dynamics(house, pose, a);
        out.success_flags.push_back(r.success ? 1 : 0);
        pose = r.pose;
    }
    out.end = pose;
    return out;
}

namespace {

void append_plan(Episode& ep, Pose& pose, const Plan& plan) {
    for (Action a : plan.actions) {
        ep.actions.push_back(a);
        ep.success_flags.push_back(1);
    }
    pose = plan.end;
}

void append_action(Episode& ep, Action a) {
    ep.actions.push_back(a);
    ep.success_flags.push_back(1); // Subdone/Done and expert moves always succeed
}

} // namespace

Episode run_explore_expert(const House& house, uint64_t rng_seed) {
    Rng rng = Rng::stream(rng_seed, "explore");
    Episode ep;
    ep.house_seed = house.seed;
    ep.task = Task::Explore;
    ep.start = random_walkable_pose(house, rng);

    Pose pose = ep.start;
    std::vector<uint8_t> visited(house.rooms.size(), 0);
    for (size_t leg = 0; leg < house.rooms.size(); ++leg) {
        int best_room = -1;
        std::optional<Plan> best_plan;
        for (size_t r = 0; r < house.rooms.size(); ++r) {
            if (visited[r]) continue;
            GridPos center = house.rooms[r].center;
            auto plan = bfs_plan(house, pose, [center](const Pose& p) {
                return p.x == center.x && p.y == center.y;
            });
            check(plan.has_value(), ErrorCode::ExpertFailure, "room center unreachable");
            if (!best_plan || plan->actions.size() < best_plan->actions.size()) {
                best_plan = std::move(plan);
                best_room = static_cast<int>(r);
            }
        }
        visited[best_room] = 1;
        ep.room_visit_order.push_back(best_room);
        append_plan(ep, pose, *best_plan);
        append_action(ep, Action::Subdone);
    }
    append_action(ep, Action::Done);
    return ep;
}

Episode run_objectnav_expert(const House& house, uint64_t rng_seed) {
    check(!house.objects.empty(), ErrorCode::ExpertFailure, "house has no objects");
    Rng rng = Rng::stream(rng_seed, "objectnav");
    Episode ep;
    ep.house_seed = house.seed;
    ep.task = Task::ObjectNav;
    ep.start = random_walkable_pose(house, rng);

    std::vector<int> present;
    for (const WorldObject& obj : house.objects) present.push_back(obj.category);
    std::sort(present.begin(), present.end());
    present.erase(std::unique(present.begin(), present.end()), present.end());
    const int target = present[rng.below(present.size())];
    ep.target_category = target;

    auto facing_target = [&house, target](const Pose& p) {
        GridPos ahead{p.x + heading_offset(p.heading).x, p.y + heading_offset(p.heading).y};
        for (const WorldObject& obj : house.objects)
            if (obj.category == target && obj.cell == ahead) return true;
        return false;
    };
    auto plan = bfs_plan(house, ep.start, facing_target);
    check(plan.has_value(), ErrorCode::ExpertFailure, "no pose faces the target category");
    Pose pose = ep.start;
    append_plan(ep, pose, *plan);
    append_action(ep, Action::Done);
    return ep;
}

Episode run_leave_return_expert(const House& house, uint64_t rng_seed) {
    check(house.rooms.size() >= 2, ErrorCode::ExpertFailure, "needs >= 2 rooms");
    Rng rng = Rng::stream(rng_seed, "leavereturn");
    Episode ep;
    ep.house_seed = house.seed;
    ep.task = Task::LeaveReturn;
    ep.start = random_walkable_pose(house, rng);
    const GridPos a{ep.start.x, ep.start.y};

    GridPos b = a;
    while (b == a) b = random_walkable_pose(house, rng).cell();

    auto at_b = [b](const Pose& p) { return p.x == b.x && p.y == b.y; };
    auto out_plan = bfs_plan(house, ep.start, at_b);
    check(out_plan.has_value(), ErrorCode::ExpertFailure, "B unreachable");
    Pose pose = ep.start;
    append_plan(ep, pose, *out_plan);
    ep.split_index = static_cast<int>(ep.actions.size());

    const int radius = house.params.return_radius;
    auto near_a = [a, radius](const Pose& p) { return chebyshev(p.cell(), a) <= radius; };
    auto back_plan = bfs_plan(house, pose, near_a);
    check(back_plan.has_value(), ErrorCode::ExpertFailure, "A unreachable on return");
    append_plan(ep, pose, *back_plan);
    append_action(ep, Action::Done);
    return ep;
}

} // namespace bplab::sim
