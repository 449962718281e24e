#include "sim/world.hpp"

#include <algorithm>

#include "common/error.hpp"

namespace bplab::sim {

const char* action_name(Action a) {
    switch (a) {
        case Action::MoveAhead: return "MoveAhead";
        case Action::RotateRight: return "RotateRight";
        case Action::SmallRotateRight: return "SmallRotateRight";
        case Action::RotateLeft: return "RotateLeft";
        case Action::SmallRotateLeft: return "SmallRotateLeft";
        case Action::MoveBack: return "MoveBack";
        case Action::Subdone: return "Subdone";
        case Action::Done: return "Done";
    }
    return "?";
}

GridPos heading_offset(int heading) {
    static constexpr GridPos offsets[kHeadings] = {
        {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1},
    };
    return offsets[heading & 7];
}

bool pose_valid(const House& house, const Pose& pose) {
    return pose.heading >= 0 && pose.heading < kHeadings && house.walkable(pose.x, pose.y);
}

StepResult step_dynamics(const House& house, const Pose& pose, Action a) {
    Pose next = pose;
    switch (a) {
        case Action::RotateRight: next.heading = (pose.heading + 2) & 7; return {next, true};
        case Action::SmallRotateRight: next.heading = (pose.heading + 1) & 7; return {next, true};
        case Action::RotateLeft: next.heading = (pose.heading + 6) & 7; return {next, true};
        case Action::SmallRotateLeft: next.heading = (pose.heading + 7) & 7; return {next, true};
        case Action::Subdone:
        case Action::Done: return {next, true};
        case Action::MoveAhead:
        case Action::MoveBack: {
            GridPos off = heading_offset(pose.heading);
            int sign = a == Action::MoveAhead ? 1 : -1;
            int tx = pose.x + sign * off.x;
            int ty = pose.y + sign * off.y;
            if (!house.walkable(tx, ty)) return {next, false};
            next.x = tx;
            next.y = ty;
            return {next, true};
        }
    }
    return {next, false};
}

namespace {

struct Rect {
    int x0, y0, x1, y1; // inclusive interior bounds
    int w() const { return x1 - x0 + 1; }
    int h() const { return y1 - y0 + 1; }
    long area() const { return static_cast<long>(w()) * h(); }
};

struct WallSeg {
    bool vertical; // wall along x == pos (vertical) or y == pos
    int pos;
    int lo, hi;    // span along the wall, inclusive
};

void set_cell(House& house, int x, int y, Cell c) {
    house.cells[static_cast<size_t>(y) * house.width + x] = c;
}

// One BSP attempt. Returns false when the layout fails validation.
bool try_generate(House& house, Rng& rng, const GenParams& p) {
    house.width = rng.range(p.min_size, p.max_size);
    house.height = rng.range(p.min_size, p.max_size);
    house.cells.assign(static_cast<size_t>(house.width) * house.height, Cell::Free);
    house.rooms.clear();
    house.objects.clear();
    for (int x = 0; x < house.width; ++x) {
        set_cell(house, x, 0, Cell::Wall);
        set_cell(house, x, house.height - 1, Cell::Wall);
    }
    for (int y = 0; y < house.height; ++y) {
        set_cell(house, 0, y, Cell::Wall);
        set_cell(house, house.width - 1, y, Cell::Wall);
    }

    int target_rooms = rng.range(2, p.max_rooms);
    std::vector<Rect> leaves{{1, 1, house.width - 2, house.height - 2}};
    std::vector<WallSeg> walls;
    int need = 2 * p.min_room + 1; // two child rooms plus the wall line
    while (static_cast<int>(leaves.size()) < target_rooms) {
        int best = -1;
        for (size_t i = 0; i < leaves.size(); ++i) {
            const Rect& r = leaves[i];
            if (r.w() < need && r.h() < need) continue;
            if (best < 0 || r.area() > leaves[best].area()) best = static_cast<int>(i);
        }
        if (best < 0) break;
        Rect r = leaves[best];
        bool can_v = r.w() >= need;
        bool can_h = r.h() >= need;
        bool vertical = can_v && can_h ? (r.w() != r.h() ? r.w() > r.h() : rng.below(2) == 0)
                                       : can_v;
        if (vertical) {
            int s = rng.range(r.x0 + p.min_room, r.x1 - p.min_room);
            for (int y = r.y0; y <= r.y1; ++y) set_cell(house, s, y, Cell::Wall);
            walls.push_back({true, s, r.y0, r.y1});
            leaves[best] = {r.x0, r.y0, s - 1, r.y1};
            leaves.push_back({s + 1, r.y0, r.x1, r.y1});
        } else {
            int s = rng.range(r.y0 + p.min_room, r.y1 - p.min_room);
            for (int x = r.x0; x <= r.x1; ++x) set_cell(house, x, s, Cell::Wall);
            walls.push_back({false, s, r.x0, r.x1});
            leaves[best] = {r.x0, r.y0, r.x1, s - 1};
            leaves.push_back({r.x0, s + 1, r.x1, r.y1});
        }
    }
    if (static_cast<int>(leaves.size()) < 2) return false;

    // Doors go in after every wall is carved so a candidate's both sides are
    // guaranteed open; one door per split wall keeps the room tree connected.
    for (const WallSeg& w : walls) {
        std::vector<GridPos> candidates;
        for (int t = w.lo; t <= w.hi; ++t) {
            int x = w.vertical ? w.pos : t;
            int y = w.vertical ? t : w.pos;
            int ax = w.vertical ? x - 1 : x;
            int ay = w.vertical ? y : y - 1;
            int bx = w.vertical ? x + 1 : x;
            int by = w.vertical ? y : y + 1;
            if (house.at(ax, ay) == Cell::Free && house.at(bx, by) == Cell::Free)
                candidates.push_back({x, y});
        }
        if (candidates.empty()) return false;
        GridPos d = candidates[rng.below(candidates.size())];
        set_cell(house, d.x, d.y, Cell::Door);
    }

    for (const Rect& r : leaves) {
        Room room;
        room.x0 = r.x0;
        room.y0 = r.y0;
        room.x1 = r.x1;
        room.y1 = r.y1;
        room.center = {(r.x0 + r.x1) / 2, (r.y0 + r.y1) / 2};
        house.rooms.push_back(room);
    }

    for (const Room& room : house.rooms) {
        int count = rng.range(p.objects_per_room_min, p.objects_per_room_max);
        for (int i = 0; i < count; ++i) {
            WorldObject obj;
            obj.category = static_cast<int>(rng.below(static_cast<uint64_t>(p.categories)));
            bool placed = false;
            for (int attempt = 0; attempt < 16 && !placed; ++attempt) {
                int x = rng.range(room.x0, room.x1);
                int y = rng.range(room.y0, room.y1);
                bool taken = false;
                for (const WorldObject& other : house.objects)
                    if (other.cell.x == x && other.cell.y == y) taken = true;
                if (taken || house.at(x, y) != Cell::Free) continue;
                obj.cell = {x, y};
                house.objects.push_back(obj);
                placed = true;
            }
        }
    }
    if (house.objects.empty()) return false;

    // Flood fill from the first room center; every walkable cell must be hit.
    std::vector<uint8_t> seen(house.cells.size(), 0);
    std::vector<GridPos> stack{house.rooms[0].center};
    seen[static_cast<size_t>(stack[0].y) * house.width + stack[0].x] = 1;
    while (!stack.empty()) {
        GridPos c = stack.back();
        stack.pop_back();
        constexpr int dx[4] = {1, -1, 0, 0};
        constexpr int dy[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
            int nx = c.x + dx[k];
            int ny = c.y + dy[k];
            size_t idx = static_cast<size_t>(ny) * house.width + nx;
            if (house.walkable(nx, ny) && !seen[idx]) {
                seen[idx] = 1;
                stack.push_back({nx, ny});
            }
        }
    }
    for (int y = 0; y < house.height; ++y)
        for (int x = 0; x < house.width; ++x)
            if (house.walkable(x, y) && !seen[static_cast<size_t>(y) * house.width + x])
                return false;
    return true;
}

} // namespace

House generate_house(uint64_t seed, const GenParams& params) {
    check(params.max_rooms >= 2, ErrorCode::InvalidArgument, "max_rooms must be >= 2");
    check(params.max_size <= 64, ErrorCode::InvalidArgument, "grid capped at 64x64");
    check(params.min_size >= 2 * params.min_room + 3, ErrorCode::InvalidArgument,
          "min_size too small for min_room");
    check(params.obs_window % 2 == 1 && params.obs_window >= 3, ErrorCode::InvalidArgument,
          "obs_window must be odd and >= 3");
    check(params.categories >= 1 && params.objects_per_room_min >= 0 &&
              params.objects_per_room_max >= std::max(1, params.objects_per_room_min),
          ErrorCode::InvalidArgument, "bad object params");
    constexpr int kMaxAttempts = 32;
    House house;
    house.seed = seed;
    house.params = params;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        Rng rng = Rng::stream(seed, "house", static_cast<uint64_t>(attempt));
        if (try_generate(house, rng, params)) return house;
    }
    fail(ErrorCode::GenerationFailed, "no valid house layout after bounded retries");
}

} // namespace bplab::sim
