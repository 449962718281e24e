#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "common/rng.hpp"

namespace bplab::sim {

enum class Cell : uint8_t { Wall = 0, Free = 1, Door = 2 };

// 8 headings, multiples of 45 degrees, 0 = north, clockwise.
inline constexpr int kHeadings = 8;

enum class Action : uint8_t {
    MoveAhead = 0,
    RotateRight = 1,
    SmallRotateRight = 2,
    RotateLeft = 3,
    SmallRotateLeft = 4,
    MoveBack = 5,
    Subdone = 6,
    Done = 7,
};
inline constexpr int kActionCount = 8;
// Downstream tasks use every action except Subdone.
inline constexpr int kDownstreamActions = 6;

const char* action_name(Action a);

struct GridPos {
    int x = 0;
    int y = 0;
    bool operator==(const GridPos&) const = default;
};

inline int chebyshev(GridPos a, GridPos b) {
    int dx = a.x > b.x ? a.x - b.x : b.x - a.x;
    int dy = a.y > b.y ? a.y - b.y : b.y - a.y;
    return dx > dy ? dx : dy;
}

struct Pose {
    int x = 0;
    int y = 0;
    int heading = 0; // 0..7
    bool operator==(const Pose&) const = default;
    GridPos cell() const { return {x, y}; }
};

// Unit offset for a heading; diagonals use (±1, ±1).
GridPos heading_offset(int heading);

struct Room {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0; // inclusive interior bounds
    GridPos center;
    bool operator==(const Room&) const = default;
};

struct WorldObject {
    int category = 0;
    GridPos cell;
    bool operator==(const WorldObject&) const = default;
};

struct GenParams {
    int min_size = 14;
    int max_size = 20;       // grid side, <= 64
    int max_rooms = 5;       // >= 2
    int min_room = 3;        // minimum interior side of a room
    int objects_per_room_min = 1;
    int objects_per_room_max = 2;
    int categories = 16;     // K
    int obs_window = 7;      // W_e, odd
    int return_radius = 1;   // LeaveAndReturn success radius (Chebyshev)
    bool operator==(const GenParams&) const = default;
};

struct House {
    uint64_t seed = 0;
    GenParams params;
    int width = 0;
    int height = 0;
    std::vector<Cell> cells; // row-major [y * width + x]
    std::vector<Room> rooms;
    std::vector<WorldObject> objects;

    Cell at(int x, int y) const { return cells[static_cast<size_t>(y) * width + x]; }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
    bool walkable(int x, int y) const {
        return in_bounds(x, y) && at(x, y) != Cell::Wall;
    }
    bool operator==(const House&) const = default;
};

// Deterministic procedural house: BSP room split, one door per split wall,
// objects scattered per room. Bit-identical for identical (seed, params).
House generate_house(uint64_t seed, const GenParams& params);

struct StepResult {
    Pose pose;
    bool success = true;
};

StepResult step_dynamics(const House& house, const Pose& pose, Action a);

bool pose_valid(const House& house, const Pose& pose);

} // namespace bplab::sim
