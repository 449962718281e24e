#pragma once

#include <cstdint>
#include <vector>

#include "sim/world.hpp"

namespace bplab::sim {

// Fixed plane order; object-category planes follow these.
enum ObsPlane : int {
    kPlaneWall = 0,
    kPlaneDoor = 1,
    kPlaneFree = 2,
    kPlaneRoomCenter = 3,
    kPlaneOutOfBounds = 4,
    kPlaneCategory0 = 5,
};

struct RawObs {
    int window = 0;     // W_e
    int categories = 0; // K
    std::vector<uint8_t> data; // [plane][wy][wx], 0/1

    int planes() const { return kPlaneCategory0 + categories; }
    size_t size() const { return data.size(); }
    uint8_t at(int plane, int wy, int wx) const {
        return data[(static_cast<size_t>(plane) * window + wy) * window + wx];
    }
    uint8_t& at(int plane, int wy, int wx) {
        return data[(static_cast<size_t>(plane) * window + wy) * window + wx];
    }
    bool operator==(const RawObs&) const = default;
};

// Egocentric window: agent at the center cell, heading mapped to "up".
// Diagonal headings rotate by 45 degrees and snap to the nearest cell.
RawObs render_raw_obs(const House& house, const Pose& pose);

} // namespace bplab::sim
