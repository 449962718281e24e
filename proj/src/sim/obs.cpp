#include "sim/obs.hpp"

#include <cmath>

namespace bplab::sim {

namespace {

// Half-sqrt(2) spelled out so every platform compiles the same constant.
constexpr double kHalfSqrt2 = 0.70710678118654752440;

// For the rotated offsets used here (|v| <= ~4.25) the fractional parts stay
// far from .5, so floor(v + 0.5) is tie-free and bit-stable.
inline int snap(double v) { return static_cast<int>(std::floor(v + 0.5)); }

} // namespace

RawObs render_raw_obs(const House& house, const Pose& pose) {
    const int w = house.params.obs_window;
    const int c = w / 2;
    RawObs obs;
    obs.window = w;
    obs.categories = house.params.categories;
    obs.data.assign(static_cast<size_t>(obs.planes()) * w * w, 0);

    const GridPos fwd = heading_offset(pose.heading);
    const GridPos rgt = heading_offset((pose.heading + 2) & 7);
    const bool diagonal = (pose.heading & 1) != 0;

    for (int wy = 0; wy < w; ++wy) {
        for (int wx = 0; wx < w; ++wx) {
            const int u = wx - c;      // rightward in the window
            const int f = c - wy;      // forward in the window
            int x, y;
            if (!diagonal) {
                x = pose.x + u * rgt.x + f * fwd.x;
                y = pose.y + u * rgt.y + f * fwd.y;
            } else {
                double dx = (u * rgt.x + f * fwd.x) * kHalfSqrt2;
                double dy = (u * rgt.y + f * fwd.y) * kHalfSqrt2;
                x = pose.x + snap(dx);
                y = pose.y + snap(dy);
            }
            if (!house.in_bounds(x, y)) {
                obs.at(kPlaneOutOfBounds, wy, wx) = 1;
                continue;
            }
            switch (house.at(x, y)) {
                case Cell::Wall: obs.at(kPlaneWall, wy, wx) = 1; break;
                case Cell::Door: obs.at(kPlaneDoor, wy, wx) = 1; break;
                case Cell::Free: obs.at(kPlaneFree, wy, wx) = 1; break;
            }
            if (house.at(x, y) != Cell::Wall) {
                for (const Room& room : house.rooms) {
                    if (room.center.x == x && room.center.y == y) {
                        obs.at(kPlaneRoomCenter, wy, wx) = 1;
                        break;
                    }
                }
                for (const WorldObject& obj : house.objects) {
                    if (obj.cell.x == x && obj.cell.y == y)
                        obs.at(kPlaneCategory0 + obj.category, wy, wx) = 1;
                }
            }
        }
    }
    return obs;
}

} // namespace bplab::sim
