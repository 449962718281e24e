#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "agent/net.hpp"
#include "data/dataset.hpp"
#include "objectives/objectives.hpp"

namespace bplab::objectives {

// Replayed frames of one episode: obs[t] is rendered before actions[t].
struct EpisodeFrames {
    std::vector<sim::RawObs> obs;
    std::vector<int> actions;

    int length() const { return static_cast<int>(actions.size()); }
};

inline EpisodeFrames replay_frames(const sim::Episode& ep, const sim::GenParams& params) {
    EpisodeFrames f;
    for (const data::ReplayedStep& s : data::replay_episode(ep, params)) {
        f.obs.push_back(s.obs);
        f.actions.push_back(static_cast<int>(s.action));
    }
    return f;
}

// Projects frames through the frozen backbone and packs them episode-major,
// longest episode first.
template <class Real>
BatchData<Real> make_batch(const std::vector<const EpisodeFrames*>& eps,
                           const agent::FrozenBackbone& bb, int window, int max_len) {
    check(!eps.empty(), ErrorCode::EmptyDataset, "empty batch");
    const int ne = static_cast<int>(eps.size());
    std::vector<int> order(ne);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
        return std::min(eps[x]->length(), max_len) > std::min(eps[y]->length(), max_len);
    });

    BatchData<Real> b;
    b.cv = bb.cv();
    b.window = window;
    const int hw = window * window;
    std::vector<int> lengths(ne);
    for (int i = 0; i < ne; ++i) lengths[i] = std::min(eps[order[i]]->length(), max_len);
    b.packed = agent::make_packed(lengths);
    b.order = order;
    b.actions.reserve(b.packed.total);
    b.v.reserve(static_cast<size_t>(b.packed.total) * bb.cv() * hw);
    b.v_mean.reserve(static_cast<size_t>(b.packed.total) * bb.cv());
    for (int i = 0; i < ne; ++i) {
        const EpisodeFrames& f = *eps[order[i]];
        for (int t = 0; t < lengths[i]; ++t) {
            std::vector<Real> v = bb.project<Real>(f.obs[t]);
            std::vector<Real> m = agent::FrozenBackbone::spatial_mean(v, bb.cv(), hw);
            b.v.insert(b.v.end(), v.begin(), v.end());
            b.v_mean.insert(b.v_mean.end(), m.begin(), m.end());
            b.actions.push_back(f.actions[t]);
        }
    }
    return b;
}

} // namespace bplab::objectives
