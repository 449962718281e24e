#pragma once

// synthetic batches shared by the agent/objective tests

#include <vector>

#include "agent/net.hpp"
#include "common/rng.hpp"
#include "objectives/objectives.hpp"
#include "sim/obs.hpp"
#include "sim/world.hpp"

namespace bplab::testutil {

inline sim::RawObs random_obs(int window, int categories, Rng& rng) {
    sim::RawObs o;
    o.window = window;
    o.categories = categories;
    o.data.assign(static_cast<size_t>(o.planes()) * window * window, 0);
    const int hw = window * window;
    // one-hot base plane per cell, sparse extras, like a real render
    for (int p = 0; p < hw; ++p) {
        o.data[static_cast<size_t>(rng.below(5)) * hw + p] = 1;
        if (rng.below(4) == 0)
            o.data[(5 + rng.below(static_cast<uint64_t>(categories))) * hw + p] = 1;
    }
    return o;
}

template <class Real>
objectives::BatchData<Real> random_batch(const std::vector<int>& lengths_desc,
                                         const agent::FrozenBackbone& bb, int window,
                                         int categories, uint64_t seed) {
    Rng rng = Rng::stream(seed, "testbatch");
    objectives::BatchData<Real> b;
    b.cv = bb.cv();
    b.window = window;
    b.packed = agent::make_packed(lengths_desc);
    const int hw = window * window;
    for (int i = 0; i < b.packed.total; ++i) {
        std::vector<Real> v = bb.project<Real>(random_obs(window, categories, rng));
        std::vector<Real> m = agent::FrozenBackbone::spatial_mean(v, bb.cv(), hw);
        b.v.insert(b.v.end(), v.begin(), v.end());
        b.v_mean.insert(b.v_mean.end(), m.begin(), m.end());
        b.actions.push_back(static_cast<int>(rng.below(sim::kActionCount)));
    }
    return b;
}

} // namespace bplab::testutil
