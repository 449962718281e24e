#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "sim/obs.hpp"
#include "tensor/gru.hpp"
#include "tensor/tape.hpp"

namespace bplab::agent {

using tensor::GruNodes;
using tensor::ParamStore;
using tensor::Shape;
using tensor::Tape;

struct Dims {
    int cv = 32;              // backbone channels C_V (paper 2048)
    int hb = 128;             // belief width H_B (paper 512)
    int window = 7;           // spatial side of V and O
    int obs_channels = 21;    // 5 + K raw planes
    int compress_hidden = 128;
    int fuse_hidden = 64;
    int goal_dim = 8;         // 8 hindsight, 32 downstream
    int act_embed = 16;

    bool operator==(const Dims&) const = default;

    int o_channels() const { return 32; }
    int o_flat() const { return 32 * window * window; }
    int v_flat() const { return cv * window * window; }
};

// Stand-in for the frozen general-purpose encoder: a seeded random per-cell
// linear projection of the raw planes followed by tanh. Never trained, never
// in a ParamStore.
class FrozenBackbone {
public:
    FrozenBackbone(uint64_t seed, int obs_channels, int cv)
        : seed_(seed), channels_(obs_channels), cv_(cv),
          weight_(static_cast<size_t>(cv) * obs_channels) {
        Rng rng = Rng::stream(seed, "backbone");
        const double scale = 1.0 / std::sqrt(static_cast<double>(obs_channels));
        for (double& w : weight_) w = rng.normal() * scale;
    }

    uint64_t seed() const { return seed_; }
    int cv() const { return cv_; }
    int channels() const { return channels_; }

    // V[c, y, x] = tanh(sum_ch W[c,ch] * obs[ch,y,x]); returns [cv * win^2].
    template <class Real>
    std::vector<Real> project(const sim::RawObs& obs) const {
        check(obs.planes() == channels_, ErrorCode::ShapeMismatch, "backbone channel count");
        const int hw = obs.window * obs.window;
        std::vector<Real> v(static_cast<size_t>(cv_) * hw);
        for (int c = 0; c < cv_; ++c)
            for (int p = 0; p < hw; ++p) {
                double acc = 0;
                for (int ch = 0; ch < channels_; ++ch)
                    if (obs.data[static_cast<size_t>(ch) * hw + p])
                        acc += weight_[static_cast<size_t>(c) * channels_ + ch];
                v[static_cast<size_t>(c) * hw + p] = static_cast<Real>(std::tanh(acc));
            }
        return v;
    }

    // spatial mean per channel of project(); the forward-dynamics target
    template <class Real>
    static std::vector<Real> spatial_mean(const std::vector<Real>& v, int cv, int hw) {
        std::vector<Real> m(cv);
        for (int c = 0; c < cv; ++c) {
            double acc = 0;
            for (int p = 0; p < hw; ++p) acc += static_cast<double>(v[static_cast<size_t>(c) * hw + p]);
            m[c] = static_cast<Real>(acc / hw);
        }
        return m;
    }

private:
    uint64_t seed_;
    int channels_;
    int cv_;
    std::vector<double> weight_;
};

// compress: two pointwise convs C_V -> hidden -> 32 with a ReLU between.
// fuse: goal tiled over the grid, channel-concatenated, two pointwise convs
// back to 32 channels.
template <class Real>
void make_agent_params(ParamStore<Real>& store, const Dims& d) {
    store.create_init("compress/w1", {d.compress_hidden, d.cv, 1, 1}, d.cv);
    store.create("compress/b1", {d.compress_hidden});
    store.create_init("compress/w2", {d.o_channels(), d.compress_hidden, 1, 1}, d.compress_hidden);
    store.create("compress/b2", {d.o_channels()});
    store.create_init("fuse/w1", {d.fuse_hidden, d.o_channels() + d.goal_dim, 1, 1},
                      d.o_channels() + d.goal_dim);
    store.create("fuse/b1", {d.fuse_hidden});
    store.create_init("fuse/w2", {d.o_channels(), d.fuse_hidden, 1, 1}, d.fuse_hidden);
    store.create("fuse/b2", {d.o_channels()});
    tensor::make_gru_params(store, "gru", d.o_flat(), d.hb);
}

template <class Real>
struct AgentNodes {
    int cw1, cb1, cw2, cb2;
    int fw1, fb1, fw2, fb2;
    GruNodes gru;
};

template <class Real>
AgentNodes<Real> agent_nodes(Tape<Real>& t, ParamStore<Real>& store) {
    AgentNodes<Real> a;
    a.cw1 = t.param(store.get("compress/w1"));
    a.cb1 = t.param(store.get("compress/b1"));
    a.cw2 = t.param(store.get("compress/w2"));
    a.cb2 = t.param(store.get("compress/b2"));
    a.fw1 = t.param(store.get("fuse/w1"));
    a.fb1 = t.param(store.get("fuse/b1"));
    a.fw2 = t.param(store.get("fuse/w2"));
    a.fb2 = t.param(store.get("fuse/b2"));
    a.gru = tensor::gru_nodes(t, store, "gru");
    return a;
}

// V [N,C_V,7,7] -> O [N,32,7,7]
template <class Real>
int compress_forward(Tape<Real>& t, const AgentNodes<Real>& a, int v4d) {
    int h = t.relu(t.conv2d(v4d, a.cw1, a.cb1));
    return t.conv2d(h, a.cw2, a.cb2);
}

// O [N,32,7,7] + G [N,D_G] -> fused flat [N,1568]
template <class Real>
int fuse_forward(Tape<Real>& t, const AgentNodes<Real>& a, int o4d, int g) {
    const Shape s = t.shape(o4d); // copy, the tape reallocates as ops append
    int tiled = t.tile_spatial(g, s[2], s[3]);
    int cat = t.concat_chan(o4d, tiled);
    int h = t.relu(t.conv2d(cat, a.fw1, a.fb1));
    int out = t.conv2d(h, a.fw2, a.fb2);
    return t.reshape(out, {s[0], s[1] * s[2] * s[3]});
}

// Episode-packed layout for variable-length sequences: lengths sorted
// descending, rows stored episode-major (episode e's step j lives at
// offset[e] + j). The encoder walks steps with a shrinking alive prefix.
struct Packed {
    std::vector<int> lengths; // descending
    std::vector<int> offset;  // episode-major row offsets
    int total = 0;
    int max_len = 0;

    int episodes() const { return static_cast<int>(lengths.size()); }
    int row(int e, int j) const { return offset[e] + j; }
};

inline Packed make_packed(const std::vector<int>& lengths_desc) {
    Packed p;
    p.lengths = lengths_desc;
    p.offset.resize(lengths_desc.size());
    for (size_t e = 0; e < lengths_desc.size(); ++e) {
        check(e == 0 || lengths_desc[e] <= lengths_desc[e - 1], ErrorCode::InvalidArgument,
              "packed lengths must be sorted descending");
        check(lengths_desc[e] > 0, ErrorCode::InvalidArgument, "empty sequence in pack");
        p.offset[e] = p.total;
        p.total += lengths_desc[e];
        p.max_len = std::max(p.max_len, lengths_desc[e]);
    }
    return p;
}

// x_rows [total, in] episode-major; returns states [total, hb] episode-major
// (state after consuming row (e, j) sits at row(e, j)). h0 [episodes, hb]
// overrides the zero initial state.
template <class Real>
int encode_packed(Tape<Real>& t, const GruNodes& gru, int x_rows, const Packed& p, int hb,
                  int h0 = -1) {
    check(t.shape(x_rows)[0] == p.total, ErrorCode::ShapeMismatch, "encode_packed row count");
    if (p.total == 0) return t.zeros({0, hb});
    // batch all three input projections over every row at once
    const int xr = t.linear(x_rows, gru.wr, gru.br);
    const int xz = t.linear(x_rows, gru.wz, gru.bz);
    const int xn = t.linear(x_rows, gru.wn);

    int h = h0 >= 0 ? h0 : t.zeros({p.episodes(), hb});
    check(t.shape(h) == (Shape{p.episodes(), hb}), ErrorCode::ShapeMismatch, "encode_packed h0");
    std::vector<int> blocks;
    std::vector<int> step_base(p.max_len + 1, 0);
    for (int j = 0; j < p.max_len; ++j) {
        int alive = 0;
        while (alive < p.episodes() && p.lengths[alive] > j) ++alive;
        std::vector<int> ids(alive);
        for (int e = 0; e < alive; ++e) ids[e] = p.row(e, j);
        if (t.shape(h)[0] > alive) {
            std::vector<int> keep(alive);
            for (int e = 0; e < alive; ++e) keep[e] = e;
            h = t.gather_rows(h, keep);
        }
        h = tensor::gru_step_pre(t, gru, t.gather_rows(xr, ids), t.gather_rows(xz, ids),
                                 t.gather_rows(xn, ids), h);
        blocks.push_back(h);
        step_base[j + 1] = step_base[j] + alive;
    }
    const int states_sm = t.concat_rows(blocks); // step-major
    std::vector<int> perm(p.total);
    for (int e = 0; e < p.episodes(); ++e)
        for (int j = 0; j < p.lengths[e]; ++j) perm[p.row(e, j)] = step_base[j] + e;
    return t.gather_rows(states_sm, perm);
}

} // namespace bplab::agent
