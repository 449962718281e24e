#pragma once

#include <string>

#include "tensor/tape.hpp"

namespace bplab::tensor {

// Gate convention, fixed project-wide:
//   r = sig(W_r x + U_r h + b_r)
//   z = sig(W_z x + U_z h + b_z)
//   n = tanh(W_n x + r . (U_n h + b_n))
//   h' = (1 - z) . n + z . h
// With all parameters zero this gives h' = 0.5 h.

template <class Real>
void make_gru_params(ParamStore<Real>& store, const std::string& prefix, int in, int hidden) {
    for (const char* gate : {"r", "z", "n"}) {
        store.create_init(prefix + "/w_" + gate, {hidden, in}, in);
        store.create_init(prefix + "/u_" + gate, {hidden, hidden}, hidden);
        store.create(prefix + "/b_" + gate, {hidden});
    }
}

struct GruNodes {
    int wr, ur, br;
    int wz, uz, bz;
    int wn, un, bn;
};

template <class Real>
GruNodes gru_nodes(Tape<Real>& t, ParamStore<Real>& store, const std::string& prefix) {
    GruNodes g;
    g.wr = t.param(store.get(prefix + "/w_r"));
    g.ur = t.param(store.get(prefix + "/u_r"));
    g.br = t.param(store.get(prefix + "/b_r"));
    g.wz = t.param(store.get(prefix + "/w_z"));
    g.uz = t.param(store.get(prefix + "/u_z"));
    g.bz = t.param(store.get(prefix + "/b_z"));
    g.wn = t.param(store.get(prefix + "/w_n"));
    g.un = t.param(store.get(prefix + "/u_n"));
    g.bn = t.param(store.get(prefix + "/b_n"));
    return g;
}

// One recurrence step: x [m,in], h [m,H] -> [m,H].
template <class Real>
int gru_step(Tape<Real>& t, const GruNodes& g, int x, int h) {
    const int r = t.sigmoid(t.add(t.linear(x, g.wr, g.br), t.linear(h, g.ur)));
    const int z = t.sigmoid(t.add(t.linear(x, g.wz, g.bz), t.linear(h, g.uz)));
    const int n = t.tanh_(t.add(t.linear(x, g.wn), t.mul(r, t.linear(h, g.un, g.bn))));
    return t.add(t.mul(t.one_minus(z), n), t.mul(z, h));
}

// Same step with the x-side gate pre-activations already computed, so a
// sequence can batch its three input projections into single gemms:
//   xr = W_r x + b_r, xz = W_z x + b_z, xn = W_n x.
template <class Real>
int gru_step_pre(Tape<Real>& t, const GruNodes& g, int xr, int xz, int xn, int h) {
    const int r = t.sigmoid(t.add(xr, t.linear(h, g.ur)));
    const int z = t.sigmoid(t.add(xz, t.linear(h, g.uz)));
    const int n = t.tanh_(t.add(xn, t.mul(r, t.linear(h, g.un, g.bn))));
    return t.add(t.mul(t.one_minus(z), n), t.mul(z, h));
}

} // namespace bplab::tensor
