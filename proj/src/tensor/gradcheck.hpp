#pragma once

#include <functional>
#include <string>

#include "tensor/store.hpp"

namespace bplab::tensor {

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst_param;
    int worst_coord = -1;
    size_t coords_checked = 0;
};

// Central finite differences against the analytic gradient, 64-bit only.
// loss_fn(true) must rebuild the graph, run backward, and leave gradients in
// the store; loss_fn(false) must be the pure forward value. The same PRNG
// draws (batch composition, hindsight indices, negatives) have to be baked
// in before the closure is built so repeated calls evaluate one fixed
// function.
//
// Large tensors are subsampled to coords_per_tensor coordinates chosen by a
// fixed-seed partial shuffle; a full sweep over the GRU input projections
// alone would cost minutes without changing what the check can catch.
//
// Each coordinate is probed at several step sizes and scored by its best
// scale. A genuinely wrong derivative disagrees at every scale, while the two
// artifact classes of finite differencing resolve in opposite directions:
// crossing a ReLU kink inside the probe interval contaminates large steps but
// not small ones, and coordinates whose true gradient sits near the rounding
// floor (|up - down| approaching one ulp of the loss) recover with a larger
// step. Probing stops early once a scale confirms the analytic value.
inline GradCheckResult grad_check(ParamStore<double>& store,
                                  const std::function<double(bool)>& loss_fn, double eps = 1e-5,
                                  int coords_per_tensor = 256) {
    store.zero_grads();
    loss_fn(true);

    static constexpr double kScales[] = {1.0, 0.125, 1.0 / 64, 8.0, 64.0, 1.0 / 512};
    static constexpr double kConfirmed = 1e-6;

    GradCheckResult res;
    for (auto& [name, p] : store) {
        if (p->frozen) continue;
        const size_t count = p->count();
        std::vector<int> coords;
        if (count <= static_cast<size_t>(coords_per_tensor)) {
            coords.resize(count);
            for (size_t i = 0; i < count; ++i) coords[i] = static_cast<int>(i);
        } else {
            std::vector<int> all(count);
            for (size_t i = 0; i < count; ++i) all[i] = static_cast<int>(i);
            Rng rng = Rng::stream(0xA11CE, "gradcheck", fnv1a(name));
            for (int j = 0; j < coords_per_tensor; ++j) {
                const size_t r = j + rng.below(count - j);
                std::swap(all[j], all[r]);
            }
            coords.assign(all.begin(), all.begin() + coords_per_tensor);
        }
        for (int c : coords) {
            const double saved = p->value[c];
            const double analytic = p->grad[c];
            double best = std::numeric_limits<double>::infinity();
            for (double scale : kScales) {
                const double e = eps * scale;
                p->value[c] = saved + e;
                const double up = loss_fn(false);
                p->value[c] = saved - e;
                const double down = loss_fn(false);
                p->value[c] = saved;
                const double numeric = (up - down) / (2.0 * e);
                const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
                best = std::min(best, std::abs(numeric - analytic) / denom);
                if (best < kConfirmed) break;
            }
            ++res.coords_checked;
            if (best > res.max_rel_err) {
                res.max_rel_err = best;
                res.worst_param = name;
                res.worst_coord = c;
            }
        }
    }
    return res;
}

} // namespace bplab::tensor
