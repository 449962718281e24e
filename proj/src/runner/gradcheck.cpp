#include "runner/gradcheck.hpp"

#include "objectives/batch.hpp"
#include "tensor/gradcheck.hpp"

namespace bplab::runner {

namespace {

// two short windows cut from one replayed exploration episode
std::vector<objectives::EpisodeFrames> fixture_frames(const sim::GenParams& gp) {
    for (uint64_t seed = 11;; ++seed) {
        sim::House house = sim::generate_house(seed, gp);
        sim::Episode ep = sim::run_explore_expert(house, seed * 31 + 7);
        if (ep.length() < 11) continue;
        objectives::EpisodeFrames all = objectives::replay_frames(ep, gp);
        std::vector<objectives::EpisodeFrames> out(2);
        out[0].obs.assign(all.obs.begin(), all.obs.begin() + 6);
        out[0].actions.assign(all.actions.begin(), all.actions.begin() + 6);
        out[1].obs.assign(all.obs.begin() + 6, all.obs.begin() + 11);
        out[1].actions.assign(all.actions.begin() + 6, all.actions.begin() + 11);
        return out;
    }
}

} // namespace

GradAudit gradcheck_objective(objectives::ObjectiveKind kind, int coords_per_tensor) {
    agent::Dims d;
    d.cv = 4;
    d.hb = 8;
    objectives::ObjectiveSpec s;
    s.kind = kind;
    s.k = 4; // lengths {6, 5} leave one k=4 rollout per episode
    s.n_pairs = 8;
    s.anchors_per_episode = 2;

    sim::GenParams gp;
    gp.min_size = 12;
    gp.max_size = 14;
    gp.max_rooms = 3;
    const std::vector<objectives::EpisodeFrames> eps = fixture_frames(gp);
    agent::FrozenBackbone bb(17, d.obs_channels, d.cv);
    const objectives::BatchData<double> batch =
        objectives::make_batch<double>({&eps[0], &eps[1]}, bb, d.window, 6);

    tensor::ParamStore<double> store(300 + static_cast<uint64_t>(kind));
    objectives::make_objective_params(store, s, d);
    Rng rng = Rng::stream(400 + static_cast<uint64_t>(kind), "plan");
    const objectives::BatchPlan plan = objectives::make_plan(s, batch.packed.lengths, rng);

    auto loss_fn = [&](bool with_grad) {
        tensor::Tape<double> t;
        const objectives::LossResult res = objective_loss(t, store, s, d, batch, plan);
        const double v = t.val(res.loss)[0];
        if (with_grad) t.backward(res.loss);
        return v;
    };
    tensor::GradCheckResult gc = tensor::grad_check(store, loss_fn, 1e-5, coords_per_tensor);
    return {objectives::objective_name(kind), gc.max_rel_err, gc.worst_param, gc.coords_checked};
}

} // namespace bplab::runner
