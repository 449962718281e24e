#include "objectives/objectives.hpp"

namespace bplab::objectives {

const std::vector<ObjectiveKind>& objective_order() {
    static const std::vector<ObjectiveKind> order = {
        ObjectiveKind::Imitation,    ObjectiveKind::TempDist,    ObjectiveKind::SimpleTempDist,
        ObjectiveKind::InvDyn,       ObjectiveKind::SimpleInvDyn, ObjectiveKind::FwdDyn,
        ObjectiveKind::SimpleFwdDyn, ObjectiveKind::CPCA,        ObjectiveKind::CPCASoftmax,
        ObjectiveKind::HindsightObs, ObjectiveKind::HindsightTraj,
    };
    return order;
}

const char* objective_name(ObjectiveKind k) {
    switch (k) {
    case ObjectiveKind::Imitation: return "imitation";
    case ObjectiveKind::TempDist: return "tempdist";
    case ObjectiveKind::SimpleTempDist: return "simple-tempdist";
    case ObjectiveKind::InvDyn: return "invdyn";
    case ObjectiveKind::SimpleInvDyn: return "simple-invdyn";
    case ObjectiveKind::FwdDyn: return "fwddyn";
    case ObjectiveKind::SimpleFwdDyn: return "simple-fwddyn";
    case ObjectiveKind::CPCA: return "cpca";
    case ObjectiveKind::CPCASoftmax: return "cpca-softmax";
    case ObjectiveKind::HindsightObs: return "hindsight-obs";
    case ObjectiveKind::HindsightTraj: return "hindsight-traj";
    }
    fail(ErrorCode::InvalidArgument, "unknown objective kind");
}

ObjectiveKind parse_objective(const std::string& name) {
    for (ObjectiveKind k : objective_order())
        if (name == objective_name(k)) return k;
    fail(ErrorCode::InvalidArgument, "unknown objective '" + name + "'");
}

bool is_classification(ObjectiveKind k) {
    switch (k) {
    case ObjectiveKind::TempDist:
    case ObjectiveKind::SimpleTempDist:
    case ObjectiveKind::FwdDyn:
    case ObjectiveKind::SimpleFwdDyn: return false;
    default: return true;
    }
}

void validate(const ObjectiveSpec& s) {
    check(s.k == 4 || s.k == 8, ErrorCode::InvalidArgument, "cpc horizon must be 4 or 8");
    check(s.cap >= 1, ErrorCode::InvalidArgument, "cap must be positive");
    check(s.d_max >= 1, ErrorCode::InvalidArgument, "d_max must be positive");
    check(s.goal_dim >= 1, ErrorCode::InvalidArgument, "goal_dim must be positive");
    check(s.n_pairs >= 1 && s.anchors_per_episode >= 1, ErrorCode::InvalidArgument,
          "sample counts must be positive");
}

HindsightSample sample_hindsight(int T, int t, int cap, Rng& rng, HindsightMode mode) {
    check(T >= 2 && t >= 0 && t <= T - 2, ErrorCode::EpisodeTooShort,
          "hindsight anchor needs a future frame");
    HindsightSample s;
    s.t = t;
    if (mode == HindsightMode::Obs) {
        s.tprime = static_cast<int>(rng.range(t + 1, std::min(t + cap, T - 1)));
    } else {
        s.n = static_cast<int>(rng.range(1, std::min(cap, T - 1 - t)));
    }
    return s;
}

BatchPlan make_plan(const ObjectiveSpec& spec, const std::vector<int>& lengths, Rng& rng) {
    validate(spec);
    const int ne = static_cast<int>(lengths.size());
    check(ne > 0, ErrorCode::EmptyDataset, "empty batch");
    int total = 0;
    for (int len : lengths) total += len;
    BatchPlan plan;

    auto draw_pair_episode = [&](int min_len) {
        // draw among episodes long enough, uniform over their eligible steps
        int eligible = 0;
        for (int len : lengths)
            if (len >= min_len) ++eligible;
        check(eligible > 0, ErrorCode::EpisodeTooShort, "no episode long enough to sample");
        int pick = static_cast<int>(rng.below(static_cast<uint64_t>(eligible)));
        for (int e = 0; e < ne; ++e)
            if (lengths[e] >= min_len && pick-- == 0) return e;
        fail(ErrorCode::InvalidArgument, "unreachable");
    };

    switch (spec.kind) {
    case ObjectiveKind::Imitation:
        break;
    case ObjectiveKind::TempDist:
    case ObjectiveKind::SimpleTempDist:
        for (int i = 0; i < spec.n_pairs; ++i) {
            const int e = draw_pair_episode(1);
            const int t = static_cast<int>(rng.below(static_cast<uint64_t>(lengths[e])));
            const int d = static_cast<int>(rng.range(0, std::min(spec.d_max, t)));
            plan.pairs.push_back({e, t, d});
        }
        break;
    case ObjectiveKind::InvDyn:
    case ObjectiveKind::SimpleInvDyn:
    case ObjectiveKind::FwdDyn:
    case ObjectiveKind::SimpleFwdDyn:
        for (int i = 0; i < spec.n_pairs; ++i) {
            const int e = draw_pair_episode(2);
            const int t = static_cast<int>(rng.below(static_cast<uint64_t>(lengths[e] - 1)));
            plan.pairs.push_back({e, t, 1});
        }
        break;
    case ObjectiveKind::CPCA:
    case ObjectiveKind::CPCASoftmax: {
        // anchor t needs true observations up to O_{t+k}
        for (int e = 0; e < ne; ++e) {
            if (lengths[e] < spec.k + 1) continue;
            for (int i = 0; i < spec.anchors_per_episode; ++i) {
                const int t = static_cast<int>(rng.below(static_cast<uint64_t>(lengths[e] - spec.k)));
                plan.anchors.push_back({e, t, 0});
            }
        }
        check(!plan.anchors.empty(), ErrorCode::EpisodeTooShort,
              "every episode shorter than the cpc window");
        if (spec.kind == ObjectiveKind::CPCA) {
            // one mismatched frame per positive, uniform over the rest of the batch
            for (const PairSample& anc : plan.anchors) {
                int off = 0;
                for (int e = 0; e < anc.e; ++e) off += lengths[e];
                for (int j = 0; j < spec.k; ++j) {
                    const int pos = off + anc.t + j + 1;
                    int neg = static_cast<int>(rng.below(static_cast<uint64_t>(total - 1)));
                    if (neg >= pos) ++neg;
                    plan.cpc_negatives.push_back(neg);
                }
            }
        }
        break;
    }
    case ObjectiveKind::HindsightObs: {
        // stored as flat rows so the loss can gather directly
        int off = 0;
        for (int e = 0; e < ne; ++e) {
            for (int t = 0; t < lengths[e]; ++t)
                plan.hindsight_tprime.push_back(
                    t <= lengths[e] - 2
                        ? off + sample_hindsight(lengths[e], t, spec.cap, rng, HindsightMode::Obs).tprime
                        : -1);
            off += lengths[e];
        }
        break;
    }
    case ObjectiveKind::HindsightTraj:
        for (int e = 0; e < ne; ++e) {
            check(lengths[e] >= 2, ErrorCode::EpisodeTooShort, "hindsight window needs two frames");
            const int t = static_cast<int>(rng.below(static_cast<uint64_t>(lengths[e] - 1)));
            HindsightSample w = sample_hindsight(lengths[e], t, spec.cap, rng, HindsightMode::Traj);
            plan.windows.push_back(w);
        }
        break;
    }
    return plan;
}

} // namespace bplab::objectives
