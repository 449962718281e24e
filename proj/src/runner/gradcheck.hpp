#pragma once

#include <string>

#include "objectives/objectives.hpp"

namespace bplab::runner {

struct GradAudit {
    std::string objective;
    double max_rel_err = 0.0;
    std::string worst_param;
    size_t coords_checked = 0;
};

// Finite-difference audit of one objective at tiny dims (C_V=4, H_B=8) on
// replayed exploration frames, double precision throughout.
GradAudit gradcheck_objective(objectives::ObjectiveKind kind, int coords_per_tensor = 48);

} // namespace bplab::runner
