#pragma once

#include <functional>
#include <vector>

#include "pglab/advantage.hpp"
#include "pglab/env.hpp"
#include "pglab/net.hpp"

namespace pglab {
namespace oracles {

struct FiniteDiffSpec {
    double step = 1e-5;  // central differences
};

// Central finite-difference gradient of an arbitrary scalar loss. Throws with
// the offending coordinate index if a probe evaluates non-finite.
ParamVector fd_gradient(const std::function<double(const ParamVector&)>& loss,
                        const ParamVector& params, const FiniteDiffSpec& spec = {});

// Largest relative error (with absolute floor) between two gradients.
double max_relative_error(const ParamVector& analytic, const ParamVector& numeric,
                          double abs_floor = 1e-7);

// Exact policy evaluation: iterates V = R_pi + gamma * P_pi * V to a 1e-12
// residual. `policy` is row-stochastic over actions per state.
std::vector<double> exact_policy_return(const TabularMDP& mdp,
                                        const std::vector<double>& policy,
                                        double gamma);

struct GroupCheckResult {
    bool ppo_ok = true;
    bool grpo_ok = true;
    bool hybrid_ok = true;
    bool all() const { return ppo_ok && grpo_ok && hybrid_ok; }
};

// Recomputes all three advantage estimators with straight-line scalar
// arithmetic (deliberately independent of the advantage module) and compares
// against the module's outputs within 1e-12.
GroupCheckResult exhaustive_group_check(const MacroStepRecord& record, double gamma);

}  // namespace oracles
}  // namespace pglab
