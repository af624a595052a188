#include "pglab/oracles.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pglab {
namespace oracles {

ParamVector fd_gradient(const std::function<double(const ParamVector&)>& loss,
                        const ParamVector& params, const FiniteDiffSpec& spec) {
    if (spec.step <= 0.0) throw std::invalid_argument("fd_gradient: step must be > 0");
    ParamVector grad(params.size(), 0.0);
    ParamVector probe = params;
    for (size_t i = 0; i < params.size(); ++i) {
        probe[i] = params[i] + spec.step;
        const double up = loss(probe);
        probe[i] = params[i] - spec.step;
        const double down = loss(probe);
        probe[i] = params[i];
        if (!std::isfinite(up) || !std::isfinite(down))
            throw std::runtime_error("fd_gradient: non-finite loss at coordinate " +
                                     std::to_string(i));
        grad[i] = (up - down) / (2.0 * spec.step);
    }
    return grad;
}

double max_relative_error(const ParamVector& analytic, const ParamVector& numeric,
                          double abs_floor) {
    if (analytic.size() != numeric.size())
        throw std::invalid_argument("max_relative_error: size mismatch");
    double worst = 0.0;
    for (size_t i = 0; i < analytic.size(); ++i) {
        const double diff = std::abs(analytic[i] - numeric[i]);
        const double scale =
            std::max({std::abs(analytic[i]), std::abs(numeric[i]), abs_floor});
        worst = std::max(worst, diff / scale);
    }
    return worst;
}

std::vector<double> exact_policy_return(const TabularMDP& mdp,
                                        const std::vector<double>& policy,
                                        double gamma) {
    mdp.validate();
    if (policy.size() != static_cast<size_t>(mdp.n_states) * mdp.n_actions)
        throw std::invalid_argument("exact_policy_return: policy table size mismatch");
    for (int s = 0; s < mdp.n_states; ++s) {
        double sum = 0.0;
        for (int a = 0; a < mdp.n_actions; ++a)
            sum += policy[static_cast<size_t>(s) * mdp.n_actions + a];
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("exact_policy_return: policy row not stochastic");
    }

    std::vector<double> values(mdp.n_states, 0.0);
    std::vector<double> next(mdp.n_states, 0.0);
    while (true) {
        double residual = 0.0;
        for (int s = 0; s < mdp.n_states; ++s) {
            if (mdp.terminal[s]) {
                next[s] = 0.0;
                continue;
            }
            double v = 0.0;
            for (int a = 0; a < mdp.n_actions; ++a) {
                const double pa = policy[static_cast<size_t>(s) * mdp.n_actions + a];
                if (pa == 0.0) continue;
                double q = mdp.r(s, a);
                for (int s2 = 0; s2 < mdp.n_states; ++s2)
                    q += gamma * mdp.p(s, a, s2) * values[s2];
                v += pa * q;
            }
            next[s] = v;
            residual = std::max(residual, std::abs(next[s] - values[s]));
        }
        values = next;
        if (residual <= 1e-12) break;
    }
    return values;
}

GroupCheckResult exhaustive_group_check(const MacroStepRecord& record, double gamma) {
    constexpr double tol = 1e-12;
    GroupCheckResult result;
    const size_t n = record.branches.size();

    // Straight-line PPO (single branch records only).
    if (n == 1) {
        const SampleBranch& b = record.branches[0];
        double target = b.raw_reward;
        if (!b.terminal) target = target + gamma * b.next_value;
        const double adv = target - record.base_value;
        const auto got = ppo_advantage(record, gamma);
        result.ppo_ok = std::abs(got.advantage - adv) <= tol &&
                        std::abs(got.value_target - target) <= tol;
    }

    // Straight-line GRPO (mean-centered transformed rewards).
    if (n >= 2) {
        double mean = 0.0;
        for (size_t t = 0; t < n; ++t) mean = mean + record.branches[t].transformed_reward;
        mean = mean / static_cast<double>(n);
        const auto got = grpo_advantages(record);
        for (size_t t = 0; t < n; ++t) {
            const double adv = record.branches[t].transformed_reward - mean;
            if (std::abs(got[t].advantage - adv) > tol) result.grpo_ok = false;
        }
    }

    // Straight-line Hybrid.
    {
        const auto got = hybrid_advantages(record, gamma);
        double sum = 0.0;
        for (size_t t = 0; t < n; ++t) {
            const SampleBranch& b = record.branches[t];
            double target = b.transformed_reward;
            if (!b.terminal) target = target + gamma * b.next_value;
            const double adv = target - record.base_value;
            sum = sum + adv;
            if (std::abs(got.entries[t].advantage - adv) > tol ||
                std::abs(got.entries[t].value_target - target) > tol)
                result.hybrid_ok = false;
        }
        if (std::abs(got.mean_advantage - sum / static_cast<double>(n)) > tol)
            result.hybrid_ok = false;
    }
    return result;
}

}  // namespace oracles
}  // namespace pglab
