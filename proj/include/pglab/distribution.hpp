#pragma once

#include <vector>

#include "pglab/net.hpp"
#include "pglab/rng.hpp"

namespace pglab {

// A taken action: discrete index or continuous vector, depending on the
// distribution kind / environment.
struct Action {
    int index = -1;
    std::vector<double> values;

    bool operator==(const Action&) const = default;
};

// Policy output distribution. `params` holds logits (categorical) or the
// concatenation mean || log_std (gaussian), exactly as emitted by forward().
struct PolicyDistribution {
    enum class Kind { Categorical, Gaussian };
    Kind kind = Kind::Categorical;
    std::vector<double> params;

    int action_count() const { return static_cast<int>(params.size()); }
    int action_dim() const { return static_cast<int>(params.size()) / 2; }

    // Normalized probabilities (categorical only); sums to 1.
    std::vector<double> probs() const;
};

PolicyDistribution make_distribution(const NetworkSpec& spec,
                                     std::vector<double> net_output);

double log_prob(const PolicyDistribution& dist, const Action& action);
double entropy(const PolicyDistribution& dist);
Action sample_action(const PolicyDistribution& dist, RngStream& rng);

// Gradients w.r.t. dist.params, for chaining through backward().
std::vector<double> log_prob_grad(const PolicyDistribution& dist, const Action& action);
std::vector<double> entropy_grad(const PolicyDistribution& dist);

// Most likely action (categorical argmax / gaussian mean).
Action mode_action(const PolicyDistribution& dist);

}  // namespace pglab
