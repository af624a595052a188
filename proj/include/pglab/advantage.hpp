#pragma once

#include <deque>
#include <span>
#include <string>
#include <vector>

#include "pglab/distribution.hpp"

namespace pglab {

enum class RewardTransform { Tanh, Identity, RollingNorm };

std::string to_string(RewardTransform t);
RewardTransform reward_transform_from_string(const std::string& s);

// Rolling-window reward statistics for the adaptive normalization transform.
// Mean and standard deviation are recomputed over exactly the window contents;
// the standard deviation is the population form.
struct RewardNormalizerState {
    explicit RewardNormalizerState(size_t capacity = 256, double epsilon = 1e-8)
        : capacity(capacity), epsilon(epsilon) {}

    size_t capacity;
    double epsilon;
    std::deque<double> window;

    void push(double r);
    double mean() const;
    double stddev() const;
    bool empty() const { return window.empty(); }
};

// Applies the configured transform. RollingNorm normalizes with the current
// window statistics and then appends r; it requires a non-empty window.
double transform_reward(RewardTransform transform, double r,
                        RewardNormalizerState* state = nullptr);

// One of the N evaluations branched from a macro-step snapshot.
struct SampleBranch {
    Action action;
    double raw_reward = 0.0;
    double transformed_reward = 0.0;
    std::vector<double> next_observation;
    double next_value = 0.0;  // V(s') under the collection-time critic
    bool terminal = false;
    bool truncated = false;
    double old_log_prob = 0.0;

    // Exhaustive n-step mode only: transformed rewards of the branch's own
    // sub-trajectory beyond the first step, and the value at its end.
    std::vector<double> future_rewards;
    double tail_value = 0.0;
    bool sub_terminal = false;
};

struct MacroStepRecord {
    std::vector<double> observation;
    double base_value = 0.0;  // V(s_T)
    std::vector<SampleBranch> branches;
    int continuation_index = 0;
};

// One update sample. Observation/action/old_log_prob live in the referenced
// record; indices keep the batch compact.
struct AdvantageEntry {
    int record_index = 0;
    int branch_index = 0;
    double advantage = 0.0;
    double value_target = 0.0;
    bool has_value_target = false;
};

// One-step bootstrapped advantage; requires a single-branch record.
AdvantageEntry ppo_advantage(const MacroStepRecord& record, double gamma);

// Group-relative advantages: transformed reward minus the group mean,
// optionally divided by the group population std + eps. Critic-free, so no
// value targets. Requires at least two branches.
std::vector<AdvantageEntry> grpo_advantages(const MacroStepRecord& record,
                                            bool divide_by_std = false,
                                            double eps = 1e-8);

struct HybridAdvantageResult {
    std::vector<AdvantageEntry> entries;
    double mean_advantage = 0.0;  // group mean of the per-branch advantages
};

// Multi-sample advantages with the critic baseline: per branch
// transformed_reward + gamma*V(s')*(1-terminal) - V(s_T).
HybridAdvantageResult hybrid_advantages(const MacroStepRecord& record, double gamma);

// n-step variant over one episode segment. Each branch contributes its own
// first reward; rewards for k >= 1 follow the continuation path, with the
// bootstrap dropped when a terminal is reached before n steps. record_index
// values are offsets into `episode`.
std::vector<AdvantageEntry> hybrid_nstep_advantages(
    std::span<const MacroStepRecord> episode, double gamma, int n);

// n-step variant using per-branch sub-trajectories recorded at collection
// time (future_rewards / tail_value), the reading where every branch owns a
// full n-step rollout.
std::vector<AdvantageEntry> hybrid_nstep_exhaustive(const MacroStepRecord& record,
                                                    double gamma, int n,
                                                    int record_index = 0);

}  // namespace pglab
