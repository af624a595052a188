#include "pglab/advantage.hpp"

#include <cmath>
#include <stdexcept>

namespace pglab {

std::string to_string(RewardTransform t) {
    switch (t) {
        case RewardTransform::Tanh: return "tanh";
        case RewardTransform::Identity: return "identity";
        case RewardTransform::RollingNorm: return "rolling_norm";
    }
    return "tanh";
}

RewardTransform reward_transform_from_string(const std::string& s) {
    if (s == "tanh") return RewardTransform::Tanh;
    if (s == "identity") return RewardTransform::Identity;
    if (s == "rolling_norm") return RewardTransform::RollingNorm;
    throw std::invalid_argument("unknown reward transform: " + s);
}

void RewardNormalizerState::push(double r) {
    window.push_back(r);
    while (window.size() > capacity) window.pop_front();
}

double RewardNormalizerState::mean() const {
    double acc = 0.0;
    for (double r : window) acc += r;
    return acc / static_cast<double>(window.size());
}

double RewardNormalizerState::stddev() const {
    const double mu = mean();
    double acc = 0.0;
    for (double r : window) acc += (r - mu) * (r - mu);
    return std::sqrt(acc / static_cast<double>(window.size()));
}

double transform_reward(RewardTransform transform, double r,
                        RewardNormalizerState* state) {
    switch (transform) {
        case RewardTransform::Tanh:
            return std::tanh(r);
        case RewardTransform::Identity:
            return r;
        case RewardTransform::RollingNorm: {
            if (state == nullptr || state->empty())
                throw std::invalid_argument(
                    "rolling_norm requires a normalizer state with at least one sample");
            const double out = (r - state->mean()) / (state->stddev() + state->epsilon);
            state->push(r);
            return out;
        }
    }
    return r;
}

namespace {

double bootstrap_value(const SampleBranch& b, double gamma) {
    // Horizon truncation is not terminal: V(s') still counts.
    return b.terminal ? 0.0 : gamma * b.next_value;
}

}  // namespace

AdvantageEntry ppo_advantage(const MacroStepRecord& record, double gamma) {
    if (record.branches.size() != 1)
        throw std::invalid_argument("ppo_advantage expects a single-branch record");
    const SampleBranch& b = record.branches[0];
    AdvantageEntry entry;
    entry.branch_index = 0;
    entry.value_target = b.raw_reward + bootstrap_value(b, gamma);
    entry.advantage = entry.value_target - record.base_value;
    entry.has_value_target = true;
    return entry;
}

std::vector<AdvantageEntry> grpo_advantages(const MacroStepRecord& record,
                                            bool divide_by_std, double eps) {
    const size_t n = record.branches.size();
    if (n < 2)
        throw std::invalid_argument("GRPO group size must exceed 1");
    double mean = 0.0;
    for (const auto& b : record.branches) mean += b.transformed_reward;
    mean /= static_cast<double>(n);
    double scale = 1.0;
    if (divide_by_std) {
        double var = 0.0;
        for (const auto& b : record.branches) {
            const double d = b.transformed_reward - mean;
            var += d * d;
        }
        scale = 1.0 / (std::sqrt(var / static_cast<double>(n)) + eps);
    }
    std::vector<AdvantageEntry> entries(n);
    for (size_t t = 0; t < n; ++t) {
        entries[t].branch_index = static_cast<int>(t);
        entries[t].advantage = (record.branches[t].transformed_reward - mean) * scale;
        entries[t].has_value_target = false;
    }
    return entries;
}

HybridAdvantageResult hybrid_advantages(const MacroStepRecord& record, double gamma) {
    if (record.branches.empty())
        throw std::invalid_argument("hybrid_advantages needs at least one branch");
    HybridAdvantageResult result;
    result.entries.resize(record.branches.size());
    double acc = 0.0;
    for (size_t t = 0; t < record.branches.size(); ++t) {
        const SampleBranch& b = record.branches[t];
        AdvantageEntry& e = result.entries[t];
        e.branch_index = static_cast<int>(t);
        e.value_target = b.transformed_reward + bootstrap_value(b, gamma);
        e.advantage = e.value_target - record.base_value;
        e.has_value_target = true;
        acc += e.advantage;
    }
    result.mean_advantage = acc / static_cast<double>(record.branches.size());
    return result;
}

std::vector<AdvantageEntry> hybrid_nstep_advantages(
    std::span<const MacroStepRecord> episode, double gamma, int n) {
    if (n < 1) throw std::invalid_argument("n-step horizon must be >= 1");
    std::vector<AdvantageEntry> entries;
    for (size_t i = 0; i < episode.size(); ++i) {
        const MacroStepRecord& record = episode[i];
        for (size_t t = 0; t < record.branches.size(); ++t) {
            const SampleBranch& b = record.branches[t];
            AdvantageEntry e;
            e.record_index = static_cast<int>(i);
            e.branch_index = static_cast<int>(t);
            e.has_value_target = true;
            double acc = b.transformed_reward;
            double bootstrap = 0.0;
            if (b.terminal) {
                bootstrap = 0.0;
            } else if (n == 1 || b.truncated) {
                bootstrap = gamma * b.next_value;
            } else {
                // Rewards for k >= 1 come from the continuation path.
                double disc = gamma;
                for (int k = 1; k < n; ++k, disc *= gamma) {
                    const size_t idx = i + static_cast<size_t>(k);
                    if (idx >= episode.size()) {
                        const MacroStepRecord& last = episode[idx - 1];
                        const SampleBranch& lb = last.branches[last.continuation_index];
                        bootstrap = lb.terminal ? 0.0 : disc * lb.next_value;
                        break;
                    }
                    const MacroStepRecord& step = episode[idx];
                    const SampleBranch& cb = step.branches[step.continuation_index];
                    acc += disc * cb.transformed_reward;
                    if (cb.terminal) {
                        bootstrap = 0.0;
                        break;
                    }
                    if (cb.truncated || k == n - 1) {
                        bootstrap = disc * gamma * cb.next_value;
                        break;
                    }
                }
            }
            e.value_target = acc + bootstrap;
            e.advantage = e.value_target - record.base_value;
            entries.push_back(e);
        }
    }
    return entries;
}

std::vector<AdvantageEntry> hybrid_nstep_exhaustive(const MacroStepRecord& record,
                                                    double gamma, int n,
                                                    int record_index) {
    if (n < 1) throw std::invalid_argument("n-step horizon must be >= 1");
    std::vector<AdvantageEntry> entries;
    entries.reserve(record.branches.size());
    for (size_t t = 0; t < record.branches.size(); ++t) {
        const SampleBranch& b = record.branches[t];
        AdvantageEntry e;
        e.record_index = record_index;
        e.branch_index = static_cast<int>(t);
        e.has_value_target = true;
        double acc = b.transformed_reward;
        double disc = gamma;
        for (double r : b.future_rewards) {
            acc += disc * r;
            disc *= gamma;
        }
        const double bootstrap = b.sub_terminal ? 0.0 : disc * b.tail_value;
        e.value_target = acc + bootstrap;
        e.advantage = e.value_target - record.base_value;
        entries.push_back(e);
    }
    return entries;
}

}  // namespace pglab
