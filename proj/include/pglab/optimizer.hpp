#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pglab/advantage.hpp"
#include "pglab/env.hpp"

namespace pglab {

enum class Algorithm { Ppo, Grpo, Hybrid };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

struct OptimizerConfig {
    Algorithm algorithm = Algorithm::Hybrid;
    double gamma = 0.99;
    double clip_epsilon = 0.2;
    int group_size = 4;           // N samples per macro-step
    int n_step = 1;
    bool nstep_exhaustive = false;
    double entropy_coef = 0.0;    // alpha
    double guidance_beta = 0.0;   // beta; value-guided sampling active when > 0
    int guidance_candidates = 16; // M candidates for continuous guided sampling
    double policy_lr = 3e-4;
    double value_lr = 1e-3;
    int epochs = 4;
    int minibatch = 64;
    int macro_steps_per_batch = 512;
    int batches = 100;
    RewardTransform transform = RewardTransform::Tanh;
    int normalizer_window = 256;
    double normalizer_eps = 1e-8;
    bool grpo_std_normalize = false;
    uint64_t seed = 1;
    int checkpoint_interval = 0;       // batches; 0 disables
    std::string checkpoint_path;       // prefix for checkpoint files
    double success_threshold = std::numeric_limits<double>::quiet_NaN();
    int patience = 5;                  // consecutive batches at threshold to stop

    // Normalizes and checks the config. PPO forces N = 1; GRPO needs N >= 2.
    void validate();
};

struct RolloutEpisode {
    int start = 0;  // record index range [start, end)
    int end = 0;
    bool terminal = false;  // ended by environment terminal (vs truncation/cutoff)
    double return_sum = 0.0;  // raw rewards along the continuation path
    bool completed = false;   // episode finished within this batch
};

struct RolloutBatch {
    std::vector<MacroStepRecord> records;
    std::vector<RolloutEpisode> episodes;
    long long macro_steps = 0;
    long long raw_steps = 0;
};

struct UpdateStats {
    int batch = 0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double adv_mean = 0.0;
    double adv_variance = 0.0;
    double mean_ratio = 0.0;
    double clip_fraction = 0.0;
    double entropy = 0.0;
    double grad_norm = 0.0;
    double mean_return = 0.0;  // mean over the last (up to) 20 completed episodes
    long long macro_steps = 0;  // cumulative
    long long raw_steps = 0;    // cumulative, branch evaluations included
};

// Likelihood ratio exp(new - old) with the exponent clamped to +-30.
double probability_ratio(double new_log_prob, double old_log_prob);

// A flattened update sample for the loss functions.
struct PolicySample {
    const std::vector<double>* observation = nullptr;
    const Action* action = nullptr;
    double old_log_prob = 0.0;
    double advantage = 0.0;
    double value_target = 0.0;
};

struct SurrogateStats {
    double loss = 0.0;
    double mean_ratio = 0.0;
    double clip_fraction = 0.0;
    double mean_entropy = 0.0;
};

// Clipped surrogate objective with entropy bonus:
//   loss = -mean(min(rho*A, clip(rho,1-eps,1+eps)*A)) - alpha*mean(H).
// Advantages are constants; the exact gradient w.r.t. policy parameters is
// accumulated into grad_out (same length as params) when non-null.
SurrogateStats clipped_surrogate_loss(const std::vector<PolicySample>& samples,
                                      const NetworkSpec& policy_spec,
                                      const ParamVector& policy_params,
                                      double clip_epsilon, double entropy_coef,
                                      ParamVector* grad_out);

// 0.5 * mean squared error of V(s) against the value targets.
double value_loss(const std::vector<PolicySample>& samples,
                  const NetworkSpec& value_spec, const ParamVector& value_params,
                  ParamVector* grad_out);

// Deterministic argmax of Q(s,a) + beta*log pi(a|s) over the candidate set
// (discrete: the full action set, ties to the lowest index; continuous:
// `candidates` policy samples).
Action value_guided_sample(const PolicyDistribution& dist,
                           const std::function<double(const Action&)>& q_value,
                           int candidates, double beta, RngStream& rng);

// Bias-corrected adaptive per-parameter step with running first/second
// moment accumulators (beta1=0.9, beta2=0.999, eps=1e-8).
struct AdamState {
    std::vector<double> m, v;
    long long t = 0;
    void step(ParamVector& params, const ParamVector& grad, double lr);
};

// Thrown when a loss turns non-finite; carries a diagnostic state dump.
struct TrainDivergence : std::runtime_error {
    explicit TrainDivergence(const std::string& what) : std::runtime_error(what) {}
};

struct TrainResult {
    ParamVector policy_params;
    ParamVector value_params;
    std::vector<UpdateStats> stats;
    bool reached_threshold = false;
};

class Trainer {
public:
    Trainer(OptimizerConfig config, Env& env);

    // Runs the full training loop; invokes `on_batch` after every update.
    TrainResult train(const std::function<void(const UpdateStats&)>& on_batch = {});

    RolloutBatch collect_rollout();

    const NetworkSpec& policy_spec() const { return policy_spec_; }
    const NetworkSpec& value_spec() const { return value_spec_; }
    const ParamVector& policy_params() const { return policy_params_; }
    const ParamVector& value_params() const { return value_params_; }
    ParamVector& mutable_policy_params() { return policy_params_; }
    ParamVector& mutable_value_params() { return value_params_; }

private:
    PolicyDistribution policy_dist(const std::vector<double>& obs) const;
    double state_value(const std::vector<double>& obs) const;
    Action sample_policy_action(const PolicyDistribution& dist,
                                const std::vector<double>& obs);
    std::vector<AdvantageEntry> estimate_advantages(const RolloutBatch& batch) const;
    UpdateStats update(const RolloutBatch& batch,
                       const std::vector<AdvantageEntry>& entries, int batch_index);
    void update_guidance(const RolloutBatch& batch);

    OptimizerConfig config_;
    Env& env_;
    NetworkSpec policy_spec_, value_spec_, guidance_spec_;
    ParamVector policy_params_, value_params_, guidance_params_;
    AdamState policy_adam_, value_adam_, guidance_adam_;
    RngStream rng_;
    RewardNormalizerState normalizer_;
    long long macro_steps_ = 0;
    long long raw_steps_ = 0;
    std::deque<double> recent_returns_;  // last completed episode returns
    bool env_needs_reset_ = true;
    std::vector<double> current_obs_;
    double episode_return_ = 0.0;
    uint64_t episode_seed_ = 0;
};

}  // namespace pglab
