#include "pglab/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace pglab {

std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::Ppo: return "ppo";
        case Algorithm::Grpo: return "grpo";
        case Algorithm::Hybrid: return "hybrid";
    }
    return "hybrid";
}

Algorithm algorithm_from_string(const std::string& s) {
    if (s == "ppo") return Algorithm::Ppo;
    if (s == "grpo") return Algorithm::Grpo;
    if (s == "hybrid") return Algorithm::Hybrid;
    throw std::invalid_argument("unknown algorithm: " + s);
}

void OptimizerConfig::validate() {
    if (algorithm == Algorithm::Ppo) group_size = 1;
    if (algorithm == Algorithm::Grpo && group_size < 2)
        throw std::invalid_argument("GRPO group size must exceed 1");
    if (group_size < 1) throw std::invalid_argument("group size must be >= 1");
    if (gamma <= 0.0 || gamma >= 1.0)
        throw std::invalid_argument("gamma must lie in (0,1)");
    if (clip_epsilon <= 0.0) throw std::invalid_argument("clip epsilon must be > 0");
    if (n_step < 1) throw std::invalid_argument("n_step must be >= 1");
    if (entropy_coef < 0.0 || guidance_beta < 0.0)
        throw std::invalid_argument("entropy and guidance coefficients must be >= 0");
    if (policy_lr < 0.0 || value_lr < 0.0)
        throw std::invalid_argument("learning rates must be >= 0");
    if (epochs < 1 || minibatch < 1 || macro_steps_per_batch < 1 || batches < 0)
        throw std::invalid_argument("epochs/minibatch/macro_steps/batches out of range");
    if (guidance_candidates < 1)
        throw std::invalid_argument("guidance candidate count must be >= 1");
    if (normalizer_window < 1)
        throw std::invalid_argument("normalizer window must be >= 1");
}

double probability_ratio(double new_log_prob, double old_log_prob) {
    if (!std::isfinite(new_log_prob) || !std::isfinite(old_log_prob))
        throw std::invalid_argument("probability_ratio: non-finite log probability");
    return std::exp(std::clamp(new_log_prob - old_log_prob, -30.0, 30.0));
}

SurrogateStats clipped_surrogate_loss(const std::vector<PolicySample>& samples,
                                      const NetworkSpec& policy_spec,
                                      const ParamVector& policy_params,
                                      double clip_epsilon, double entropy_coef,
                                      ParamVector* grad_out) {
    if (samples.empty())
        throw std::invalid_argument("clipped_surrogate_loss: empty sample batch");
    for (const auto& s : samples)
        if (!std::isfinite(s.advantage))
            throw std::invalid_argument("clipped_surrogate_loss: non-finite advantage");

    const double inv_m = 1.0 / static_cast<double>(samples.size());
    SurrogateStats stats;
    for (const auto& s : samples) {
        const auto out = forward(policy_params, policy_spec, *s.observation);
        const auto dist = make_distribution(policy_spec, out);
        const double new_lp = log_prob(dist, *s.action);
        const double rho = probability_ratio(new_lp, s.old_log_prob);
        const double surr_unclipped = rho * s.advantage;
        const double clipped_rho =
            std::clamp(rho, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
        const double surr_clipped = clipped_rho * s.advantage;
        const double h = entropy(dist);

        stats.loss += -std::min(surr_unclipped, surr_clipped) * inv_m
                      - entropy_coef * h * inv_m;
        stats.mean_ratio += rho * inv_m;
        stats.mean_entropy += h * inv_m;
        if (surr_clipped < surr_unclipped) stats.clip_fraction += inv_m;

        if (grad_out != nullptr) {
            // d(min)/d(new_lp): the unclipped branch contributes A*rho; the
            // clipped branch does too while rho is inside the clip interval
            // and is flat outside it.
            double dmin_dlp = 0.0;
            if (surr_unclipped <= surr_clipped) {
                dmin_dlp = s.advantage * rho;
            } else if (rho > 1.0 - clip_epsilon && rho < 1.0 + clip_epsilon) {
                dmin_dlp = s.advantage * rho;
            }
            const auto lp_grad = log_prob_grad(dist, *s.action);
            const auto h_grad = entropy_grad(dist);
            std::vector<double> out_grad(out.size());
            for (size_t i = 0; i < out.size(); ++i)
                out_grad[i] = -inv_m * dmin_dlp * lp_grad[i]
                              - inv_m * entropy_coef * h_grad[i];
            const auto g = backward(policy_params, policy_spec, *s.observation, out_grad);
            for (size_t i = 0; i < g.size(); ++i) (*grad_out)[i] += g[i];
        }
    }
    return stats;
}

double value_loss(const std::vector<PolicySample>& samples,
                  const NetworkSpec& value_spec, const ParamVector& value_params,
                  ParamVector* grad_out) {
    if (samples.empty()) throw std::invalid_argument("value_loss: empty sample batch");
    const double inv_m = 1.0 / static_cast<double>(samples.size());
    double loss = 0.0;
    for (const auto& s : samples) {
        const double v = forward_scalar(value_params, value_spec, *s.observation);
        const double diff = v - s.value_target;
        loss += 0.5 * diff * diff * inv_m;
        if (grad_out != nullptr) {
            const auto g = backward(value_params, value_spec, *s.observation,
                                    {diff * inv_m});
            for (size_t i = 0; i < g.size(); ++i) (*grad_out)[i] += g[i];
        }
    }
    return loss;
}

Action value_guided_sample(const PolicyDistribution& dist,
                           const std::function<double(const Action&)>& q_value,
                           int candidates, double beta, RngStream& rng) {
    std::vector<Action> pool;
    if (dist.kind == PolicyDistribution::Kind::Categorical) {
        for (int a = 0; a < dist.action_count(); ++a) {
            Action act;
            act.index = a;
            pool.push_back(act);
        }
    } else {
        for (int i = 0; i < candidates; ++i) pool.push_back(sample_action(dist, rng));
    }
    if (pool.empty()) throw std::invalid_argument("value_guided_sample: no candidates");
    size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < pool.size(); ++i) {
        const double score = q_value(pool[i]) + beta * log_prob(dist, pool[i]);
        if (score > best_score) {  // ties keep the lowest index
            best_score = score;
            best = i;
        }
    }
    return pool[best];
}

void AdamState::step(ParamVector& params, const ParamVector& grad, double lr) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    if (m.size() != params.size()) {
        m.assign(params.size(), 0.0);
        v.assign(params.size(), 0.0);
        t = 0;
    }
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (size_t i = 0; i < params.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

// ---------------------------------------------------------------------- Trainer

Trainer::Trainer(OptimizerConfig config, Env& env)
    : config_(std::move(config)),
      env_(env),
      rng_(0),
      normalizer_(static_cast<size_t>(std::max(config_.normalizer_window, 1)),
                  config_.normalizer_eps) {
    config_.validate();

    policy_spec_.input_dim = env_.obs_dim();
    policy_spec_.hidden = {32, 32};
    policy_spec_.activation = Activation::Tanh;
    if (env_.discrete_actions()) {
        policy_spec_.head = Head::CategoricalLogits;
        policy_spec_.output_dim = env_.action_count();
    } else {
        policy_spec_.head = Head::GaussianMeanLogStd;
        policy_spec_.output_dim = 2 * env_.action_count();
    }

    value_spec_.input_dim = env_.obs_dim();
    value_spec_.hidden = {32, 32};
    value_spec_.output_dim = 1;
    value_spec_.head = Head::Linear;

    guidance_spec_.input_dim = env_.obs_dim() + env_.action_count();
    guidance_spec_.hidden = {32, 32};
    guidance_spec_.output_dim = 1;
    guidance_spec_.head = Head::Linear;

    policy_params_ = init_params(policy_spec_, config_.seed * 0x9e3779b97f4a7c15ull + 1);
    value_params_ = init_params(value_spec_, config_.seed * 0x9e3779b97f4a7c15ull + 2);
    guidance_params_ = init_params(guidance_spec_, config_.seed * 0x9e3779b97f4a7c15ull + 3);
    rng_ = RngStream(config_.seed);
}

PolicyDistribution Trainer::policy_dist(const std::vector<double>& obs) const {
    return make_distribution(policy_spec_, forward(policy_params_, policy_spec_, obs));
}

double Trainer::state_value(const std::vector<double>& obs) const {
    return forward_scalar(value_params_, value_spec_, obs);
}

namespace {

std::vector<double> guidance_input(const std::vector<double>& obs, const Action& a,
                                   bool discrete, int action_count) {
    std::vector<double> in = obs;
    if (discrete) {
        std::vector<double> onehot(action_count, 0.0);
        onehot[a.index] = 1.0;
        in.insert(in.end(), onehot.begin(), onehot.end());
    } else {
        in.insert(in.end(), a.values.begin(), a.values.end());
    }
    return in;
}

}  // namespace

Action Trainer::sample_policy_action(const PolicyDistribution& dist,
                                     const std::vector<double>& obs) {
    if (config_.guidance_beta > 0.0) {
        auto q = [&](const Action& a) {
            return forward_scalar(guidance_params_, guidance_spec_,
                                  guidance_input(obs, a, env_.discrete_actions(),
                                                 env_.action_count()));
        };
        return value_guided_sample(dist, q, config_.guidance_candidates,
                                   config_.guidance_beta, rng_);
    }
    return sample_action(dist, rng_);
}

RolloutBatch Trainer::collect_rollout() {
    RolloutBatch batch;
    const bool use_critic = config_.algorithm != Algorithm::Grpo;
    const bool exhaustive = config_.algorithm == Algorithm::Hybrid &&
                            config_.nstep_exhaustive && config_.n_step > 1;

    RolloutEpisode episode;
    episode.start = 0;

    for (int step = 0; step < config_.macro_steps_per_batch; ++step) {
        if (env_needs_reset_) {
            episode_seed_ = rng_.next_u64();
            current_obs_ = env_.reset(episode_seed_);
            episode_return_ = 0.0;
            env_needs_reset_ = false;
        }

        MacroStepRecord record;
        record.observation = current_obs_;
        record.continuation_index = 0;
        const auto dist = policy_dist(current_obs_);
        record.base_value = use_critic ? state_value(current_obs_) : 0.0;

        const EnvSnapshot base_snap = env_.snapshot();
        EnvSnapshot cont_snap;
        SampleBranch cont_branch;

        record.branches.resize(config_.group_size);
        for (int t = 0; t < config_.group_size; ++t) {
            env_.restore(base_snap);
            SampleBranch& branch = record.branches[t];
            branch.action = sample_policy_action(dist, current_obs_);
            const StepResult sr = env_.step(branch.action);
            ++raw_steps_;
            branch.raw_reward = sr.reward;
            if (config_.transform == RewardTransform::RollingNorm && normalizer_.empty())
                normalizer_.push(sr.reward);  // prime the window on first use
            branch.transformed_reward =
                transform_reward(config_.transform, sr.reward, &normalizer_);
            branch.next_observation = sr.observation;
            branch.terminal = sr.terminal;
            branch.truncated = sr.truncated;
            branch.next_value =
                (use_critic && !sr.terminal) ? state_value(sr.observation) : 0.0;
            branch.old_log_prob = log_prob(dist, branch.action);
            branch.tail_value = branch.next_value;
            branch.sub_terminal = branch.terminal;

            if (t == record.continuation_index) {
                cont_snap = env_.snapshot();
                cont_branch = branch;
            }

            if (exhaustive) {
                // Roll this branch forward n-1 extra steps along freshly
                // sampled policy actions; rewards feed the branch-owned
                // n-step return.
                std::vector<double> obs = sr.observation;
                bool ended_terminal = sr.terminal;
                bool ended = sr.terminal || sr.truncated;
                for (int k = 1; k < config_.n_step && !ended; ++k) {
                    const auto sub_dist = policy_dist(obs);
                    const Action sub_a = sample_policy_action(sub_dist, obs);
                    const StepResult sub = env_.step(sub_a);
                    ++raw_steps_;
                    branch.future_rewards.push_back(
                        transform_reward(config_.transform, sub.reward, &normalizer_));
                    obs = sub.observation;
                    ended_terminal = sub.terminal;
                    ended = sub.terminal || sub.truncated;
                }
                branch.sub_terminal = ended_terminal;
                branch.tail_value =
                    (use_critic && !ended_terminal) ? state_value(obs) : 0.0;
            }
        }

        env_.restore(cont_snap);
        current_obs_ = cont_branch.next_observation;
        episode_return_ += cont_branch.raw_reward;
        ++macro_steps_;

        batch.records.push_back(std::move(record));

        if (cont_branch.terminal || cont_branch.truncated) {
            episode.end = static_cast<int>(batch.records.size());
            episode.terminal = cont_branch.terminal;
            episode.return_sum = episode_return_;
            episode.completed = true;
            batch.episodes.push_back(episode);
            recent_returns_.push_back(episode_return_);
            while (recent_returns_.size() > 20) recent_returns_.pop_front();
            episode = RolloutEpisode{};
            episode.start = static_cast<int>(batch.records.size());
            env_needs_reset_ = true;
        }
    }

    if (episode.start < static_cast<int>(batch.records.size())) {
        episode.end = static_cast<int>(batch.records.size());
        episode.completed = false;
        batch.episodes.push_back(episode);
    }

    batch.macro_steps = config_.macro_steps_per_batch;
    batch.raw_steps = raw_steps_;  // cumulative; caller diffs if needed
    return batch;
}

std::vector<AdvantageEntry> Trainer::estimate_advantages(const RolloutBatch& batch) const {
    std::vector<AdvantageEntry> entries;
    switch (config_.algorithm) {
        case Algorithm::Ppo:
            for (size_t i = 0; i < batch.records.size(); ++i) {
                auto e = ppo_advantage(batch.records[i], config_.gamma);
                e.record_index = static_cast<int>(i);
                entries.push_back(e);
            }
            break;
        case Algorithm::Grpo:
            for (size_t i = 0; i < batch.records.size(); ++i) {
                auto group = grpo_advantages(batch.records[i],
                                             config_.grpo_std_normalize,
                                             config_.normalizer_eps);
                for (auto& e : group) {
                    e.record_index = static_cast<int>(i);
                    entries.push_back(e);
                }
            }
            break;
        case Algorithm::Hybrid:
            if (config_.n_step == 1) {
                for (size_t i = 0; i < batch.records.size(); ++i) {
                    auto result = hybrid_advantages(batch.records[i], config_.gamma);
                    for (auto& e : result.entries) {
                        e.record_index = static_cast<int>(i);
                        entries.push_back(e);
                    }
                }
            } else if (config_.nstep_exhaustive) {
                for (size_t i = 0; i < batch.records.size(); ++i) {
                    auto group = hybrid_nstep_exhaustive(batch.records[i], config_.gamma,
                                                         config_.n_step,
                                                         static_cast<int>(i));
                    entries.insert(entries.end(), group.begin(), group.end());
                }
            } else {
                for (const auto& ep : batch.episodes) {
                    const std::span<const MacroStepRecord> span(
                        batch.records.data() + ep.start,
                        static_cast<size_t>(ep.end - ep.start));
                    auto group = hybrid_nstep_advantages(span, config_.gamma,
                                                         config_.n_step);
                    for (auto& e : group) {
                        e.record_index += ep.start;
                        entries.push_back(e);
                    }
                }
            }
            break;
    }
    return entries;
}

UpdateStats Trainer::update(const RolloutBatch& batch,
                            const std::vector<AdvantageEntry>& entries,
                            int batch_index) {
    UpdateStats stats;
    stats.batch = batch_index;

    double adv_sum = 0.0, adv_sq = 0.0;
    for (const auto& e : entries) {
        adv_sum += e.advantage;
        adv_sq += e.advantage * e.advantage;
    }
    const double n = static_cast<double>(entries.size());
    stats.adv_mean = adv_sum / n;
    stats.adv_variance = adv_sq / n - stats.adv_mean * stats.adv_mean;

    std::vector<size_t> order(entries.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    auto make_sample = [&](const AdvantageEntry& e) {
        const MacroStepRecord& rec = batch.records[e.record_index];
        const SampleBranch& br = rec.branches[e.branch_index];
        PolicySample s;
        s.observation = &rec.observation;
        s.action = &br.action;
        s.old_log_prob = br.old_log_prob;
        s.advantage = e.advantage;
        s.value_target = e.value_target;
        return s;
    };

    int updates = 0;
    double loss_acc = 0.0, vloss_acc = 0.0, ratio_acc = 0.0, clip_acc = 0.0,
           ent_acc = 0.0, gnorm_acc = 0.0;
    const bool use_critic = config_.algorithm != Algorithm::Grpo;

    for (int epoch = 0; epoch < config_.epochs; ++epoch) {
        // Fisher-Yates shuffle on the owned stream.
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng_.below(i)]);
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(config_.minibatch)) {
            const size_t stop =
                std::min(order.size(), start + static_cast<size_t>(config_.minibatch));
            std::vector<PolicySample> samples;
            samples.reserve(stop - start);
            for (size_t i = start; i < stop; ++i)
                samples.push_back(make_sample(entries[order[i]]));

            ParamVector pgrad(policy_params_.size(), 0.0);
            const auto sstats =
                clipped_surrogate_loss(samples, policy_spec_, policy_params_,
                                       config_.clip_epsilon, config_.entropy_coef,
                                       &pgrad);
            if (!std::isfinite(sstats.loss)) {
                std::ostringstream oss;
                oss << "non-finite policy loss at batch " << batch_index
                    << " (adv_mean=" << stats.adv_mean
                    << ", adv_var=" << stats.adv_variance
                    << ", mean_ratio=" << sstats.mean_ratio << ")";
                throw TrainDivergence(oss.str());
            }
            double gn = 0.0;
            for (double g : pgrad) gn += g * g;
            policy_adam_.step(policy_params_, pgrad, config_.policy_lr);

            double vl = 0.0;
            if (use_critic) {
                ParamVector vgrad(value_params_.size(), 0.0);
                vl = value_loss(samples, value_spec_, value_params_, &vgrad);
                if (!std::isfinite(vl)) {
                    std::ostringstream oss;
                    oss << "non-finite value loss at batch " << batch_index;
                    throw TrainDivergence(oss.str());
                }
                value_adam_.step(value_params_, vgrad, config_.value_lr);
            }

            loss_acc += sstats.loss;
            vloss_acc += vl;
            ratio_acc += sstats.mean_ratio;
            clip_acc += sstats.clip_fraction;
            ent_acc += sstats.mean_entropy;
            gnorm_acc += std::sqrt(gn);
            ++updates;
        }
    }

    if (config_.guidance_beta > 0.0) update_guidance(batch);

    stats.policy_loss = loss_acc / updates;
    stats.value_loss = vloss_acc / updates;
    stats.mean_ratio = ratio_acc / updates;
    stats.clip_fraction = clip_acc / updates;
    stats.entropy = ent_acc / updates;
    stats.grad_norm = gnorm_acc / updates;
    stats.macro_steps = macro_steps_;
    stats.raw_steps = raw_steps_;
    if (!recent_returns_.empty()) {
        double acc = 0.0;
        for (double r : recent_returns_) acc += r;
        stats.mean_return = acc / static_cast<double>(recent_returns_.size());
    }
    return stats;
}

void Trainer::update_guidance(const RolloutBatch& batch) {
    // One-step bootstrapped regression of Q(s,a) toward r~ + gamma*V(s').
    const bool use_critic = config_.algorithm != Algorithm::Grpo;
    ParamVector grad(guidance_params_.size(), 0.0);
    double count = 0.0;
    for (const auto& rec : batch.records)
        count += static_cast<double>(rec.branches.size());
    const double inv = 1.0 / count;
    for (const auto& rec : batch.records) {
        for (const auto& br : rec.branches) {
            const double target =
                br.transformed_reward +
                (use_critic && !br.terminal ? config_.gamma * br.next_value : 0.0);
            const auto in = guidance_input(rec.observation, br.action,
                                           env_.discrete_actions(), env_.action_count());
            const double q = forward_scalar(guidance_params_, guidance_spec_, in);
            const auto g = backward(guidance_params_, guidance_spec_, in,
                                    {(q - target) * inv});
            for (size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
        }
    }
    guidance_adam_.step(guidance_params_, grad, config_.value_lr);
}

TrainResult Trainer::train(const std::function<void(const UpdateStats&)>& on_batch) {
    TrainResult result;
    int at_threshold = 0;
    for (int b = 0; b < config_.batches; ++b) {
        const RolloutBatch batch = collect_rollout();
        const auto entries = estimate_advantages(batch);
        const UpdateStats stats = update(batch, entries, b);
        result.stats.push_back(stats);
        if (on_batch) on_batch(stats);

        if (config_.checkpoint_interval > 0 && !config_.checkpoint_path.empty() &&
            (b + 1) % config_.checkpoint_interval == 0) {
            save_checkpoint(config_.checkpoint_path + ".policy.ckpt", policy_spec_,
                            policy_params_);
            if (config_.algorithm != Algorithm::Grpo)
                save_checkpoint(config_.checkpoint_path + ".value.ckpt", value_spec_,
                                value_params_);
        }

        if (std::isfinite(config_.success_threshold) && !recent_returns_.empty() &&
            stats.mean_return >= config_.success_threshold) {
            if (++at_threshold >= config_.patience) {
                result.reached_threshold = true;
                break;
            }
        } else {
            at_threshold = 0;
        }
    }
    result.policy_params = policy_params_;
    result.value_params = value_params_;
    return result;
}

}  // namespace pglab
