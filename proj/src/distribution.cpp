#include "pglab/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pglab {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;  // ln(2*pi)

double log_sum_exp(const std::vector<double>& v) {
    const double m = *std::max_element(v.begin(), v.end());
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - m);
    return m + std::log(acc);
}

}  // namespace

std::vector<double> PolicyDistribution::probs() const {
    if (kind != Kind::Categorical)
        throw std::logic_error("probs() requires a categorical distribution");
    const double lse = log_sum_exp(params);
    std::vector<double> p(params.size());
    for (size_t i = 0; i < params.size(); ++i) p[i] = std::exp(params[i] - lse);
    return p;
}

PolicyDistribution make_distribution(const NetworkSpec& spec,
                                     std::vector<double> net_output) {
    PolicyDistribution dist;
    switch (spec.head) {
        case Head::CategoricalLogits:
            dist.kind = PolicyDistribution::Kind::Categorical;
            break;
        case Head::GaussianMeanLogStd:
            dist.kind = PolicyDistribution::Kind::Gaussian;
            break;
        case Head::Linear:
            throw std::logic_error("linear head does not define a policy distribution");
    }
    dist.params = std::move(net_output);
    return dist;
}

double log_prob(const PolicyDistribution& dist, const Action& action) {
    if (dist.kind == PolicyDistribution::Kind::Categorical) {
        if (action.index < 0 || action.index >= dist.action_count())
            throw std::out_of_range("categorical action index out of support");
        return dist.params[action.index] - log_sum_exp(dist.params);
    }
    const int d = dist.action_dim();
    if (static_cast<int>(action.values.size()) != d)
        throw std::invalid_argument("gaussian action dimension mismatch");
    double lp = 0.0;
    for (int i = 0; i < d; ++i) {
        const double mean = dist.params[i];
        const double log_std = dist.params[d + i];
        const double z = (action.values[i] - mean) * std::exp(-log_std);
        lp += -0.5 * kLogTwoPi - log_std - 0.5 * z * z;
    }
    return lp;
}

double entropy(const PolicyDistribution& dist) {
    if (dist.kind == PolicyDistribution::Kind::Categorical) {
        double h = 0.0;
        for (double p : dist.probs())
            if (p > 0.0) h -= p * std::log(p);
        return h;
    }
    const int d = dist.action_dim();
    double h = 0.0;
    for (int i = 0; i < d; ++i) h += 0.5 * (1.0 + kLogTwoPi) + dist.params[d + i];
    return h;
}

Action sample_action(const PolicyDistribution& dist, RngStream& rng) {
    Action a;
    if (dist.kind == PolicyDistribution::Kind::Categorical) {
        const auto p = dist.probs();
        const double u = rng.uniform();
        double acc = 0.0;
        a.index = static_cast<int>(p.size()) - 1;
        for (size_t i = 0; i < p.size(); ++i) {
            acc += p[i];
            if (u < acc) {
                a.index = static_cast<int>(i);
                break;
            }
        }
        return a;
    }
    const int d = dist.action_dim();
    a.values.resize(d);
    for (int i = 0; i < d; ++i)
        a.values[i] = dist.params[i] + std::exp(dist.params[d + i]) * rng.normal();
    return a;
}

std::vector<double> log_prob_grad(const PolicyDistribution& dist, const Action& action) {
    std::vector<double> g(dist.params.size(), 0.0);
    if (dist.kind == PolicyDistribution::Kind::Categorical) {
        const auto p = dist.probs();
        for (size_t i = 0; i < p.size(); ++i) g[i] = -p[i];
        g[action.index] += 1.0;
        return g;
    }
    const int d = dist.action_dim();
    for (int i = 0; i < d; ++i) {
        const double mean = dist.params[i];
        const double inv_std = std::exp(-dist.params[d + i]);
        const double z = (action.values[i] - mean) * inv_std;
        g[i] = z * inv_std;
        g[d + i] = z * z - 1.0;
    }
    return g;
}

std::vector<double> entropy_grad(const PolicyDistribution& dist) {
    std::vector<double> g(dist.params.size(), 0.0);
    if (dist.kind == PolicyDistribution::Kind::Categorical) {
        const auto p = dist.probs();
        const double h = entropy(dist);
        for (size_t i = 0; i < p.size(); ++i)
            g[i] = p[i] > 0.0 ? -p[i] * (std::log(p[i]) + h) : 0.0;
        return g;
    }
    const int d = dist.action_dim();
    for (int i = 0; i < d; ++i) g[d + i] = 1.0;
    return g;
}

Action mode_action(const PolicyDistribution& dist) {
    Action a;
    if (dist.kind == PolicyDistribution::Kind::Categorical) {
        const auto& l = dist.params;
        a.index = static_cast<int>(std::max_element(l.begin(), l.end()) - l.begin());
        return a;
    }
    const int d = dist.action_dim();
    a.values.assign(dist.params.begin(), dist.params.begin() + d);
    return a;
}

}  // namespace pglab
