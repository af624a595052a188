#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "pglab/distribution.hpp"
#include "pglab/net.hpp"
#include "pglab/oracles.hpp"

using namespace pglab;

namespace {

// Independent straight-line re-implementation of the affine+activation chain,
// used as the forward oracle. Shares nothing with forward() beyond the layout
// convention.
std::vector<double> oracle_forward(const ParamVector& params, const NetworkSpec& spec,
                                   const std::vector<double>& input) {
    std::vector<int> sizes;
    sizes.push_back(spec.input_dim);
    for (int h : spec.hidden) sizes.push_back(h);
    sizes.push_back(spec.head == Head::GaussianMeanLogStd ? spec.output_dim / 2
                                                          : spec.output_dim);
    std::vector<double> cur = input;
    size_t p = 0;
    for (size_t l = 0; l + 1 < sizes.size(); ++l) {
        std::vector<double> next(sizes[l + 1], 0.0);
        for (int i = 0; i < sizes[l + 1]; ++i)
            for (int j = 0; j < sizes[l]; ++j)
                next[i] += params[p + static_cast<size_t>(i) * sizes[l] + j] * cur[j];
        p += static_cast<size_t>(sizes[l + 1]) * sizes[l];
        for (int i = 0; i < sizes[l + 1]; ++i) next[i] += params[p + i];
        p += sizes[l + 1];
        if (l + 2 < sizes.size()) {
            for (auto& v : next) {
                if (spec.activation == Activation::Tanh)
                    v = std::tanh(v);
                else
                    v = v > 0.0 ? v : 0.0;
            }
        }
        cur = next;
    }
    if (spec.head == Head::GaussianMeanLogStd) {
        for (int i = 0; i < spec.output_dim / 2; ++i) {
            double v = params[p + i];
            if (v < kLogStdMin) v = kLogStdMin;
            if (v > kLogStdMax) v = kLogStdMax;
            cur.push_back(v);
        }
    }
    return cur;
}

NetworkSpec random_spec(RngStream& rng, Head head) {
    NetworkSpec spec;
    spec.input_dim = 1 + static_cast<int>(rng.below(5));
    const int depth = static_cast<int>(rng.below(3));
    for (int i = 0; i < depth; ++i)
        spec.hidden.push_back(1 + static_cast<int>(rng.below(8)));
    spec.activation = rng.uniform() < 0.5 ? Activation::Tanh : Activation::Relu;
    spec.head = head;
    if (head == Head::GaussianMeanLogStd)
        spec.output_dim = 2 * (1 + static_cast<int>(rng.below(3)));
    else
        spec.output_dim = 1 + static_cast<int>(rng.below(4));
    return spec;
}

}  // namespace

TEST_CASE("forward: zero parameters give zero output") {
    NetworkSpec spec{3, {4}, 2, Activation::Tanh, Head::Linear};
    ParamVector params(spec.param_count(), 0.0);
    const auto out = forward(params, spec, {0.3, -1.2, 5.0});
    for (double v : out) CHECK(v == 0.0);
}

TEST_CASE("forward: identity single linear layer") {
    NetworkSpec spec{2, {}, 2, Activation::Tanh, Head::Linear};
    ParamVector params(spec.param_count(), 0.0);
    params[0] = 1.0;  // W = I, b = 0
    params[3] = 1.0;
    const auto out = forward(params, spec, {1.0, 2.0});
    CHECK(out[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(out[1] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("forward: dimension mismatch rejected") {
    NetworkSpec spec{3, {4}, 2, Activation::Tanh, Head::Linear};
    ParamVector params(spec.param_count(), 0.0);
    CHECK_THROWS(forward(params, spec, {1.0, 2.0}));
}

TEST_CASE("forward matches the straight-line oracle on random instances") {
    RngStream rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        const Head head = trial % 3 == 0   ? Head::Linear
                          : trial % 3 == 1 ? Head::CategoricalLogits
                                           : Head::GaussianMeanLogStd;
        const auto spec = random_spec(rng, head);
        const auto params = init_params(spec, rng.next_u64());
        std::vector<double> input(spec.input_dim);
        for (auto& v : input) v = rng.uniform(-2.0, 2.0);
        const auto got = forward(params, spec, input);
        const auto want = oracle_forward(params, spec, input);
        REQUIRE(got.size() == want.size());
        for (size_t i = 0; i < got.size(); ++i)
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("backward: zero output_grad gives zero gradient") {
    NetworkSpec spec{3, {5}, 2, Activation::Tanh, Head::Linear};
    const auto params = init_params(spec, 1);
    const auto grad = backward(params, spec, {0.1, 0.2, 0.3}, {0.0, 0.0});
    for (double g : grad) CHECK(g == 0.0);
}

TEST_CASE("backward: single linear neuron analytic derivative") {
    NetworkSpec spec{2, {}, 1, Activation::Tanh, Head::Linear};
    ParamVector params = {0.7, -0.4, 0.1};  // w0 w1 b
    const auto grad = backward(params, spec, {3.0, 5.0}, {1.0});
    CHECK(grad[0] == doctest::Approx(3.0));
    CHECK(grad[1] == doctest::Approx(5.0));
    CHECK(grad[2] == doctest::Approx(1.0));
}

TEST_CASE("backward matches central finite differences") {
    RngStream rng(7);
    for (int trial = 0; trial < 12; ++trial) {
        const Head head = trial % 3 == 0   ? Head::Linear
                          : trial % 3 == 1 ? Head::CategoricalLogits
                                           : Head::GaussianMeanLogStd;
        const auto spec = random_spec(rng, head);
        const auto params = init_params(spec, rng.next_u64());
        std::vector<double> input(spec.input_dim);
        for (auto& v : input) v = rng.uniform(-1.0, 1.0);
        std::vector<double> ograd(spec.output_dim);
        for (auto& v : ograd) v = rng.uniform(-1.0, 1.0);

        const auto analytic = backward(params, spec, input, ograd);
        auto loss = [&](const ParamVector& p) {
            const auto out = forward(p, spec, input);
            double acc = 0.0;
            for (size_t i = 0; i < out.size(); ++i) acc += out[i] * ograd[i];
            return acc;
        };
        const auto numeric = oracles::fd_gradient(loss, params);
        CHECK(oracles::max_relative_error(analytic, numeric) < 1e-4);
    }
}

TEST_CASE("log_prob: uniform categorical over 4 actions") {
    PolicyDistribution dist{PolicyDistribution::Kind::Categorical, {0.5, 0.5, 0.5, 0.5}};
    Action a;
    for (int i = 0; i < 4; ++i) {
        a.index = i;
        CHECK(log_prob(dist, a) == doctest::Approx(std::log(0.25)).epsilon(1e-12));
    }
}

TEST_CASE("log_prob: standard normal at its mean") {
    PolicyDistribution dist{PolicyDistribution::Kind::Gaussian, {0.0, 0.0}};
    Action a;
    a.values = {0.0};
    CHECK(log_prob(dist, a) ==
          doctest::Approx(-0.5 * std::log(2.0 * M_PI)).epsilon(1e-12));
}

TEST_CASE("log_prob: out-of-support categorical index rejected") {
    PolicyDistribution dist{PolicyDistribution::Kind::Categorical, {0.0, 0.0}};
    Action a;
    a.index = 5;
    CHECK_THROWS(log_prob(dist, a));
}

TEST_CASE("categorical densities sum to one; gaussian density integrates to one") {
    RngStream rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        PolicyDistribution cat{PolicyDistribution::Kind::Categorical, {}};
        const int n = 2 + static_cast<int>(rng.below(5));
        for (int i = 0; i < n; ++i) cat.params.push_back(rng.uniform(-3.0, 3.0));
        double total = 0.0;
        Action a;
        for (int i = 0; i < n; ++i) {
            a.index = i;
            total += std::exp(log_prob(cat, a));
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }

    PolicyDistribution gauss{PolicyDistribution::Kind::Gaussian, {0.7, -0.3}};
    const double sigma = std::exp(-0.3);
    const double lo = 0.7 - 9.0 * sigma, hi = 0.7 + 9.0 * sigma;
    const int steps = 20000;
    double integral = 0.0;
    Action a;
    for (int i = 0; i <= steps; ++i) {
        a.values = {lo + (hi - lo) * i / steps};
        const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
        integral += w * std::exp(log_prob(gauss, a)) * (hi - lo) / steps;
    }
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("entropy closed forms") {
    PolicyDistribution uniform{PolicyDistribution::Kind::Categorical, {1.0, 1.0, 1.0, 1.0}};
    CHECK(entropy(uniform) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    PolicyDistribution certain{PolicyDistribution::Kind::Categorical, {50.0, 0.0, 0.0}};
    CHECK(entropy(certain) == doctest::Approx(0.0).epsilon(1e-9));

    // Two dims, log_std = 0 each: H = 1 + ln(2*pi).
    PolicyDistribution gauss{PolicyDistribution::Kind::Gaussian, {0.0, 0.0, 0.0, 0.0}};
    CHECK(entropy(gauss) == doctest::Approx(1.0 + std::log(2.0 * M_PI)).epsilon(1e-12));
}

TEST_CASE("sample_action: determinism and degenerate categorical") {
    PolicyDistribution certain{PolicyDistribution::Kind::Categorical, {40.0, 0.0, 0.0}};
    for (uint64_t seed : {1ull, 99ull, 12345ull}) {
        RngStream rng(seed);
        CHECK(sample_action(certain, rng).index == 0);
    }

    PolicyDistribution gauss{PolicyDistribution::Kind::Gaussian, {0.2, -0.1}};
    RngStream a(77), b(77);
    const auto sa = sample_action(gauss, a);
    const auto sb = sample_action(gauss, b);
    CHECK(sa.values[0] == sb.values[0]);
}

TEST_CASE("sample_action: empirical frequencies match probabilities") {
    PolicyDistribution dist{PolicyDistribution::Kind::Categorical,
                            {std::log(0.7), std::log(0.3)}};
    RngStream rng(2024);
    int count0 = 0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i)
        if (sample_action(dist, rng).index == 0) ++count0;
    CHECK(std::abs(count0 / static_cast<double>(draws) - 0.7) < 0.01);
}

TEST_CASE("log_prob and entropy gradients match finite differences") {
    RngStream rng(55);
    for (int trial = 0; trial < 10; ++trial) {
        PolicyDistribution dist;
        Action action;
        if (trial % 2 == 0) {
            dist.kind = PolicyDistribution::Kind::Categorical;
            const int n = 2 + static_cast<int>(rng.below(4));
            for (int i = 0; i < n; ++i) dist.params.push_back(rng.uniform(-2.0, 2.0));
            action.index = static_cast<int>(rng.below(n));
        } else {
            dist.kind = PolicyDistribution::Kind::Gaussian;
            const int d = 1 + static_cast<int>(rng.below(2));
            for (int i = 0; i < d; ++i) dist.params.push_back(rng.uniform(-1.0, 1.0));
            for (int i = 0; i < d; ++i) dist.params.push_back(rng.uniform(-1.0, 0.5));
            for (int i = 0; i < d; ++i) action.values.push_back(rng.uniform(-2.0, 2.0));
        }
        const auto lp_grad = log_prob_grad(dist, action);
        const auto h_grad = entropy_grad(dist);
        auto lp = [&](const ParamVector& p) {
            PolicyDistribution d2 = dist;
            d2.params = p;
            return log_prob(d2, action);
        };
        auto hh = [&](const ParamVector& p) {
            PolicyDistribution d2 = dist;
            d2.params = p;
            return entropy(d2);
        };
        CHECK(oracles::max_relative_error(lp_grad, oracles::fd_gradient(lp, dist.params)) <
              1e-4);
        CHECK(oracles::max_relative_error(h_grad, oracles::fd_gradient(hh, dist.params)) <
              1e-4);
    }
}

TEST_CASE("checkpoint round-trips bit-exactly") {
    NetworkSpec spec{6, {32, 32}, 4, Activation::Tanh, Head::GaussianMeanLogStd};
    const auto params = init_params(spec, 31337);
    const auto path = (std::filesystem::temp_directory_path() / "pglab_test.ckpt").string();
    save_checkpoint(path, spec, params);
    const auto [spec2, params2] = load_checkpoint(path);
    CHECK(spec2 == spec);
    REQUIRE(params2.size() == params.size());
    for (size_t i = 0; i < params.size(); ++i) CHECK(params2[i] == params[i]);
    std::filesystem::remove(path);
    std::filesystem::remove(path + ".json");
}

TEST_CASE("gaussian head rejects odd output_dim; layout is spec-stable") {
    NetworkSpec bad{3, {4}, 3, Activation::Tanh, Head::GaussianMeanLogStd};
    CHECK_THROWS(bad.validate());

    NetworkSpec spec{3, {4}, 2, Activation::Relu, Head::CategoricalLogits};
    CHECK(init_params(spec, 9) == init_params(spec, 9));
}
