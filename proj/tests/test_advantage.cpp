#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "pglab/advantage.hpp"
#include "pglab/rng.hpp"

using namespace pglab;

namespace {

SampleBranch branch(double transformed, double next_value, bool terminal = false,
                    double raw = 0.0) {
    SampleBranch b;
    b.raw_reward = raw;
    b.transformed_reward = transformed;
    b.next_value = next_value;
    b.terminal = terminal;
    b.tail_value = next_value;
    b.sub_terminal = terminal;
    return b;
}

MacroStepRecord random_record(RngStream& rng, int n) {
    MacroStepRecord r;
    r.base_value = rng.uniform(-1.0, 1.0);
    for (int t = 0; t < n; ++t) {
        auto b = branch(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                        rng.uniform() < 0.2);
        b.raw_reward = b.transformed_reward;
        r.branches.push_back(b);
    }
    return r;
}

}  // namespace

TEST_CASE("transform_reward: tanh and identity") {
    CHECK(transform_reward(RewardTransform::Tanh, 0.0) == 0.0);
    CHECK(transform_reward(RewardTransform::Identity, 3.7) == 3.7);
    CHECK(transform_reward(RewardTransform::Tanh, 2.0) ==
          doctest::Approx(std::tanh(2.0)).epsilon(1e-15));
}

TEST_CASE("transform_reward: rolling normalization arithmetic") {
    RewardNormalizerState state(16, 1e-8);
    state.push(1.0);
    state.push(2.0);
    state.push(3.0);
    // mu = 2, population sigma = sqrt(2/3) = 0.8165
    const double out = transform_reward(RewardTransform::RollingNorm, 2.0, &state);
    CHECK(out == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(state.window.size() == 4);  // r appended after normalizing

    RewardNormalizerState empty(16, 1e-8);
    CHECK_THROWS(transform_reward(RewardTransform::RollingNorm, 1.0, &empty));
    CHECK_THROWS(transform_reward(RewardTransform::RollingNorm, 1.0, nullptr));
}

TEST_CASE("rolling window evicts oldest entries at capacity") {
    RewardNormalizerState state(3, 1e-8);
    for (double r : {1.0, 2.0, 3.0, 10.0}) state.push(r);
    CHECK(state.window.size() == 3);
    CHECK(state.mean() == doctest::Approx(5.0));
}

TEST_CASE("tanh-transformed rewards stay bounded") {
    RngStream rng(4);
    for (int i = 0; i < 2000; ++i) {
        const double r = rng.uniform(-1000.0, 1000.0);
        const double t = transform_reward(RewardTransform::Tanh, r);
        CHECK(t >= -1.0);
        CHECK(t <= 1.0);
    }
    // Strict interior bound holds away from floating-point saturation.
    for (int i = 0; i < 2000; ++i) {
        const double t = transform_reward(RewardTransform::Tanh, rng.uniform(-10.0, 10.0));
        CHECK(t > -1.0);
        CHECK(t < 1.0);
    }
}

TEST_CASE("ppo_advantage: direct one-step arithmetic") {
    MacroStepRecord r;
    r.base_value = 0.4;
    r.branches = {branch(1.0, 0.5, false, 1.0)};
    const auto e = ppo_advantage(r, 0.9);
    CHECK(e.advantage == doctest::Approx(1.05).epsilon(1e-15));
    CHECK(e.value_target == doctest::Approx(1.45).epsilon(1e-15));

    // Terminal zeroes the bootstrap.
    r.branches = {branch(1.0, 0.5, true, 1.0)};
    CHECK(ppo_advantage(r, 0.9).advantage == doctest::Approx(0.6).epsilon(1e-15));

    r.base_value = 0.0;
    r.branches = {branch(0.0, 0.0, false, 0.0)};
    CHECK(ppo_advantage(r, 0.9).advantage == 0.0);

    r.branches.push_back(branch(0.0, 0.0));
    CHECK_THROWS(ppo_advantage(r, 0.9));  // multi-branch record rejected
}

TEST_CASE("grpo_advantages: mean centering and std scaling") {
    MacroStepRecord r;
    r.branches = {branch(1.0, 0.0), branch(2.0, 0.0), branch(3.0, 0.0)};
    auto entries = grpo_advantages(r);
    CHECK(entries[0].advantage == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(entries[1].advantage == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(entries[2].advantage == doctest::Approx(1.0).epsilon(1e-15));
    for (const auto& e : entries) CHECK_FALSE(e.has_value_target);

    // All rewards equal -> all advantages zero.
    r.branches = {branch(0.7, 0.0), branch(0.7, 0.0)};
    for (const auto& e : grpo_advantages(r)) CHECK(e.advantage == 0.0);

    // Std division: population std of [0.5, -0.5] is 0.5.
    r.branches = {branch(0.5, 0.0), branch(-0.5, 0.0)};
    entries = grpo_advantages(r, true, 1e-8);
    CHECK(entries[0].advantage == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(entries[1].advantage == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("grpo_advantages: group size one is undefined") {
    MacroStepRecord r;
    r.branches = {branch(1.0, 0.0)};
    CHECK_THROWS_WITH_AS(grpo_advantages(r), "GRPO group size must exceed 1",
                         std::invalid_argument);
}

TEST_CASE("grpo zero-sum property over random groups") {
    RngStream rng(17);
    for (int i = 0; i < 2000; ++i) {
        const auto r = random_record(rng, 2 + static_cast<int>(rng.below(7)));
        double sum = 0.0;
        for (const auto& e : grpo_advantages(r)) sum += e.advantage;
        CHECK(std::abs(sum) < 1e-9);
    }
}

TEST_CASE("naive group mean minus mean is identically zero") {
    // (1/N) sum R - mean(R) collapses to 0 for every group; this documents
    // why per-branch centering is what actually gets implemented.
    RngStream rng(23);
    for (int i = 0; i < 100; ++i) {
        const auto r = random_record(rng, 2 + static_cast<int>(rng.below(7)));
        double mean = 0.0;
        for (const auto& b : r.branches) mean += b.transformed_reward;
        mean /= static_cast<double>(r.branches.size());
        const double literal = mean - mean;
        CHECK(literal == 0.0);
    }
}

TEST_CASE("hybrid_advantages: direct arithmetic and group mean") {
    MacroStepRecord r;
    r.base_value = 0.1;
    r.branches = {branch(0.5, 0.2), branch(-0.5, 0.2)};
    const auto result = hybrid_advantages(r, 0.9);
    CHECK(result.entries[0].advantage == doctest::Approx(0.58).epsilon(1e-12));
    CHECK(result.entries[1].advantage == doctest::Approx(-0.42).epsilon(1e-12));
    CHECK(result.mean_advantage == doctest::Approx(0.08).epsilon(1e-12));

    // All terminal with zero transformed reward and zero baseline.
    MacroStepRecord z;
    z.base_value = 0.0;
    z.branches = {branch(0.0, 0.7, true), branch(0.0, -0.3, true)};
    for (const auto& e : hybrid_advantages(z, 0.9).entries) CHECK(e.advantage == 0.0);
}

TEST_CASE("hybrid reduces to ppo for N=1 with identity transform") {
    RngStream rng(31);
    for (int i = 0; i < 200; ++i) {
        MacroStepRecord r;
        r.base_value = rng.uniform(-1.0, 1.0);
        auto b = branch(rng.uniform(-2.0, 2.0), rng.uniform(-1.0, 1.0), rng.uniform() < 0.3);
        b.raw_reward = b.transformed_reward;  // identity transform
        r.branches = {b};
        const auto p = ppo_advantage(r, 0.97);
        const auto h = hybrid_advantages(r, 0.97);
        CHECK(h.entries[0].advantage == p.advantage);  // bit-for-bit
        CHECK(h.entries[0].value_target == p.value_target);
        CHECK(h.mean_advantage == p.advantage);
    }
}

TEST_CASE("hybrid mean equals the arithmetic mean of branch advantages") {
    RngStream rng(37);
    for (int i = 0; i < 2000; ++i) {
        const auto r = random_record(rng, 1 + static_cast<int>(rng.below(8)));
        const auto result = hybrid_advantages(r, 0.99);
        double mean = 0.0;
        for (const auto& e : result.entries) mean += e.advantage;
        mean /= static_cast<double>(result.entries.size());
        CHECK(std::abs(result.mean_advantage - mean) < 1e-12);
    }
}

TEST_CASE("hybrid_nstep: n=1 reduces exactly to hybrid_advantages") {
    RngStream rng(41);
    std::vector<MacroStepRecord> episode;
    for (int i = 0; i < 6; ++i) episode.push_back(random_record(rng, 3));
    const auto nstep = hybrid_nstep_advantages(episode, 0.95, 1);
    size_t k = 0;
    for (size_t i = 0; i < episode.size(); ++i) {
        const auto one = hybrid_advantages(episode[i], 0.95);
        for (const auto& e : one.entries) {
            CHECK(nstep[k].advantage == e.advantage);  // bit-equal
            CHECK(nstep[k].value_target == e.value_target);
            ++k;
        }
    }
}

TEST_CASE("hybrid_nstep: deterministic two-step hand computation") {
    // Rewards [0, 1] along the path, gamma 0.9, V(s_{T+2}) = 0, V(s_T) = 0,
    // n = 2 -> A = 0 + 0.9*1 + 0.81*0 - 0 = 0.9.
    std::vector<MacroStepRecord> episode(2);
    episode[0].base_value = 0.0;
    episode[0].branches = {branch(0.0, 0.5)};
    episode[1].base_value = 0.5;
    episode[1].branches = {branch(1.0, 0.0, true)};
    const auto entries = hybrid_nstep_advantages(episode, 0.9, 2);
    CHECK(entries[0].advantage == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("hybrid_nstep: terminal at k=0 drops the bootstrap") {
    std::vector<MacroStepRecord> episode(1);
    episode[0].base_value = 0.3;
    episode[0].branches = {branch(0.8, 5.0, true)};
    const auto entries = hybrid_nstep_advantages(episode, 0.9, 3);
    CHECK(entries[0].advantage == doctest::Approx(0.5).epsilon(1e-12));

    CHECK_THROWS(hybrid_nstep_advantages(episode, 0.9, 0));
}

TEST_CASE("hybrid_nstep exhaustive mode consumes branch-owned sub-trajectories") {
    MacroStepRecord r;
    r.base_value = 0.1;
    auto b = branch(0.2, 0.0);
    b.future_rewards = {0.5, -0.25};
    b.tail_value = 0.4;
    b.sub_terminal = false;
    r.branches = {b};
    const auto entries = hybrid_nstep_exhaustive(r, 0.5, 3);
    // 0.2 + 0.5*0.5 + 0.25*(-0.25) + 0.125*0.4 - 0.1
    CHECK(entries[0].advantage == doctest::Approx(0.3375).epsilon(1e-12));

    // With no sub-trajectory data it reduces to the one-step hybrid entry.
    MacroStepRecord s;
    s.base_value = 0.2;
    s.branches = {branch(0.3, 0.6)};
    const auto one = hybrid_nstep_exhaustive(s, 0.9, 1);
    const auto ref = hybrid_advantages(s, 0.9);
    CHECK(one[0].advantage == ref.entries[0].advantage);
}
