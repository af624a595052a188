#pragma once

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "pglab/distribution.hpp"
#include "pglab/rng.hpp"

namespace pglab {

struct StepResult {
    std::vector<double> observation;
    double reward = 0.0;
    bool terminal = false;   // environment-terminal (absorbing outcome)
    bool truncated = false;  // horizon cut; bootstrapping still uses V(s')
};

// Full environment state, including the internal RNG, so that restore()
// replays stochastic transitions bit-identically.
struct EnvSnapshot {
    std::string env_name;
    std::vector<double> reals;
    std::vector<long long> ints;
    RngStream rng;
    int steps = 0;
    bool done = false;
};

class Env {
public:
    virtual ~Env() = default;

    virtual std::string name() const = 0;
    virtual int obs_dim() const = 0;
    virtual bool discrete_actions() const = 0;
    // Number of discrete actions, or the continuous action dimension.
    virtual int action_count() const = 0;

    virtual std::vector<double> reset(uint64_t seed) = 0;
    virtual StepResult step(const Action& action) = 0;
    virtual EnvSnapshot snapshot() const = 0;
    virtual void restore(const EnvSnapshot& snap) = 0;

    int horizon() const { return horizon_; }

protected:
    explicit Env(int horizon) : horizon_(horizon) {}
    int horizon_;
};

// 5-state deterministic chain; reward 1 only on entering the final state.
class SparseChain : public Env {
public:
    explicit SparseChain(int n_states = 5, int horizon = 20);
    std::string name() const override { return "sparse_chain"; }
    int obs_dim() const override { return n_states_; }
    bool discrete_actions() const override { return true; }
    int action_count() const override { return 2; }
    std::vector<double> reset(uint64_t seed) override;
    StepResult step(const Action& action) override;
    EnvSnapshot snapshot() const override;
    void restore(const EnvSnapshot& snap) override;

    int n_states() const { return n_states_; }

private:
    std::vector<double> observe() const;
    int n_states_;
    int state_ = 0;
    int steps_ = 0;
    bool done_ = false;
};

// 5x5 gridworld with 10% action slip, goal reward 1, step penalty -0.01.
class NoisyGrid : public Env {
public:
    explicit NoisyGrid(int side = 5, double slip = 0.1, int horizon = 200);
    std::string name() const override { return "noisy_grid"; }
    int obs_dim() const override { return side_ * side_; }
    bool discrete_actions() const override { return true; }
    int action_count() const override { return 4; }
    std::vector<double> reset(uint64_t seed) override;
    StepResult step(const Action& action) override;
    EnvSnapshot snapshot() const override;
    void restore(const EnvSnapshot& snap) override;

    int side() const { return side_; }
    double slip() const { return slip_; }

private:
    std::vector<double> observe() const;
    int side_;
    double slip_;
    int x_ = 0, y_ = 0;
    int steps_ = 0;
    bool done_ = false;
    RngStream rng_;
};

// Continuous 1-D point mass: state (position, velocity), force control in
// [-1, 1], reward -|position - target|. Never environment-terminal.
class PointMass1D : public Env {
public:
    explicit PointMass1D(double target = 0.0, int horizon = 200);
    std::string name() const override { return "point_mass_1d"; }
    int obs_dim() const override { return 2; }
    bool discrete_actions() const override { return false; }
    int action_count() const override { return 1; }
    std::vector<double> reset(uint64_t seed) override;
    StepResult step(const Action& action) override;
    EnvSnapshot snapshot() const override;
    void restore(const EnvSnapshot& snap) override;

private:
    std::vector<double> observe() const;
    double target_;
    double pos_ = 0.0, vel_ = 0.0;
    int steps_ = 0;
    bool done_ = false;
};

std::unique_ptr<Env> make_env(const std::string& name, const nlohmann::json& params);

// Exact tabular model, used as the oracle substrate for acceptance tests.
struct TabularMDP {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> transition;  // [s*n_actions*n_states + a*n_states + s']
    std::vector<double> reward;      // [s*n_actions + a]
    double gamma = 0.9;
    std::vector<bool> terminal;

    double p(int s, int a, int s2) const {
        return transition[(static_cast<size_t>(s) * n_actions + a) * n_states + s2];
    }
    double r(int s, int a) const { return reward[static_cast<size_t>(s) * n_actions + a]; }
    void validate() const;
};

struct ValueIterationResult {
    std::vector<double> values;
    std::vector<int> policy;
    int iterations = 0;
};

ValueIterationResult value_iteration(const TabularMDP& mdp, double tolerance);

// Exact models of the two discrete environments.
TabularMDP sparse_chain_mdp(int n_states = 5, double gamma = 0.9);
TabularMDP noisy_grid_mdp(int side = 5, double slip = 0.1, double gamma = 0.99);

}  // namespace pglab
