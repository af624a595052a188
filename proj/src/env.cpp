#include "pglab/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pglab {

namespace {

void check_not_done(bool done, const std::string& env) {
    if (done)
        throw std::logic_error("step() called on terminal " + env +
                               " environment; reset() required");
}

void check_snapshot_name(const EnvSnapshot& snap, const std::string& expected) {
    if (snap.env_name != expected)
        throw std::invalid_argument("snapshot from '" + snap.env_name +
                                    "' cannot restore a '" + expected + "' environment");
}

int discrete_action(const Action& a, int n) {
    if (a.index < 0 || a.index >= n)
        throw std::invalid_argument("discrete action index out of range");
    return a.index;
}

}  // namespace

// ---------------------------------------------------------------- SparseChain

SparseChain::SparseChain(int n_states, int horizon)
    : Env(horizon), n_states_(n_states) {
    if (n_states < 2) throw std::invalid_argument("SparseChain needs >= 2 states");
}

std::vector<double> SparseChain::observe() const {
    std::vector<double> obs(n_states_, 0.0);
    obs[state_] = 1.0;
    return obs;
}

std::vector<double> SparseChain::reset(uint64_t /*seed*/) {
    state_ = 0;
    steps_ = 0;
    done_ = false;
    return observe();
}

StepResult SparseChain::step(const Action& action) {
    check_not_done(done_, name());
    const int a = discrete_action(action, 2);
    StepResult result;
    if (a == 1)
        state_ = std::min(state_ + 1, n_states_ - 1);
    else
        state_ = std::max(state_ - 1, 0);
    ++steps_;
    if (state_ == n_states_ - 1) {
        result.reward = 1.0;
        result.terminal = true;
    }
    result.truncated = !result.terminal && steps_ >= horizon_;
    done_ = result.terminal || result.truncated;
    result.observation = observe();
    return result;
}

EnvSnapshot SparseChain::snapshot() const {
    EnvSnapshot snap;
    snap.env_name = name();
    snap.ints = {state_};
    snap.steps = steps_;
    snap.done = done_;
    return snap;
}

void SparseChain::restore(const EnvSnapshot& snap) {
    check_snapshot_name(snap, name());
    state_ = static_cast<int>(snap.ints.at(0));
    steps_ = snap.steps;
    done_ = snap.done;
}

// ------------------------------------------------------------------ NoisyGrid

NoisyGrid::NoisyGrid(int side, double slip, int horizon)
    : Env(horizon), side_(side), slip_(slip) {
    if (side < 2) throw std::invalid_argument("NoisyGrid needs side >= 2");
}

std::vector<double> NoisyGrid::observe() const {
    std::vector<double> obs(static_cast<size_t>(side_) * side_, 0.0);
    obs[static_cast<size_t>(y_) * side_ + x_] = 1.0;
    return obs;
}

std::vector<double> NoisyGrid::reset(uint64_t seed) {
    x_ = 0;
    y_ = 0;
    steps_ = 0;
    done_ = false;
    rng_ = RngStream(seed ^ 0x6e6f697379677269ull);
    return observe();
}

StepResult NoisyGrid::step(const Action& action) {
    check_not_done(done_, name());
    int a = discrete_action(action, 4);
    // Action slip: with probability `slip_` a uniformly random action executes.
    if (rng_.uniform() < slip_) a = static_cast<int>(rng_.below(4));
    static const int dx[4] = {1, -1, 0, 0};
    static const int dy[4] = {0, 0, 1, -1};
    x_ = std::clamp(x_ + dx[a], 0, side_ - 1);
    y_ = std::clamp(y_ + dy[a], 0, side_ - 1);
    ++steps_;
    StepResult result;
    result.reward = -0.01;
    if (x_ == side_ - 1 && y_ == side_ - 1) {
        result.reward += 1.0;
        result.terminal = true;
    }
    result.truncated = !result.terminal && steps_ >= horizon_;
    done_ = result.terminal || result.truncated;
    result.observation = observe();
    return result;
}

EnvSnapshot NoisyGrid::snapshot() const {
    EnvSnapshot snap;
    snap.env_name = name();
    snap.ints = {x_, y_};
    snap.steps = steps_;
    snap.done = done_;
    snap.rng = rng_;
    return snap;
}

void NoisyGrid::restore(const EnvSnapshot& snap) {
    check_snapshot_name(snap, name());
    x_ = static_cast<int>(snap.ints.at(0));
    y_ = static_cast<int>(snap.ints.at(1));
    steps_ = snap.steps;
    done_ = snap.done;
    rng_ = snap.rng;
}

// ---------------------------------------------------------------- PointMass1D

namespace {
constexpr double kDt = 0.1;
constexpr double kPosLimit = 2.0;
constexpr double kVelLimit = 2.0;
}  // namespace

PointMass1D::PointMass1D(double target, int horizon)
    : Env(horizon), target_(target) {}

std::vector<double> PointMass1D::observe() const {
    return {pos_ / kPosLimit, vel_ / kVelLimit};
}

std::vector<double> PointMass1D::reset(uint64_t seed) {
    RngStream rng(seed ^ 0x706f696e746d6173ull);
    pos_ = rng.uniform(-1.0, 1.0);
    vel_ = 0.0;
    steps_ = 0;
    done_ = false;
    return observe();
}

StepResult PointMass1D::step(const Action& action) {
    check_not_done(done_, name());
    if (action.values.size() != 1)
        throw std::invalid_argument("PointMass1D expects a 1-dimensional action");
    const double force = std::clamp(action.values[0], -1.0, 1.0);
    vel_ = std::clamp(vel_ + kDt * force, -kVelLimit, kVelLimit);
    pos_ = std::clamp(pos_ + kDt * vel_, -kPosLimit, kPosLimit);
    ++steps_;
    StepResult result;
    result.reward = -std::abs(pos_ - target_);
    result.terminal = false;
    result.truncated = steps_ >= horizon_;
    done_ = result.truncated;
    result.observation = observe();
    return result;
}

EnvSnapshot PointMass1D::snapshot() const {
    EnvSnapshot snap;
    snap.env_name = name();
    snap.reals = {pos_, vel_};
    snap.steps = steps_;
    snap.done = done_;
    return snap;
}

void PointMass1D::restore(const EnvSnapshot& snap) {
    check_snapshot_name(snap, name());
    pos_ = snap.reals.at(0);
    vel_ = snap.reals.at(1);
    steps_ = snap.steps;
    done_ = snap.done;
}

// -------------------------------------------------------------------- factory

std::unique_ptr<Env> make_env(const std::string& name, const nlohmann::json& params) {
    if (name == "sparse_chain") {
        return std::make_unique<SparseChain>(params.value("n_states", 5),
                                             params.value("horizon", 20));
    }
    if (name == "noisy_grid") {
        return std::make_unique<NoisyGrid>(params.value("side", 5),
                                           params.value("slip", 0.1),
                                           params.value("horizon", 200));
    }
    if (name == "point_mass_1d") {
        return std::make_unique<PointMass1D>(params.value("target", 0.0),
                                             params.value("horizon", 200));
    }
    throw std::invalid_argument("unknown environment: " + name);
}

// ----------------------------------------------------------------- TabularMDP

void TabularMDP::validate() const {
    if (n_states < 1 || n_actions < 1)
        throw std::invalid_argument("TabularMDP: empty state or action space");
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            double sum = 0.0;
            for (int s2 = 0; s2 < n_states; ++s2) {
                const double pr = p(s, a, s2);
                if (pr < 0.0) throw std::invalid_argument("TabularMDP: negative probability");
                sum += pr;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw std::invalid_argument("TabularMDP: transition row does not sum to 1");
            if (!std::isfinite(r(s, a)))
                throw std::invalid_argument("TabularMDP: non-finite reward");
        }
    }
    if (gamma <= 0.0 || gamma >= 1.0)
        throw std::invalid_argument("TabularMDP: gamma must lie in (0,1)");
}

ValueIterationResult value_iteration(const TabularMDP& mdp, double tolerance) {
    if (tolerance <= 0.0) throw std::invalid_argument("value_iteration: tolerance must be > 0");
    mdp.validate();
    ValueIterationResult result;
    result.values.assign(mdp.n_states, 0.0);
    result.policy.assign(mdp.n_states, 0);
    std::vector<double> next(mdp.n_states, 0.0);
    while (true) {
        double residual = 0.0;
        for (int s = 0; s < mdp.n_states; ++s) {
            if (mdp.terminal[s]) {
                next[s] = 0.0;
                continue;
            }
            double best = -std::numeric_limits<double>::infinity();
            int best_a = 0;
            for (int a = 0; a < mdp.n_actions; ++a) {
                double q = mdp.r(s, a);
                for (int s2 = 0; s2 < mdp.n_states; ++s2)
                    q += mdp.gamma * mdp.p(s, a, s2) * result.values[s2];
                if (q > best) {
                    best = q;
                    best_a = a;
                }
            }
            next[s] = best;
            result.policy[s] = best_a;
            residual = std::max(residual, std::abs(next[s] - result.values[s]));
        }
        result.values = next;
        ++result.iterations;
        if (residual <= tolerance) break;
    }
    return result;
}

TabularMDP sparse_chain_mdp(int n_states, double gamma) {
    TabularMDP mdp;
    mdp.n_states = n_states;
    mdp.n_actions = 2;
    mdp.gamma = gamma;
    mdp.transition.assign(static_cast<size_t>(n_states) * 2 * n_states, 0.0);
    mdp.reward.assign(static_cast<size_t>(n_states) * 2, 0.0);
    mdp.terminal.assign(n_states, false);
    mdp.terminal[n_states - 1] = true;
    auto set_p = [&](int s, int a, int s2) {
        mdp.transition[(static_cast<size_t>(s) * 2 + a) * n_states + s2] = 1.0;
    };
    for (int s = 0; s < n_states; ++s) {
        set_p(s, 0, std::max(s - 1, 0));
        const int right = std::min(s + 1, n_states - 1);
        set_p(s, 1, right);
        if (right == n_states - 1 && s != n_states - 1)
            mdp.reward[static_cast<size_t>(s) * 2 + 1] = 1.0;
    }
    return mdp;
}

TabularMDP noisy_grid_mdp(int side, double slip, double gamma) {
    TabularMDP mdp;
    const int n = side * side;
    mdp.n_states = n;
    mdp.n_actions = 4;
    mdp.gamma = gamma;
    mdp.transition.assign(static_cast<size_t>(n) * 4 * n, 0.0);
    mdp.reward.assign(static_cast<size_t>(n) * 4, 0.0);
    mdp.terminal.assign(n, false);
    const int goal = n - 1;
    mdp.terminal[goal] = true;
    static const int dx[4] = {1, -1, 0, 0};
    static const int dy[4] = {0, 0, 1, -1};
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            const int s = y * side + x;
            for (int a = 0; a < 4; ++a) {
                for (int exec = 0; exec < 4; ++exec) {
                    // Intended action with prob 1-slip, plus slip/4 for each
                    // of the four directions (including the intended one).
                    double pr = slip / 4.0;
                    if (exec == a) pr += 1.0 - slip;
                    const int nx = std::clamp(x + dx[exec], 0, side - 1);
                    const int ny = std::clamp(y + dy[exec], 0, side - 1);
                    const int s2 = ny * side + nx;
                    mdp.transition[(static_cast<size_t>(s) * 4 + a) * n + s2] += pr;
                    mdp.reward[static_cast<size_t>(s) * 4 + a] +=
                        pr * (-0.01 + (s2 == goal ? 1.0 : 0.0));
                }
            }
        }
    }
    return mdp;
}

}  // namespace pglab
