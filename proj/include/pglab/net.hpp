#pragma once

#include <string>
#include <vector>

#include "pglab/rng.hpp"

namespace pglab {

enum class Activation { Tanh, Relu };
enum class Head { Linear, CategoricalLogits, GaussianMeanLogStd };

// Bounds on the learned per-dimension gaussian log standard deviation.
inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

// Shape description of a feed-forward network. The parameter layout is a pure
// function of this struct: dense layers in order (row-major weights, then
// biases), followed by the state-independent log-std block for gaussian heads.
struct NetworkSpec {
    int input_dim = 1;
    std::vector<int> hidden;
    int output_dim = 1;
    Activation activation = Activation::Tanh;
    Head head = Head::Linear;

    // Width of the final dense layer (gaussian heads emit only the mean half).
    int core_output_dim() const;
    int param_count() const;
    void validate() const;

    bool operator==(const NetworkSpec&) const = default;
};

using ParamVector = std::vector<double>;

ParamVector init_params(const NetworkSpec& spec, uint64_t seed);

// Deterministic forward pass; output has length spec.output_dim. For gaussian
// heads the second half is the clamped log-std parameter block.
std::vector<double> forward(const ParamVector& params, const NetworkSpec& spec,
                            const std::vector<double>& input);

// Exact reverse-mode gradient of output . output_grad w.r.t. every parameter.
ParamVector backward(const ParamVector& params, const NetworkSpec& spec,
                     const std::vector<double>& input,
                     const std::vector<double>& output_grad);

// Scalar-output convenience: value network evaluation.
double forward_scalar(const ParamVector& params, const NetworkSpec& spec,
                      const std::vector<double>& input);

// Checkpoint format: binary file (magic, version, count, little-endian f64
// array) plus a JSON sidecar holding the NetworkSpec at <path>.json.
void save_checkpoint(const std::string& path, const NetworkSpec& spec,
                     const ParamVector& params);
std::pair<NetworkSpec, ParamVector> load_checkpoint(const std::string& path);

std::string to_string(Activation a);
std::string to_string(Head h);
Activation activation_from_string(const std::string& s);
Head head_from_string(const std::string& s);

}  // namespace pglab
