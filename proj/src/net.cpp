#include "pglab/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace pglab {

namespace {

double apply_activation(Activation a, double x) {
    switch (a) {
        case Activation::Tanh:
            return std::tanh(x);
        case Activation::Relu:
            return x > 0.0 ? x : 0.0;
    }
    return x;
}

double activation_grad_from_output(Activation a, double y) {
    switch (a) {
        case Activation::Tanh:
            return 1.0 - y * y;
        case Activation::Relu:
            return y > 0.0 ? 1.0 : 0.0;
    }
    return 1.0;
}

// Layer sizes of the dense chain: input, hidden..., core output.
std::vector<int> layer_sizes(const NetworkSpec& spec) {
    std::vector<int> sizes;
    sizes.push_back(spec.input_dim);
    for (int h : spec.hidden) sizes.push_back(h);
    sizes.push_back(spec.core_output_dim());
    return sizes;
}

}  // namespace

int NetworkSpec::core_output_dim() const {
    return head == Head::GaussianMeanLogStd ? output_dim / 2 : output_dim;
}

int NetworkSpec::param_count() const {
    auto sizes = layer_sizes(*this);
    int count = 0;
    for (size_t l = 0; l + 1 < sizes.size(); ++l)
        count += sizes[l + 1] * sizes[l] + sizes[l + 1];
    if (head == Head::GaussianMeanLogStd) count += output_dim / 2;
    return count;
}

void NetworkSpec::validate() const {
    if (input_dim < 1 || output_dim < 1)
        throw std::invalid_argument("NetworkSpec: dimensions must be >= 1");
    for (int h : hidden)
        if (h < 1) throw std::invalid_argument("NetworkSpec: hidden width must be >= 1");
    if (head == Head::GaussianMeanLogStd && output_dim % 2 != 0)
        throw std::invalid_argument("NetworkSpec: gaussian head needs even output_dim");
}

ParamVector init_params(const NetworkSpec& spec, uint64_t seed) {
    spec.validate();
    RngStream rng(seed);
    auto sizes = layer_sizes(spec);
    ParamVector params;
    params.reserve(spec.param_count());
    for (size_t l = 0; l + 1 < sizes.size(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
        const int n = sizes[l + 1] * sizes[l] + sizes[l + 1];
        for (int i = 0; i < n; ++i) params.push_back(rng.uniform(-bound, bound));
    }
    if (spec.head == Head::GaussianMeanLogStd) {
        // Log-std starts at 0 (unit standard deviation).
        for (int i = 0; i < spec.output_dim / 2; ++i) params.push_back(0.0);
    }
    return params;
}

std::vector<double> forward(const ParamVector& params, const NetworkSpec& spec,
                            const std::vector<double>& input) {
    if (static_cast<int>(input.size()) != spec.input_dim)
        throw std::invalid_argument("forward: input length does not match spec.input_dim");
    if (static_cast<int>(params.size()) != spec.param_count())
        throw std::invalid_argument("forward: parameter count does not match spec");

    auto sizes = layer_sizes(spec);
    std::vector<double> cur = input;
    size_t p = 0;
    for (size_t l = 0; l + 1 < sizes.size(); ++l) {
        const int nin = sizes[l];
        const int nout = sizes[l + 1];
        std::vector<double> next(nout);
        for (int i = 0; i < nout; ++i) {
            double acc = 0.0;
            const double* w = &params[p + static_cast<size_t>(i) * nin];
            for (int j = 0; j < nin; ++j) acc += w[j] * cur[j];
            next[i] = acc;
        }
        p += static_cast<size_t>(nout) * nin;
        for (int i = 0; i < nout; ++i) next[i] += params[p + i];
        p += nout;
        const bool last = (l + 2 == sizes.size());
        if (!last)
            for (double& v : next) v = apply_activation(spec.activation, v);
        cur = std::move(next);
    }
    if (spec.head == Head::GaussianMeanLogStd) {
        const int half = spec.output_dim / 2;
        for (int i = 0; i < half; ++i)
            cur.push_back(std::clamp(params[p + i], kLogStdMin, kLogStdMax));
    }
    return cur;
}

ParamVector backward(const ParamVector& params, const NetworkSpec& spec,
                     const std::vector<double>& input,
                     const std::vector<double>& output_grad) {
    if (static_cast<int>(output_grad.size()) != spec.output_dim)
        throw std::invalid_argument("backward: output_grad length does not match spec.output_dim");
    if (static_cast<int>(input.size()) != spec.input_dim)
        throw std::invalid_argument("backward: input length does not match spec.input_dim");
    if (static_cast<int>(params.size()) != spec.param_count())
        throw std::invalid_argument("backward: parameter count does not match spec");

    auto sizes = layer_sizes(spec);
    const size_t n_layers = sizes.size() - 1;

    // Forward pass caching post-activation values per layer.
    std::vector<std::vector<double>> acts;
    acts.reserve(n_layers + 1);
    acts.push_back(input);
    std::vector<size_t> layer_offsets(n_layers);
    size_t p = 0;
    for (size_t l = 0; l < n_layers; ++l) {
        layer_offsets[l] = p;
        const int nin = sizes[l];
        const int nout = sizes[l + 1];
        std::vector<double> next(nout);
        for (int i = 0; i < nout; ++i) {
            double acc = params[p + static_cast<size_t>(nout) * nin + i];
            const double* w = &params[p + static_cast<size_t>(i) * nin];
            for (int j = 0; j < nin; ++j) acc += w[j] * acts[l][j];
            next[i] = acc;
        }
        p += static_cast<size_t>(nout) * nin + nout;
        if (l + 1 != n_layers)
            for (double& v : next) v = apply_activation(spec.activation, v);
        acts.push_back(std::move(next));
    }

    ParamVector grad(params.size(), 0.0);

    std::vector<double> delta(output_grad.begin(),
                              output_grad.begin() + spec.core_output_dim());
    if (spec.head == Head::GaussianMeanLogStd) {
        const int half = spec.output_dim / 2;
        for (int i = 0; i < half; ++i) {
            const double v = params[p + i];
            // Clamp blocks the gradient outside the open interval.
            grad[p + i] = (v > kLogStdMin && v < kLogStdMax) ? output_grad[half + i] : 0.0;
        }
    }

    for (size_t l = n_layers; l-- > 0;) {
        const int nin = sizes[l];
        const int nout = sizes[l + 1];
        const size_t off = layer_offsets[l];
        if (l + 1 != n_layers)
            for (int i = 0; i < nout; ++i)
                delta[i] *= activation_grad_from_output(spec.activation, acts[l + 1][i]);
        for (int i = 0; i < nout; ++i) {
            double* gw = &grad[off + static_cast<size_t>(i) * nin];
            for (int j = 0; j < nin; ++j) gw[j] += delta[i] * acts[l][j];
        }
        for (int i = 0; i < nout; ++i)
            grad[off + static_cast<size_t>(nout) * nin + i] += delta[i];
        if (l > 0) {
            std::vector<double> prev(nin, 0.0);
            for (int i = 0; i < nout; ++i) {
                const double* w = &params[off + static_cast<size_t>(i) * nin];
                for (int j = 0; j < nin; ++j) prev[j] += delta[i] * w[j];
            }
            delta = std::move(prev);
        }
    }
    return grad;
}

double forward_scalar(const ParamVector& params, const NetworkSpec& spec,
                      const std::vector<double>& input) {
    return forward(params, spec, input)[0];
}

std::string to_string(Activation a) {
    return a == Activation::Tanh ? "tanh" : "relu";
}

std::string to_string(Head h) {
    switch (h) {
        case Head::Linear: return "linear";
        case Head::CategoricalLogits: return "categorical-logits";
        case Head::GaussianMeanLogStd: return "gaussian-mean-logstd";
    }
    return "linear";
}

Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    throw std::invalid_argument("unknown activation: " + s);
}

Head head_from_string(const std::string& s) {
    if (s == "linear") return Head::Linear;
    if (s == "categorical-logits") return Head::CategoricalLogits;
    if (s == "gaussian-mean-logstd") return Head::GaussianMeanLogStd;
    throw std::invalid_argument("unknown head: " + s);
}

namespace {
constexpr char kMagic[8] = {'P', 'G', 'L', 'C', 'K', 'P', 'T', '\0'};
constexpr uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const std::string& path, const NetworkSpec& spec,
                     const ParamVector& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open checkpoint file: " + path);
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
    const uint64_t count = params.size();
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    out.write(reinterpret_cast<const char*>(params.data()),
              static_cast<std::streamsize>(count * sizeof(double)));
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);

    nlohmann::ordered_json j;
    j["input_dim"] = spec.input_dim;
    j["hidden_layers"] = spec.hidden;
    j["output_dim"] = spec.output_dim;
    j["activation"] = to_string(spec.activation);
    j["head"] = to_string(spec.head);
    std::ofstream sidecar(path + ".json");
    if (!sidecar) throw std::runtime_error("cannot open checkpoint sidecar: " + path + ".json");
    sidecar << j.dump(2) << "\n";
}

std::pair<NetworkSpec, ParamVector> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint file: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("bad checkpoint magic: " + path);
    uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != kVersion)
        throw std::runtime_error("unsupported checkpoint version");
    uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    ParamVector params(count);
    in.read(reinterpret_cast<char*>(params.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);

    std::ifstream sidecar(path + ".json");
    if (!sidecar) throw std::runtime_error("missing checkpoint sidecar: " + path + ".json");
    nlohmann::json j = nlohmann::json::parse(sidecar);
    NetworkSpec spec;
    spec.input_dim = j.at("input_dim").get<int>();
    spec.hidden = j.at("hidden_layers").get<std::vector<int>>();
    spec.output_dim = j.at("output_dim").get<int>();
    spec.activation = activation_from_string(j.at("activation").get<std::string>());
    spec.head = head_from_string(j.at("head").get<std::string>());
    if (spec.param_count() != static_cast<int>(params.size()))
        throw std::runtime_error("checkpoint parameter count does not match sidecar spec");
    return {spec, params};
}

}  // namespace pglab
