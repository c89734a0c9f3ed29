#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "advnoise/distribution.hpp"
#include "advnoise/linalg.hpp"

namespace advnoise {

enum class Activation { relu, tanh };

inline std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

inline Activation parse_activation(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    throw ParameterError("unknown activation '" + s + "'");
}

struct NetworkSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden;
    std::size_t classes = 2;
    Activation activation = Activation::relu;

    void validate() const {
        if (input_dim < 1) throw ParameterError("network input_dim must be >= 1");
        if (classes < 2) throw ParameterError("network needs K >= 2 classes");
        for (auto w : hidden)
            if (w < 1) throw ParameterError("hidden layer width must be >= 1");
    }

    bool operator==(const NetworkSpec&) const = default;
};

/// One affine map: weight is (out x in), bias has length out.
struct Layer {
    Matrix weight;
    Vector bias;

    bool operator==(const Layer&) const = default;
};

/// Fully connected classifier producing logits. Hidden layers apply the spec's
/// activation; the last layer is linear.
class Network {
  public:
    Network() = default;
    Network(NetworkSpec spec, std::vector<Layer> layers) : spec_(std::move(spec)), layers_(std::move(layers)) {
        spec_.validate();
        std::size_t in = spec_.input_dim;
        if (layers_.size() != spec_.hidden.size() + 1) throw ShapeError("layer count does not match spec");
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const std::size_t out = l < spec_.hidden.size() ? spec_.hidden[l] : spec_.classes;
            if (layers_[l].weight.rows() != out || layers_[l].weight.cols() != in || layers_[l].bias.size() != out)
                throw ShapeError("layer " + std::to_string(l) + " shape does not match spec");
            in = out;
        }
    }

    /// Glorot-uniform weights, zero biases.
    static Network init(const NetworkSpec& spec, Rng& rng) {
        spec.validate();
        std::vector<Layer> layers;
        std::size_t in = spec.input_dim;
        for (std::size_t l = 0; l <= spec.hidden.size(); ++l) {
            const std::size_t out = l < spec.hidden.size() ? spec.hidden[l] : spec.classes;
            const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
            Layer layer{Matrix(out, in), Vector(out, 0.0)};
            for (auto& w : layer.weight.data()) w = rng.uniform(-limit, limit);
            layers.push_back(std::move(layer));
            in = out;
        }
        return Network(spec, std::move(layers));
    }

    static Network init(const NetworkSpec& spec, std::uint64_t seed) {
        Rng rng(seed);
        return init(spec, rng);
    }

    const NetworkSpec& spec() const noexcept { return spec_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    std::vector<Layer>& layers() noexcept { return layers_; }
    std::size_t input_dim() const noexcept { return spec_.input_dim; }
    std::size_t classes() const noexcept { return spec_.classes; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
        return n;
    }

    bool operator==(const Network&) const = default;

  private:
    NetworkSpec spec_;
    std::vector<Layer> layers_;
};

namespace detail {

inline double activate(Activation a, double z) { return a == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z); }

/// Derivative expressed through the pre-activation z and the output h.
inline double activate_grad(Activation a, double z, double h) {
    return a == Activation::relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0 - h * h;
}

/// Layer-wise pre-activations and outputs of one forward pass.
struct ForwardTrace {
    std::vector<Vector> pre;   // z_l
    std::vector<Vector> post;  // h_l; post[0] is the input
};

inline ForwardTrace forward_trace(const Network& net, std::span<const double> x) {
    if (x.size() != net.input_dim())
        throw ShapeError("forward: input has " + std::to_string(x.size()) + " features, network expects " +
                         std::to_string(net.input_dim()));
    ForwardTrace tr;
    const auto& layers = net.layers();
    tr.post.emplace_back(x.begin(), x.end());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Vector z = matvec(layers[l].weight, tr.post.back());
        for (std::size_t i = 0; i < z.size(); ++i) z[i] += layers[l].bias[i];
        Vector h = z;
        if (l + 1 < layers.size())
            for (auto& v : h) v = activate(net.spec().activation, v);
        tr.pre.push_back(std::move(z));
        tr.post.push_back(std::move(h));
    }
    return tr;
}

}  // namespace detail

inline Vector forward(const Network& net, std::span<const double> x) {
    auto tr = detail::forward_trace(net, x);
    return std::move(tr.post.back());
}

/// softmax(z / T), stabilised by subtracting max(z).
inline LabelDistribution softmax_t(std::span<const double> logits, double temperature = 1.0) {
    if (!(temperature > 0.0)) throw ParameterError("softmax temperature must be > 0");
    if (logits.empty()) throw ShapeError("softmax of empty logits");
    if (!all_finite(logits)) throw NumericError("softmax of non-finite logits");
    const double top = logits[argmax(logits)];
    Vector p(logits.size());
    double total = 0.0;
    for (std::size_t j = 0; j < logits.size(); ++j) {
        p[j] = std::exp((logits[j] - top) / temperature);
        total += p[j];
    }
    for (auto& v : p) v /= total;
    return LabelDistribution(std::move(p));
}

inline constexpr double kProbFloor = 1e-30;

/// -sum_j target_j log(max(probs_j, 1e-30))
inline double loss_soft_ce(std::span<const double> probs, std::span<const double> target) {
    if (probs.size() != target.size()) throw ShapeError("loss_soft_ce: class count mismatch");
    double loss = 0.0;
    for (std::size_t j = 0; j < probs.size(); ++j)
        if (target[j] != 0.0) loss -= target[j] * std::log(std::max(probs[j], kProbFloor));
    return loss;
}

inline double loss_soft_ce(const LabelDistribution& probs, const LabelDistribution& target) {
    return loss_soft_ce(probs.probs(), target.probs());
}

inline double entropy(std::span<const double> p) { return loss_soft_ce(p, p); }

struct GradBundle {
    std::vector<Layer> param_grads;
    Vector input_grad;
    double loss = 0.0;
};

namespace detail {

/// Reverse pass for CE(softmax(z/T), target). Parameter gradients are added
/// into `acc` scaled by `weight` when acc is non-null; returns dL/dx.
inline Vector backprop(const Network& net, std::span<const double> x, std::span<const double> target,
                       double temperature, std::vector<Layer>* acc, double weight, double* loss_out) {
    if (!(temperature > 0.0)) throw ParameterError("backward: temperature must be > 0");
    if (target.size() != net.classes()) throw ShapeError("backward: target has wrong class count");
    const auto tr = forward_trace(net, x);
    const auto probs = softmax_t(tr.post.back(), temperature);
    if (loss_out) *loss_out = loss_soft_ce(probs.probs(), target);

    const auto& layers = net.layers();
    Vector delta(net.classes());
    for (std::size_t j = 0; j < delta.size(); ++j) delta[j] = (probs[j] - target[j]) / temperature;

    for (std::size_t l = layers.size(); l-- > 0;) {
        const auto& W = layers[l].weight;
        const auto& input = tr.post[l];
        if (acc) {
            auto& G = (*acc)[l];
            for (std::size_t i = 0; i < W.rows(); ++i) {
                const double d = weight * delta[i];
                auto grow = G.weight.row(i);
                for (std::size_t k = 0; k < W.cols(); ++k) grow[k] += d * input[k];
                G.bias[i] += d;
            }
        }
        Vector back(W.cols(), 0.0);
        for (std::size_t i = 0; i < W.rows(); ++i) {
            const double d = delta[i];
            if (d == 0.0) continue;
            auto wrow = W.row(i);
            for (std::size_t k = 0; k < W.cols(); ++k) back[k] += wrow[k] * d;
        }
        if (l > 0) {
            const auto& z = tr.pre[l - 1];
            const auto& h = tr.post[l];
            for (std::size_t k = 0; k < back.size(); ++k)
                back[k] *= activate_grad(net.spec().activation, z[k], h[k]);
        }
        delta = std::move(back);
    }
    return delta;
}

}  // namespace detail

/// Zero-valued gradient buffers shaped like the network's parameters.
inline std::vector<Layer> zero_like(const Network& net) {
    std::vector<Layer> out;
    for (const auto& l : net.layers())
        out.push_back({Matrix(l.weight.rows(), l.weight.cols()), Vector(l.bias.size(), 0.0)});
    return out;
}

/// Exact gradients of loss_soft_ce(softmax_t(forward(x), T), target) with
/// respect to every parameter and to the input.
inline GradBundle backward(const Network& net, std::span<const double> x, const LabelDistribution& target,
                           double temperature = 1.0) {
    GradBundle g;
    g.param_grads = zero_like(net);
    g.input_grad = detail::backprop(net, x, target.probs(), temperature, &g.param_grads, 1.0, &g.loss);
    return g;
}

/// Input gradient only; skips parameter accumulation.
inline Vector input_gradient(const Network& net, std::span<const double> x, std::span<const double> target,
                             double temperature = 1.0, double* loss = nullptr) {
    return detail::backprop(net, x, target, temperature, nullptr, 0.0, loss);
}

/// Adds weight * dL/dtheta into acc and returns the loss.
inline double accumulate_gradients(const Network& net, std::span<const double> x, std::span<const double> target,
                                   std::vector<Layer>& acc, double weight = 1.0, double temperature = 1.0) {
    double loss = 0.0;
    detail::backprop(net, x, target, temperature, &acc, weight, &loss);
    return loss;
}

// ---------------------------------------------------------------------------
// Checkpoints: a line-oriented text dump with hexfloat values, so a save/load
// round trip is bit-exact.

inline constexpr const char* kCheckpointMagic = "advnoise-checkpoint";
inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline std::string hex(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

inline double parse_hex(const std::string& tok) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw std::runtime_error("checkpoint: bad number '" + tok + "'");
    return v;
}

}  // namespace detail

inline void save_checkpoint(const Network& net, std::ostream& os) {
    const auto& s = net.spec();
    os << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
    os << "input_dim " << s.input_dim << '\n';
    os << "hidden " << s.hidden.size();
    for (auto w : s.hidden) os << ' ' << w;
    os << '\n';
    os << "classes " << s.classes << '\n';
    os << "activation " << to_string(s.activation) << '\n';
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        const auto& layer = net.layers()[l];
        os << "layer " << l << ' ' << layer.weight.rows() << ' ' << layer.weight.cols() << '\n';
        for (std::size_t i = 0; i < layer.weight.rows(); ++i) {
            for (std::size_t k = 0; k < layer.weight.cols(); ++k) os << (k ? " " : "") << detail::hex(layer.weight(i, k));
            os << '\n';
        }
        for (std::size_t i = 0; i < layer.bias.size(); ++i) os << (i ? " " : "") << detail::hex(layer.bias[i]);
        os << '\n';
    }
}

inline Network load_checkpoint(std::istream& is) {
    auto expect = [&](const std::string& key) {
        std::string tok;
        if (!(is >> tok) || tok != key) throw std::runtime_error("checkpoint: expected '" + key + "', got '" + tok + "'");
    };
    auto number = [&]() {
        std::string tok;
        if (!(is >> tok)) throw std::runtime_error("checkpoint: truncated file");
        return detail::parse_hex(tok);
    };
    auto count = [&]() {
        std::size_t n;
        if (!(is >> n)) throw std::runtime_error("checkpoint: expected a count");
        return n;
    };
    expect(kCheckpointMagic);
    int version = 0;
    if (!(is >> version) || version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    NetworkSpec spec;
    expect("input_dim");
    spec.input_dim = count();
    expect("hidden");
    spec.hidden.resize(count());
    for (auto& w : spec.hidden) w = count();
    expect("classes");
    spec.classes = count();
    expect("activation");
    std::string act;
    is >> act;
    spec.activation = parse_activation(act);
    std::vector<Layer> layers;
    for (std::size_t l = 0; l <= spec.hidden.size(); ++l) {
        expect("layer");
        if (count() != l) throw std::runtime_error("checkpoint: layers out of order");
        const std::size_t rows = count(), cols = count();
        Layer layer{Matrix(rows, cols), Vector(rows)};
        for (auto& w : layer.weight.data()) w = number();
        for (auto& b : layer.bias) b = number();
        layers.push_back(std::move(layer));
    }
    return Network(spec, std::move(layers));
}

inline void save_checkpoint(const Network& net, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write checkpoint " + path);
    save_checkpoint(net, os);
}

inline Network load_checkpoint(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read checkpoint " + path);
    return load_checkpoint(is);
}

}  // namespace advnoise
