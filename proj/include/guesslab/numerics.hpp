#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "guesslab/rng.hpp"

namespace guesslab {

using Vec = std::vector<double>;

enum class Activation { Identity, Relu, Softmax };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

/// Row-major dense matrix (rows = outputs, cols = inputs).
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct DenseLayer {
    Matrix weight;
    Vec bias;
    Activation act = Activation::Identity;

    std::size_t in_dim() const { return weight.cols; }
    std::size_t out_dim() const { return weight.rows; }
};

/// Fully-connected net; softmax may appear only on the last layer.
struct DenseNet {
    std::vector<DenseLayer> layers;

    std::size_t input_dim() const { return layers.front().in_dim(); }
    std::size_t output_dim() const { return layers.back().out_dim(); }

    /// Glorot-uniform weights, zero biases. dims has one more entry than acts.
    static DenseNet make(const std::vector<std::size_t>& dims,
                         const std::vector<Activation>& acts, Rng& rng);

    Vec forward(std::span<const double> x) const;
};

/// Per-layer activations captured during a forward pass, reused by backward.
struct ForwardTrace {
    Vec input;
    std::vector<Vec> pre;   // pre-activation per layer
    std::vector<Vec> post;  // post-activation per layer
};

Vec forward_traced(const DenseNet& net, std::span<const double> x, ForwardTrace& trace);

struct NetGrads {
    std::vector<Matrix> weight;
    std::vector<Vec> bias;

    static NetGrads zeros_like(const DenseNet& net);
    void accumulate(const NetGrads& other, double scale = 1.0);
    void scale(double s);
};

struct BackwardResult {
    Vec input_grad;
    NetGrads grads;
};

/// Gradients of <upstream, forward(net, x)> with respect to x and parameters.
/// Recomputes the forward pass internally.
BackwardResult backward(const DenseNet& net, std::span<const double> x,
                        std::span<const double> upstream);

/// Same but reuses a trace captured by forward_traced.
BackwardResult backward_traced(const DenseNet& net, const ForwardTrace& trace,
                               std::span<const double> upstream);

double mse(std::span<const double> a, std::span<const double> b);

/// Euclidean norm of all weights and biases flattened together.
double param_norm(const DenseNet& net);

// Flat parameter plumbing. Layer order: weight row-major, then bias.
std::size_t param_count(const DenseNet& net);
void copy_params(const DenseNet& net, std::span<double> out);
void load_params(DenseNet& net, std::span<const double> in);
void append_grads(const NetGrads& grads, Vec& out);

/// A flat view over the parameters of several nets plus loose tensors,
/// in declaration order. Backs Adam updates and checkpointing.
struct ParamPack {
    std::vector<DenseNet*> nets;
    std::vector<Vec*> tensors;

    std::size_t count() const;
    Vec flatten() const;
    void load(std::span<const double> flat);
};

struct AdamState {
    Vec first_moment;
    Vec second_moment;
    long step_count = 0;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState make(std::size_t n, double lr);
};

/// Standard Adam with bias correction; increments state.step_count.
/// Throws numeric_error naming `label` if a gradient entry is non-finite.
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, const std::string& label = "params");

/// Central finite differences (f(p+h e) - f(p-h e)) / 2h per coordinate.
Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& params,
                     double h);

/// Numerically stable softmax (max subtraction).
Vec softmax(std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

}  // namespace guesslab
