#include "guesslab/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "guesslab/common.hpp"

namespace guesslab {

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Relu: return "relu";
        case Activation::Softmax: return "softmax";
    }
    throw numeric_error("unknown activation");
}

Activation activation_from_name(const std::string& name) {
    if (name == "identity") return Activation::Identity;
    if (name == "relu") return Activation::Relu;
    if (name == "softmax") return Activation::Softmax;
    throw parse_error("unknown activation tag: " + name);
}

DenseNet DenseNet::make(const std::vector<std::size_t>& dims,
                        const std::vector<Activation>& acts, Rng& rng) {
    if (dims.size() < 2 || acts.size() != dims.size() - 1)
        throw shape_error("DenseNet::make: dims/acts mismatch");
    DenseNet net;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        if (acts[k] == Activation::Softmax && k + 2 != dims.size())
            throw shape_error("softmax allowed only on the final layer");
        DenseLayer layer;
        layer.weight = Matrix(dims[k + 1], dims[k]);
        layer.bias.assign(dims[k + 1], 0.0);
        layer.act = acts[k];
        const double bound = std::sqrt(6.0 / static_cast<double>(dims[k] + dims[k + 1]));
        for (double& w : layer.weight.data) w = rng.uniform(-bound, bound);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

Vec softmax(std::span<const double> x) {
    Vec out(x.size());
    double mx = *std::max_element(x.begin(), x.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = std::exp(x[i] - mx);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

namespace {

Vec apply_activation(Activation act, const Vec& pre) {
    switch (act) {
        case Activation::Identity: return pre;
        case Activation::Relu: {
            Vec out(pre.size());
            for (std::size_t i = 0; i < pre.size(); ++i) out[i] = pre[i] > 0.0 ? pre[i] : 0.0;
            return out;
        }
        case Activation::Softmax: return softmax(pre);
    }
    throw numeric_error("unknown activation");
}

Vec affine(const DenseLayer& layer, std::span<const double> x) {
    if (x.size() != layer.in_dim())
        throw shape_error("layer input size " + std::to_string(x.size()) + " != " +
                          std::to_string(layer.in_dim()));
    Vec pre(layer.out_dim());
    for (std::size_t r = 0; r < layer.out_dim(); ++r) {
        double acc = layer.bias[r];
        const double* wrow = layer.weight.data.data() + r * layer.weight.cols;
        for (std::size_t c = 0; c < layer.in_dim(); ++c) acc += wrow[c] * x[c];
        pre[r] = acc;
    }
    return pre;
}

}  // namespace

Vec DenseNet::forward(std::span<const double> x) const {
    Vec cur(x.begin(), x.end());
    for (const auto& layer : layers) {
        Vec pre = affine(layer, cur);
        cur = apply_activation(layer.act, pre);
    }
    return cur;
}

Vec forward_traced(const DenseNet& net, std::span<const double> x, ForwardTrace& trace) {
    trace.input.assign(x.begin(), x.end());
    trace.pre.clear();
    trace.post.clear();
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const Vec& in = (k == 0) ? trace.input : trace.post[k - 1];
        Vec pre = affine(net.layers[k], in);
        trace.post.push_back(apply_activation(net.layers[k].act, pre));
        trace.pre.push_back(std::move(pre));
    }
    return trace.post.back();
}

NetGrads NetGrads::zeros_like(const DenseNet& net) {
    NetGrads g;
    for (const auto& layer : net.layers) {
        g.weight.emplace_back(layer.out_dim(), layer.in_dim());
        g.bias.emplace_back(layer.out_dim(), 0.0);
    }
    return g;
}

void NetGrads::accumulate(const NetGrads& other, double s) {
    for (std::size_t k = 0; k < weight.size(); ++k) {
        for (std::size_t i = 0; i < weight[k].data.size(); ++i)
            weight[k].data[i] += s * other.weight[k].data[i];
        for (std::size_t i = 0; i < bias[k].size(); ++i) bias[k][i] += s * other.bias[k][i];
    }
}

void NetGrads::scale(double s) {
    for (auto& w : weight)
        for (double& v : w.data) v *= s;
    for (auto& b : bias)
        for (double& v : b) v *= s;
}

BackwardResult backward_traced(const DenseNet& net, const ForwardTrace& trace,
                               std::span<const double> upstream) {
    const std::size_t L = net.layers.size();
    if (upstream.size() != net.output_dim())
        throw shape_error("backward: upstream size != output_dim");

    BackwardResult res;
    res.grads = NetGrads::zeros_like(net);

    Vec grad_post(upstream.begin(), upstream.end());
    for (std::size_t k = L; k-- > 0;) {
        const DenseLayer& layer = net.layers[k];
        const Vec& pre = trace.pre[k];
        Vec grad_pre(pre.size());
        switch (layer.act) {
            case Activation::Identity:
                grad_pre = grad_post;
                break;
            case Activation::Relu:
                for (std::size_t i = 0; i < pre.size(); ++i)
                    grad_pre[i] = pre[i] > 0.0 ? grad_post[i] : 0.0;
                break;
            case Activation::Softmax: {
                const Vec& p = trace.post[k];
                double updot = dot(grad_post, p);
                for (std::size_t i = 0; i < pre.size(); ++i)
                    grad_pre[i] = p[i] * (grad_post[i] - updot);
                break;
            }
        }
        const Vec& in = (k == 0) ? trace.input : trace.post[k - 1];
        Matrix& gw = res.grads.weight[k];
        for (std::size_t r = 0; r < layer.out_dim(); ++r) {
            double g = grad_pre[r];
            double* grow = gw.data.data() + r * gw.cols;
            for (std::size_t c = 0; c < layer.in_dim(); ++c) grow[c] += g * in[c];
            res.grads.bias[k][r] += g;
        }
        Vec grad_in(layer.in_dim(), 0.0);
        for (std::size_t r = 0; r < layer.out_dim(); ++r) {
            double g = grad_pre[r];
            const double* wrow = layer.weight.data.data() + r * layer.weight.cols;
            for (std::size_t c = 0; c < layer.in_dim(); ++c) grad_in[c] += g * wrow[c];
        }
        grad_post = std::move(grad_in);
    }
    res.input_grad = std::move(grad_post);
    return res;
}

BackwardResult backward(const DenseNet& net, std::span<const double> x,
                        std::span<const double> upstream) {
    ForwardTrace trace;
    forward_traced(net, x, trace);
    return backward_traced(net, trace, upstream);
}

double mse(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw shape_error("mse: length mismatch");
    if (a.empty()) throw shape_error("mse: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

double param_norm(const DenseNet& net) {
    double acc = 0.0;
    for (const auto& layer : net.layers) {
        for (double w : layer.weight.data) acc += w * w;
        for (double b : layer.bias) acc += b * b;
    }
    return std::sqrt(acc);
}

std::size_t param_count(const DenseNet& net) {
    std::size_t n = 0;
    for (const auto& layer : net.layers) n += layer.weight.data.size() + layer.bias.size();
    return n;
}

void copy_params(const DenseNet& net, std::span<double> out) {
    std::size_t i = 0;
    for (const auto& layer : net.layers) {
        for (double w : layer.weight.data) out[i++] = w;
        for (double b : layer.bias) out[i++] = b;
    }
}

void load_params(DenseNet& net, std::span<const double> in) {
    std::size_t i = 0;
    for (auto& layer : net.layers) {
        for (double& w : layer.weight.data) w = in[i++];
        for (double& b : layer.bias) b = in[i++];
    }
}

void append_grads(const NetGrads& grads, Vec& out) {
    for (std::size_t k = 0; k < grads.weight.size(); ++k) {
        out.insert(out.end(), grads.weight[k].data.begin(), grads.weight[k].data.end());
        out.insert(out.end(), grads.bias[k].begin(), grads.bias[k].end());
    }
}

std::size_t ParamPack::count() const {
    std::size_t n = 0;
    for (const auto* net : nets) n += param_count(*net);
    for (const auto* t : tensors) n += t->size();
    return n;
}

Vec ParamPack::flatten() const {
    Vec flat(count());
    std::size_t off = 0;
    for (const auto* net : nets) {
        copy_params(*net, std::span<double>(flat).subspan(off, param_count(*net)));
        off += param_count(*net);
    }
    for (const auto* t : tensors) {
        std::copy(t->begin(), t->end(), flat.begin() + static_cast<std::ptrdiff_t>(off));
        off += t->size();
    }
    return flat;
}

void ParamPack::load(std::span<const double> flat) {
    if (flat.size() != count()) throw shape_error("ParamPack::load: size mismatch");
    std::size_t off = 0;
    for (auto* net : nets) {
        load_params(*net, flat.subspan(off, param_count(*net)));
        off += param_count(*net);
    }
    for (auto* t : tensors) {
        std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
                  flat.begin() + static_cast<std::ptrdiff_t>(off + t->size()), t->begin());
        off += t->size();
    }
}

AdamState AdamState::make(std::size_t n, double lr) {
    AdamState s;
    s.first_moment.assign(n, 0.0);
    s.second_moment.assign(n, 0.0);
    s.lr = lr;
    return s;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const std::string& label) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size())
        throw shape_error("adam_step: shape mismatch for " + label);
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i]))
            throw numeric_error("non-finite gradient in " + label + " at index " +
                                std::to_string(i));
    }
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        double g = grads[i];
        state.first_moment[i] = state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * g;
        state.second_moment[i] =
            state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * g * g;
        double mhat = state.first_moment[i] / bc1;
        double vhat = state.second_moment[i] / bc2;
        params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& params,
                     double h) {
    if (h <= 0.0) throw numeric_error("finite_diff_grad: h must be positive");
    Vec grads(params.size());
    Vec p = params;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double orig = p[i];
        p[i] = orig + h;
        double fp = f(p);
        p[i] = orig - h;
        double fm = f(p);
        p[i] = orig;
        grads[i] = (fp - fm) / (2.0 * h);
    }
    return grads;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw shape_error("dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm(std::span<const double> a) {
    double acc = 0.0;
    for (double v : a) acc += v * v;
    return std::sqrt(acc);
}

}  // namespace guesslab
