#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "guesslab/checkpoint.hpp"
#include "guesslab/common.hpp"
#include "guesslab/numerics.hpp"
#include "guesslab/rng.hpp"

using namespace guesslab;

namespace {

DenseNet identity_net(std::size_t n, Activation act) {
    DenseNet net;
    DenseLayer layer;
    layer.weight = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) layer.weight.at(i, i) = 1.0;
    layer.bias.assign(n, 0.0);
    layer.act = act;
    net.layers.push_back(layer);
    return net;
}

// Independent matrix-arithmetic oracle: explicit loops, no shared code path.
Vec oracle_forward_2layer(const DenseNet& net, const Vec& x) {
    Vec h(net.layers[0].out_dim(), 0.0);
    for (std::size_t r = 0; r < h.size(); ++r) {
        double acc = net.layers[0].bias[r];
        for (std::size_t c = 0; c < x.size(); ++c)
            acc += net.layers[0].weight.at(r, c) * x[c];
        h[r] = acc > 0.0 ? acc : 0.0;
    }
    Vec y(net.layers[1].out_dim(), 0.0);
    for (std::size_t r = 0; r < y.size(); ++r) {
        double acc = net.layers[1].bias[r];
        for (std::size_t c = 0; c < h.size(); ++c)
            acc += net.layers[1].weight.at(r, c) * h[c];
        y[r] = acc;
    }
    return y;
}

}  // namespace

TEST_CASE("forward identity net reproduces its input") {
    DenseNet net = identity_net(2, Activation::Identity);
    Vec y = net.forward(Vec{1.0, 2.0});
    CHECK(y[0] == 1.0);
    CHECK(y[1] == 2.0);
}

TEST_CASE("forward relu clamps negatives") {
    DenseNet net = identity_net(2, Activation::Relu);
    Vec y = net.forward(Vec{-3.0, 4.0});
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 4.0);
}

TEST_CASE("forward matches an independent matrix-arithmetic oracle") {
    Rng rng(7);
    DenseNet net = DenseNet::make({2, 4, 3}, {Activation::Relu, Activation::Identity}, rng);
    Vec x{0.5, -0.5};
    Vec got = net.forward(x);
    Vec expected = oracle_forward_2layer(net, x);
    REQUIRE(got.size() == expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(expected[i]).epsilon(1e-12));
}

TEST_CASE("forward is pure: identical inputs give bit-identical outputs") {
    Rng rng(11);
    DenseNet net = DenseNet::make({3, 5, 2}, {Activation::Relu, Activation::Softmax}, rng);
    Vec x{0.1, -0.2, 0.3};
    Vec a = net.forward(x);
    Vec b = net.forward(x);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("forward rejects dimension mismatch") {
    DenseNet net = identity_net(2, Activation::Identity);
    CHECK_THROWS_AS((void)net.forward(Vec{1.0, 2.0, 3.0}), shape_error);
}

TEST_CASE("softmax only allowed on the final layer") {
    Rng rng(3);
    CHECK_THROWS_AS(
        (void)DenseNet::make({2, 3, 2}, {Activation::Softmax, Activation::Identity}, rng),
        shape_error);
}

TEST_CASE("backward of a single identity layer") {
    DenseNet net = identity_net(2, Activation::Identity);
    Vec x{0.7, -1.3};
    BackwardResult res = backward(net, x, Vec{1.0, 0.0});
    // d<u, Wx+b>/dW = u x^T, d/db = u
    CHECK(res.grads.weight[0].at(0, 0) == doctest::Approx(0.7));
    CHECK(res.grads.weight[0].at(0, 1) == doctest::Approx(-1.3));
    CHECK(res.grads.weight[0].at(1, 0) == 0.0);
    CHECK(res.grads.bias[0][0] == 1.0);
    CHECK(res.grads.bias[0][1] == 0.0);
}

TEST_CASE("relu dead zone has exactly zero gradient") {
    DenseNet net = identity_net(2, Activation::Relu);
    Vec x{-3.0, 4.0};  // first unit pre-activation < 0
    BackwardResult res = backward(net, x, Vec{1.0, 1.0});
    CHECK(res.grads.weight[0].at(0, 0) == 0.0);
    CHECK(res.grads.weight[0].at(0, 1) == 0.0);
    CHECK(res.grads.bias[0][0] == 0.0);
    CHECK(res.input_grad[0] == 0.0);
    CHECK(res.grads.bias[1 - 1][1] == 1.0);
}

TEST_CASE("backward matches central finite differences on random nets") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed * 131 + 1);
        DenseNet net =
            DenseNet::make({3, 4, 2}, {Activation::Relu, Activation::Identity}, rng);
        Vec x{rng.normal(), rng.normal(), rng.normal()};
        Vec upstream{rng.normal(), rng.normal()};

        BackwardResult res = backward(net, x, upstream);
        Vec analytic;
        append_grads(res.grads, analytic);

        Vec params(param_count(net));
        copy_params(net, params);
        DenseNet probe = net;
        auto f = [&](const Vec& p) {
            load_params(probe, p);
            return dot(probe.forward(x), upstream);
        };
        Vec numeric = finite_diff_grad(f, params, 1e-5);
        REQUIRE(numeric.size() == analytic.size());
        for (std::size_t i = 0; i < numeric.size(); ++i) {
            const double denom = std::max(std::abs(numeric[i]), 1e-8);
            CHECK(std::abs(numeric[i] - analytic[i]) / denom < 1e-4);
        }
    }
}

TEST_CASE("mse basics") {
    CHECK(mse(Vec{1.0, 2.0}, Vec{1.0, 2.0}) == 0.0);
    CHECK(mse(Vec{1.0, 0.0}, Vec{0.0, 1.0}) == doctest::Approx(1.0));
    CHECK_THROWS_AS((void)mse(Vec{1.0}, Vec{1.0, 2.0}), shape_error);
}

TEST_CASE("mse matches an element-wise loop oracle and is symmetric") {
    Rng rng(5);
    for (int rep = 0; rep < 10; ++rep) {
        Vec a(5), b(5);
        for (auto& v : a) v = rng.normal();
        for (auto& v : b) v = rng.normal();
        double manual = 0.0;
        for (std::size_t i = 0; i < 5; ++i) manual += (a[i] - b[i]) * (a[i] - b[i]);
        manual /= 5.0;
        CHECK(mse(a, b) == doctest::Approx(manual).epsilon(1e-14));
        CHECK(mse(a, b) == mse(b, a));
        CHECK(mse(a, b) >= 0.0);
    }
}

TEST_CASE("adam with zero gradients never changes parameters") {
    Vec params{1.0, -2.0, 3.0};
    Vec before = params;
    AdamState state = AdamState::make(3, 0.1);
    for (int i = 0; i < 5; ++i) adam_step(params, Vec{0.0, 0.0, 0.0}, state);
    CHECK(params == before);
    CHECK(state.step_count == 5);
}

TEST_CASE("adam first step matches the hand-computed bias-corrected update") {
    // t=1: m_hat = g, v_hat = g^2, delta = -lr * g / (|g| + eps)
    const double g = 0.37;
    const double lr = 0.01;
    Vec params{2.0};
    AdamState state = AdamState::make(1, lr);
    adam_step(params, Vec{g}, state);
    const double expected = 2.0 - lr * g / (std::abs(g) + 1e-8);
    CHECK(params[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("adam descends a scalar quadratic") {
    Vec w{0.0};
    AdamState state = AdamState::make(1, 0.1);
    for (int step = 0; step < 100; ++step) {
        Vec grad{2.0 * (w[0] - 3.0)};
        adam_step(w, grad, state);
    }
    CHECK(std::abs(w[0] - 3.0) < 0.5);
}

TEST_CASE("adam rejects non-finite gradients naming the tensor") {
    Vec params{1.0};
    AdamState state = AdamState::make(1, 0.1);
    CHECK_THROWS_WITH_AS(adam_step(params, Vec{std::nan("")}, state, "encoder"),
                         doctest::Contains("encoder"), numeric_error);
}

TEST_CASE("finite differences recover the analytic derivative of w^2") {
    auto f = [](const Vec& p) { return p[0] * p[0]; };
    Vec g = finite_diff_grad(f, Vec{2.0}, 1e-5);
    CHECK(g[0] == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("finite differences of a constant are zero") {
    auto f = [](const Vec&) { return 1.5; };
    Vec g = finite_diff_grad(f, Vec{0.3, -0.7}, 1e-5);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);
}

TEST_CASE("softmax is stable under large inputs and sums to one") {
    Vec p = softmax(Vec{1000.0, 1000.0, 999.0});
    double sum = 0.0;
    for (double v : p) {
        CHECK(std::isfinite(v));
        sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p[0] == doctest::Approx(p[1]));
    CHECK(p[0] > p[2]);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    Rng rng(99);
    DenseNet net = DenseNet::make({4, 8, 3}, {Activation::Relu, Activation::Softmax}, rng);
    Vec tensor{0.1, -0.2, 1.0 / 3.0};

    Checkpoint ckpt;
    ckpt.kind = "imagination";
    ckpt.set_meta("alpha", 1e-5);
    ckpt.set_meta("note", "round trip");
    ckpt.add_net("encoder", net);
    ckpt.add_tensor("weights", {3}, tensor);

    const std::string path = "ckpt_roundtrip.bin";
    ckpt.save(path);
    Checkpoint loaded = Checkpoint::load(path);
    CHECK(loaded.kind == "imagination");
    CHECK(loaded.meta_double("alpha") == 1e-5);
    CHECK(loaded.require_meta("note") == "round trip");

    DenseNet restored = loaded.restore_net("encoder");
    Vec a(param_count(net)), b(param_count(restored));
    copy_params(net, a);
    copy_params(restored, b);
    CHECK(a == b);
    CHECK(loaded.tensor("weights") == tensor);

    // Save the loaded copy: files must be byte-identical.
    const std::string path2 = "ckpt_roundtrip2.bin";
    loaded.save(path2);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string c1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string c2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(c1 == c2);
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("named rng substreams are deterministic and distinct") {
    Rng a = Rng::named(42, "world");
    Rng b = Rng::named(42, "world");
    Rng c = Rng::named(42, "train");
    CHECK(a.next() == b.next());
    Rng a2 = Rng::named(42, "world");
    Rng c2 = Rng::named(42, "train");
    CHECK(a2.next() != c2.next());
}

TEST_CASE("glorot init respects the documented bound") {
    Rng rng(123);
    DenseNet net = DenseNet::make({10, 7}, {Activation::Identity}, rng);
    const double bound = std::sqrt(6.0 / 17.0);
    for (double w : net.layers[0].weight.data) {
        CHECK(w <= bound);
        CHECK(w >= -bound);
    }
    for (double b : net.layers[0].bias) CHECK(b == 0.0);
}
