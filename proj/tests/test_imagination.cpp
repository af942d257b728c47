#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <map>

#include "guesslab/common.hpp"
#include "guesslab/imagination.hpp"

using namespace guesslab;

namespace {

ImaginationModel zero_model(std::size_t d_o, std::size_t hidden, std::size_t d_z) {
    ImaginationConfig cfg;
    cfg.d_z = d_z;
    cfg.hidden = hidden;
    Rng rng(1);
    ImaginationModel model = ImaginationModel::make(d_o, cfg, 0, rng);
    for (auto& layer : model.encoder.layers) {
        std::fill(layer.weight.data.begin(), layer.weight.data.end(), 0.0);
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    }
    for (auto& layer : model.decoder.layers) {
        std::fill(layer.weight.data.begin(), layer.weight.data.end(), 0.0);
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    }
    return model;
}

Scene tiny_scene(const std::vector<int>& categories, std::size_t d_o, Rng& rng) {
    Scene scene;
    scene.id = "tiny";
    scene.width = 100;
    scene.height = 100;
    for (std::size_t i = 0; i < categories.size(); ++i) {
        GameObject obj;
        obj.id = static_cast<int>(i);
        obj.category = categories[i];
        obj.bbox = {10.0 * (i + 1), 10.0, 8.0, 8.0};
        obj.spatial = spatial_features(obj.bbox, 100, 100);
        obj.perceptual.resize(d_o);
        for (double& v : obj.perceptual) v = rng.normal();
        scene.objects.push_back(std::move(obj));
    }
    scene.target = 0;
    return scene;
}

std::vector<Scene> small_training_world(WorldConfig& cfg, CategoryVocabulary& vocab,
                                        std::size_t n_scenes, std::uint64_t seed,
                                        std::vector<Scene>* val = nullptr) {
    vocab = generate_world(cfg, seed);
    auto in = vocab.in_domain_ids();
    Rng rng(seed + 1);
    std::vector<Scene> scenes;
    for (std::size_t i = 0; i < n_scenes; ++i)
        scenes.push_back(generate_scene(vocab, cfg, rng, in, in, "t" + std::to_string(i)));
    if (val) {
        for (std::size_t i = 0; i < n_scenes / 4 + 4; ++i)
            val->push_back(generate_scene(vocab, cfg, rng, in, in, "v" + std::to_string(i)));
    }
    return scenes;
}

}  // namespace

TEST_CASE("encode with zero weights is the zero map, deterministic, right shape") {
    ImaginationModel model = zero_model(6, 5, 3);
    Vec v{1.0, -2.0, 0.5, 0.0, 3.0, -1.0};
    Vec z = model.encode(v);
    REQUIRE(z.size() == 3);
    for (double x : z) CHECK(x == 0.0);
    CHECK(model.encode(v) == model.encode(v));
    Vec out = model.decode(z);
    REQUIRE(out.size() == 6);
    for (double x : out) CHECK(x == 0.0);
    CHECK_THROWS_AS((void)model.encode(Vec{1.0}), shape_error);
    CHECK_THROWS_AS((void)model.decode(Vec{1.0}), shape_error);
}

TEST_CASE("sample_negative forced choices") {
    Rng scene_rng(2);
    Scene two = tiny_scene({0, 1}, 4, scene_rng);
    Rng rng(3);
    for (int i = 0; i < 20; ++i) CHECK(sample_negative(two, 0, rng) == 1);

    Scene aab = tiny_scene({5, 5, 9}, 4, scene_rng);
    for (int i = 0; i < 20; ++i) {
        CHECK(sample_negative(aab, 0, rng) == 2);
        CHECK(sample_negative(aab, 1, rng) == 2);
    }

    Scene same = tiny_scene({5, 5}, 4, scene_rng);
    CHECK_THROWS_AS((void)sample_negative(same, 0, rng), validation_error);
}

TEST_CASE("sample_negative is uniform over valid negatives (multinomial oracle)") {
    Rng scene_rng(4);
    Scene scene = tiny_scene({1, 2, 3, 4}, 4, scene_rng);  // anchor 0; negatives 1,2,3
    Rng rng(5);
    std::map<std::size_t, std::size_t> counts;
    const std::size_t draws = 10000;
    for (std::size_t i = 0; i < draws; ++i) counts[sample_negative(scene, 0, rng)] += 1;
    const double p = 1.0 / 3.0;
    const double sigma = std::sqrt(draws * p * (1.0 - p));
    for (std::size_t j = 1; j <= 3; ++j) {
        const double diff = std::abs(static_cast<double>(counts[j]) - draws * p);
        CHECK(diff < 3.0 * sigma);
    }
}

TEST_CASE("reconstruction loss: margin exactly met gives zero") {
    // v_tilde == v_i so MSE(v_i, v_tilde) = 0; pick v_j with MSE == eta.
    Vec v_i{1.0, 1.0};
    Vec v_tilde = v_i;
    Vec v_j{2.0, 2.0};  // MSE = 1.0
    auto r = reconstruction_loss(v_i, v_j, v_tilde, 1.0);
    CHECK(r.loss == 0.0);
    CHECK(!r.hinge_active);
}

TEST_CASE("reconstruction loss: equidistant case equals eta") {
    Vec v_i{1.0, 0.0};
    Vec v_j{0.0, 1.0};
    Vec v_tilde{0.5, 0.5};
    auto r = reconstruction_loss(v_i, v_j, v_tilde, 0.7);
    CHECK(r.loss == doctest::Approx(0.7));
}

TEST_CASE("reconstruction loss hand-computed case, decreasing toward the anchor") {
    // MSE(v_i, vt) = MSE(v_j, vt) = 0.25, eta = 1 -> loss = 1.0 exactly.
    Vec v_i{1.0, 0.0};
    Vec v_j{0.0, 1.0};
    Vec v_tilde{0.5, 0.5};
    auto r = reconstruction_loss(v_i, v_j, v_tilde, 1.0);
    CHECK(r.loss == doctest::Approx(1.0));
    CHECK(r.hinge_active);

    // Nudging the reconstruction toward the anchor lowers the loss.
    Vec nudged{0.6, 0.4};
    auto r2 = reconstruction_loss(v_i, v_j, nudged, 1.0);
    CHECK(r2.loss < r.loss);

    // Scalar hand evaluation: MSE_i = ((0.4)^2+(0.4)^2)/2 = 0.16,
    // MSE_j = ((0.6)^2+(0.6)^2)/2 = 0.36 -> loss = 1 + 0.16 - 0.36 = 0.8.
    CHECK(r2.loss == doctest::Approx(0.8));
}

TEST_CASE("hinge-inactive region has exactly zero gradient") {
    Vec v_i{0.0, 0.0};
    Vec v_tilde{0.1, 0.1};  // close to anchor
    Vec v_j{10.0, 10.0};    // far away: margin satisfied with huge slack
    auto r = reconstruction_loss(v_i, v_j, v_tilde, 1.0);
    CHECK(r.loss == 0.0);
    for (double g : r.grad_vtilde) CHECK(g == 0.0);
}

TEST_CASE("reconstruction loss is non-negative on 10,000 random triples") {
    Rng rng(6);
    for (int i = 0; i < 10000; ++i) {
        Vec a(4), b(4), c(4);
        for (double& x : a) x = rng.normal();
        for (double& x : b) x = rng.normal();
        for (double& x : c) x = rng.normal();
        const double eta = rng.uniform(0.01, 3.0);
        auto r = reconstruction_loss(a, b, c, eta, false);
        CHECK(r.loss >= 0.0);
        auto rl = reconstruction_loss(a, b, c, eta, true);
        CHECK(rl.loss >= 0.0);
    }
}

TEST_CASE("paper-literal sign flag flips the hinge orientation") {
    Vec v_i{1.0, 0.0};
    Vec v_j{0.0, 1.0};
    Vec near_anchor{0.9, 0.1};
    auto std_r = reconstruction_loss(v_i, v_j, near_anchor, 0.5, false);
    auto lit_r = reconstruction_loss(v_i, v_j, near_anchor, 0.5, true);
    CHECK(std_r.loss == 0.0);
    CHECK(lit_r.loss > 0.0);
}

TEST_CASE("regularization loss basics") {
    DenseNet zero_decoder = zero_model(4, 3, 2).decoder;
    CHECK(regularization_loss(Vec{0.0, 0.0}, zero_decoder) == 0.0);
    CHECK(regularization_loss(Vec{3.0, 4.0}, zero_decoder) == doctest::Approx(5.0));
}

TEST_CASE("regularization loss matches a flatten-and-norm oracle") {
    Rng rng(7);
    ImaginationConfig cfg;
    cfg.d_z = 3;
    cfg.hidden = 4;
    ImaginationModel model = ImaginationModel::make(5, cfg, 0, rng);
    Vec z{0.3, -0.2, 0.9};

    double z_sq = 0.0;
    for (double x : z) z_sq += x * x;
    double theta_sq = 0.0;
    for (const auto& layer : model.decoder.layers) {
        for (double w : layer.weight.data) theta_sq += w * w;
        for (double b : layer.bias) theta_sq += b * b;
    }
    const double expected = std::sqrt(z_sq) + std::sqrt(theta_sq);
    CHECK(regularization_loss(z, model.decoder) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("imagination loss with alpha=0 equals the reconstruction loss") {
    Rng rng(8);
    ImaginationConfig cfg;
    cfg.d_z = 3;
    cfg.hidden = 5;
    cfg.alpha = 0.0;
    ImaginationModel model = ImaginationModel::make(4, cfg, 0, rng);
    Rng scene_rng(9);
    Scene scene = tiny_scene({0, 1, 2}, 4, scene_rng);

    Rng rng_a(10);
    auto res = imagination_loss(model, scene, 0, rng_a);
    Vec z = model.encode(scene.objects[0].perceptual);
    Vec vt = model.decode(z);
    auto rec = reconstruction_loss(scene.objects[0].perceptual,
                                   scene.objects[res.negative].perceptual, vt, model.eta);
    CHECK(res.loss == doctest::Approx(rec.loss).epsilon(1e-12));
}

TEST_CASE("all-zero model on a norm-matched pair yields exactly eta") {
    // Zero net reconstructs the zero vector, equidistant from any pair with
    // equal norms, so the hinge sits exactly at the margin.
    ImaginationModel model = zero_model(2, 3, 2);
    model.alpha = 0.123;  // regularizer contributes 0: ||z|| = ||theta|| = 0
    Scene scene;
    scene.id = "pair";
    scene.width = scene.height = 10;
    GameObject a, b;
    a.id = 0;
    a.category = 0;
    a.perceptual = {1.0, 0.0};
    b.id = 1;
    b.category = 1;
    b.perceptual = {0.0, -1.0};  // same norm
    a.bbox = b.bbox = {1, 1, 2, 2};
    a.spatial = b.spatial = spatial_features({1, 1, 2, 2}, 10, 10);
    scene.objects = {a, b};
    scene.target = 0;
    Rng rng(11);
    auto res = imagination_loss(model, scene, 0, rng);
    CHECK(res.loss == doctest::Approx(model.eta));
}

TEST_CASE("imagination loss gradients match finite differences") {
    // Tiny model (d_o=6, hidden=5, d_z=3), 20 seeds, rel err < 1e-4.
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed * 977);
        ImaginationConfig cfg;
        cfg.d_z = 3;
        cfg.hidden = 5;
        cfg.alpha = 1e-2;
        cfg.eta = 0.8;
        cfg.aux_category_loss = (seed % 3 == 0);
        cfg.paper_literal_sign = (seed % 4 == 0);
        ImaginationModel model = ImaginationModel::make(6, cfg, 4, rng);
        if (model.category_head) model.class_weights = {1.5, 0.5, 1.0, 1.0};

        Rng scene_rng(seed);
        Scene scene = tiny_scene({0, 1}, 6, scene_rng);  // single valid negative
        const int label = 2;

        Rng g_rng(3);
        auto res =
            imagination_loss(model, scene, 0, g_rng, model.category_head ? label : -1);
        Vec analytic = res.grads.flatten();

        ParamPack pack = model.params();
        Vec params = pack.flatten();
        ImaginationModel probe = model;
        ParamPack probe_pack = probe.params();
        auto f = [&](const Vec& p) {
            probe_pack.load(p);
            Rng r(3);
            return imagination_loss(probe, scene, 0, r, probe.category_head ? label : -1)
                .loss;
        };
        Vec numeric = finite_diff_grad(f, params, 1e-5);
        REQUIRE(numeric.size() == analytic.size());
        double max_rel = 0.0;
        for (std::size_t i = 0; i < numeric.size(); ++i) {
            const double denom =
                std::max({std::abs(numeric[i]), std::abs(analytic[i]), 1e-6});
            max_rel = std::max(max_rel, std::abs(numeric[i] - analytic[i]) / denom);
        }
        CHECK(max_rel < 1e-4);
    }
}

TEST_CASE("label freedom: category ids never reach encode/decode") {
    WorldConfig wcfg;
    CategoryVocabulary vocab;
    auto scenes = small_training_world(wcfg, vocab, 3, 101);
    Rng rng(12);
    ImaginationConfig cfg;
    ImaginationModel model = ImaginationModel::make(wcfg.d_o, cfg, 0, rng);

    for (auto scene : scenes) {
        Scene permuted = scene;
        for (auto& obj : permuted.objects)
            obj.category = (obj.category + 7) % static_cast<int>(vocab.categories.size());
        for (std::size_t i = 0; i < scene.objects.size(); ++i) {
            Vec z1 = model.encode(scene.objects[i].perceptual);
            Vec z2 = model.encode(permuted.objects[i].perceptual);
            CHECK(z1 == z2);  // bit-identical
            CHECK(model.decode(z1) == model.decode(z2));
        }
    }
}

TEST_CASE("regularizer monotonicity in ||z|| and ||theta||") {
    Rng rng(13);
    ImaginationConfig cfg;
    cfg.d_z = 3;
    cfg.hidden = 4;
    ImaginationModel model = ImaginationModel::make(5, cfg, 0, rng);
    Vec z{0.5, -0.5, 1.0};
    const double base = regularization_loss(z, model.decoder);

    Vec z_scaled = z;
    for (double& x : z_scaled) x *= 2.0;
    CHECK(regularization_loss(z_scaled, model.decoder) > base);

    ImaginationModel scaled = model;
    for (auto& layer : scaled.decoder.layers)
        for (double& w : layer.weight.data) w *= 2.0;
    CHECK(regularization_loss(z, scaled.decoder) > base);
}

TEST_CASE("training with lr=0 leaves parameters unchanged") {
    WorldConfig wcfg;
    CategoryVocabulary vocab;
    std::vector<Scene> val;
    auto scenes = small_training_world(wcfg, vocab, 2, 300, &val);
    Rng rng(14);
    ImaginationConfig cfg;
    cfg.lr = 0.0;
    cfg.epochs = 1;
    ImaginationModel model = ImaginationModel::make(wcfg.d_o, cfg, 0, rng);
    ParamPack pack = model.params();
    Vec before = pack.flatten();
    Rng train_rng(15);
    train_imagination(model, scenes, val, vocab, cfg, train_rng);
    Vec after = model.params().flatten();
    CHECK(before == after);
}

TEST_CASE("training loss decreases over the first five epochs (3 seeds)") {
    WorldConfig wcfg;
    CategoryVocabulary vocab;
    std::vector<Scene> val;
    auto scenes = small_training_world(wcfg, vocab, 60, 400, &val);

    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        Rng rng(seed);
        ImaginationConfig cfg;
        cfg.epochs = 5;
        cfg.patience = 10;
        ImaginationModel model =
            ImaginationModel::make(wcfg.d_o, cfg, vocab.in_domain_ids().size(), rng);
        Rng train_rng(seed + 100);
        TrainCurve curve = train_imagination(model, scenes, val, vocab, cfg, train_rng);
        REQUIRE(curve.train_loss.size() == 5);
        for (std::size_t e = 1; e < curve.train_loss.size(); ++e)
            CHECK(curve.train_loss[e] < curve.train_loss[e - 1]);
    }
}

TEST_CASE("after training: hinge activation rate below 50% on validation") {
    WorldConfig wcfg;
    CategoryVocabulary vocab;
    std::vector<Scene> val;
    auto scenes = small_training_world(wcfg, vocab, 120, 500, &val);

    Rng rng(16);
    ImaginationConfig cfg;
    cfg.epochs = 30;
    cfg.patience = 30;
    ImaginationModel model = ImaginationModel::make(wcfg.d_o, cfg, 0, rng);
    Rng train_rng(17);
    train_imagination(model, scenes, val, vocab, cfg, train_rng);

    Rng neg_rng(18);
    std::size_t active = 0, total = 0;
    for (const auto& scene : val) {
        for (std::size_t i = 0; i < scene.objects.size(); ++i) {
            auto res = imagination_loss(model, scene, i, neg_rng);
            if (res.hinge_active) ++active;
            ++total;
        }
    }
    CHECK(static_cast<double>(active) / static_cast<double>(total) < 0.5);
}

TEST_CASE("after training: within-category z-similarity beats across-category") {
    WorldConfig wcfg;
    CategoryVocabulary vocab;
    std::vector<Scene> val;
    auto scenes = small_training_world(wcfg, vocab, 120, 600, &val);

    Rng rng(19);
    ImaginationConfig cfg;
    cfg.epochs = 30;
    cfg.patience = 30;
    ImaginationModel model = ImaginationModel::make(wcfg.d_o, cfg, 0, rng);
    Rng train_rng(20);
    train_imagination(model, scenes, val, vocab, cfg, train_rng);

    auto cosine = [](const Vec& a, const Vec& b) {
        const double na = norm(a), nb = norm(b);
        return na > 0 && nb > 0 ? dot(a, b) / (na * nb) : 0.0;
    };
    std::vector<std::pair<int, Vec>> codes;
    for (const auto& scene : val)
        for (const auto& obj : scene.objects)
            codes.emplace_back(obj.category, model.encode(obj.perceptual));

    double within = 0.0, across = 0.0;
    std::size_t nw = 0, na = 0;
    for (std::size_t i = 0; i < codes.size(); ++i) {
        for (std::size_t j = i + 1; j < codes.size(); ++j) {
            const double c = cosine(codes[i].second, codes[j].second);
            if (codes[i].first == codes[j].first) {
                within += c;
                ++nw;
            } else {
                across += c;
                ++na;
            }
        }
    }
    REQUIRE(nw > 0);
    REQUIRE(na > 0);
    CHECK(within / nw > across / na);
}

TEST_CASE("reconstruction reaches the noise floor with a full-capacity latent") {
    // Compression to d_z < d_o cannot beat the iid noise floor, so this check
    // runs the d_z = d_o configuration.
    WorldConfig wcfg;
    CategoryVocabulary vocab;
    std::vector<Scene> val;
    auto scenes = small_training_world(wcfg, vocab, 150, 800, &val);

    Rng rng(22);
    ImaginationConfig cfg;
    cfg.d_z = wcfg.d_o;
    cfg.hidden = 64;
    cfg.epochs = 80;
    cfg.patience = 80;
    cfg.lr = 2e-3;
    ImaginationModel model = ImaginationModel::make(wcfg.d_o, cfg, 0, rng);
    Rng train_rng(23);
    train_imagination(model, scenes, val, vocab, cfg, train_rng);

    double total_mse = 0.0;
    std::size_t n = 0;
    for (const auto& scene : scenes) {
        for (const auto& obj : scene.objects) {
            total_mse += mse(obj.perceptual, model.decode(model.encode(obj.perceptual)));
            ++n;
        }
    }
    const double noise_floor = wcfg.sigma_noise * wcfg.sigma_noise;
    CHECK(total_mse / static_cast<double>(n) < noise_floor);
}

TEST_CASE("imagination checkpoint round-trip preserves behaviour") {
    Rng rng(21);
    ImaginationConfig cfg;
    cfg.aux_category_loss = true;
    ImaginationModel model = ImaginationModel::make(8, cfg, 5, rng);
    model.class_weights = {1.0, 2.0, 0.5, 1.0, 0.5};
    const std::string path = "imagination_roundtrip.ckpt";
    model.to_checkpoint().save(path);
    ImaginationModel loaded = ImaginationModel::from_checkpoint(Checkpoint::load(path));
    Vec v{0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7, -0.8};
    CHECK(model.encode(v) == loaded.encode(v));
    CHECK(loaded.alpha == model.alpha);
    CHECK(loaded.eta == model.eta);
    CHECK(loaded.class_weights == model.class_weights);
    std::remove(path.c_str());
}

TEST_CASE("inverse-frequency class weights have mean one") {
    WorldConfig wcfg;
    CategoryVocabulary vocab;
    auto scenes = small_training_world(wcfg, vocab, 50, 700);
    Vec w = inverse_frequency_weights(scenes, vocab);
    double mean = 0.0;
    std::size_t present = 0;
    for (double x : w)
        if (x > 0) {
            mean += x;
            ++present;
        }
    REQUIRE(present > 0);
    CHECK(mean / present == doctest::Approx(1.0).epsilon(1e-9));
}
