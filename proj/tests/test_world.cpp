#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "guesslab/common.hpp"
#include "guesslab/world.hpp"

using namespace guesslab;

namespace {

double euclid(const Vec& a, const Vec& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(acc);
}

WorldConfig default_world() { return WorldConfig{}; }

bool scenes_equal(const Scene& a, const Scene& b) {
    if (a.id != b.id || a.width != b.width || a.height != b.height || a.target != b.target ||
        a.objects.size() != b.objects.size())
        return false;
    for (std::size_t i = 0; i < a.objects.size(); ++i) {
        const auto& x = a.objects[i];
        const auto& y = b.objects[i];
        if (x.id != y.id || x.category != y.category || x.perceptual != y.perceptual)
            return false;
        if (x.attrs.color != y.attrs.color || x.attrs.size != y.attrs.size ||
            x.attrs.texture != y.attrs.texture || x.attrs.shape != y.attrs.shape)
            return false;
        for (std::size_t k = 0; k < 8; ++k)
            if (x.spatial[k] != y.spatial[k]) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("generate_world is deterministic given a seed") {
    WorldConfig cfg = default_world();
    CategoryVocabulary a = generate_world(cfg, 7);
    CategoryVocabulary b = generate_world(cfg, 7);
    REQUIRE(a.categories.size() == b.categories.size());
    for (std::size_t i = 0; i < a.categories.size(); ++i) {
        CHECK(a.categories[i].name == b.categories[i].name);
        CHECK(a.categories[i].prototype == b.categories[i].prototype);
        CHECK(a.domain[i] == b.domain[i]);
    }
}

TEST_CASE("heldout partition arithmetic: 30 categories, 20% ND, 10% OD") {
    CategoryVocabulary vocab = generate_world(default_world(), 1);
    CHECK(vocab.ids_in(Domain::InDomain).size() == 21);
    CHECK(vocab.ids_in(Domain::NearHeldout).size() == 6);
    CHECK(vocab.ids_in(Domain::OutHeldout).size() == 3);
    CHECK(vocab.categories.size() == 30);
}

TEST_CASE("heldout domain invariants") {
    CategoryVocabulary vocab = generate_world(default_world(), 3);
    std::set<int> in_supers;
    for (std::size_t i = 0; i < vocab.categories.size(); ++i)
        if (vocab.domain[i] == Domain::InDomain)
            in_supers.insert(vocab.categories[i].supercategory);
    for (std::size_t i = 0; i < vocab.categories.size(); ++i) {
        if (vocab.domain[i] == Domain::NearHeldout)
            CHECK(in_supers.count(vocab.categories[i].supercategory) == 1);
        if (vocab.domain[i] == Domain::OutHeldout)
            CHECK(in_supers.count(vocab.categories[i].supercategory) == 0);
    }
}

TEST_CASE("prototypes cluster by supercategory (brute-force pairwise oracle)") {
    CategoryVocabulary vocab = generate_world(default_world(), 5);
    double within = 0.0, across = 0.0;
    std::size_t n_within = 0, n_across = 0;
    for (std::size_t i = 0; i < vocab.categories.size(); ++i) {
        for (std::size_t j = i + 1; j < vocab.categories.size(); ++j) {
            const double d = euclid(vocab.categories[i].prototype,
                                    vocab.categories[j].prototype);
            if (vocab.categories[i].supercategory == vocab.categories[j].supercategory) {
                within += d;
                ++n_within;
            } else {
                across += d;
                ++n_across;
            }
        }
    }
    CHECK(within / n_within < across / n_across);
}

TEST_CASE("prototype pairwise distances respect the floor") {
    WorldConfig cfg = default_world();
    CategoryVocabulary vocab = generate_world(cfg, 9);
    for (std::size_t i = 0; i < vocab.categories.size(); ++i)
        for (std::size_t j = i + 1; j < vocab.categories.size(); ++j)
            CHECK(euclid(vocab.categories[i].prototype, vocab.categories[j].prototype) >
                  cfg.min_prototype_distance);
}

TEST_CASE("infeasible partitions raise config errors") {
    WorldConfig cfg = default_world();
    cfg.n_supercategories = 1;
    cfg.od_fraction = 0.1;  // OD would consume the only supercategory
    CHECK_THROWS_AS((void)generate_world(cfg, 1), config_error);

    WorldConfig cfg2 = default_world();
    cfg2.nd_fraction = 0.95;  // would empty a supercategory
    CHECK_THROWS_AS((void)generate_world(cfg2, 1), config_error);
}

TEST_CASE("degenerate noise: object perceptual equals its prototype") {
    WorldConfig cfg = default_world();
    cfg.sigma_noise = 0.0;
    cfg.sigma_ctx = 0.0;
    cfg.attr_offset_scale = 0.0;
    CategoryVocabulary vocab = generate_world(cfg, 2);
    Rng rng(1);
    auto in = vocab.in_domain_ids();
    Scene scene = generate_scene(vocab, cfg, rng, in, in, "s");
    for (const auto& obj : scene.objects) {
        const auto& proto = vocab.categories[static_cast<std::size_t>(obj.category)].prototype;
        for (std::size_t k = 0; k < proto.size(); ++k)
            CHECK(obj.perceptual[k] == doctest::Approx(proto[k]).epsilon(1e-12));
    }
}

TEST_CASE("same scene shares one context shift") {
    // With zero iid noise, two same-category same-attribute objects in one
    // scene have identical perceptual vectors; across scenes they differ.
    WorldConfig cfg = default_world();
    cfg.sigma_noise = 0.0;
    cfg.sigma_ctx = 0.5;
    cfg.attr_offset_scale = 0.0;
    cfg.n_colors = cfg.n_sizes = cfg.n_textures = cfg.n_shapes = 1;
    cfg.min_objects = cfg.max_objects = 6;
    CategoryVocabulary vocab = generate_world(cfg, 2);
    Rng rng(3);
    auto in = vocab.in_domain_ids();
    Scene scene = generate_scene(vocab, cfg, rng, in, in, "s0");
    bool found_pair = false;
    for (std::size_t i = 0; i < scene.objects.size() && !found_pair; ++i) {
        for (std::size_t j = i + 1; j < scene.objects.size(); ++j) {
            if (scene.objects[i].category == scene.objects[j].category) {
                CHECK(scene.objects[i].perceptual == scene.objects[j].perceptual);
                found_pair = true;
                break;
            }
        }
    }
    Scene scene2 = generate_scene(vocab, cfg, rng, in, in, "s1");
    CHECK(scene.objects[0].perceptual != scene2.objects[0].perceptual);
}

TEST_CASE("nearest-prototype classification recovers categories on >95% of objects") {
    WorldConfig cfg = default_world();
    CategoryVocabulary vocab = generate_world(cfg, 11);
    Rng rng(17);
    auto in = vocab.in_domain_ids();
    std::size_t correct = 0, total = 0;
    while (total < 1000) {
        Scene scene = generate_scene(vocab, cfg, rng, in, in, "s");
        for (const auto& obj : scene.objects) {
            if (total >= 1000) break;
            double best = 1e300;
            int best_cat = -1;
            for (const auto& cat : vocab.categories) {
                const double d = euclid(obj.perceptual, cat.prototype);
                if (d < best) {
                    best = d;
                    best_cat = cat.id;
                }
            }
            if (best_cat == obj.category) ++correct;
            ++total;
        }
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(total) > 0.95);
}

TEST_CASE("spatial features of the full-image box") {
    auto s = spatial_features({0.0, 0.0, 100.0, 50.0}, 100, 50);
    CHECK(s[0] == -1.0);
    CHECK(s[1] == -1.0);
    CHECK(s[2] == 1.0);
    CHECK(s[3] == 1.0);
    CHECK(s[4] == 0.0);
    CHECK(s[5] == 0.0);
    CHECK(s[6] == 2.0);
    CHECK(s[7] == 2.0);
}

TEST_CASE("spatial features of a centered quarter-size box") {
    auto s = spatial_features({37.5, 37.5, 25.0, 25.0}, 100, 100);
    CHECK(s[4] == doctest::Approx(0.0));
    CHECK(s[5] == doctest::Approx(0.0));
}

TEST_CASE("spatial features match hand-applied normalization") {
    // bbox (10,20,30,40) on a 200x100 image.
    auto s = spatial_features({10.0, 20.0, 30.0, 40.0}, 200, 100);
    CHECK(s[0] == doctest::Approx(-0.9));
    CHECK(s[1] == doctest::Approx(-0.6));
    CHECK(s[2] == doctest::Approx(-0.6));
    CHECK(s[3] == doctest::Approx(0.2));
    CHECK(s[4] == doctest::Approx(-0.75));
    CHECK(s[5] == doctest::Approx(-0.2));
    CHECK(s[6] == doctest::Approx(0.3));
    CHECK(s[7] == doctest::Approx(0.8));
}

TEST_CASE("degenerate bbox raises a validation error") {
    CHECK_THROWS_AS((void)spatial_features({10.0, 10.0, 0.0, 5.0}, 100, 100),
                    validation_error);
}

TEST_CASE("build_splits sizes and zero-shot hygiene") {
    WorldConfig cfg = default_world();
    SplitConfig sizes;
    sizes.train = 30;
    sizes.val = 10;
    sizes.test = 10;
    sizes.nd_test = 8;
    sizes.od_test = 8;
    CategoryVocabulary vocab = generate_world(cfg, 21);
    SplitSet splits = build_splits(vocab, cfg, sizes, 21);

    CHECK(splits.train.size() == 30);
    CHECK(splits.val.size() == 10);
    CHECK(splits.test.size() == 10);
    CHECK(splits.nd_test.size() == 8);
    CHECK(splits.od_test.size() == 8);

    std::set<int> train_cats;
    for (const auto& scene : splits.train)
        for (const auto& obj : scene.objects) train_cats.insert(obj.category);
    for (int id : train_cats) CHECK(vocab.is_in_domain(id));

    std::set<int> heldout_targets;
    for (const auto& scene : splits.nd_test)
        heldout_targets.insert(scene.target_object().category);
    for (const auto& scene : splits.od_test)
        heldout_targets.insert(scene.target_object().category);
    for (int id : heldout_targets) {
        CHECK(!vocab.is_in_domain(id));
        CHECK(train_cats.count(id) == 0);
    }

    for (const auto& scene : splits.nd_test)
        CHECK(vocab.domain[static_cast<std::size_t>(scene.target_object().category)] ==
              Domain::NearHeldout);
    for (const auto& scene : splits.od_test)
        CHECK(vocab.domain[static_cast<std::size_t>(scene.target_object().category)] ==
              Domain::OutHeldout);
}

TEST_CASE("splits are deterministic and scenes satisfy invariants") {
    WorldConfig cfg = default_world();
    SplitConfig sizes;
    sizes.train = 12;
    sizes.val = 4;
    sizes.test = 4;
    sizes.nd_test = 4;
    sizes.od_test = 4;
    CategoryVocabulary vocab = generate_world(cfg, 31);
    SplitSet a = build_splits(vocab, cfg, sizes, 31);
    SplitSet b = build_splits(vocab, cfg, sizes, 31);
    REQUIRE(a.train.size() == b.train.size());
    for (std::size_t i = 0; i < a.train.size(); ++i)
        CHECK(scenes_equal(a.train[i], b.train[i]));

    for (const auto& scene : a.train) {
        CHECK(scene.objects.size() >= cfg.min_objects);
        CHECK(scene.objects.size() <= cfg.max_objects);
        std::set<int> cats;
        for (const auto& obj : scene.objects) cats.insert(obj.category);
        CHECK(cats.size() >= 2);
        CHECK(scene.target < scene.objects.size());
    }
}

TEST_CASE("within-scene distances beat across-scene same-category distances") {
    // Context-awareness: a shared scene shift pulls same-scene objects together.
    WorldConfig cfg = default_world();
    CategoryVocabulary vocab = generate_world(cfg, 41);
    Rng rng(41);
    auto in = vocab.in_domain_ids();
    std::vector<Scene> scenes;
    for (int i = 0; i < 150; ++i)
        scenes.push_back(generate_scene(vocab, cfg, rng, in, in, "s" + std::to_string(i)));

    double within_sum = 0.0;
    std::size_t within_n = 0;
    double across_sum = 0.0;
    std::size_t across_n = 0;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
        for (std::size_t i = 0; i < scenes[s].objects.size(); ++i) {
            for (std::size_t j = i + 1; j < scenes[s].objects.size(); ++j) {
                if (scenes[s].objects[i].category == scenes[s].objects[j].category) {
                    within_sum += euclid(scenes[s].objects[i].perceptual,
                                         scenes[s].objects[j].perceptual);
                    ++within_n;
                }
            }
        }
        if (s + 1 < scenes.size()) {
            for (const auto& a : scenes[s].objects) {
                for (const auto& b : scenes[s + 1].objects) {
                    if (a.category == b.category) {
                        across_sum += euclid(a.perceptual, b.perceptual);
                        ++across_n;
                    }
                }
            }
        }
    }
    REQUIRE(within_n > 20);
    REQUIRE(across_n > 20);
    CHECK(within_sum / within_n < across_sum / across_n);
}

TEST_CASE("scene JSONL round-trip") {
    WorldConfig cfg = default_world();
    CategoryVocabulary vocab = generate_world(cfg, 51);
    Rng rng(51);
    auto in = vocab.in_domain_ids();
    std::vector<Scene> scenes;
    for (int i = 0; i < 5; ++i)
        scenes.push_back(generate_scene(vocab, cfg, rng, in, in, "rt" + std::to_string(i)));

    const std::string path = "scenes_roundtrip.jsonl";
    write_scenes(path, scenes);
    std::vector<Scene> loaded = read_scenes(path);
    REQUIRE(loaded.size() == scenes.size());
    for (std::size_t i = 0; i < scenes.size(); ++i) CHECK(scenes_equal(scenes[i], loaded[i]));
    std::remove(path.c_str());
}

TEST_CASE("empty scene file reads as empty collection") {
    const std::string path = "scenes_empty.jsonl";
    { std::ofstream out(path); }
    CHECK(read_scenes(path).empty());
    std::remove(path.c_str());
}

TEST_CASE("truncated scene line raises a parse error naming the line") {
    const std::string path = "scenes_bad.jsonl";
    {
        WorldConfig cfg = default_world();
        CategoryVocabulary vocab = generate_world(cfg, 61);
        Rng rng(61);
        auto in = vocab.in_domain_ids();
        write_scenes(path, {generate_scene(vocab, cfg, rng, in, in, "ok")});
        std::ofstream out(path, std::ios::app | std::ios::binary);
        out << "{\"scene_id\": \"broken\"";  // truncated
    }
    CHECK_THROWS_WITH_AS((void)read_scenes(path), doctest::Contains("line 2"), parse_error);
    std::remove(path.c_str());
}

TEST_CASE("vocabulary JSON round-trip") {
    WorldConfig cfg = default_world();
    CategoryVocabulary vocab = generate_world(cfg, 71);
    const std::string path = "vocab_roundtrip.json";
    write_vocabulary(path, vocab);
    CategoryVocabulary loaded = read_vocabulary(path);
    REQUIRE(loaded.categories.size() == vocab.categories.size());
    for (std::size_t i = 0; i < vocab.categories.size(); ++i) {
        CHECK(loaded.categories[i].name == vocab.categories[i].name);
        CHECK(loaded.categories[i].prototype == vocab.categories[i].prototype);
        CHECK(loaded.domain[i] == vocab.domain[i]);
        CHECK(loaded.categories[i].animate == vocab.categories[i].animate);
    }
    for (std::size_t a = 0; a < kNumAttrKinds; ++a) {
        CHECK(loaded.attr_values[a] == vocab.attr_values[a]);
        CHECK(loaded.attr_offsets[a] == vocab.attr_offsets[a]);
    }
    std::remove(path.c_str());
}
