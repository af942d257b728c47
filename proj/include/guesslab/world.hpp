#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "guesslab/numerics.hpp"
#include "guesslab/rng.hpp"

namespace guesslab {

struct WorldConfig {
    std::size_t d_o = 32;
    std::size_t n_supercategories = 6;
    std::size_t n_categories = 30;
    double nd_fraction = 0.2;  // near-domain heldout categories
    double od_fraction = 0.1;  // out-of-domain heldout categories
    double prototype_scale = 1.0;      // per-coordinate sigma of supercategory centroids
    double supercat_offset_scale = 0.5;  // per-coordinate sigma of category offsets
    double attr_offset_scale = 0.25;     // per-coordinate sigma of attribute offsets
    double sigma_noise = 0.15;
    double sigma_ctx = 0.3;
    double min_prototype_distance = 0.5;
    int image_width = 640;
    int image_height = 480;
    std::size_t min_objects = 3;
    std::size_t max_objects = 10;
    std::size_t n_colors = 6;
    std::size_t n_sizes = 3;
    std::size_t n_textures = 4;
    std::size_t n_shapes = 4;
};

struct SplitConfig {
    std::size_t train = 2000;
    std::size_t val = 300;
    std::size_t test = 500;
    std::size_t nd_test = 300;
    std::size_t od_test = 300;
};

enum class Domain { InDomain, NearHeldout, OutHeldout };

enum class AttrKind { Color = 0, Size = 1, Texture = 2, Shape = 3 };
inline constexpr std::size_t kNumAttrKinds = 4;

struct Supercategory {
    int id = 0;
    std::string name;
};

struct Category {
    int id = 0;
    std::string name;
    int supercategory = 0;
    bool animate = false;
    Vec prototype;
};

struct CategoryVocabulary {
    std::vector<Supercategory> supercategories;
    std::vector<Category> categories;
    std::vector<Domain> domain;  // parallel to categories
    std::array<std::vector<std::string>, kNumAttrKinds> attr_values;
    std::array<std::vector<Vec>, kNumAttrKinds> attr_offsets;  // per value, length d_o
    std::size_t d_o = 0;

    std::vector<int> ids_in(Domain d) const;
    std::vector<int> in_domain_ids() const { return ids_in(Domain::InDomain); }
    bool is_in_domain(int category_id) const {
        return domain[static_cast<std::size_t>(category_id)] == Domain::InDomain;
    }
    /// Index of a category among in-domain ids, used by classifier heads.
    /// Returns -1 for heldout categories.
    int in_domain_index(int category_id) const;
};

struct Attributes {
    int color = 0;
    int size = 0;
    int texture = 0;
    int shape = 0;

    int get(AttrKind kind) const;
};

struct BBox {
    double x = 0, y = 0, w = 0, h = 0;
};

struct GameObject {
    int id = 0;
    int category = 0;
    Attributes attrs;
    BBox bbox;
    Vec perceptual;             // v_i, length d_o
    std::array<double, 8> spatial{};  // s_i
};

struct Scene {
    std::string id;
    int width = 0;
    int height = 0;
    std::vector<GameObject> objects;
    std::size_t target = 0;

    const GameObject& target_object() const { return objects[target]; }
};

/// [x_min, y_min, x_max, y_max, x_center, y_center, width, height], corner and
/// center coordinates normalized to [-1, 1]; width/height as 2w/W and 2h/H.
std::array<double, 8> spatial_features(const BBox& bbox, int image_w, int image_h);

CategoryVocabulary generate_world(const WorldConfig& config, std::uint64_t seed);

/// One scene with the target drawn from target_pool and distractors from
/// distractor_pool. Resamples until at least two distinct categories appear.
Scene generate_scene(const CategoryVocabulary& vocab, const WorldConfig& config, Rng& rng,
                     const std::vector<int>& target_pool,
                     const std::vector<int>& distractor_pool, std::string scene_id);

struct SplitSet {
    std::vector<Scene> train, val, test, nd_test, od_test;
};

SplitSet build_splits(const CategoryVocabulary& vocab, const WorldConfig& config,
                      const SplitConfig& sizes, std::uint64_t seed);

// JSON-Lines scene files; one scene object per line.
void write_scenes(const std::string& path, const std::vector<Scene>& scenes);
std::vector<Scene> read_scenes(const std::string& path);

void write_vocabulary(const std::string& path, const CategoryVocabulary& vocab);
CategoryVocabulary read_vocabulary(const std::string& path);

}  // namespace guesslab
