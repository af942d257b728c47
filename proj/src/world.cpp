#include "guesslab/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>

#include "guesslab/common.hpp"

namespace guesslab {

using nlohmann::json;

namespace {

// Name pools. Configs larger than a pool fall back to numbered names.
struct SupercatWords {
    const char* name;
    bool animate;
    std::vector<const char*> members;
};

const std::vector<SupercatWords>& word_pools() {
    static const std::vector<SupercatWords> pools = {
        {"person", true, {"man", "woman", "boy", "girl", "baby", "child"}},
        {"animal", true, {"dog", "cat", "horse", "bird", "fish", "sheep"}},
        {"vehicle", false, {"car", "bus", "truck", "bicycle", "boat", "train"}},
        {"food", false, {"apple", "bread", "cake", "donut", "pizza", "banana"}},
        {"furniture", false, {"chair", "table", "sofa", "bed", "desk", "shelf"}},
        {"appliance", false, {"oven", "fridge", "toaster", "kettle", "mixer", "lamp"}},
    };
    return pools;
}

const std::array<std::vector<const char*>, kNumAttrKinds>& attr_word_pools() {
    static const std::array<std::vector<const char*>, kNumAttrKinds> pools = {{
        {"red", "green", "blue", "yellow", "black", "white", "purple", "orange"},
        {"small", "medium", "large"},
        {"smooth", "rough", "striped", "spotted", "glossy", "matte"},
        {"round", "square", "flat", "elongated", "curved", "angular"},
    }};
    return pools;
}

std::string pool_name(const std::vector<const char*>& pool, const std::string& prefix,
                      std::size_t i) {
    if (i < pool.size()) return pool[i];
    return prefix + "-" + std::to_string(i);
}

Vec gaussian_vec(std::size_t n, double scale, Rng& rng) {
    Vec v(n);
    for (double& x : v) x = scale * rng.normal();
    return v;
}

double euclidean(const Vec& a, const Vec& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

}  // namespace

std::vector<int> CategoryVocabulary::ids_in(Domain d) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < categories.size(); ++i)
        if (domain[i] == d) out.push_back(categories[i].id);
    return out;
}

int CategoryVocabulary::in_domain_index(int category_id) const {
    int idx = 0;
    for (std::size_t i = 0; i < categories.size(); ++i) {
        if (domain[i] != Domain::InDomain) continue;
        if (categories[i].id == category_id) return idx;
        ++idx;
    }
    return -1;
}

int Attributes::get(AttrKind kind) const {
    switch (kind) {
        case AttrKind::Color: return color;
        case AttrKind::Size: return size;
        case AttrKind::Texture: return texture;
        case AttrKind::Shape: return shape;
    }
    return 0;
}

std::array<double, 8> spatial_features(const BBox& bbox, int image_w, int image_h) {
    if (bbox.w <= 0.0 || bbox.h <= 0.0)
        throw validation_error("spatial_features: degenerate bbox (zero area)");
    if (bbox.x < 0 || bbox.y < 0 || bbox.x + bbox.w > image_w || bbox.y + bbox.h > image_h)
        throw validation_error("spatial_features: bbox outside image bounds");
    const double W = image_w, H = image_h;
    const double x_min = 2.0 * bbox.x / W - 1.0;
    const double y_min = 2.0 * bbox.y / H - 1.0;
    const double x_max = 2.0 * (bbox.x + bbox.w) / W - 1.0;
    const double y_max = 2.0 * (bbox.y + bbox.h) / H - 1.0;
    const double x_c = 2.0 * (bbox.x + bbox.w / 2.0) / W - 1.0;
    const double y_c = 2.0 * (bbox.y + bbox.h / 2.0) / H - 1.0;
    return {x_min, y_min, x_max, y_max, x_c, y_c, 2.0 * bbox.w / W, 2.0 * bbox.h / H};
}

CategoryVocabulary generate_world(const WorldConfig& config, std::uint64_t seed) {
    if (config.n_supercategories == 0 || config.n_categories < config.n_supercategories)
        throw config_error("generate_world: need at least one category per supercategory");

    const std::size_t od_count =
        static_cast<std::size_t>(std::llround(config.od_fraction * config.n_categories));
    const std::size_t nd_count =
        static_cast<std::size_t>(std::llround(config.nd_fraction * config.n_categories));

    // OD heldout categories must exhaust whole supercategories. One
    // supercategory is sized to exactly od_count; the rest share the remainder.
    std::size_t n_regular = config.n_supercategories - (od_count > 0 ? 1 : 0);
    if (od_count > 0 && n_regular == 0)
        throw config_error("generate_world: od_fraction needs a spare supercategory");
    const std::size_t remaining = config.n_categories - od_count;
    if (remaining < n_regular)
        throw config_error("generate_world: too few categories for the supercategory count");
    if (nd_count > remaining - n_regular)
        throw config_error("generate_world: nd_fraction leaves a supercategory empty");

    Rng rng = Rng::named(seed, "world");

    CategoryVocabulary vocab;
    vocab.d_o = config.d_o;
    const auto& pools = word_pools();
    for (std::size_t s = 0; s < config.n_supercategories; ++s) {
        Supercategory sc;
        sc.id = static_cast<int>(s);
        sc.name = s < pools.size() ? pools[s].name : "group-" + std::to_string(s);
        vocab.supercategories.push_back(std::move(sc));
    }

    // Category counts per supercategory. The OD supercategory is chosen by
    // seed among the configured ones and sized to od_count exactly.
    std::vector<std::size_t> counts(config.n_supercategories, 0);
    std::size_t od_super = config.n_supercategories;  // none
    if (od_count > 0) od_super = rng.uniform_index(config.n_supercategories);
    {
        std::size_t left = remaining;
        std::size_t s = 0;
        while (left > 0) {
            if (s % config.n_supercategories != od_super || od_count == 0) {
                counts[s % config.n_supercategories] += 1;
                --left;
            }
            ++s;
        }
        if (od_count > 0) counts[od_super] = od_count;
    }

    // Supercategory centroids, then per-category prototype = centroid + offset.
    std::vector<Vec> centroids;
    for (std::size_t s = 0; s < config.n_supercategories; ++s)
        centroids.push_back(gaussian_vec(config.d_o, config.prototype_scale, rng));

    int next_id = 0;
    for (std::size_t s = 0; s < config.n_supercategories; ++s) {
        const bool animate = s < pools.size() ? pools[s].animate : false;
        for (std::size_t k = 0; k < counts[s]; ++k) {
            Category cat;
            cat.id = next_id++;
            cat.supercategory = static_cast<int>(s);
            cat.animate = animate;
            cat.name = s < pools.size()
                           ? pool_name(pools[s].members, vocab.supercategories[s].name, k)
                           : vocab.supercategories[s].name + "-" + std::to_string(k);
            cat.prototype = centroids[s];
            Vec offset = gaussian_vec(config.d_o, config.supercat_offset_scale, rng);
            for (std::size_t i = 0; i < config.d_o; ++i) cat.prototype[i] += offset[i];
            vocab.categories.push_back(std::move(cat));
        }
    }

    // Enforce the pairwise-distance floor by resampling the offender's offset.
    for (std::size_t i = 0; i < vocab.categories.size(); ++i) {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            bool ok = true;
            for (std::size_t j = 0; j < i; ++j) {
                if (euclidean(vocab.categories[i].prototype, vocab.categories[j].prototype) <=
                    config.min_prototype_distance) {
                    ok = false;
                    break;
                }
            }
            if (ok) break;
            if (attempt == 999)
                throw config_error("generate_world: cannot satisfy prototype distance floor");
            Vec proto = centroids[static_cast<std::size_t>(vocab.categories[i].supercategory)];
            Vec offset = gaussian_vec(config.d_o, config.supercat_offset_scale, rng);
            for (std::size_t k = 0; k < config.d_o; ++k) proto[k] += offset[k];
            vocab.categories[i].prototype = std::move(proto);
        }
    }

    // Domain partition: the OD supercategory is entirely heldout; ND heldout
    // categories are taken round-robin from the others, never emptying one.
    vocab.domain.assign(vocab.categories.size(), Domain::InDomain);
    for (std::size_t i = 0; i < vocab.categories.size(); ++i)
        if (od_count > 0 &&
            vocab.categories[i].supercategory == static_cast<int>(od_super))
            vocab.domain[i] = Domain::OutHeldout;

    std::vector<std::size_t> in_per_super(config.n_supercategories, 0);
    for (std::size_t i = 0; i < vocab.categories.size(); ++i)
        if (vocab.domain[i] == Domain::InDomain)
            in_per_super[static_cast<std::size_t>(vocab.categories[i].supercategory)] += 1;

    std::size_t nd_left = nd_count;
    while (nd_left > 0) {
        bool progressed = false;
        for (std::size_t s = 0; s < config.n_supercategories && nd_left > 0; ++s) {
            if (s == od_super || in_per_super[s] <= 1) continue;
            // Hold out the last still-in-domain category of this supercategory.
            for (std::size_t i = vocab.categories.size(); i-- > 0;) {
                if (vocab.domain[i] == Domain::InDomain &&
                    vocab.categories[i].supercategory == static_cast<int>(s)) {
                    vocab.domain[i] = Domain::NearHeldout;
                    in_per_super[s] -= 1;
                    nd_left -= 1;
                    progressed = true;
                    break;
                }
            }
        }
        if (!progressed)
            throw config_error("generate_world: nd_fraction infeasible for this partition");
    }

    const auto& apools = attr_word_pools();
    const std::array<std::size_t, kNumAttrKinds> attr_counts = {
        config.n_colors, config.n_sizes, config.n_textures, config.n_shapes};
    const std::array<const char*, kNumAttrKinds> attr_prefix = {"color", "size", "texture",
                                                                "shape"};
    for (std::size_t a = 0; a < kNumAttrKinds; ++a) {
        for (std::size_t v = 0; v < attr_counts[a]; ++v) {
            vocab.attr_values[a].push_back(pool_name(apools[a], attr_prefix[a], v));
            vocab.attr_offsets[a].push_back(
                gaussian_vec(config.d_o, config.attr_offset_scale, rng));
        }
    }
    return vocab;
}

Scene generate_scene(const CategoryVocabulary& vocab, const WorldConfig& config, Rng& rng,
                     const std::vector<int>& target_pool,
                     const std::vector<int>& distractor_pool, std::string scene_id) {
    if (target_pool.empty() || distractor_pool.empty())
        throw config_error("generate_scene: empty category pool");

    for (int attempt = 0; attempt < 1000; ++attempt) {
        Scene scene;
        scene.id = std::move(scene_id);
        scene.width = config.image_width;
        scene.height = config.image_height;

        const std::size_t n =
            config.min_objects + rng.uniform_index(config.max_objects - config.min_objects + 1);
        const std::size_t target = rng.uniform_index(n);
        Vec ctx = gaussian_vec(config.d_o, config.sigma_ctx, rng);

        for (std::size_t i = 0; i < n; ++i) {
            GameObject obj;
            obj.id = static_cast<int>(i);
            const auto& pool = (i == target) ? target_pool : distractor_pool;
            obj.category = pool[rng.uniform_index(pool.size())];
            obj.attrs.color = static_cast<int>(rng.uniform_index(config.n_colors));
            obj.attrs.size = static_cast<int>(rng.uniform_index(config.n_sizes));
            obj.attrs.texture = static_cast<int>(rng.uniform_index(config.n_textures));
            obj.attrs.shape = static_cast<int>(rng.uniform_index(config.n_shapes));

            // Size class scales the box: small/medium/large thirds of the image.
            const double base = 0.12 + 0.10 * obj.attrs.size;
            const double bw = std::max(4.0, base * config.image_width * rng.uniform(0.7, 1.3));
            const double bh = std::max(4.0, base * config.image_height * rng.uniform(0.7, 1.3));
            const double w = std::min(bw, config.image_width - 2.0);
            const double h = std::min(bh, config.image_height - 2.0);
            obj.bbox.x = rng.uniform(0.0, config.image_width - w);
            obj.bbox.y = rng.uniform(0.0, config.image_height - h);
            obj.bbox.w = w;
            obj.bbox.h = h;
            obj.spatial = spatial_features(obj.bbox, config.image_width, config.image_height);

            const Category& cat = vocab.categories[static_cast<std::size_t>(obj.category)];
            obj.perceptual = cat.prototype;
            for (std::size_t a = 0; a < kNumAttrKinds; ++a) {
                const Vec& off = vocab.attr_offsets[a][static_cast<std::size_t>(
                    obj.attrs.get(static_cast<AttrKind>(a)))];
                for (std::size_t k = 0; k < config.d_o; ++k) obj.perceptual[k] += off[k];
            }
            for (std::size_t k = 0; k < config.d_o; ++k)
                obj.perceptual[k] += ctx[k] + config.sigma_noise * rng.normal();
            scene.objects.push_back(std::move(obj));
        }
        scene.target = target;

        std::set<int> distinct;
        for (const auto& obj : scene.objects) distinct.insert(obj.category);
        if (distinct.size() >= 2) return scene;
        scene_id = scene.id;  // reuse for the retry
    }
    throw config_error("generate_scene: could not satisfy the two-category invariant");
}

SplitSet build_splits(const CategoryVocabulary& vocab, const WorldConfig& config,
                      const SplitConfig& sizes, std::uint64_t seed) {
    const std::vector<int> in = vocab.ids_in(Domain::InDomain);
    const std::vector<int> nd = vocab.ids_in(Domain::NearHeldout);
    const std::vector<int> od = vocab.ids_in(Domain::OutHeldout);

    SplitSet out;
    auto fill = [&](std::vector<Scene>& dst, std::size_t count, const std::string& prefix,
                    const std::vector<int>& target_pool) {
        Rng rng = Rng::named(seed, "split." + prefix);
        for (std::size_t i = 0; i < count; ++i) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%s-%06zu", prefix.c_str(), i);
            dst.push_back(generate_scene(vocab, config, rng, target_pool, in, buf));
        }
    };
    fill(out.train, sizes.train, "train", in);
    fill(out.val, sizes.val, "val", in);
    fill(out.test, sizes.test, "test", in);
    if (sizes.nd_test > 0 && nd.empty())
        throw config_error("build_splits: nd_test requested but no ND heldout categories");
    if (sizes.od_test > 0 && od.empty())
        throw config_error("build_splits: od_test requested but no OD heldout categories");
    fill(out.nd_test, sizes.nd_test, "nd", nd);
    fill(out.od_test, sizes.od_test, "od", od);
    return out;
}

namespace {

json scene_to_json(const Scene& scene) {
    json objs = json::array();
    for (const auto& obj : scene.objects) {
        json attrs = {{"color", obj.attrs.color},
                      {"size", obj.attrs.size},
                      {"texture", obj.attrs.texture},
                      {"shape", obj.attrs.shape}};
        objs.push_back({{"id", obj.id},
                        {"category", obj.category},
                        {"attributes", attrs},
                        {"bbox", {obj.bbox.x, obj.bbox.y, obj.bbox.w, obj.bbox.h}},
                        {"v", obj.perceptual},
                        {"s", obj.spatial}});
    }
    return {{"scene_id", scene.id},
            {"width", scene.width},
            {"height", scene.height},
            {"target", scene.target},
            {"objects", objs}};
}

Scene scene_from_json(const json& j) {
    Scene scene;
    scene.id = j.at("scene_id").get<std::string>();
    scene.width = j.at("width").get<int>();
    scene.height = j.at("height").get<int>();
    scene.target = j.at("target").get<std::size_t>();
    for (const auto& jo : j.at("objects")) {
        GameObject obj;
        obj.id = jo.at("id").get<int>();
        obj.category = jo.at("category").get<int>();
        const auto& attrs = jo.at("attributes");
        obj.attrs.color = attrs.at("color").get<int>();
        obj.attrs.size = attrs.at("size").get<int>();
        obj.attrs.texture = attrs.at("texture").get<int>();
        obj.attrs.shape = attrs.at("shape").get<int>();
        const auto& bb = jo.at("bbox");
        obj.bbox = {bb.at(0).get<double>(), bb.at(1).get<double>(), bb.at(2).get<double>(),
                    bb.at(3).get<double>()};
        obj.perceptual = jo.at("v").get<Vec>();
        const auto& s = jo.at("s");
        for (std::size_t i = 0; i < 8; ++i) obj.spatial[i] = s.at(i).get<double>();
        scene.objects.push_back(std::move(obj));
    }
    if (scene.target >= scene.objects.size())
        throw parse_error("scene " + scene.id + ": target index out of range");
    return scene;
}

}  // namespace

void write_scenes(const std::string& path, const std::vector<Scene>& scenes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot open scene file for writing: " + path);
    for (const auto& scene : scenes) out << scene_to_json(scene).dump() << "\n";
}

std::vector<Scene> read_scenes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open scene file: " + path);
    std::vector<Scene> scenes;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            scenes.push_back(scene_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw parse_error(path + ": malformed scene at line " + std::to_string(line_no) +
                              ": " + e.what());
        }
    }
    return scenes;
}

void write_vocabulary(const std::string& path, const CategoryVocabulary& vocab) {
    json supers = json::array();
    for (const auto& sc : vocab.supercategories)
        supers.push_back({{"id", sc.id}, {"name", sc.name}});
    json cats = json::array();
    static const char* domain_names[] = {"in_domain", "nd_heldout", "od_heldout"};
    for (std::size_t i = 0; i < vocab.categories.size(); ++i) {
        const auto& c = vocab.categories[i];
        cats.push_back({{"id", c.id},
                        {"name", c.name},
                        {"supercategory", c.supercategory},
                        {"animate", c.animate},
                        {"domain", domain_names[static_cast<int>(vocab.domain[i])]},
                        {"prototype", c.prototype}});
    }
    json attrs = json::object();
    static const char* kind_names[] = {"color", "size", "texture", "shape"};
    for (std::size_t a = 0; a < kNumAttrKinds; ++a) {
        json values = json::array();
        for (std::size_t v = 0; v < vocab.attr_values[a].size(); ++v)
            values.push_back(
                {{"name", vocab.attr_values[a][v]}, {"offset", vocab.attr_offsets[a][v]}});
        attrs[kind_names[a]] = values;
    }
    json doc = {{"d_o", vocab.d_o},
                {"supercategories", supers},
                {"categories", cats},
                {"attributes", attrs}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot open vocabulary for writing: " + path);
    out << doc.dump(2) << "\n";
}

CategoryVocabulary read_vocabulary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open vocabulary: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw parse_error(path + ": " + e.what());
    }
    CategoryVocabulary vocab;
    vocab.d_o = doc.at("d_o").get<std::size_t>();
    for (const auto& js : doc.at("supercategories")) {
        Supercategory sc;
        sc.id = js.at("id").get<int>();
        sc.name = js.at("name").get<std::string>();
        vocab.supercategories.push_back(sc);
    }
    for (const auto& jc : doc.at("categories")) {
        Category c;
        c.id = jc.at("id").get<int>();
        c.name = jc.at("name").get<std::string>();
        c.supercategory = jc.at("supercategory").get<int>();
        c.animate = jc.at("animate").get<bool>();
        c.prototype = jc.at("prototype").get<Vec>();
        const std::string d = jc.at("domain").get<std::string>();
        vocab.categories.push_back(std::move(c));
        if (d == "in_domain")
            vocab.domain.push_back(Domain::InDomain);
        else if (d == "nd_heldout")
            vocab.domain.push_back(Domain::NearHeldout);
        else if (d == "od_heldout")
            vocab.domain.push_back(Domain::OutHeldout);
        else
            throw parse_error(path + ": unknown domain tag " + d);
    }
    static const char* kind_names[] = {"color", "size", "texture", "shape"};
    for (std::size_t a = 0; a < kNumAttrKinds; ++a) {
        for (const auto& jv : doc.at("attributes").at(kind_names[a])) {
            vocab.attr_values[a].push_back(jv.at("name").get<std::string>());
            vocab.attr_offsets[a].push_back(jv.at("offset").get<Vec>());
        }
    }
    return vocab;
}

}  // namespace guesslab
