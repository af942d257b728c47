#include "guesslab/config.hpp"

#include <fstream>
#include <sstream>

#include "guesslab/common.hpp"

namespace guesslab {

namespace {

const std::map<std::string, std::string>& default_values() {
    static const std::map<std::string, std::string> defaults = {
        {"seed", "42"},
        // world
        {"world.d_o", "32"},
        {"world.n_supercategories", "6"},
        {"world.n_categories", "30"},
        {"world.nd_fraction", "0.2"},
        {"world.od_fraction", "0.1"},
        {"world.prototype_scale", "1.0"},
        {"world.supercat_offset_scale", "0.5"},
        {"world.attr_offset_scale", "0.25"},
        {"world.sigma_noise", "0.15"},
        {"world.sigma_ctx", "0.3"},
        {"world.min_prototype_distance", "0.5"},
        {"world.image_width", "640"},
        {"world.image_height", "480"},
        {"world.min_objects", "3"},
        {"world.max_objects", "10"},
        {"world.n_colors", "6"},
        {"world.n_sizes", "3"},
        {"world.n_textures", "4"},
        {"world.n_shapes", "4"},
        {"world.disabled_qtypes", ""},
        // splits
        {"splits.train", "2000"},
        {"splits.val", "300"},
        {"splits.test", "500"},
        {"splits.nd_test", "300"},
        {"splits.od_test", "300"},
        // imagination
        {"imagination.d_z", "16"},
        {"imagination.hidden", "32"},
        {"imagination.alpha", "1e-5"},
        {"imagination.eta", "1.0"},
        {"imagination.lr", "0.001"},
        {"imagination.epochs", "40"},
        {"imagination.batch", "64"},
        {"imagination.patience", "8"},
        {"imagination.aux_category_loss", "false"},
        {"imagination.lambda_cat", "0.1"},
        {"imagination.paper_literal_sign", "false"},
        // oracle
        {"oracle.hidden", "64"},
        {"oracle.d_c", "16"},
        {"oracle.lr", "0.0001"},
        {"oracle.epochs", "25"},
        {"oracle.batch", "64"},
        {"oracle.patience", "6"},
        {"oracle.questions_per_scene", "8"},
        {"oracle.yes_bias", "0.5"},
        // guesser
        {"guesser.d_h", "32"},
        {"guesser.d_c", "16"},
        {"guesser.hidden", "32"},
        {"guesser.lr", "0.0001"},
        {"guesser.epochs", "30"},
        {"guesser.batch", "32"},
        {"guesser.patience", "6"},
        {"guesser.max_turns", "10"},
        // predcat classifier
        {"classifier.hidden", "64"},
        {"classifier.lr", "0.001"},
        {"classifier.epochs", "15"},
        {"classifier.batch", "64"},
        {"classifier.patience", "4"},
        // joint (modulo-n) training
        {"train.modulo_n", "5"},
        {"train.joint_epochs", "20"},
        // evaluation
        {"eval.max_turns", "10"},
        {"eval.stop_threshold", "0.9"},
        {"eval.seeds", "1,2,3"},
        {"eval.gold_answer_oracle", "false"},
        {"eval.belief_from_filter", "false"},
        {"eval.games_limit", "0"},
        {"eval.probe_train_games", "600"},
        {"eval.probe_lr", "0.05"},
        {"eval.probe_epochs", "60"},
    };
    return defaults;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::defaults() {
    Config cfg;
    cfg.values_ = default_values();
    return cfg;
}

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    Config cfg = defaults();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw config_error(path + ":" + std::to_string(line_no) +
                               ": expected key=value, got: " + stripped);
        cfg.set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
    }
    return cfg;
}

void Config::set(const std::string& key, const std::string& value) {
    if (!default_values().count(key)) throw config_error("unknown config key: " + key);
    values_[key] = value;
}

void Config::apply_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
        throw config_error("--set expects key=value, got: " + kv);
    set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
}

std::string Config::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw config_error("unknown config key: " + key);
    return it->second;
}

double Config::get_double(const std::string& key) const {
    try {
        return std::stod(get_string(key));
    } catch (const std::exception&) {
        throw config_error("config key " + key + " is not a number: " + get_string(key));
    }
}

long Config::get_long(const std::string& key) const {
    try {
        return std::stol(get_string(key));
    } catch (const std::exception&) {
        throw config_error("config key " + key + " is not an integer: " + get_string(key));
    }
}

bool Config::get_bool(const std::string& key) const {
    const std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw config_error("config key " + key + " is not a boolean: " + v);
}

std::vector<std::uint64_t> Config::get_seed_list(const std::string& key) const {
    std::vector<std::uint64_t> out;
    std::stringstream ss(get_string(key));
    std::string token;
    while (std::getline(ss, token, ',')) {
        token = trim(token);
        if (token.empty()) continue;
        out.push_back(std::stoull(token));
    }
    if (out.empty()) throw config_error("config key " + key + " needs at least one seed");
    return out;
}

WorldConfig Config::world_config() const {
    WorldConfig w;
    w.d_o = static_cast<std::size_t>(get_long("world.d_o"));
    w.n_supercategories = static_cast<std::size_t>(get_long("world.n_supercategories"));
    w.n_categories = static_cast<std::size_t>(get_long("world.n_categories"));
    w.nd_fraction = get_double("world.nd_fraction");
    w.od_fraction = get_double("world.od_fraction");
    w.prototype_scale = get_double("world.prototype_scale");
    w.supercat_offset_scale = get_double("world.supercat_offset_scale");
    w.attr_offset_scale = get_double("world.attr_offset_scale");
    w.sigma_noise = get_double("world.sigma_noise");
    w.sigma_ctx = get_double("world.sigma_ctx");
    w.min_prototype_distance = get_double("world.min_prototype_distance");
    w.image_width = static_cast<int>(get_long("world.image_width"));
    w.image_height = static_cast<int>(get_long("world.image_height"));
    w.min_objects = static_cast<std::size_t>(get_long("world.min_objects"));
    w.max_objects = static_cast<std::size_t>(get_long("world.max_objects"));
    w.n_colors = static_cast<std::size_t>(get_long("world.n_colors"));
    w.n_sizes = static_cast<std::size_t>(get_long("world.n_sizes"));
    w.n_textures = static_cast<std::size_t>(get_long("world.n_textures"));
    w.n_shapes = static_cast<std::size_t>(get_long("world.n_shapes"));
    return w;
}

SplitConfig Config::split_config() const {
    SplitConfig s;
    s.train = static_cast<std::size_t>(get_long("splits.train"));
    s.val = static_cast<std::size_t>(get_long("splits.val"));
    s.test = static_cast<std::size_t>(get_long("splits.test"));
    s.nd_test = static_cast<std::size_t>(get_long("splits.nd_test"));
    s.od_test = static_cast<std::size_t>(get_long("splits.od_test"));
    return s;
}

ImaginationConfig Config::imagination_config() const {
    ImaginationConfig c;
    c.d_z = static_cast<std::size_t>(get_long("imagination.d_z"));
    c.hidden = static_cast<std::size_t>(get_long("imagination.hidden"));
    c.alpha = get_double("imagination.alpha");
    c.eta = get_double("imagination.eta");
    c.lr = get_double("imagination.lr");
    c.epochs = static_cast<std::size_t>(get_long("imagination.epochs"));
    c.batch = static_cast<std::size_t>(get_long("imagination.batch"));
    c.patience = static_cast<std::size_t>(get_long("imagination.patience"));
    c.aux_category_loss = get_bool("imagination.aux_category_loss");
    c.lambda_cat = get_double("imagination.lambda_cat");
    c.paper_literal_sign = get_bool("imagination.paper_literal_sign");
    return c;
}

OracleTrainConfig Config::oracle_config() const {
    OracleTrainConfig c;
    c.hidden = static_cast<std::size_t>(get_long("oracle.hidden"));
    c.d_c = static_cast<std::size_t>(get_long("oracle.d_c"));
    c.lr = get_double("oracle.lr");
    c.epochs = static_cast<std::size_t>(get_long("oracle.epochs"));
    c.batch = static_cast<std::size_t>(get_long("oracle.batch"));
    c.patience = static_cast<std::size_t>(get_long("oracle.patience"));
    c.questions_per_scene = static_cast<std::size_t>(get_long("oracle.questions_per_scene"));
    c.yes_bias = get_double("oracle.yes_bias");
    return c;
}

GuesserTrainConfig Config::guesser_config() const {
    GuesserTrainConfig c;
    c.d_h = static_cast<std::size_t>(get_long("guesser.d_h"));
    c.d_c = static_cast<std::size_t>(get_long("guesser.d_c"));
    c.hidden = static_cast<std::size_t>(get_long("guesser.hidden"));
    c.lr = get_double("guesser.lr");
    c.epochs = static_cast<std::size_t>(get_long("guesser.epochs"));
    c.batch = static_cast<std::size_t>(get_long("guesser.batch"));
    c.patience = static_cast<std::size_t>(get_long("guesser.patience"));
    c.max_turns = static_cast<std::size_t>(get_long("guesser.max_turns"));
    return c;
}

}  // namespace guesslab
