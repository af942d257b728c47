#include "guesslab/analytics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "guesslab/checkpoint.hpp"
#include "guesslab/common.hpp"

namespace guesslab {

using nlohmann::json;

Lexicon Lexicon::from_vocabulary(const CategoryVocabulary& vocab) {
    Lexicon lex;
    for (const auto& sc : vocab.supercategories) lex.supercategory_words.push_back(sc.name);
    for (const auto& c : vocab.categories) {
        if (c.animate)
            lex.animate_object_words.push_back(c.name);
        else
            lex.inanimate_object_words.push_back(c.name);
    }
    lex.attribute_words[QType::Color] = vocab.attr_values[0];
    lex.attribute_words[QType::Size] = vocab.attr_values[1];
    lex.attribute_words[QType::Texture] = vocab.attr_values[2];
    lex.attribute_words[QType::Shape] = vocab.attr_values[3];
    for (std::size_t r = 0; r < kNumRegions; ++r)
        lex.location_words.push_back(kRegionNames[r]);
    lex.location_words.push_back("left");
    lex.location_words.push_back("right");
    lex.location_words.push_back("top");
    lex.location_words.push_back("bottom");
    lex.location_words.push_back("middle");
    return lex;
}

namespace {

const char* kLexiconSections[] = {"supercategory", "object.animate", "object.inanimate",
                                  "color",         "size",           "texture",
                                  "shape",         "location"};

std::vector<std::string>* section_ptr(Lexicon& lex, const std::string& name) {
    if (name == "supercategory") return &lex.supercategory_words;
    if (name == "object.animate") return &lex.animate_object_words;
    if (name == "object.inanimate") return &lex.inanimate_object_words;
    if (name == "color") return &lex.attribute_words[QType::Color];
    if (name == "size") return &lex.attribute_words[QType::Size];
    if (name == "texture") return &lex.attribute_words[QType::Texture];
    if (name == "shape") return &lex.attribute_words[QType::Shape];
    if (name == "location") return &lex.location_words;
    return nullptr;
}

}  // namespace

void Lexicon::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot open lexicon for writing: " + path);
    out << "# question classifier lexicon v1\n";
    Lexicon copy = *this;
    for (const char* name : kLexiconSections) {
        out << "[" << name << "]\n";
        for (const auto& w : *section_ptr(copy, name)) out << w << "\n";
    }
}

Lexicon Lexicon::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open lexicon: " + path);
    Lexicon lex;
    std::vector<std::string>* current = nullptr;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line.front() == '#') continue;
        if (line.front() == '[' && line.back() == ']') {
            current = section_ptr(lex, line.substr(1, line.size() - 2));
            if (!current) throw parse_error(path + ": unknown lexicon section " + line);
        } else if (current) {
            current->push_back(line);
        }
    }
    return lex;
}

namespace {

std::string normalize(const std::string& text) {
    std::string out;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == ' ' || c == '-')
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        else
            out += ' ';
    }
    return out;
}

bool contains_word(const std::string& text, const std::string& word) {
    // Whole-word (or whole-phrase) match inside normalized text.
    std::size_t pos = 0;
    while ((pos = text.find(word, pos)) != std::string::npos) {
        const bool left_ok = pos == 0 || text[pos - 1] == ' ';
        const std::size_t end = pos + word.size();
        const bool right_ok = end >= text.size() || text[end] == ' ';
        if (left_ok && right_ok) return true;
        pos += 1;
    }
    return false;
}

}  // namespace

QuestionClass classify_question(const Question& q, const Lexicon& lexicon) {
    QuestionClass out;
    out.qtype = q.qtype;
    if (q.qtype == QType::Object) {
        const std::string text = normalize(q.text);
        for (const auto& w : lexicon.animate_object_words)
            if (contains_word(text, w)) {
                out.subtag = "animate";
                return out;
            }
        for (const auto& w : lexicon.inanimate_object_words)
            if (contains_word(text, w)) {
                out.subtag = "inanimate";
                return out;
            }
        out.subtag = "unknown";
    }
    return out;
}

QuestionClass classify_question(const std::string& text, const Lexicon& lexicon) {
    const std::string norm = normalize(text);
    QuestionClass out;
    // Priority: attribute keywords > category words > supercategory words.
    static const QType attr_order[] = {QType::Color, QType::Size, QType::Texture,
                                       QType::Shape};
    for (QType t : attr_order) {
        auto it = lexicon.attribute_words.find(t);
        if (it == lexicon.attribute_words.end()) continue;
        for (const auto& w : it->second)
            if (contains_word(norm, w)) {
                out.qtype = t;
                return out;
            }
    }
    for (const auto& w : lexicon.location_words)
        if (contains_word(norm, w)) {
            out.qtype = QType::Location;
            return out;
        }
    for (const auto& w : lexicon.animate_object_words)
        if (contains_word(norm, w)) {
            out.qtype = QType::Object;
            out.subtag = "animate";
            return out;
        }
    for (const auto& w : lexicon.inanimate_object_words)
        if (contains_word(norm, w)) {
            out.qtype = QType::Object;
            out.subtag = "inanimate";
            return out;
        }
    for (const auto& w : lexicon.supercategory_words)
        if (contains_word(norm, w)) {
            out.qtype = QType::Supercategory;
            return out;
        }
    // No rule fires: default to object/unknown.
    out.qtype = QType::Object;
    out.subtag = "unknown";
    return out;
}

std::map<std::string, TypeAccuracyRow> per_type_accuracy(
    const std::vector<std::size_t>& correct_per_type,
    const std::vector<std::size_t>& count_per_type) {
    if (correct_per_type.size() != kNumQTypes || count_per_type.size() != kNumQTypes)
        throw shape_error("per_type_accuracy: expected one entry per question type");
    std::map<std::string, TypeAccuracyRow> out;
    for (std::size_t t = 0; t < kNumQTypes; ++t) {
        TypeAccuracyRow row;
        row.correct = correct_per_type[t];
        row.count = count_per_type[t];
        row.accuracy =
            row.count ? static_cast<double>(row.correct) / static_cast<double>(row.count)
                      : 0.0;
        out[qtype_name(static_cast<QType>(t))] = row;
    }
    return out;
}

namespace {

std::vector<std::string> tokenize(const std::string& text) {
    std::istringstream ss(normalize(text));
    std::vector<std::string> out;
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

bool is_attr_or_object(QType t) {
    return t == QType::Object || t == QType::Color || t == QType::Size ||
           t == QType::Texture || t == QType::Shape || t == QType::Location;
}

}  // namespace

DialogueStats dialogue_stats(const std::vector<GameResult>& archive) {
    if (archive.empty()) throw validation_error("dialogue_stats: empty archive");
    DialogueStats stats;

    std::set<std::string> types;
    std::size_t tokens = 0;
    std::size_t total_questions = 0;
    std::size_t distinct_sum = 0;
    std::size_t repeated_games = 0;
    std::size_t location_turns = 0;
    std::size_t supercat_yes = 0, supercat_followed = 0;
    std::size_t object_yes = 0, object_followed = 0;

    for (const auto& game : archive) {
        std::set<std::pair<int, int>> seen;
        bool repeated = false;
        for (std::size_t t = 0; t < game.dialogue.turns.size(); ++t) {
            const auto& [q, a] = game.dialogue.turns[t];
            for (const auto& tok : tokenize(q.text)) {
                types.insert(tok);
                ++tokens;
            }
            ++total_questions;
            if (!seen.insert({static_cast<int>(q.qtype), q.argument}).second)
                repeated = true;
            if (q.qtype == QType::Location) ++location_turns;
            if (a == Answer::Yes) {
                const bool has_next = t + 1 < game.dialogue.turns.size();
                const QType next_t =
                    has_next ? game.dialogue.turns[t + 1].first.qtype : QType::Object;
                if (q.qtype == QType::Supercategory) {
                    ++supercat_yes;
                    if (has_next && is_attr_or_object(next_t)) ++supercat_followed;
                } else if (q.qtype == QType::Object) {
                    ++object_yes;
                    if (has_next && is_attr_or_object(next_t)) ++object_followed;
                }
            }
        }
        distinct_sum += seen.size();
        if (repeated) ++repeated_games;
    }

    stats.lexical_diversity =
        tokens ? static_cast<double>(types.size()) / static_cast<double>(tokens) : 0.0;
    stats.question_diversity =
        static_cast<double>(distinct_sum) / static_cast<double>(archive.size());
    stats.repeated_question_rate =
        static_cast<double>(repeated_games) / static_cast<double>(archive.size());
    stats.supercat_to_obj_attr_rate =
        supercat_yes ? static_cast<double>(supercat_followed) /
                           static_cast<double>(supercat_yes)
                     : 0.0;
    stats.object_to_attr_rate =
        object_yes ? static_cast<double>(object_followed) / static_cast<double>(object_yes)
                   : 0.0;
    stats.location_turn_rate =
        total_questions ? static_cast<double>(location_turns) /
                              static_cast<double>(total_questions)
                        : 0.0;
    stats.vocabulary_size = types.size();
    return stats;
}

int location_label(const GameObject& obj) {
    const double xc = obj.spatial[4], yc = obj.spatial[5];
    if (xc == 0.0 && yc == 0.0) return 4;  // exact center
    if (xc < 0.0 && yc < 0.0) return 0;
    if (xc >= 0.0 && yc < 0.0) return 1;
    if (xc < 0.0) return 2;
    return 3;
}

double linear_probe_macro_f1(const std::vector<Vec>& train_x,
                             const std::vector<int>& train_y,
                             const std::vector<Vec>& test_x, const std::vector<int>& test_y,
                             std::size_t n_classes, const ProbeConfig& config, Rng& rng) {
    if (train_x.empty() || train_x.size() != train_y.size() ||
        test_x.size() != test_y.size())
        throw shape_error("linear_probe_macro_f1: bad input sizes");

    DenseNet probe =
        DenseNet::make({train_x.front().size(), n_classes}, {Activation::Softmax}, rng);
    ParamPack pack;
    pack.nets.push_back(&probe);
    AdamState adam = AdamState::make(pack.count(), config.lr);

    std::vector<std::size_t> order(train_x.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        std::size_t done = 0;
        while (done < order.size()) {
            const std::size_t take = std::min(config.batch, order.size() - done);
            Vec grads(pack.count(), 0.0);
            for (std::size_t b = 0; b < take; ++b) {
                const std::size_t i = order[done + b];
                ForwardTrace trace;
                Vec probs = forward_traced(probe, train_x[i], trace);
                const std::size_t y = static_cast<std::size_t>(train_y[i]);
                Vec upstream(n_classes, 0.0);
                upstream[y] = -1.0 / std::max(probs[y], 1e-12);
                BackwardResult back = backward_traced(probe, trace, upstream);
                Vec flat;
                append_grads(back.grads, flat);
                for (std::size_t k = 0; k < flat.size(); ++k) grads[k] += flat[k];
            }
            for (double& g : grads) g /= static_cast<double>(take);
            Vec flat_params = pack.flatten();
            adam_step(flat_params, grads, adam, "probe");
            pack.load(flat_params);
            done += take;
        }
    }

    // Macro-F1 with classes absent from training excluded.
    std::vector<bool> present(n_classes, false);
    for (int y : train_y) present[static_cast<std::size_t>(y)] = true;

    std::vector<std::size_t> tp(n_classes, 0), fp(n_classes, 0), fn(n_classes, 0);
    for (std::size_t i = 0; i < test_x.size(); ++i) {
        Vec probs = probe.forward(test_x[i]);
        std::size_t pred = 0;
        for (std::size_t k = 1; k < probs.size(); ++k)
            if (probs[k] > probs[pred]) pred = k;
        const std::size_t truth = static_cast<std::size_t>(test_y[i]);
        if (pred == truth)
            ++tp[truth];
        else {
            ++fp[pred];
            ++fn[truth];
        }
    }
    double f1_sum = 0.0;
    std::size_t f1_count = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (!present[c]) continue;
        const double denom = 2.0 * tp[c] + fp[c] + fn[c];
        f1_sum += denom > 0.0 ? 2.0 * tp[c] / denom : 0.0;
        ++f1_count;
    }
    return f1_count ? f1_sum / static_cast<double>(f1_count) : 0.0;
}

namespace {

struct ProbeData {
    std::vector<Vec> x;
    std::vector<int> supercat;
    std::vector<int> animacy;
    std::vector<int> color, size, texture, shape;
    std::vector<int> location;
};

ProbeData collect_probe_data(const GuesserModel& guesser, const QuestionBank& bank,
                             const std::vector<Scene>& scenes,
                             const std::vector<GameResult>& archive) {
    std::map<std::string, const Scene*> by_id;
    for (const auto& s : scenes) by_id[s.id] = &s;

    ProbeData data;
    for (const auto& game : archive) {
        auto it = by_id.find(game.scene_id);
        if (it == by_id.end()) continue;
        const Scene& scene = *it->second;
        if (game.dialogue.turns.empty()) continue;
        const GameObject& target = scene.target_object();
        data.x.push_back(encode_dialogue(guesser, game.dialogue, bank));
        const auto& cat =
            bank.vocab().categories.at(static_cast<std::size_t>(target.category));
        data.supercat.push_back(cat.supercategory);
        data.animacy.push_back(cat.animate ? 1 : 0);
        data.color.push_back(target.attrs.color);
        data.size.push_back(target.attrs.size);
        data.texture.push_back(target.attrs.texture);
        data.shape.push_back(target.attrs.shape);
        data.location.push_back(location_label(target));
    }
    return data;
}

struct ClassCounts {
    double f1_weighted_sum = 0.0;
    std::size_t classes = 0;
};

void accumulate_family(double f1, std::size_t n_classes, ClassCounts& counts) {
    counts.f1_weighted_sum += f1 * static_cast<double>(n_classes);
    counts.classes += n_classes;
}

}  // namespace

ProbeScores attribute_probe(const GuesserModel& guesser, const QuestionBank& bank,
                            const std::vector<Scene>& train_scenes,
                            const std::vector<GameResult>& train_archive,
                            const std::vector<Scene>& test_scenes,
                            const std::vector<GameResult>& test_archive,
                            const ProbeConfig& config, Rng& rng) {
    ProbeData train = collect_probe_data(guesser, bank, train_scenes, train_archive);
    ProbeData test = collect_probe_data(guesser, bank, test_scenes, test_archive);
    if (train.x.empty() || test.x.empty())
        throw validation_error("attribute_probe: empty probe data");

    const auto& vocab = bank.vocab();
    const std::size_t n_super = vocab.supercategories.size();

    auto run = [&](const std::vector<int>& ytr, const std::vector<int>& yte,
                   std::size_t n_classes) {
        return linear_probe_macro_f1(train.x, ytr, test.x, yte, n_classes, config, rng);
    };

    const double f1_super = run(train.supercat, test.supercat, n_super);
    const double f1_anim = run(train.animacy, test.animacy, 2);
    const double f1_color = run(train.color, test.color, vocab.attr_values[0].size());
    const double f1_size = run(train.size, test.size, vocab.attr_values[1].size());
    const double f1_texture = run(train.texture, test.texture, vocab.attr_values[2].size());
    const double f1_shape = run(train.shape, test.shape, vocab.attr_values[3].size());
    const double f1_loc = run(train.location, test.location, 5);

    ProbeScores scores;
    ClassCounts abstract_counts;
    accumulate_family(f1_super, n_super, abstract_counts);
    accumulate_family(f1_anim, 2, abstract_counts);
    scores.abstract_f1 =
        abstract_counts.f1_weighted_sum / static_cast<double>(abstract_counts.classes);

    ClassCounts situated_counts;
    accumulate_family(f1_color, vocab.attr_values[0].size(), situated_counts);
    accumulate_family(f1_size, vocab.attr_values[1].size(), situated_counts);
    accumulate_family(f1_texture, vocab.attr_values[2].size(), situated_counts);
    accumulate_family(f1_shape, vocab.attr_values[3].size(), situated_counts);
    scores.situated_f1 =
        situated_counts.f1_weighted_sum / static_cast<double>(situated_counts.classes);

    ClassCounts as_counts = abstract_counts;
    as_counts.f1_weighted_sum += situated_counts.f1_weighted_sum;
    as_counts.classes += situated_counts.classes;
    scores.abstract_situated_f1 =
        as_counts.f1_weighted_sum / static_cast<double>(as_counts.classes);

    scores.location_f1 = f1_loc;
    return scores;
}

double grolla(const std::vector<double>& components) {
    if (components.empty()) throw config_error("grolla: no components configured");
    double sum = 0.0;
    for (double c : components) sum += c;
    return sum / static_cast<double>(components.size());
}

void MetricsReport::write_json(const std::string& path) const {
    json doc = json::object();
    for (const auto& [k, v] : values) doc[k] = v;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot open report for writing: " + path);
    out << doc.dump(2) << "\n";
}

void MetricsReport::write_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot open report for writing: " + path);
    out << "metric,value\n";
    for (const auto& [k, v] : values) out << k << "," << format_double(v) << "\n";
}

MetricsReport MetricsReport::read_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open report: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw parse_error(path + ": " + e.what());
    }
    MetricsReport report;
    for (auto it = doc.begin(); it != doc.end(); ++it)
        report.values[it.key()] = it.value().get<double>();
    return report;
}

}  // namespace guesslab
