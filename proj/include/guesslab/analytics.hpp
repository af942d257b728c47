#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "guesslab/gameplay.hpp"
#include "guesslab/guesser.hpp"
#include "guesslab/questions.hpp"

namespace guesslab {

/// Keyword lexicon for the rule-based question classifier. Built from a
/// vocabulary or loaded from the versioned lexicon file shipped with the
/// repository.
struct Lexicon {
    std::vector<std::string> supercategory_words;
    std::vector<std::string> animate_object_words;
    std::vector<std::string> inanimate_object_words;
    std::map<QType, std::vector<std::string>> attribute_words;  // color/size/texture/shape
    std::vector<std::string> location_words;

    static Lexicon from_vocabulary(const CategoryVocabulary& vocab);
    static Lexicon load(const std::string& path);
    void save(const std::string& path) const;
};

struct QuestionClass {
    QType qtype = QType::Object;
    /// Animacy subtag for object questions: "animate", "inanimate", "unknown".
    std::string subtag;
};

/// Structured questions return their stored qtype exactly; raw text goes
/// through keyword rules with first-match priority
/// attribute > category > supercategory.
QuestionClass classify_question(const Question& q, const Lexicon& lexicon);
QuestionClass classify_question(const std::string& text, const Lexicon& lexicon);

struct TypeAccuracyRow {
    std::size_t correct = 0;
    std::size_t count = 0;
    double accuracy = 0.0;
};

/// Per-question-type partition of answer accuracy; counts sum to the total.
std::map<std::string, TypeAccuracyRow> per_type_accuracy(
    const std::vector<std::size_t>& correct_per_type,
    const std::vector<std::size_t>& count_per_type);

struct DialogueStats {
    double lexical_diversity = 0.0;   // distinct tokens / total tokens
    double question_diversity = 0.0;  // mean distinct (qtype, argument) pairs per game
    double repeated_question_rate = 0.0;
    double supercat_to_obj_attr_rate = 0.0;
    double object_to_attr_rate = 0.0;
    double location_turn_rate = 0.0;
    std::size_t vocabulary_size = 0;
};

DialogueStats dialogue_stats(const std::vector<GameResult>& archive);

struct ProbeScores {
    double abstract_f1 = 0.0;   // supercategory + animacy
    double situated_f1 = 0.0;   // color/size/texture/shape
    double abstract_situated_f1 = 0.0;
    double location_f1 = 0.0;
};

struct ProbeConfig {
    double lr = 0.05;
    std::size_t epochs = 60;
    std::size_t batch = 64;
};

/// Macro-F1 over one-vs-rest per-class scores of a single-layer softmax
/// probe. Classes absent from the training labels are excluded.
double linear_probe_macro_f1(const std::vector<Vec>& train_x,
                             const std::vector<int>& train_y,
                             const std::vector<Vec>& test_x, const std::vector<int>& test_y,
                             std::size_t n_classes, const ProbeConfig& config, Rng& rng);

/// Attribute-prediction probes on dialogue states h derived from archives.
ProbeScores attribute_probe(const GuesserModel& guesser, const QuestionBank& bank,
                            const std::vector<Scene>& train_scenes,
                            const std::vector<GameResult>& train_archive,
                            const std::vector<Scene>& test_scenes,
                            const std::vector<GameResult>& test_archive,
                            const ProbeConfig& config, Rng& rng);

/// Location label for the probe: quadrant of the normalized box center,
/// middle reserved for a center exactly on both axes.
int location_label(const GameObject& obj);

/// Macro-average of component scores expressed in [0, 1].
double grolla(const std::vector<double>& components);

/// Flat metric report serialized as JSON and CSV (one row per metric).
struct MetricsReport {
    std::map<std::string, double> values;

    void set(const std::string& key, double value) { values[key] = value; }
    void write_json(const std::string& path) const;
    void write_csv(const std::string& path) const;
    static MetricsReport read_json(const std::string& path);
};

}  // namespace guesslab
