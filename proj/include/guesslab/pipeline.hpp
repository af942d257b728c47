#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "guesslab/analytics.hpp"
#include "guesslab/config.hpp"
#include "guesslab/gameplay.hpp"

namespace guesslab {

struct Dataset {
    CategoryVocabulary vocab;
    std::vector<Scene> train, val, test, nd_test, od_test;
};

struct RunPaths {
    std::string root;
    std::string data;
    std::string ckpt;
    std::string logs;
    std::string reports;
    std::string archives;

    static RunPaths at(const std::string& root);
    void ensure_generate() const;
    void ensure_train() const;
    void ensure_eval() const;
};

Dataset load_dataset(const RunPaths& paths);

std::set<QType> disabled_qtypes(const Config& config);

// predcat support: a plain softmax classifier from v to in-domain classes.
struct ClassifierConfig {
    std::size_t hidden = 64;
    double lr = 1e-3;
    std::size_t epochs = 15;
    std::size_t batch = 64;
    std::size_t patience = 4;
};

ClassifierConfig classifier_config(const Config& config);

struct ClassifierCurve {
    std::vector<double> train_loss;
    std::vector<double> val_accuracy;
    std::size_t best_epoch = 0;
};

DenseNet make_category_classifier(const CategoryVocabulary& vocab,
                                  const ClassifierConfig& config, Rng& rng);
ClassifierCurve train_category_classifier(DenseNet& net, const std::vector<Scene>& train,
                                          const std::vector<Scene>& val,
                                          const CategoryVocabulary& vocab,
                                          const ClassifierConfig& config, Rng& rng);
double classifier_accuracy(const DenseNet& net, const std::vector<Scene>& scenes,
                           const CategoryVocabulary& vocab);

// CLI verbs. Each is deterministic given (config, seed): identical inputs
// produce byte-identical outputs.
void cmd_generate(const Config& config, std::uint64_t seed, const RunPaths& paths,
                  std::ostream& log);
void cmd_train(const Config& config, std::uint64_t seed, const RunPaths& paths,
               const std::string& component, std::ostream& log);
void cmd_eval(const Config& config, std::uint64_t seed, const RunPaths& paths,
              const std::string& suite, std::ostream& log);
void cmd_compare(const std::vector<std::string>& report_paths, const std::string& out_csv,
                 std::ostream& log);

/// Oracle feature set paired with a guesser mode during self-play.
std::string matched_oracle_features(ReprMode mode);

}  // namespace guesslab
