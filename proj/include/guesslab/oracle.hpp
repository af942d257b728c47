#pragma once

#include <optional>
#include <string>
#include <vector>

#include "guesslab/checkpoint.hpp"
#include "guesslab/imagination.hpp"
#include "guesslab/numerics.hpp"
#include "guesslab/questions.hpp"
#include "guesslab/world.hpp"

namespace guesslab {

enum class OracleFeature {
    Question = 0,
    Spatial = 1,
    Crop = 2,       // raw perceptual vector of the target
    Image = 3,      // mean perceptual vector over the scene
    Category = 4,   // learned embedding looked up by gold label
    Imagination = 5,  // z from an attached imagination encoder
};

std::string oracle_feature_name(OracleFeature f);
std::vector<OracleFeature> parse_feature_set(const std::string& spec);
std::string feature_set_name(const std::vector<OracleFeature>& features);

struct OracleTrainConfig {
    std::size_t hidden = 64;
    std::size_t d_c = 16;
    double lr = 1e-4;
    std::size_t epochs = 25;
    std::size_t batch = 64;
    std::size_t patience = 6;
    std::size_t questions_per_scene = 8;
    double yes_bias = 0.5;  // probability of sampling an argument true of the target
    Vec qtype_weights;      // sampling mix, length kNumQTypes; empty = default mix
};

/// Three-way answer classifier over a configurable feature concatenation.
/// Feature order in the input vector is fixed: question, spatial, crop,
/// image, category, imagination. The majority baseline carries only the
/// training label distribution.
struct OracleModel {
    bool majority = false;
    Vec majority_dist;  // length 3

    std::vector<OracleFeature> features;
    DenseNet classifier;
    Matrix category_table;  // (|C_in| + 1) x d_c, last row = UNK
    const ImaginationModel* imagination = nullptr;  // attached, not owned

    std::string kind_tag() const;

    static OracleModel make_majority();
    static OracleModel make(const std::vector<OracleFeature>& features,
                            const QuestionBank& bank, const OracleTrainConfig& config,
                            Rng& rng);

    Checkpoint to_checkpoint() const;
    static OracleModel from_checkpoint(const Checkpoint& ckpt);

    bool uses(OracleFeature f) const;
    std::size_t input_dim(const QuestionBank& bank) const;
};

/// Probability over {Yes, No, NA}.
Vec oracle_forward(const OracleModel& model, const Question& q, const Scene& scene,
                   std::size_t target, const QuestionBank& bank);

/// Argmax of oracle_forward; ties break by the fixed order Yes < No < NA.
Answer oracle_answer(const OracleModel& model, const Question& q, const Scene& scene,
                     std::size_t target, const QuestionBank& bank);

/// Deterministic question sampler used for oracle training and evaluation.
Question sample_question(const QuestionBank& bank, const Scene& scene, std::size_t target,
                         const OracleTrainConfig& config, Rng& rng);

struct OracleCurve {
    std::vector<double> train_loss;
    std::vector<double> val_accuracy;
    std::size_t best_epoch = 0;
};

/// Epoch-granular training state; lets the modulo-n schedule interleave
/// objectives while Adam moments persist.
class OracleTrainer {
  public:
    OracleTrainer(OracleModel& model, const std::vector<Scene>& train,
                  const std::vector<Scene>& val, const QuestionBank& bank,
                  const OracleTrainConfig& config, Rng& rng);

    double run_epoch();      // mean training loss
    double val_accuracy() const;
    Vec snapshot() const;
    void restore(const Vec& params);

  private:
    struct Sample {
        std::size_t scene;
        Question q;
        Answer label;
    };
    OracleModel* model_;
    const std::vector<Scene>* train_;
    const std::vector<Scene>* val_;
    const QuestionBank* bank_;
    OracleTrainConfig config_;
    Rng* rng_;
    std::vector<Sample> train_samples_;
    std::vector<Sample> val_samples_;
    ParamPack pack_;
    AdamState adam_;
    std::size_t epoch_ = 0;
};

OracleCurve train_oracle(OracleModel& model, const std::vector<Scene>& train,
                         const std::vector<Scene>& val, const QuestionBank& bank,
                         const OracleTrainConfig& config, Rng& rng);

/// Mean answer accuracy over sampled questions; also fills per-type tallies
/// when out parameters are given.
double oracle_accuracy(const OracleModel& model, const std::vector<Scene>& scenes,
                       const QuestionBank& bank, const OracleTrainConfig& config,
                       std::uint64_t seed,
                       std::vector<std::size_t>* correct_per_type = nullptr,
                       std::vector<std::size_t>* count_per_type = nullptr);

}  // namespace guesslab
