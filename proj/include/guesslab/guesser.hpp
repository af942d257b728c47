#pragma once

#include <optional>
#include <string>
#include <vector>

#include "guesslab/checkpoint.hpp"
#include "guesslab/imagination.hpp"
#include "guesslab/questions.hpp"

namespace guesslab {

struct Dialogue {
    std::string scene_id;
    std::vector<std::pair<Question, Answer>> turns;
};

enum class ReprMode { Category = 0, NoCat = 1, PredCat = 2, Imagination = 3 };

std::string repr_mode_name(ReprMode m);
ReprMode repr_mode_from_name(const std::string& name);

struct GuesserTrainConfig {
    std::size_t d_h = 32;
    std::size_t d_c = 16;
    std::size_t hidden = 32;
    double lr = 1e-4;
    std::size_t epochs = 30;
    std::size_t batch = 32;
    std::size_t patience = 6;
    std::size_t max_turns = 10;
};

/// Scores scene candidates against a pooled dialogue state h. Object
/// representations depend on the mode: category and predcat concatenate a
/// learned category embedding with the spatial vector, nocat uses spatial
/// only, imagination uses the label-free latent code.
struct GuesserModel {
    ReprMode mode = ReprMode::Category;
    DenseNet turn_encoder;  // (d_q + 3) -> d_h
    DenseNet object_mlp;    // repr_dim -> d_h
    Vec position_weights;   // one scalar per dialogue position
    Matrix category_table;  // (|C_in| + 1) x d_c, last row = UNK
    const ImaginationModel* imagination = nullptr;  // attached for mode Imagination
    const DenseNet* classifier = nullptr;           // attached for mode PredCat

    std::string kind_tag() const { return "guesser:" + repr_mode_name(mode); }
    std::size_t d_h() const { return turn_encoder.output_dim(); }
    std::size_t repr_dim(const CategoryVocabulary& vocab) const;

    static GuesserModel make(ReprMode mode, const QuestionBank& bank,
                             const GuesserTrainConfig& config, Rng& rng);

    Checkpoint to_checkpoint() const;
    static GuesserModel from_checkpoint(const Checkpoint& ckpt);
};

/// Position-weighted mean over per-turn encodings.
Vec encode_dialogue(const GuesserModel& model, const Dialogue& dialogue,
                    const QuestionBank& bank);

Vec object_representation(const GuesserModel& model, const GameObject& obj,
                          const CategoryVocabulary& vocab);

/// Softmax over dot(h, object_mlp(repr(o))) for each candidate.
Vec score_candidates(const GuesserModel& model, const Vec& h, const Scene& scene,
                     const QuestionBank& bank);

/// Argmax of score_candidates; ties break toward the lowest object id.
std::size_t predict_target(const GuesserModel& model, const Dialogue& dialogue,
                           const Scene& scene, const QuestionBank& bank);

struct GoldDialogue {
    std::size_t scene = 0;
    Dialogue dialogue;
};

struct GuesserCurve {
    std::vector<double> train_loss;
    std::vector<double> val_accuracy;
    std::size_t best_epoch = 0;
};

/// Epoch-granular training state, for the modulo-n joint schedule.
class GuesserTrainer {
  public:
    GuesserTrainer(GuesserModel& model, const std::vector<Scene>& train_scenes,
                   const std::vector<GoldDialogue>& train_dialogues,
                   const std::vector<Scene>& val_scenes,
                   const std::vector<GoldDialogue>& val_dialogues, const QuestionBank& bank,
                   const GuesserTrainConfig& config, Rng& rng);

    double run_epoch();
    double val_accuracy() const;
    Vec snapshot() const;
    void restore(const Vec& params);

  private:
    GuesserModel* model_;
    const std::vector<Scene>* train_scenes_;
    const std::vector<GoldDialogue>* train_dialogues_;
    const std::vector<Scene>* val_scenes_;
    const std::vector<GoldDialogue>* val_dialogues_;
    const QuestionBank* bank_;
    GuesserTrainConfig config_;
    Rng* rng_;
    ParamPack pack_;
    AdamState adam_;
    std::vector<std::size_t> order_;
    std::size_t epoch_ = 0;
    bool learn_table_ = false;
};

GuesserCurve train_guesser(GuesserModel& model, const std::vector<Scene>& train_scenes,
                           const std::vector<GoldDialogue>& train_dialogues,
                           const std::vector<Scene>& val_scenes,
                           const std::vector<GoldDialogue>& val_dialogues,
                           const QuestionBank& bank, const GuesserTrainConfig& config,
                           Rng& rng);

double guesser_accuracy(const GuesserModel& model, const std::vector<Scene>& scenes,
                        const std::vector<GoldDialogue>& dialogues, const QuestionBank& bank);

}  // namespace guesslab
