#include "guesslab/guesser.hpp"

#include <algorithm>
#include <cmath>

#include "guesslab/common.hpp"

namespace guesslab {

std::string repr_mode_name(ReprMode m) {
    switch (m) {
        case ReprMode::Category: return "category";
        case ReprMode::NoCat: return "nocat";
        case ReprMode::PredCat: return "predcat";
        case ReprMode::Imagination: return "imagination";
    }
    throw validation_error("unknown repr mode");
}

ReprMode repr_mode_from_name(const std::string& name) {
    for (int m = 0; m <= static_cast<int>(ReprMode::Imagination); ++m)
        if (repr_mode_name(static_cast<ReprMode>(m)) == name)
            return static_cast<ReprMode>(m);
    throw config_error("unknown guesser mode: " + name);
}

std::size_t GuesserModel::repr_dim(const CategoryVocabulary& vocab) const {
    (void)vocab;
    switch (mode) {
        case ReprMode::Category:
        case ReprMode::PredCat: return category_table.cols + 8;
        case ReprMode::NoCat: return 8;
        case ReprMode::Imagination:
            if (!imagination)
                throw config_error("guesser: imagination mode without attached model");
            return imagination->d_z() + 8;
    }
    throw validation_error("unknown repr mode");
}

GuesserModel GuesserModel::make(ReprMode mode, const QuestionBank& bank,
                                const GuesserTrainConfig& config, Rng& rng) {
    GuesserModel model;
    model.mode = mode;
    if (mode == ReprMode::Category || mode == ReprMode::PredCat) {
        const std::size_t k = bank.vocab().in_domain_ids().size();
        model.category_table = Matrix(k + 1, config.d_c);
        const double bound = std::sqrt(6.0 / static_cast<double>(k + 1 + config.d_c));
        for (double& w : model.category_table.data) w = rng.uniform(-bound, bound);
    }
    model.turn_encoder = DenseNet::make({bank.d_q() + 3, config.hidden, config.d_h},
                                        {Activation::Relu, Activation::Identity}, rng);
    model.position_weights.assign(config.max_turns, 1.0);
    return model;  // object_mlp is built on first use, once attachments are in place
}

namespace {

void ensure_object_mlp(GuesserModel& model, const QuestionBank& bank,
                       const GuesserTrainConfig& config, Rng& rng) {
    if (!model.object_mlp.layers.empty()) return;
    model.object_mlp =
        DenseNet::make({model.repr_dim(bank.vocab()), config.hidden, config.d_h},
                       {Activation::Relu, Activation::Identity}, rng);
}

std::size_t category_row(const GuesserModel& model, const CategoryVocabulary& vocab,
                         int category_id) {
    int idx = vocab.in_domain_index(category_id);
    return idx >= 0 ? static_cast<std::size_t>(idx) : model.category_table.rows - 1;
}

Vec turn_input(const GuesserModel& model, const QuestionBank& bank,
               const std::pair<Question, Answer>& turn) {
    (void)model;
    Vec in = bank.encode(turn.first);
    Vec one_hot(3, 0.0);
    one_hot[static_cast<std::size_t>(turn.second)] = 1.0;
    in.insert(in.end(), one_hot.begin(), one_hot.end());
    return in;
}

}  // namespace

Vec encode_dialogue(const GuesserModel& model, const Dialogue& dialogue,
                    const QuestionBank& bank) {
    if (dialogue.turns.empty()) throw validation_error("encode_dialogue: empty dialogue");
    if (dialogue.turns.size() > model.position_weights.size())
        throw validation_error("encode_dialogue: dialogue longer than max_turns");
    Vec h(model.d_h(), 0.0);
    for (std::size_t t = 0; t < dialogue.turns.size(); ++t) {
        Vec enc = model.turn_encoder.forward(turn_input(model, bank, dialogue.turns[t]));
        const double w = model.position_weights[t];
        for (std::size_t k = 0; k < h.size(); ++k) h[k] += w * enc[k];
    }
    const double inv = 1.0 / static_cast<double>(dialogue.turns.size());
    for (double& x : h) x *= inv;
    return h;
}

Vec object_representation(const GuesserModel& model, const GameObject& obj,
                          const CategoryVocabulary& vocab) {
    Vec repr;
    switch (model.mode) {
        case ReprMode::Category: {
            const std::size_t row = category_row(model, vocab, obj.category);
            const double* ptr = model.category_table.data.data() + row * model.category_table.cols;
            repr.assign(ptr, ptr + model.category_table.cols);
            break;
        }
        case ReprMode::PredCat: {
            if (!model.classifier)
                throw config_error("guesser: predcat mode without attached classifier");
            Vec probs = model.classifier->forward(obj.perceptual);
            std::size_t best = 0;
            for (std::size_t k = 1; k < probs.size(); ++k)
                if (probs[k] > probs[best]) best = k;
            // The classifier emits in-domain class indices directly.
            const double* ptr =
                model.category_table.data.data() + best * model.category_table.cols;
            repr.assign(ptr, ptr + model.category_table.cols);
            break;
        }
        case ReprMode::NoCat: break;
        case ReprMode::Imagination: {
            if (!model.imagination)
                throw config_error("guesser: imagination mode without attached model");
            repr = model.imagination->encode(obj.perceptual);
            break;
        }
    }
    repr.insert(repr.end(), obj.spatial.begin(), obj.spatial.end());
    return repr;
}

Vec score_candidates(const GuesserModel& model, const Vec& h, const Scene& scene,
                     const QuestionBank& bank) {
    if (scene.objects.size() < 2)
        throw validation_error("score_candidates: scene needs at least two objects");
    if (model.object_mlp.layers.empty())
        throw config_error("score_candidates: object_mlp not initialized (untrained model)");
    Vec logits(scene.objects.size());
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
        Vec repr = object_representation(model, scene.objects[i], bank.vocab());
        logits[i] = dot(h, model.object_mlp.forward(repr));
    }
    return softmax(logits);
}

std::size_t predict_target(const GuesserModel& model, const Dialogue& dialogue,
                           const Scene& scene, const QuestionBank& bank) {
    Vec h = encode_dialogue(model, dialogue, bank);
    Vec probs = score_candidates(model, h, scene, bank);
    std::size_t best = 0;
    for (std::size_t k = 1; k < probs.size(); ++k)
        if (probs[k] > probs[best]) best = k;
    return best;
}

GuesserTrainer::GuesserTrainer(GuesserModel& model, const std::vector<Scene>& train_scenes,
                               const std::vector<GoldDialogue>& train_dialogues,
                               const std::vector<Scene>& val_scenes,
                               const std::vector<GoldDialogue>& val_dialogues,
                               const QuestionBank& bank, const GuesserTrainConfig& config,
                               Rng& rng)
    : model_(&model),
      train_scenes_(&train_scenes),
      train_dialogues_(&train_dialogues),
      val_scenes_(&val_scenes),
      val_dialogues_(&val_dialogues),
      bank_(&bank),
      config_(config),
      rng_(&rng) {
    if (train_dialogues.empty()) throw training_error("train_guesser: no gold dialogues");
    ensure_object_mlp(model, bank, config, rng);
    pack_.nets.push_back(&model.turn_encoder);
    pack_.nets.push_back(&model.object_mlp);
    pack_.tensors.push_back(&model.position_weights);
    learn_table_ = model.mode == ReprMode::Category || model.mode == ReprMode::PredCat;
    if (learn_table_) pack_.tensors.push_back(&model.category_table.data);
    adam_ = AdamState::make(pack_.count(), config.lr);
    order_.resize(train_dialogues.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
}

double GuesserTrainer::run_epoch() {
    ++epoch_;
    GuesserModel& model = *model_;
    const QuestionBank& bank = *bank_;
    const std::size_t turn_params = param_count(model.turn_encoder);
    const std::size_t mlp_params = param_count(model.object_mlp);
    const std::size_t pos_off = turn_params + mlp_params;
    const std::size_t table_off = pos_off + model.position_weights.size();

    rng_->shuffle(order_);
    double epoch_loss = 0.0;
    std::size_t done = 0;
    while (done < order_.size()) {
        const std::size_t take = std::min(config_.batch, order_.size() - done);
        Vec grads(pack_.count(), 0.0);
        for (std::size_t b = 0; b < take; ++b) {
            const GoldDialogue& gd = (*train_dialogues_)[order_[done + b]];
            const Scene& scene = (*train_scenes_)[gd.scene];
            const Dialogue& dialogue = gd.dialogue;
            if (dialogue.turns.empty()) continue;

            std::vector<ForwardTrace> turn_traces(dialogue.turns.size());
            Vec h(model.d_h(), 0.0);
            for (std::size_t t = 0; t < dialogue.turns.size(); ++t) {
                Vec enc = forward_traced(model.turn_encoder,
                                         turn_input(model, bank, dialogue.turns[t]),
                                         turn_traces[t]);
                for (std::size_t k = 0; k < h.size(); ++k)
                    h[k] += model.position_weights[t] * enc[k];
            }
            const double inv_turns = 1.0 / static_cast<double>(dialogue.turns.size());
            for (double& x : h) x *= inv_turns;

            std::vector<ForwardTrace> obj_traces(scene.objects.size());
            std::vector<Vec> obj_out(scene.objects.size());
            std::vector<std::size_t> obj_rows(scene.objects.size(), SIZE_MAX);
            Vec logits(scene.objects.size());
            for (std::size_t i = 0; i < scene.objects.size(); ++i) {
                Vec repr = object_representation(model, scene.objects[i], bank.vocab());
                if (learn_table_) {
                    if (model.mode == ReprMode::Category)
                        obj_rows[i] =
                            category_row(model, bank.vocab(), scene.objects[i].category);
                    else {
                        Vec probs = model.classifier->forward(scene.objects[i].perceptual);
                        std::size_t bestc = 0;
                        for (std::size_t k = 1; k < probs.size(); ++k)
                            if (probs[k] > probs[bestc]) bestc = k;
                        obj_rows[i] = bestc;
                    }
                }
                obj_out[i] = forward_traced(model.object_mlp, repr, obj_traces[i]);
                logits[i] = dot(h, obj_out[i]);
            }
            Vec probs = softmax(logits);
            const std::size_t y = scene.target;
            epoch_loss += -std::log(std::max(probs[y], 1e-12));

            // d loss / d logits for softmax cross-entropy.
            Vec dlogits = probs;
            dlogits[y] -= 1.0;

            Vec grad_h(h.size(), 0.0);
            for (std::size_t i = 0; i < scene.objects.size(); ++i) {
                if (dlogits[i] == 0.0) continue;
                // logits[i] = <h, mlp(repr_i)>
                for (std::size_t k = 0; k < h.size(); ++k)
                    grad_h[k] += dlogits[i] * obj_out[i][k];
                Vec upstream(h.size());
                for (std::size_t k = 0; k < h.size(); ++k) upstream[k] = dlogits[i] * h[k];
                BackwardResult back =
                    backward_traced(model.object_mlp, obj_traces[i], upstream);
                Vec flat;
                append_grads(back.grads, flat);
                for (std::size_t k = 0; k < flat.size(); ++k)
                    grads[turn_params + k] += flat[k];
                if (learn_table_ && obj_rows[i] != SIZE_MAX) {
                    const std::size_t row_off =
                        table_off + obj_rows[i] * model.category_table.cols;
                    for (std::size_t c = 0; c < model.category_table.cols; ++c)
                        grads[row_off + c] += back.input_grad[c];
                }
            }

            for (std::size_t t = 0; t < dialogue.turns.size(); ++t) {
                const double w = model.position_weights[t] * inv_turns;
                Vec upstream(h.size());
                double pos_grad = 0.0;
                for (std::size_t k = 0; k < h.size(); ++k) {
                    upstream[k] = grad_h[k] * w;
                    pos_grad += grad_h[k] * inv_turns * turn_traces[t].post.back()[k];
                }
                BackwardResult back =
                    backward_traced(model.turn_encoder, turn_traces[t], upstream);
                Vec flat;
                append_grads(back.grads, flat);
                for (std::size_t k = 0; k < flat.size(); ++k) grads[k] += flat[k];
                grads[pos_off + t] += pos_grad;
            }
        }
        const double inv = 1.0 / static_cast<double>(take);
        for (double& g : grads) g *= inv;
        Vec flat_params = pack_.flatten();
        adam_step(flat_params, grads, adam_, model.kind_tag());
        pack_.load(flat_params);
        done += take;
    }
    epoch_loss /= static_cast<double>(train_dialogues_->size());
    if (!std::isfinite(epoch_loss))
        throw training_error("train_guesser: diverged at epoch " + std::to_string(epoch_));
    return epoch_loss;
}

double GuesserTrainer::val_accuracy() const {
    return guesser_accuracy(*model_, *val_scenes_, *val_dialogues_, *bank_);
}

Vec GuesserTrainer::snapshot() const { return pack_.flatten(); }

void GuesserTrainer::restore(const Vec& params) { pack_.load(params); }

GuesserCurve train_guesser(GuesserModel& model, const std::vector<Scene>& train_scenes,
                           const std::vector<GoldDialogue>& train_dialogues,
                           const std::vector<Scene>& val_scenes,
                           const std::vector<GoldDialogue>& val_dialogues,
                           const QuestionBank& bank, const GuesserTrainConfig& config,
                           Rng& rng) {
    GuesserTrainer trainer(model, train_scenes, train_dialogues, val_scenes, val_dialogues,
                           bank, config, rng);
    GuesserCurve curve;
    Vec best_params = trainer.snapshot();
    double best_acc = -1.0;
    std::size_t since_best = 0;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        curve.train_loss.push_back(trainer.run_epoch());
        const double acc = trainer.val_accuracy();
        curve.val_accuracy.push_back(acc);
        if (acc > best_acc) {
            best_acc = acc;
            best_params = trainer.snapshot();
            curve.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }
    trainer.restore(best_params);
    return curve;
}

double guesser_accuracy(const GuesserModel& model, const std::vector<Scene>& scenes,
                        const std::vector<GoldDialogue>& dialogues,
                        const QuestionBank& bank) {
    if (dialogues.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& gd : dialogues) {
        const Scene& scene = scenes[gd.scene];
        if (predict_target(model, gd.dialogue, scene, bank) == scene.target) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(dialogues.size());
}

Checkpoint GuesserModel::to_checkpoint() const {
    Checkpoint ckpt;
    ckpt.kind = kind_tag();
    ckpt.add_net("turn_encoder", turn_encoder);
    ckpt.add_net("object_mlp", object_mlp);
    ckpt.add_tensor("position_weights", {position_weights.size()}, position_weights);
    if (mode == ReprMode::Category || mode == ReprMode::PredCat)
        ckpt.add_tensor("category_table", {category_table.rows, category_table.cols},
                        category_table.data);
    return ckpt;
}

GuesserModel GuesserModel::from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.kind.rfind("guesser:", 0) != 0)
        throw parse_error("expected guesser checkpoint, got kind " + ckpt.kind);
    GuesserModel model;
    model.mode = repr_mode_from_name(ckpt.kind.substr(8));
    model.turn_encoder = ckpt.restore_net("turn_encoder");
    model.object_mlp = ckpt.restore_net("object_mlp");
    model.position_weights = ckpt.tensor("position_weights");
    if (model.mode == ReprMode::Category || model.mode == ReprMode::PredCat) {
        auto shape = ckpt.tensor_shape("category_table");
        model.category_table = Matrix(shape.at(0), shape.at(1));
        model.category_table.data = ckpt.tensor("category_table");
    }
    return model;
}

}  // namespace guesslab
