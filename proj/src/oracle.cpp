#include "guesslab/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "guesslab/common.hpp"

namespace guesslab {

std::string oracle_feature_name(OracleFeature f) {
    switch (f) {
        case OracleFeature::Question: return "question";
        case OracleFeature::Spatial: return "spatial";
        case OracleFeature::Crop: return "crop";
        case OracleFeature::Image: return "image";
        case OracleFeature::Category: return "category";
        case OracleFeature::Imagination: return "imagination";
    }
    throw validation_error("unknown oracle feature");
}

std::vector<OracleFeature> parse_feature_set(const std::string& spec) {
    std::vector<OracleFeature> out;
    std::stringstream ss(spec);
    std::string token;
    while (std::getline(ss, token, '+')) {
        bool found = false;
        for (int f = 0; f <= static_cast<int>(OracleFeature::Imagination); ++f) {
            if (oracle_feature_name(static_cast<OracleFeature>(f)) == token) {
                out.push_back(static_cast<OracleFeature>(f));
                found = true;
                break;
            }
        }
        if (!found) throw config_error("unknown oracle feature: " + token);
    }
    if (out.empty()) throw config_error("empty oracle feature set");
    // Canonical order, deduplicated.
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::string feature_set_name(const std::vector<OracleFeature>& features) {
    std::string out;
    for (const auto& f : features) {
        if (!out.empty()) out += "+";
        out += oracle_feature_name(f);
    }
    return out;
}

bool OracleModel::uses(OracleFeature f) const {
    return std::find(features.begin(), features.end(), f) != features.end();
}

std::string OracleModel::kind_tag() const {
    return majority ? "oracle:majority" : "oracle:" + feature_set_name(features);
}

std::size_t OracleModel::input_dim(const QuestionBank& bank) const {
    std::size_t dim = 0;
    const std::size_t d_o = bank.vocab().d_o;
    for (const auto& f : features) {
        switch (f) {
            case OracleFeature::Question: dim += bank.d_q(); break;
            case OracleFeature::Spatial: dim += 8; break;
            case OracleFeature::Crop: dim += d_o; break;
            case OracleFeature::Image: dim += d_o; break;
            case OracleFeature::Category: dim += category_table.cols; break;
            case OracleFeature::Imagination:
                if (!imagination)
                    throw config_error("imagination feature requires an attached model");
                dim += imagination->d_z();
                break;
        }
    }
    return dim;
}

OracleModel OracleModel::make_majority() {
    OracleModel model;
    model.majority = true;
    model.majority_dist.assign(3, 1.0 / 3.0);
    return model;
}

OracleModel OracleModel::make(const std::vector<OracleFeature>& features,
                              const QuestionBank& bank, const OracleTrainConfig& config,
                              Rng& rng) {
    OracleModel model;
    model.features = features;
    if (model.uses(OracleFeature::Category)) {
        const std::size_t k = bank.vocab().in_domain_ids().size();
        model.category_table = Matrix(k + 1, config.d_c);
        const double bound = std::sqrt(6.0 / static_cast<double>(k + 1 + config.d_c));
        for (double& w : model.category_table.data) w = rng.uniform(-bound, bound);
    }
    return model;  // classifier built lazily once the imagination model is attached
}

namespace {

void ensure_classifier(OracleModel& model, const QuestionBank& bank,
                       const OracleTrainConfig& config, Rng& rng) {
    if (!model.classifier.layers.empty()) return;
    model.classifier = DenseNet::make({model.input_dim(bank), config.hidden, 3},
                                      {Activation::Relu, Activation::Softmax}, rng);
}

/// Row index into the category table; unseen categories map to the UNK row.
std::size_t category_row(const OracleModel& model, const CategoryVocabulary& vocab,
                         int category_id) {
    int idx = vocab.in_domain_index(category_id);
    return idx >= 0 ? static_cast<std::size_t>(idx) : model.category_table.rows - 1;
}

struct OracleInput {
    Vec features;
    std::size_t category_offset = SIZE_MAX;  // offset of the category slice, if used
    std::size_t category_row = 0;
};

OracleInput assemble_input(const OracleModel& model, const Question& q, const Scene& scene,
                           std::size_t target, const QuestionBank& bank) {
    const GameObject& obj = scene.objects.at(target);
    OracleInput in;
    for (const auto& f : model.features) {
        switch (f) {
            case OracleFeature::Question: {
                Vec qe = bank.encode(q);
                in.features.insert(in.features.end(), qe.begin(), qe.end());
                break;
            }
            case OracleFeature::Spatial:
                in.features.insert(in.features.end(), obj.spatial.begin(), obj.spatial.end());
                break;
            case OracleFeature::Crop:
                in.features.insert(in.features.end(), obj.perceptual.begin(),
                                   obj.perceptual.end());
                break;
            case OracleFeature::Image: {
                Vec mean(bank.vocab().d_o, 0.0);
                for (const auto& o : scene.objects)
                    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += o.perceptual[k];
                for (double& m : mean) m /= static_cast<double>(scene.objects.size());
                in.features.insert(in.features.end(), mean.begin(), mean.end());
                break;
            }
            case OracleFeature::Category: {
                in.category_offset = in.features.size();
                in.category_row = category_row(model, bank.vocab(), obj.category);
                const double* row = model.category_table.data.data() +
                                    in.category_row * model.category_table.cols;
                in.features.insert(in.features.end(), row, row + model.category_table.cols);
                break;
            }
            case OracleFeature::Imagination: {
                if (!model.imagination)
                    throw config_error("oracle: imagination feature without attached model");
                Vec z = model.imagination->encode(obj.perceptual);
                in.features.insert(in.features.end(), z.begin(), z.end());
                break;
            }
        }
    }
    return in;
}

}  // namespace

Vec oracle_forward(const OracleModel& model, const Question& q, const Scene& scene,
                   std::size_t target, const QuestionBank& bank) {
    if (model.majority) return model.majority_dist;
    if (model.classifier.layers.empty())
        throw config_error("oracle_forward: classifier not initialized (untrained model)");
    OracleInput in = assemble_input(model, q, scene, target, bank);
    return model.classifier.forward(in.features);
}

Answer oracle_answer(const OracleModel& model, const Question& q, const Scene& scene,
                     std::size_t target, const QuestionBank& bank) {
    Vec probs = oracle_forward(model, q, scene, target, bank);
    std::size_t best = 0;
    for (std::size_t k = 1; k < probs.size(); ++k)
        if (probs[k] > probs[best]) best = k;
    return static_cast<Answer>(best);
}

Question sample_question(const QuestionBank& bank, const Scene& scene, std::size_t target,
                         const OracleTrainConfig& config, Rng& rng) {
    // Mix mirrors natural gameplay: identity and location questions dominate.
    static const double kDefaultMix[kNumQTypes] = {0.15, 0.30, 0.10, 0.05, 0.05, 0.05, 0.30};
    const double* mix = config.qtype_weights.size() == kNumQTypes
                            ? config.qtype_weights.data()
                            : kDefaultMix;
    double total = 0.0;
    for (std::size_t t = 0; t < kNumQTypes; ++t) total += mix[t];
    double r = rng.uniform() * total;
    std::size_t t = 0;
    for (; t + 1 < kNumQTypes; ++t) {
        if (r < mix[t]) break;
        r -= mix[t];
    }
    const QType qt = static_cast<QType>(t);
    const GameObject& obj = scene.objects.at(target);

    int truthful = 0;
    switch (qt) {
        case QType::Supercategory:
            truthful = bank.vocab().categories.at(static_cast<std::size_t>(obj.category))
                           .supercategory;
            break;
        case QType::Object: truthful = obj.category; break;
        case QType::Color: truthful = obj.attrs.color; break;
        case QType::Size: truthful = obj.attrs.size; break;
        case QType::Texture: truthful = obj.attrs.texture; break;
        case QType::Shape: truthful = obj.attrs.shape; break;
        case QType::Location: {
            std::vector<int> holding;
            for (std::size_t reg = 0; reg < kNumRegions; ++reg)
                if (QuestionBank::in_region(obj.spatial[4], obj.spatial[5],
                                            static_cast<Region>(reg)))
                    holding.push_back(static_cast<int>(reg));
            truthful = holding.empty() ? 0 : holding[rng.uniform_index(holding.size())];
            break;
        }
    }
    int argument;
    if (rng.uniform() < config.yes_bias)
        argument = truthful;
    else
        argument = static_cast<int>(rng.uniform_index(bank.arg_space(qt)));
    Question q;
    q.qtype = qt;
    q.argument = argument;
    q.text = bank.render(qt, argument);
    return q;
}

namespace {

template <typename Sample>
std::vector<Sample> make_samples(const std::vector<Scene>& scenes, const QuestionBank& bank,
                                 const OracleTrainConfig& config, Rng& rng) {
    std::vector<Sample> out;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
        for (std::size_t k = 0; k < config.questions_per_scene; ++k) {
            Sample sample;
            sample.scene = s;
            sample.q = sample_question(bank, scenes[s], scenes[s].target, config, rng);
            sample.label =
                bank.ground_truth(scenes[s], scenes[s].target_object(), sample.q);
            out.push_back(std::move(sample));
        }
    }
    return out;
}

}  // namespace

OracleTrainer::OracleTrainer(OracleModel& model, const std::vector<Scene>& train,
                             const std::vector<Scene>& val, const QuestionBank& bank,
                             const OracleTrainConfig& config, Rng& rng)
    : model_(&model), train_(&train), val_(&val), bank_(&bank), config_(config), rng_(&rng) {
    if (train.empty()) throw training_error("train_oracle: empty training set");
    train_samples_ = make_samples<Sample>(train, bank, config, rng);
    val_samples_ = make_samples<Sample>(val, bank, config, rng);
    if (!model.majority) {
        ensure_classifier(model, bank, config, rng);
        pack_.nets.push_back(&model.classifier);
        if (model.uses(OracleFeature::Category))
            pack_.tensors.push_back(&model.category_table.data);
        adam_ = AdamState::make(pack_.count(), config.lr);
    }
}

double OracleTrainer::run_epoch() {
    ++epoch_;
    if (model_->majority) {
        Vec counts(3, 0.0);
        for (const auto& s : train_samples_)
            counts[static_cast<std::size_t>(s.label)] += 1.0;
        model_->majority_dist = counts;
        for (double& c : model_->majority_dist)
            c /= static_cast<double>(train_samples_.size());
        return 0.0;
    }
    rng_->shuffle(train_samples_);
    double epoch_loss = 0.0;
    std::size_t done = 0;
    const std::size_t table_off = param_count(model_->classifier);
    while (done < train_samples_.size()) {
        const std::size_t take = std::min(config_.batch, train_samples_.size() - done);
        Vec grads(pack_.count(), 0.0);
        for (std::size_t b = 0; b < take; ++b) {
            const Sample& s = train_samples_[done + b];
            OracleInput in = assemble_input(*model_, s.q, (*train_)[s.scene],
                                            (*train_)[s.scene].target, *bank_);
            ForwardTrace trace;
            Vec probs = forward_traced(model_->classifier, in.features, trace);
            const std::size_t y = static_cast<std::size_t>(s.label);
            const double p = std::max(probs[y], 1e-12);
            epoch_loss += -std::log(p);
            Vec upstream(3, 0.0);
            upstream[y] = -1.0 / p;
            BackwardResult back = backward_traced(model_->classifier, trace, upstream);
            Vec flat;
            append_grads(back.grads, flat);
            for (std::size_t k = 0; k < flat.size(); ++k) grads[k] += flat[k];
            if (in.category_offset != SIZE_MAX) {
                const std::size_t row_off =
                    table_off + in.category_row * model_->category_table.cols;
                for (std::size_t c = 0; c < model_->category_table.cols; ++c)
                    grads[row_off + c] += back.input_grad[in.category_offset + c];
            }
        }
        const double inv = 1.0 / static_cast<double>(take);
        for (double& g : grads) g *= inv;
        Vec flat_params = pack_.flatten();
        adam_step(flat_params, grads, adam_, model_->kind_tag());
        pack_.load(flat_params);
        done += take;
    }
    epoch_loss /= static_cast<double>(train_samples_.size());
    if (!std::isfinite(epoch_loss))
        throw training_error("train_oracle: diverged at epoch " + std::to_string(epoch_));
    return epoch_loss;
}

double OracleTrainer::val_accuracy() const {
    if (val_samples_.empty()) return 0.0;
    if (model_->majority) {
        std::size_t mode = 0;
        for (std::size_t k = 1; k < 3; ++k)
            if (model_->majority_dist[k] > model_->majority_dist[mode]) mode = k;
        double correct = 0.0;
        for (const auto& s : val_samples_)
            if (static_cast<std::size_t>(s.label) == mode) correct += 1.0;
        return correct / static_cast<double>(val_samples_.size());
    }
    double correct = 0.0;
    for (const auto& s : val_samples_) {
        if (oracle_answer(*model_, s.q, (*val_)[s.scene], (*val_)[s.scene].target, *bank_) ==
            s.label)
            correct += 1.0;
    }
    return correct / static_cast<double>(val_samples_.size());
}

Vec OracleTrainer::snapshot() const {
    return model_->majority ? model_->majority_dist : pack_.flatten();
}

void OracleTrainer::restore(const Vec& params) {
    if (model_->majority)
        model_->majority_dist = params;
    else
        pack_.load(params);
}

OracleCurve train_oracle(OracleModel& model, const std::vector<Scene>& train,
                         const std::vector<Scene>& val, const QuestionBank& bank,
                         const OracleTrainConfig& config, Rng& rng) {
    OracleTrainer trainer(model, train, val, bank, config, rng);
    OracleCurve curve;
    if (model.majority) {
        trainer.run_epoch();
        curve.val_accuracy.push_back(trainer.val_accuracy());
        curve.best_epoch = 1;
        return curve;
    }
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

double oracle_accuracy(const OracleModel& model, const std::vector<Scene>& scenes,
                       const QuestionBank& bank, const OracleTrainConfig& config,
                       std::uint64_t seed, std::vector<std::size_t>* correct_per_type,
                       std::vector<std::size_t>* count_per_type) {
    Rng rng = Rng::named(seed, "oracle.accuracy");
    if (correct_per_type) correct_per_type->assign(kNumQTypes, 0);
    if (count_per_type) count_per_type->assign(kNumQTypes, 0);
    std::size_t correct = 0, total = 0;
    for (const auto& scene : scenes) {
        for (std::size_t k = 0; k < config.questions_per_scene; ++k) {
            Question q = sample_question(bank, scene, scene.target, config, rng);
            Answer truth = bank.ground_truth(scene, scene.target_object(), q);
            Answer predicted = oracle_answer(model, q, scene, scene.target, bank);
            const std::size_t t = static_cast<std::size_t>(q.qtype);
            if (count_per_type) (*count_per_type)[t] += 1;
            if (predicted == truth) {
                ++correct;
                if (correct_per_type) (*correct_per_type)[t] += 1;
            }
            ++total;
        }
    }
    return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

Checkpoint OracleModel::to_checkpoint() const {
    Checkpoint ckpt;
    ckpt.kind = kind_tag();
    if (majority) {
        ckpt.add_tensor("majority_dist", {3}, majority_dist);
        return ckpt;
    }
    ckpt.add_net("classifier", classifier);
    if (uses(OracleFeature::Category)) {
        ckpt.set_meta("d_c", static_cast<long>(category_table.cols));
        ckpt.add_tensor("category_table", {category_table.rows, category_table.cols},
                        category_table.data);
    }
    return ckpt;
}

OracleModel OracleModel::from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.kind.rfind("oracle:", 0) != 0)
        throw parse_error("expected oracle checkpoint, got kind " + ckpt.kind);
    const std::string spec = ckpt.kind.substr(7);
    OracleModel model;
    if (spec == "majority") {
        model.majority = true;
        model.majority_dist = ckpt.tensor("majority_dist");
        return model;
    }
    model.features = parse_feature_set(spec);
    model.classifier = ckpt.restore_net("classifier");
    if (model.uses(OracleFeature::Category)) {
        auto shape = ckpt.tensor_shape("category_table");
        model.category_table = Matrix(shape.at(0), shape.at(1));
        model.category_table.data = ckpt.tensor("category_table");
    }
    return model;
}

}  // namespace guesslab
