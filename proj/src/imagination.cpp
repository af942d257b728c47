#include "guesslab/imagination.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "guesslab/common.hpp"

namespace guesslab {

ImaginationModel ImaginationModel::make(std::size_t d_o, const ImaginationConfig& config,
                                        std::size_t n_classes, Rng& rng) {
    ImaginationModel model;
    model.encoder = DenseNet::make({d_o, config.hidden, config.d_z},
                                   {Activation::Relu, Activation::Identity}, rng);
    model.decoder = DenseNet::make({config.d_z, config.hidden, d_o},
                                   {Activation::Relu, Activation::Identity}, rng);
    model.alpha = config.alpha;
    model.eta = config.eta;
    model.lambda_cat = config.lambda_cat;
    model.paper_literal_sign = config.paper_literal_sign;
    if (config.aux_category_loss) {
        if (n_classes == 0)
            throw config_error("aux category loss requires at least one in-domain class");
        model.category_head =
            DenseNet::make({config.d_z, n_classes}, {Activation::Softmax}, rng);
        model.class_weights.assign(n_classes, 1.0);
    }
    return model;
}

Vec ImaginationModel::encode(std::span<const double> v) const {
    if (v.size() != d_o()) throw shape_error("encode: input length != d_o");
    return encoder.forward(v);
}

Vec ImaginationModel::decode(std::span<const double> z) const {
    if (z.size() != d_z()) throw shape_error("decode: input length != d_z");
    return decoder.forward(z);
}

ParamPack ImaginationModel::params() {
    ParamPack pack;
    pack.nets.push_back(&encoder);
    pack.nets.push_back(&decoder);
    if (category_head) pack.nets.push_back(&*category_head);
    return pack;
}

Checkpoint ImaginationModel::to_checkpoint() const {
    Checkpoint ckpt;
    ckpt.kind = "imagination";
    ckpt.set_meta("alpha", alpha);
    ckpt.set_meta("eta", eta);
    ckpt.set_meta("lambda_cat", lambda_cat);
    ckpt.set_meta("paper_literal_sign", static_cast<long>(paper_literal_sign ? 1 : 0));
    ckpt.add_net("encoder", encoder);
    ckpt.add_net("decoder", decoder);
    if (category_head) {
        ckpt.add_net("category_head", *category_head);
        ckpt.add_tensor("class_weights", {class_weights.size()}, class_weights);
    }
    return ckpt;
}

ImaginationModel ImaginationModel::from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.kind != "imagination")
        throw parse_error("expected imagination checkpoint, got kind " + ckpt.kind);
    ImaginationModel model;
    model.encoder = ckpt.restore_net("encoder");
    model.decoder = ckpt.restore_net("decoder");
    model.alpha = ckpt.meta_double("alpha");
    model.eta = ckpt.meta_double("eta");
    model.lambda_cat = ckpt.meta_double("lambda_cat");
    model.paper_literal_sign = ckpt.meta_long("paper_literal_sign") != 0;
    if (ckpt.has_net("category_head")) {
        model.category_head = ckpt.restore_net("category_head");
        model.class_weights = ckpt.tensor("class_weights");
    }
    return model;
}

std::size_t sample_negative(const Scene& scene, std::size_t i, Rng& rng) {
    const int anchor_cat = scene.objects.at(i).category;
    std::vector<std::size_t> pool;
    for (std::size_t j = 0; j < scene.objects.size(); ++j)
        if (scene.objects[j].category != anchor_cat) pool.push_back(j);
    if (pool.empty())
        throw validation_error("sample_negative: scene " + scene.id +
                               " violates the two-category invariant");
    return pool[rng.uniform_index(pool.size())];
}

ReconstructionLoss reconstruction_loss(std::span<const double> v_i,
                                       std::span<const double> v_j,
                                       std::span<const double> v_tilde, double eta,
                                       bool paper_literal) {
    if (v_i.size() != v_tilde.size() || v_j.size() != v_tilde.size())
        throw shape_error("reconstruction_loss: length mismatch");
    if (eta <= 0.0) throw validation_error("reconstruction_loss: eta must be positive");

    const double mse_anchor = mse(v_i, v_tilde);
    const double mse_negative = mse(v_j, v_tilde);
    const double sign = paper_literal ? -1.0 : 1.0;
    const double margin = eta + sign * (mse_anchor - mse_negative);

    ReconstructionLoss out;
    out.grad_vtilde.assign(v_tilde.size(), 0.0);
    if (margin <= 0.0) return out;  // hinge inactive: loss and gradient exactly zero

    out.loss = margin;
    out.hinge_active = true;
    const double scale = 2.0 * sign / static_cast<double>(v_tilde.size());
    for (std::size_t k = 0; k < v_tilde.size(); ++k)
        out.grad_vtilde[k] = scale * ((v_tilde[k] - v_i[k]) - (v_tilde[k] - v_j[k]));
    return out;
}

double regularization_loss(std::span<const double> z, const DenseNet& decoder) {
    return norm(z) + param_norm(decoder);
}

Vec ImaginationGrads::flatten() const {
    Vec flat;
    append_grads(encoder, flat);
    append_grads(decoder, flat);
    if (head) append_grads(*head, flat);
    return flat;
}

ImaginationLossResult imagination_loss(const ImaginationModel& model, const Scene& scene,
                                       std::size_t i, Rng& rng, int in_domain_class) {
    const GameObject& anchor = scene.objects.at(i);
    const std::size_t j = sample_negative(scene, i, rng);
    const GameObject& negative = scene.objects[j];

    ForwardTrace enc_trace, dec_trace;
    Vec z = forward_traced(model.encoder, anchor.perceptual, enc_trace);
    Vec v_tilde = forward_traced(model.decoder, z, dec_trace);

    ReconstructionLoss rec = reconstruction_loss(anchor.perceptual, negative.perceptual,
                                                 v_tilde, model.eta,
                                                 model.paper_literal_sign);
    const double reg = regularization_loss(z, model.decoder);

    ImaginationLossResult out;
    out.reconstruction = rec.loss;
    out.regularization = reg;
    out.hinge_active = rec.hinge_active;
    out.negative = j;
    out.loss = rec.loss + model.alpha * reg;

    // Decoder path: reconstruction upstream plus alpha * theta / ||theta||.
    BackwardResult dec_back = backward_traced(model.decoder, dec_trace, rec.grad_vtilde);
    out.grads.decoder = std::move(dec_back.grads);
    const double theta_norm = param_norm(model.decoder);
    if (theta_norm > 0.0) {
        NetGrads theta_grad = NetGrads::zeros_like(model.decoder);
        for (std::size_t k = 0; k < model.decoder.layers.size(); ++k) {
            const auto& layer = model.decoder.layers[k];
            for (std::size_t idx = 0; idx < layer.weight.data.size(); ++idx)
                theta_grad.weight[k].data[idx] = layer.weight.data[idx] / theta_norm;
            for (std::size_t idx = 0; idx < layer.bias.size(); ++idx)
                theta_grad.bias[k][idx] = layer.bias[idx] / theta_norm;
        }
        out.grads.decoder.accumulate(theta_grad, model.alpha);
    }

    // Gradient reaching z: decoder input gradient plus alpha * z / ||z||,
    // plus the auxiliary category head when enabled.
    Vec grad_z = std::move(dec_back.input_grad);
    const double z_norm = norm(z);
    if (z_norm > 0.0)
        for (std::size_t k = 0; k < z.size(); ++k) grad_z[k] += model.alpha * z[k] / z_norm;

    if (model.category_head) {
        if (in_domain_class < 0)
            throw training_error("imagination_loss: aux head enabled but no class label");
        ForwardTrace head_trace;
        Vec probs = forward_traced(*model.category_head, z, head_trace);
        const double w = model.class_weights.at(static_cast<std::size_t>(in_domain_class));
        const double p = std::max(probs.at(static_cast<std::size_t>(in_domain_class)), 1e-12);
        out.loss += model.lambda_cat * w * -std::log(p);
        Vec upstream(probs.size(), 0.0);
        upstream[static_cast<std::size_t>(in_domain_class)] =
            model.lambda_cat * w * (-1.0 / p);
        BackwardResult head_back = backward_traced(*model.category_head, head_trace, upstream);
        out.grads.head = std::move(head_back.grads);
        for (std::size_t k = 0; k < z.size(); ++k) grad_z[k] += head_back.input_grad[k];
    }

    BackwardResult enc_back = backward_traced(model.encoder, enc_trace, grad_z);
    out.grads.encoder = std::move(enc_back.grads);
    return out;
}

namespace {

struct SampleRef {
    std::size_t scene = 0;
    std::size_t object = 0;
};

double epoch_mean_loss(const ImaginationModel& model, const std::vector<Scene>& scenes,
                       const CategoryVocabulary& vocab, bool aux, Rng& rng) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& scene : scenes) {
        for (std::size_t i = 0; i < scene.objects.size(); ++i) {
            int cls = aux ? vocab.in_domain_index(scene.objects[i].category) : -1;
            total += imagination_loss(model, scene, i, rng, cls).loss;
            ++count;
        }
    }
    return count ? total / static_cast<double>(count) : 0.0;
}

}  // namespace

Vec inverse_frequency_weights(const std::vector<Scene>& scenes,
                              const CategoryVocabulary& vocab) {
    const std::size_t n_classes = vocab.in_domain_ids().size();
    Vec counts(n_classes, 0.0);
    double total = 0.0;
    for (const auto& scene : scenes) {
        for (const auto& obj : scene.objects) {
            int idx = vocab.in_domain_index(obj.category);
            if (idx >= 0) {
                counts[static_cast<std::size_t>(idx)] += 1.0;
                total += 1.0;
            }
        }
    }
    Vec weights(n_classes, 1.0);
    for (std::size_t c = 0; c < n_classes; ++c)
        weights[c] = counts[c] > 0.0 ? total / (static_cast<double>(n_classes) * counts[c]) : 0.0;
    // Normalize present classes to mean one.
    double mean = 0.0;
    std::size_t present = 0;
    for (double w : weights)
        if (w > 0.0) {
            mean += w;
            ++present;
        }
    if (present > 0) {
        mean /= static_cast<double>(present);
        for (double& w : weights)
            if (w > 0.0) w /= mean;
    }
    return weights;
}

TrainCurve train_imagination(ImaginationModel& model, const std::vector<Scene>& train,
                             const std::vector<Scene>& val, const CategoryVocabulary& vocab,
                             const ImaginationConfig& config, Rng& rng) {
    if (train.empty()) throw training_error("train_imagination: empty training set");
    const bool aux = model.category_head.has_value();
    if (aux) model.class_weights = inverse_frequency_weights(train, vocab);

    std::vector<SampleRef> samples;
    for (std::size_t s = 0; s < train.size(); ++s)
        for (std::size_t i = 0; i < train[s].objects.size(); ++i) samples.push_back({s, i});

    ParamPack pack = model.params();
    AdamState adam = AdamState::make(pack.count(), config.lr);

    TrainCurve curve;
    Vec best_params = pack.flatten();
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    const std::uint64_t val_seed = rng.next();
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(samples);
        double epoch_loss = 0.0;
        std::size_t done = 0;
        while (done < samples.size()) {
            const std::size_t take = std::min(config.batch, samples.size() - done);
            Vec batch_grads(pack.count(), 0.0);
            for (std::size_t b = 0; b < take; ++b) {
                const SampleRef& ref = samples[done + b];
                const Scene& scene = train[ref.scene];
                int cls = aux ? vocab.in_domain_index(scene.objects[ref.object].category) : -1;
                ImaginationLossResult res = imagination_loss(model, scene, ref.object, rng, cls);
                epoch_loss += res.loss;
                Vec flat = res.grads.flatten();
                for (std::size_t k = 0; k < flat.size(); ++k) batch_grads[k] += flat[k];
            }
            const double inv = 1.0 / static_cast<double>(take);
            for (double& g : batch_grads) g *= inv;
            Vec flat_params = pack.flatten();
            adam_step(flat_params, batch_grads, adam, "imagination");
            pack.load(flat_params);
            done += take;
        }
        epoch_loss /= static_cast<double>(samples.size());
        if (!std::isfinite(epoch_loss))
            throw training_error("train_imagination: diverged at epoch " +
                                 std::to_string(epoch));
        curve.train_loss.push_back(epoch_loss);

        // Fixed negatives across epochs keep validation losses comparable.
        Rng val_rng(val_seed);
        const auto& val_set = val.empty() ? train : val;
        double val_loss = epoch_mean_loss(model, val_set, vocab, aux, val_rng);
        curve.val_loss.push_back(val_loss);
        if (val_loss < best_val) {
            best_val = val_loss;
            best_params = pack.flatten();
            curve.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }
    pack.load(best_params);
    return curve;
}

}  // namespace guesslab
