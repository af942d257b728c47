#pragma once

#include <optional>
#include <string>
#include <vector>

#include "guesslab/checkpoint.hpp"
#include "guesslab/numerics.hpp"
#include "guesslab/rng.hpp"
#include "guesslab/world.hpp"

namespace guesslab {

struct ImaginationConfig {
    std::size_t d_z = 16;
    std::size_t hidden = 32;
    double alpha = 1e-5;
    double eta = 1.0;
    double lr = 1e-3;
    std::size_t epochs = 40;
    std::size_t batch = 64;
    std::size_t patience = 8;
    bool aux_category_loss = false;
    double lambda_cat = 0.1;
    bool paper_literal_sign = false;
};

/// Encoder/decoder pair trained with the composite triplet-reconstruction +
/// norm-regularization loss. Encoding consumes only the perceptual vector, so
/// embeddings need no category labels at inference time.
struct ImaginationModel {
    DenseNet encoder;  // d_o -> hidden (relu) -> d_z
    DenseNet decoder;  // d_z -> hidden (relu) -> d_o, mirror of the encoder
    std::optional<DenseNet> category_head;  // d_z -> |C_in| softmax
    Vec class_weights;                      // per in-domain class, mean 1
    double alpha = 1e-5;
    double eta = 1.0;
    double lambda_cat = 0.1;
    bool paper_literal_sign = false;

    std::size_t d_o() const { return encoder.input_dim(); }
    std::size_t d_z() const { return encoder.output_dim(); }

    static ImaginationModel make(std::size_t d_o, const ImaginationConfig& config,
                                 std::size_t n_classes, Rng& rng);

    Vec encode(std::span<const double> v) const;
    Vec decode(std::span<const double> z) const;

    ParamPack params();
    Checkpoint to_checkpoint() const;
    static ImaginationModel from_checkpoint(const Checkpoint& ckpt);
};

/// Uniform draw over same-scene objects of a different category.
std::size_t sample_negative(const Scene& scene, std::size_t i, Rng& rng);

struct ReconstructionLoss {
    double loss = 0.0;
    Vec grad_vtilde;
    bool hinge_active = false;
};

/// max(0, eta + MSE(v_i, v_tilde) - MSE(v_j, v_tilde)). With
/// paper_literal = true the printed orientation
/// max(0, eta - MSE(v_i, v_tilde) + MSE(v_j, v_tilde)) is used instead.
ReconstructionLoss reconstruction_loss(std::span<const double> v_i,
                                       std::span<const double> v_j,
                                       std::span<const double> v_tilde, double eta,
                                       bool paper_literal = false);

/// ||z|| + ||decoder parameters||, plain Euclidean norms.
double regularization_loss(std::span<const double> z, const DenseNet& decoder);

struct ImaginationGrads {
    NetGrads encoder;
    NetGrads decoder;
    std::optional<NetGrads> head;

    Vec flatten() const;
};

struct ImaginationLossResult {
    double loss = 0.0;
    double reconstruction = 0.0;
    double regularization = 0.0;
    bool hinge_active = false;
    std::size_t negative = 0;
    ImaginationGrads grads;
};

/// Composite per-object loss with full parameter gradients. When the model
/// carries a category head the class-weighted cross-entropy term is added
/// (training only; in_domain_class must be >= 0 then).
ImaginationLossResult imagination_loss(const ImaginationModel& model, const Scene& scene,
                                       std::size_t i, Rng& rng, int in_domain_class = -1);

struct TrainCurve {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::size_t best_epoch = 0;
};

TrainCurve train_imagination(ImaginationModel& model, const std::vector<Scene>& train,
                             const std::vector<Scene>& val, const CategoryVocabulary& vocab,
                             const ImaginationConfig& config, Rng& rng);

/// Inverse-frequency class weights normalized to mean one.
Vec inverse_frequency_weights(const std::vector<Scene>& scenes,
                              const CategoryVocabulary& vocab);

}  // namespace guesslab
