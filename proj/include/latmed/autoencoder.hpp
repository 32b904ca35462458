#pragma once

#include "latmed/backfit.hpp"
#include "latmed/dataset.hpp"
#include "latmed/models.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace latmed {

struct AutoencoderConfig {
    Index rank = 1;          // code width
    Index hidden_width = 8;
    Activation activation = Activation::Tanh;
    int epochs_per_cycle = 100;
    double learn_rate = 0.05;
    double weight_init_scale = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Encoder in -> hidden -> rank, decoder rank -> hidden -> in. Hidden layers
/// use `activation`; the code and output layers are affine. Weights are
/// drawn N(0, scale^2 / fan_in), biases start at 0, standardization is the
/// identity.
AutoencoderWeights make_autoencoder(Index input_width, const AutoencoderConfig& config);

struct AeOutput {
    Vector code;
    Vector reconstruction;
};

/// Single-row forward pass including the input standardization.
AeOutput ae_forward(const AutoencoderWeights& weights, const Vector& input);
Matrix ae_encode(const AutoencoderWeights& weights, const Matrix& inputs);
Matrix ae_reconstruct(const AutoencoderWeights& weights, const Matrix& inputs);

/// Mean over rows of the squared reconstruction error, measured on the
/// standardized scale.
double ae_loss(const AutoencoderWeights& weights, const Matrix& batch);
/// Backpropagated gradient of ae_loss; same layout as the weights
/// (standardization fields are left empty).
AutoencoderWeights ae_gradient(const AutoencoderWeights& weights, const Matrix& batch);

/// Weight and bias entries in layer order, encoder first.
Vector flatten(const AutoencoderWeights& weights);
void unflatten(AutoencoderWeights& weights, const Vector& values);

struct AeTrainResult {
    AutoencoderWeights weights;
    Matrix u_hat;
    std::vector<double> loss_trace;  // one entry per epoch plus the start
};

/// Full-batch gradient descent with an adaptive step that is halved until
/// the loss does not increase. Columns of `g_matrix` are standardized first
/// (stats stored in the weights). A warm start keeps its own layer weights.
AeTrainResult ae_train(const Matrix& g_matrix, const AutoencoderConfig& config,
                       const std::optional<AutoencoderWeights>& warm_start = std::nullopt);

/// Alternates autoencoding of the observed residuals with partial-residual
/// refits of the output models until the relative loss change drops below
/// backfit.stop_tol. The treatment model is a plain logistic fit and the
/// treatment block of the loss is squared error on the probability scale.
FitResult fit_ae(const MediationDataset& dataset, const BackfitConfig& backfit,
                 const AutoencoderConfig& ae);

}  // namespace latmed
