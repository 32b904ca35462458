#pragma once

#include "latmed/types.hpp"

#include <map>
#include <string>
#include <variant>
#include <vector>

namespace latmed {

enum class TreatmentLink { Logistic, Linear };

/// Fitted output functions F = (f_T, f_M1..f_Mk, f_Y).
///
/// Coefficient order is fixed: intercept first, then T, X1..Xp, M1..Mk where
/// each applies. f_t is on the logit scale when link == Logistic.
struct OutputModels {
    TreatmentLink link = TreatmentLink::Logistic;
    Vector f_t;  // 1 + p
    Matrix f_m;  // k x (2 + p)
    Vector f_y;  // 2 + p + k

    Index k() const { return f_m.rows(); }
    Index p() const { return f_t.size() - 1; }

    double alpha() const { return f_y(1); }
    Vector beta_m() const { return f_m.col(1); }
    Vector beta_y() const { return f_y.tail(k()); }

    /// Linear predictor of the treatment model (logit scale for Logistic).
    Vector treatment_predictor(const Matrix& covariates) const;
    /// E[T | X]: probability for Logistic, the linear predictor otherwise.
    Vector treatment_mean(const Matrix& covariates) const;
    /// n x k matrix of f_Mj(T_i, X_i).
    Matrix mediator_mean(const Vector& treatment, const Matrix& covariates) const;
    Vector outcome_mean(const Vector& treatment, const Matrix& covariates,
                        const Matrix& mediators) const;
};

enum class Activation { Tanh, Relu, Identity };

struct DenseLayer {
    Matrix weight;  // out x in
    Vector bias;    // out
    Activation activation = Activation::Identity;

    Index inputs() const { return weight.cols(); }
    Index outputs() const { return weight.rows(); }
};

/// Encoder/decoder stacks plus the column standardization applied to inputs
/// before encoding (reconstructions are mapped back with the same stats).
struct AutoencoderWeights {
    std::vector<DenseLayer> encoder;
    std::vector<DenseLayer> decoder;
    Vector input_mean;
    Vector input_scale;

    Index input_width() const { return encoder.front().inputs(); }
    Index code_width() const { return encoder.back().outputs(); }
};

struct FactorLoading {
    Matrix a;  // r x (k + 2), columns (T, M1..Mk, Y)
};

/// Surrogate confounder U_hat and its confounding-effect model.
struct ConfounderState {
    Matrix u_hat;  // n x r
    std::variant<FactorLoading, AutoencoderWeights> effect_model;

    Index rank() const { return u_hat.cols(); }
    bool is_factor() const { return std::holds_alternative<FactorLoading>(effect_model); }
    const Matrix& loadings() const { return std::get<FactorLoading>(effect_model).a; }
    Matrix& loadings() { return std::get<FactorLoading>(effect_model).a; }
    const AutoencoderWeights& autoencoder() const {
        return std::get<AutoencoderWeights>(effect_model);
    }
};

/// E = (eps_T, eps_M1..eps_Mk, eps_Y), n x (k + 2).
struct ResidualMatrix {
    Matrix e;
};

struct FitResult {
    OutputModels models;
    ConfounderState confounder;
    ResidualMatrix residuals;
    /// Confounding-effect matrix G_hat evaluated on the training subjects.
    Matrix g_hat;
    std::vector<double> loss_trace;
    double penalty_final = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<std::string> warnings;
};

struct EffectEstimates {
    double delta0 = 0.0;
    double delta1 = 0.0;
    double zeta0 = 0.0;
    double zeta1 = 0.0;
    double tau = 0.0;
    /// Keyed by zero-based mediator indices, sorted ascending.
    std::map<std::vector<int>, double> subset_deltas;
};

}  // namespace latmed
