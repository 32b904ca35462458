#pragma once

#include "latmed/dataset.hpp"
#include "latmed/models.hpp"

#include <utility>

namespace latmed {

struct BackfitConfig {
    Index rank = 1;
    double lambda = 10.0;
    /// Learning rate for the U_hat block, scaled by sample size: the
    /// gradient step on the summed loss is step / n. A step that would raise
    /// the loss is halved until it does not.
    double step = 1e-3;
    double stop_tol = 1e-5;
    int max_iter = 500;
    int u_steps_per_iter = 5;
    TreatmentLink link = TreatmentLink::Logistic;
    /// Keep A at its starting value (step (iii) skipped).
    bool freeze_loadings = false;

    /// Throws InvalidInput naming the offending field.
    void validate(Index k) const;
};

/// Observed-data residuals L_obs plus what is needed to re-evaluate the
/// treatment column under a shifted confounding term.
///
/// For a logistic treatment model the treatment column of L_obs is
/// T - sigmoid(logit) and the confounding term enters as an offset on the
/// logit scale. With link == Linear every column is a plain difference.
struct ObservedResiduals {
    Matrix l_obs;           // n x (k + 2)
    Vector treatment;       // T
    Vector treatment_logit; // f_T(X) on the linear-predictor scale
    TreatmentLink link = TreatmentLink::Logistic;
};

struct LossParts {
    double treatment = 0.0;  // negative log-likelihood or squared error
    double mediators = 0.0;
    double outcome = 0.0;
    double penalty = 0.0;    // unweighted
    double total = 0.0;      // blocks + lambda * penalty
};

/// Plain regressions on the observed data, PCA scores of the standardized
/// (M, Y) residuals as U_hat, and least-squares loadings with the
/// treatment-column loading set to 0.
std::pair<OutputModels, ConfounderState> initialize(const MediationDataset& dataset,
                                                    const BackfitConfig& config);

ObservedResiduals observed_residuals(const MediationDataset& dataset, const OutputModels& models);

/// E = L_obs - G column by column (offset form for a logistic treatment).
Matrix residuals(const ObservedResiduals& obs, const Matrix& g_hat);

/// ||corr(E) - I||_F^2. Throws DegenerateResidual on a constant column.
double penalty(const Matrix& e);
/// d penalty / d E, same shape as E.
Matrix penalty_gradient_e(const Matrix& e);
/// d penalty(E(U)) / d U with E = L_obs - U A.
Matrix penalty_gradient_u(const ConfounderState& state, const ObservedResiduals& obs);

/// Constant residual columns are left out of the penalty here.
LossParts loss_parts(const ObservedResiduals& obs, const Matrix& g_hat, double lambda);
double loss(const MediationDataset& dataset, const OutputModels& models,
            const ConfounderState& state, double lambda);
/// Gradient of loss_parts(...).total with respect to U_hat.
Matrix loss_gradient_u(const ConfounderState& state, const ObservedResiduals& obs, double lambda);

/// Centers U_hat columns and scales them to unit (population) variance,
/// rescaling A inversely. Returns the removed column means times A, the
/// constant that G lost per column.
Vector normalize(ConfounderState& state);

/// Moves a per-column constant from G into the output-model intercepts so
/// that E is unchanged.
void absorb_shift(OutputModels& models, const Vector& shift);
void absorb_shift(ObservedResiduals& obs, const Vector& shift);

/// Step (i): u_steps_per_iter safeguarded gradient steps on U_hat, each
/// followed by normalization. When `models` is given the intercepts absorb
/// the centering shift; `obs` is kept consistent either way.
void update_u(ConfounderState& state, ObservedResiduals& obs, const BackfitConfig& config,
              OutputModels* models = nullptr);

/// Step (ii): refit every output model on its partial residual given G.
/// With treatment_offset == false the treatment model ignores G entirely.
OutputModels update_f(const MediationDataset& dataset, const Matrix& g_hat, TreatmentLink link,
                      bool treatment_offset = true);

/// Step (iii): per-column least squares of L_obs on U_hat without an
/// intercept (logistic with offset for a logistic treatment column).
Matrix update_a(const ObservedResiduals& obs, const Matrix& u_hat);

/// Convex combination (1 - s) * a + s * b of every coefficient.
OutputModels blend(const OutputModels& a, const OutputModels& b, double s);

FitResult fit(const MediationDataset& dataset, const BackfitConfig& config);
/// Backfitting from a caller-supplied starting point.
FitResult fit_from(const MediationDataset& dataset, const BackfitConfig& config,
                   OutputModels models, ConfounderState state);

}  // namespace latmed
