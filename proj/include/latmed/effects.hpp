#pragma once

#include "latmed/dataset.hpp"
#include "latmed/models.hpp"

#include <vector>

namespace latmed {

/// Plug-in estimates: counterfactual mediators keep each subject's observed
/// deviation from the fitted mediator mean; delta/zeta average the fitted
/// outcome contrasts. Singleton subset effects are filled in.
EffectEstimates estimate_effects(const OutputModels& models, const MediationDataset& dataset);
EffectEstimates estimate_effects(const FitResult& fit, const MediationDataset& dataset);

/// Mediation effect switching only the mediators in `subset` (zero-based,
/// nonempty, no repeats, each < k).
double estimate_subset_delta(const OutputModels& models, const MediationDataset& dataset,
                             const std::vector<int>& subset, int t);
double estimate_subset_delta(const FitResult& fit, const MediationDataset& dataset,
                             const std::vector<int>& subset, int t);

struct BiasEntry {
    double bias_total = 0.0;  // |tau - true_total|
    double bias_med = 0.0;    // |delta1 - true_mediation|
    double bias_med0 = 0.0;   // |delta0 - true_mediation|
};

BiasEntry bias_report(const EffectEstimates& estimates, const SimulationTruth& truth);

struct ReplicationMetrics {
    double bias_total = 0.0;
    double bias_med = 0.0;
    double mse_outcome = 0.0;
};

struct BiasReport {
    double bias_total = 0.0;
    double bias_med = 0.0;
    double mse_outcome = 0.0;
    double sd_bias_total = 0.0;
    double sd_bias_med = 0.0;
    double sd_mse_outcome = 0.0;
    Index replications = 0;
    std::vector<ReplicationMetrics> per_rep;
};

/// Means and sample standard deviations (0 for a single replication).
BiasReport aggregate(const std::vector<ReplicationMetrics>& reps);

enum class OutcomeAdjust { Confounder, None };

/// Test-set MSE of the outcome. The confounding term for a test subject is
/// recovered from its mediator residuals: a least-squares code on the
/// mediator loadings (factor model) or the frozen autoencoder applied with
/// the outcome entry set to 0.
double outcome_mse(const FitResult& fit, const MediationDataset& test,
                   OutcomeAdjust adjust = OutcomeAdjust::Confounder);
double outcome_mse(const OutputModels& models, const MediationDataset& test);

}  // namespace latmed
