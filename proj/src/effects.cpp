#include "latmed/effects.hpp"

#include "latmed/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace latmed {

namespace {

void check_models(const OutputModels& m, const MediationDataset& ds) {
    if (m.f_t.size() == 0 || m.f_m.size() == 0 || m.f_y.size() == 0) {
        throw InvalidInput("effect estimation needs fitted treatment, mediator and outcome models");
    }
    if (m.k() != ds.k() || m.p() != ds.p() || m.f_m.cols() != 2 + ds.p() ||
        m.f_y.size() != 2 + ds.p() + ds.k()) {
        throw InvalidInput("dimension mismatch: output models do not match the dataset");
    }
}

/// M_i(t) for every subject.
Matrix counterfactual_mediators(const OutputModels& m, const MediationDataset& ds, double t) {
    const Matrix deviation = ds.mediators - m.mediator_mean(ds.treatment, ds.covariates);
    return m.mediator_mean(Vector::Constant(ds.n(), t), ds.covariates) + deviation;
}

double mean_outcome(const OutputModels& m, const MediationDataset& ds, double t, const Matrix& med) {
    return m.outcome_mean(Vector::Constant(ds.n(), t), ds.covariates, med).mean();
}

}  // namespace

double estimate_subset_delta(const OutputModels& models, const MediationDataset& ds,
                             const std::vector<int>& subset, int t) {
    check_models(models, ds);
    if (subset.empty()) throw InvalidInput("mediator subset must be nonempty");
    if (t != 0 && t != 1) throw InvalidInput("treatment level must be 0 or 1");
    std::vector<int> sorted = subset;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw InvalidInput("mediator subset has repeated indices");
    }
    for (int j : sorted) {
        if (j < 0 || j >= ds.k()) throw InvalidInput("mediator index " + std::to_string(j) + " out of range");
    }
    const Matrix m1 = counterfactual_mediators(models, ds, 1.0);
    const Matrix m0 = counterfactual_mediators(models, ds, 0.0);
    // Mediators outside the subset stay at their value under t.
    Matrix hi = t == 1 ? m1 : m0;
    Matrix lo = hi;
    for (int j : sorted) {
        hi.col(j) = m1.col(j);
        lo.col(j) = m0.col(j);
    }
    return mean_outcome(models, ds, t, hi) - mean_outcome(models, ds, t, lo);
}

double estimate_subset_delta(const FitResult& fit, const MediationDataset& ds,
                             const std::vector<int>& subset, int t) {
    return estimate_subset_delta(fit.models, ds, subset, t);
}

EffectEstimates estimate_effects(const OutputModels& models, const MediationDataset& ds) {
    check_models(models, ds);
    const Matrix m1 = counterfactual_mediators(models, ds, 1.0);
    const Matrix m0 = counterfactual_mediators(models, ds, 0.0);
    EffectEstimates est;
    est.delta1 = mean_outcome(models, ds, 1.0, m1) - mean_outcome(models, ds, 1.0, m0);
    est.delta0 = mean_outcome(models, ds, 0.0, m1) - mean_outcome(models, ds, 0.0, m0);
    est.zeta1 = mean_outcome(models, ds, 1.0, m1) - mean_outcome(models, ds, 0.0, m1);
    est.zeta0 = mean_outcome(models, ds, 1.0, m0) - mean_outcome(models, ds, 0.0, m0);
    est.tau = est.delta1 + est.zeta0;
    for (int j = 0; j < ds.k(); ++j) {
        est.subset_deltas[{j}] = estimate_subset_delta(models, ds, {j}, 1);
    }
    return est;
}

EffectEstimates estimate_effects(const FitResult& fit, const MediationDataset& ds) {
    return estimate_effects(fit.models, ds);
}

BiasEntry bias_report(const EffectEstimates& est, const SimulationTruth& truth) {
    return {std::abs(est.tau - truth.true_total), std::abs(est.delta1 - truth.true_mediation),
            std::abs(est.delta0 - truth.true_mediation)};
}

BiasReport aggregate(const std::vector<ReplicationMetrics>& reps) {
    BiasReport r;
    r.per_rep = reps;
    r.replications = static_cast<Index>(reps.size());
    if (reps.empty()) return r;
    const double n = static_cast<double>(reps.size());
    for (const auto& x : reps) {
        r.bias_total += x.bias_total / n;
        r.bias_med += x.bias_med / n;
        r.mse_outcome += x.mse_outcome / n;
    }
    if (reps.size() > 1) {
        for (const auto& x : reps) {
            r.sd_bias_total += std::pow(x.bias_total - r.bias_total, 2);
            r.sd_bias_med += std::pow(x.bias_med - r.bias_med, 2);
            r.sd_mse_outcome += std::pow(x.mse_outcome - r.mse_outcome, 2);
        }
        r.sd_bias_total = std::sqrt(r.sd_bias_total / (n - 1));
        r.sd_bias_med = std::sqrt(r.sd_bias_med / (n - 1));
        r.sd_mse_outcome = std::sqrt(r.sd_mse_outcome / (n - 1));
    }
    return r;
}

double outcome_mse(const OutputModels& models, const MediationDataset& test) {
    check_models(models, test);
    const Vector pred = models.outcome_mean(test.treatment, test.covariates, test.mediators);
    return (test.outcome - pred).squaredNorm() / static_cast<double>(test.n());
}

double outcome_mse(const FitResult& fit, const MediationDataset& test, OutcomeAdjust adjust) {
    const OutputModels& m = fit.models;
    check_models(m, test);
    if (adjust == OutcomeAdjust::None) return outcome_mse(m, test);

    const Index k = test.k();
    const ColumnLayout lay = test.layout();
    const Matrix med_resid = test.mediators - m.mediator_mean(test.treatment, test.covariates);
    Vector g_y;
    if (fit.confounder.is_factor()) {
        const Matrix& a = fit.confounder.loadings();
        if (a.cols() != lay.width()) throw InvalidInput("dimension mismatch: loadings vs test data");
        const Matrix a_m = a.middleCols(1, k);  // r x k
        // Least-squares code: u = R A_m^T (A_m A_m^T)^-1.
        const Eigen::MatrixXd gram = a_m * a_m.transpose();
        const Eigen::MatrixXd rhs = (med_resid * a_m.transpose()).transpose();
        const Matrix u = gram.colPivHouseholderQr().solve(rhs).transpose();
        g_y = u * a.col(lay.outcome());
    } else {
        const AutoencoderWeights& w = fit.confounder.autoencoder();
        if (w.input_width() != lay.width()) throw InvalidInput("dimension mismatch: autoencoder vs test data");
        Matrix input(test.n(), lay.width());
        const Vector p_hat = m.treatment_mean(test.covariates);
        input.col(0) = test.treatment - p_hat;
        input.middleCols(1, k) = med_resid;
        input.col(lay.outcome()).setZero();
        g_y = ae_reconstruct(w, input).col(lay.outcome());
    }
    const Vector pred = m.outcome_mean(test.treatment, test.covariates, test.mediators) + g_y;
    return (test.outcome - pred).squaredNorm() / static_cast<double>(test.n());
}

}  // namespace latmed
