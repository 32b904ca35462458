#pragma once

#include "latmed/dataset.hpp"
#include "latmed/models.hpp"

namespace latmed {

/// PCA of column-standardized data (the eigen-decomposition of its
/// correlation matrix), components in descending eigenvalue order.
struct Pca {
    Vector eigenvalues;
    Matrix components;  // columns are unit eigenvectors
    Vector mean;
    Vector scale;       // population standard deviations

    /// Scores of `data` on the leading r components.
    Matrix scores(const Matrix& data, Index r) const;
};

/// Throws DegenerateResidual on a constant column.
Pca correlation_pca(const Matrix& data);

/// Sample correlation matrix; throws DegenerateResidual on a constant column.
Matrix correlation_matrix(const Matrix& data);

/// Share of the leading eigenvalue in the correlation PCA of `data`.
double leading_component_share(const Matrix& data);

/// (M, Y) block of the observed residuals under `models`.
Matrix mediator_outcome_residuals(const MediationDataset& dataset, const OutputModels& models);

/// Correlation-PCA eigenvalues of the (M, Y) residual block, descending.
Vector residual_pca(const MediationDataset& dataset, const OutputModels& models);

/// argmax_i (lambda_i - lambda_{i+1}) as a 1-based rank, ties to the smaller.
Index select_rank(const Vector& eigenvalues);

struct ResidualAudit {
    Matrix correlation;
    double max_off_diagonal = 0.0;
};

ResidualAudit residual_audit(const Matrix& e);

struct LsemResult {
    OutputModels models;
    EffectEstimates effects;
};

/// Linear SEM without a latent confounder: OLS of each mediator on (T, X)
/// and of Y on (T, X, M); effects by coefficient products.
LsemResult lsem_fit(const MediationDataset& dataset);

}  // namespace latmed
