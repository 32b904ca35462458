#pragma once

#include "latmed/types.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace latmed {

/// Ground truth recorded by the simulation generators.
struct SimulationTruth {
    Vector u_true;
    double alpha_y = 0.0;
    Vector beta_m;
    Vector beta_y;
    Vector gamma_y;
    Matrix gamma_m;  // p x k
    Vector eta;      // (eta_0 for Y, eta_1..eta_k); empty for nonlinear settings
    double true_total = 0.0;
    double true_mediation = 0.0;
};

/// Observed (T, M, Y, X) for n subjects plus optional simulation truth.
struct MediationDataset {
    Vector treatment;   // n, entries in {0, 1}
    Matrix mediators;   // n x k
    Vector outcome;     // n
    Matrix covariates;  // n x p, p may be 0
    std::optional<SimulationTruth> truth;

    Index n() const { return treatment.size(); }
    Index k() const { return mediators.cols(); }
    Index p() const { return covariates.cols(); }
    ColumnLayout layout() const { return ColumnLayout{k()}; }

    /// Rows selected in the given order; truth.u_true is subset alongside.
    MediationDataset subset(std::span<const Index> rows) const;
};

/// Violated invariants, one message per problem; empty iff well-formed.
std::vector<std::string> validate(const MediationDataset& dataset);

/// Throws InvalidInput listing every violation when the dataset is malformed.
void require_valid(const MediationDataset& dataset);

// Design matrices (no intercept column) for the three output models.
Matrix treatment_design(const MediationDataset& dataset);  // X
Matrix mediator_design(const MediationDataset& dataset);   // (T, X)
Matrix outcome_design(const MediationDataset& dataset);    // (T, X, M)

}  // namespace latmed
