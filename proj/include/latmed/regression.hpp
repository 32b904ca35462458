#pragma once

#include "latmed/types.hpp"

#include <optional>

namespace latmed {

struct LinearFit {
    Vector coefficients;  // intercept first when intercept == true
    double residual_variance = 0.0;
    bool intercept = true;
};

struct LogisticFit {
    Vector coefficients;  // intercept first when intercept == true
    bool converged = false;
    int iterations = 0;
    bool intercept = true;
};

struct LogisticOptions {
    int max_iter = 100;
    double tol = 1e-8;  // on the gradient norm of the mean negative log-likelihood
    bool intercept = true;
    /// Fixed per-row addition to the linear predictor.
    std::optional<Vector> offset;
};

/// Least squares via column-pivoted Householder QR.
///
/// Throws SingularDesign naming the first design column (zero-based, the
/// implicit intercept excluded) that is linearly dependent on the columns
/// before it, and InvalidInput when n does not exceed the coefficient count.
LinearFit ols_fit(const Matrix& design, const Vector& response, bool intercept = true);

/// Maximum likelihood logistic regression by iteratively reweighted least
/// squares with step halving. Complete separation is reported through
/// converged == false; single-class labels throw InvalidInput.
LogisticFit logistic_fit(const Matrix& design, const Vector& labels,
                         const LogisticOptions& options = {});

Vector predict_linear(const LinearFit& fit, const Matrix& design);
Vector predict_proba(const LogisticFit& fit, const Matrix& design,
                     const std::optional<Vector>& offset = std::nullopt);

/// Clamped logistic function; output lies strictly inside (0, 1).
double sigmoid(double x);

// Exposed for gradient checks.
double logistic_negloglik(const Matrix& design, const Vector& labels, const Vector& coefficients,
                          const LogisticOptions& options = {});
Vector logistic_score(const Matrix& design, const Vector& labels, const Vector& coefficients,
                      const LogisticOptions& options = {});

}  // namespace latmed
