#include "latmed/regression.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace latmed {

namespace {

constexpr double kRankThreshold = 1e-10;
constexpr double kLogitClamp = 30.0;

Matrix augmented(const Matrix& design, bool intercept) {
    if (!intercept) return design;
    Matrix d(design.rows(), design.cols() + 1);
    d.col(0).setOnes();
    d.rightCols(design.cols()) = design;
    return d;
}

Index rank_of(const Matrix& m) {
    Eigen::ColPivHouseholderQR<Matrix> qr(m);
    qr.setThreshold(kRankThreshold);
    return qr.rank();
}

[[noreturn]] void throw_singular(const Matrix& design, bool intercept) {
    const Index offset = intercept ? 1 : 0;
    for (Index j = 0; j < design.cols(); ++j) {
        Matrix head = augmented(design.leftCols(j + 1), intercept);
        if (rank_of(head) < j + 1 + offset) {
            throw SingularDesign(j, "rank-deficient design: column " + std::to_string(j) +
                                        " is linearly dependent on the columns before it" +
                                        (intercept ? " (including the intercept)" : ""));
        }
    }
    throw SingularDesign(-1, "rank-deficient design");
}

void check_binary(const Vector& labels) {
    bool has0 = false;
    bool has1 = false;
    for (Index i = 0; i < labels.size(); ++i) {
        if (labels(i) == 0.0) {
            has0 = true;
        } else if (labels(i) == 1.0) {
            has1 = true;
        } else {
            throw InvalidInput("logistic labels must be 0 or 1");
        }
    }
    if (!has0 || !has1) throw InvalidInput("logistic regression needs both classes present");
}

Vector linear_predictor(const Matrix& x, const Vector& beta, const LogisticOptions& opt) {
    Vector eta = x * beta;
    if (opt.offset) eta += *opt.offset;
    return eta;
}

double softplus(double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

double negloglik_from_eta(const Vector& eta, const Vector& y) {
    double s = 0.0;
    for (Index i = 0; i < eta.size(); ++i) s += softplus(eta(i)) - y(i) * eta(i);
    return s;
}

}  // namespace

double sigmoid(double x) {
    const double c = std::clamp(x, -kLogitClamp, kLogitClamp);
    return 1.0 / (1.0 + std::exp(-c));
}

LinearFit ols_fit(const Matrix& design, const Vector& response, bool intercept) {
    if (design.rows() != response.size()) {
        throw InvalidInput("dimension mismatch: design rows differ from response length");
    }
    const Matrix x = augmented(design, intercept);
    if (x.rows() <= x.cols()) {
        throw InvalidInput("ols_fit needs more rows than coefficients");
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(x);
    qr.setThreshold(kRankThreshold);
    if (qr.rank() < x.cols()) throw_singular(design, intercept);

    LinearFit fit;
    fit.intercept = intercept;
    fit.coefficients = qr.solve(response);
    const Vector resid = response - x * fit.coefficients;
    fit.residual_variance = resid.squaredNorm() / static_cast<double>(x.rows() - x.cols());
    return fit;
}

double logistic_negloglik(const Matrix& design, const Vector& labels, const Vector& coefficients,
                          const LogisticOptions& options) {
    const Matrix x = augmented(design, options.intercept);
    return negloglik_from_eta(linear_predictor(x, coefficients, options), labels);
}

Vector logistic_score(const Matrix& design, const Vector& labels, const Vector& coefficients,
                      const LogisticOptions& options) {
    const Matrix x = augmented(design, options.intercept);
    const Vector eta = linear_predictor(x, coefficients, options);
    Vector resid(eta.size());
    for (Index i = 0; i < eta.size(); ++i) resid(i) = labels(i) - 1.0 / (1.0 + std::exp(-eta(i)));
    // Gradient of the log-likelihood (not the negative).
    return x.transpose() * resid;
}

LogisticFit logistic_fit(const Matrix& design, const Vector& labels, const LogisticOptions& opt) {
    if (design.rows() != labels.size()) {
        throw InvalidInput("dimension mismatch: design rows differ from label length");
    }
    if (opt.offset && opt.offset->size() != labels.size()) {
        throw InvalidInput("dimension mismatch: offset length differs from label length");
    }
    check_binary(labels);

    const Matrix x = augmented(design, opt.intercept);
    const auto n = static_cast<double>(x.rows());
    LogisticFit fit;
    fit.intercept = opt.intercept;
    fit.coefficients = Vector::Zero(x.cols());

    Vector eta = linear_predictor(x, fit.coefficients, opt);
    double nll = negloglik_from_eta(eta, labels);
    bool stalled = false;

    for (int it = 0; it < opt.max_iter; ++it) {
        Vector p(eta.size());
        Vector w(eta.size());
        for (Index i = 0; i < eta.size(); ++i) {
            p(i) = 1.0 / (1.0 + std::exp(-eta(i)));
            w(i) = std::max(p(i) * (1.0 - p(i)), 1e-12);
        }
        const Vector grad = x.transpose() * (labels - p) / n;
        fit.iterations = it;
        if (grad.norm() < opt.tol) {
            fit.converged = true;
            break;
        }
        const Matrix hess = x.transpose() * w.asDiagonal() * x / n;
        Vector step = hess.ldlt().solve(grad);
        if (!step.allFinite()) step = grad;

        double scale = 1.0;
        bool accepted = false;
        for (int h = 0; h < 40; ++h) {
            const Vector trial = fit.coefficients + scale * step;
            const Vector trial_eta = linear_predictor(x, trial, opt);
            const double trial_nll = negloglik_from_eta(trial_eta, labels);
            if (std::isfinite(trial_nll) && trial_nll <= nll) {
                fit.coefficients = trial;
                eta = trial_eta;
                nll = trial_nll;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) {
            stalled = true;
            break;
        }
    }
    if (stalled) {
        const Vector p = eta.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
        fit.converged = (x.transpose() * (labels - p) / n).norm() < std::sqrt(opt.tol);
    }

    // Every row on the correct side of the fitted boundary means the data
    // are completely separated and the MLE does not exist.
    bool separated = true;
    for (Index i = 0; i < eta.size() && separated; ++i) {
        separated = (2.0 * labels(i) - 1.0) * eta(i) > 0.0;
    }
    if (separated) fit.converged = false;
    return fit;
}

Vector predict_linear(const LinearFit& fit, const Matrix& design) {
    const Index expected = fit.coefficients.size() - (fit.intercept ? 1 : 0);
    if (design.cols() != expected) {
        throw InvalidInput("dimension mismatch: design has " + std::to_string(design.cols()) +
                           " columns, fit expects " + std::to_string(expected));
    }
    return augmented(design, fit.intercept) * fit.coefficients;
}

Vector predict_proba(const LogisticFit& fit, const Matrix& design,
                     const std::optional<Vector>& offset) {
    const Index expected = fit.coefficients.size() - (fit.intercept ? 1 : 0);
    if (design.cols() != expected) {
        throw InvalidInput("dimension mismatch: design has " + std::to_string(design.cols()) +
                           " columns, fit expects " + std::to_string(expected));
    }
    Vector eta = augmented(design, fit.intercept) * fit.coefficients;
    if (offset) {
        if (offset->size() != eta.size()) throw InvalidInput("dimension mismatch: offset length");
        eta += *offset;
    }
    return eta.unaryExpr([](double v) { return sigmoid(v); });
}

}  // namespace latmed
