#include "latmed/diagnostics.hpp"

#include "latmed/backfit.hpp"
#include "latmed/effects.hpp"

#include <cmath>
#include <string>

namespace latmed {

namespace {

Matrix standardized(const Matrix& data, Vector& mean, Vector& scale) {
    if (data.rows() < 2) throw InvalidInput("at least two rows are needed for a correlation");
    mean = data.colwise().mean().transpose();
    Matrix z = data.rowwise() - mean.transpose();
    const double n = static_cast<double>(data.rows());
    scale.resize(data.cols());
    for (Index j = 0; j < data.cols(); ++j) {
        const double sd = std::sqrt(z.col(j).squaredNorm() / n);
        if (!(sd > 1e-12 * (1.0 + std::abs(mean(j))))) {
            throw DegenerateResidual("column " + std::to_string(j) + " has zero variance");
        }
        scale(j) = sd;
        z.col(j) /= sd;
    }
    return z;
}

}  // namespace

Matrix Pca::scores(const Matrix& data, Index r) const {
    if (data.cols() != mean.size()) throw InvalidInput("dimension mismatch in PCA scores");
    if (r < 1 || r > components.cols()) throw InvalidInput("PCA score rank out of range");
    Matrix z = data.rowwise() - mean.transpose();
    z = z * scale.cwiseInverse().asDiagonal();
    return z * components.leftCols(r);
}

Pca correlation_pca(const Matrix& data) {
    Pca pca;
    const Matrix z = standardized(data, pca.mean, pca.scale);
    const Matrix c = z.transpose() * z / static_cast<double>(z.rows());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    if (es.info() != Eigen::Success) throw NumericalError("eigen-decomposition failed");
    const Index w = c.cols();
    pca.eigenvalues.resize(w);
    pca.components.resize(w, w);
    for (Index j = 0; j < w; ++j) {
        pca.eigenvalues(j) = es.eigenvalues()(w - 1 - j);
        Vector v = es.eigenvectors().col(w - 1 - j);
        Index top = 0;
        v.cwiseAbs().maxCoeff(&top);
        if (v(top) < 0) v = -v;
        pca.components.col(j) = v;
    }
    return pca;
}

Matrix correlation_matrix(const Matrix& data) {
    Vector mean;
    Vector scale;
    const Matrix z = standardized(data, mean, scale);
    return z.transpose() * z / static_cast<double>(z.rows());
}

double leading_component_share(const Matrix& data) {
    const Pca pca = correlation_pca(data);
    return pca.eigenvalues(0) / pca.eigenvalues.sum();
}

Matrix mediator_outcome_residuals(const MediationDataset& dataset, const OutputModels& models) {
    const ObservedResiduals obs = observed_residuals(dataset, models);
    return obs.l_obs.rightCols(dataset.k() + 1);
}

Vector residual_pca(const MediationDataset& dataset, const OutputModels& models) {
    return correlation_pca(mediator_outcome_residuals(dataset, models)).eigenvalues;
}

Index select_rank(const Vector& eigenvalues) {
    if (eigenvalues.size() < 2) throw InvalidInput("select_rank needs at least two eigenvalues");
    const double tie = 1e-12 * eigenvalues.cwiseAbs().maxCoeff();
    Index best = 0;
    double best_gap = eigenvalues(0) - eigenvalues(1);
    for (Index i = 1; i + 1 < eigenvalues.size(); ++i) {
        const double gap = eigenvalues(i) - eigenvalues(i + 1);
        if (gap > best_gap + tie) {
            best_gap = gap;
            best = i;
        }
    }
    return best + 1;
}

ResidualAudit residual_audit(const Matrix& e) {
    ResidualAudit audit;
    audit.correlation = correlation_matrix(e);
    for (Index i = 0; i < e.cols(); ++i)
        for (Index j = 0; j < e.cols(); ++j)
            if (i != j) audit.max_off_diagonal = std::max(audit.max_off_diagonal, std::abs(audit.correlation(i, j)));
    return audit;
}

LsemResult lsem_fit(const MediationDataset& dataset) {
    require_valid(dataset);
    if (dataset.n() <= dataset.k() + dataset.p() + 2) {
        throw InvalidInput("insufficient sample: n must exceed k + p + 2");
    }
    LsemResult out;
    out.models = update_f(dataset, Matrix::Zero(dataset.n(), dataset.layout().width()),
                          TreatmentLink::Logistic);
    out.effects = estimate_effects(out.models, dataset);
    return out;
}

}  // namespace latmed
