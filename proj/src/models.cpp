#include "latmed/models.hpp"

#include <cmath>

namespace latmed {

namespace {

void require_cols(const Matrix& m, Index expected, const char* what) {
    if (m.cols() != expected) {
        throw InvalidInput(std::string("dimension mismatch in ") + what);
    }
}

}  // namespace

Vector OutputModels::treatment_predictor(const Matrix& covariates) const {
    require_cols(covariates, p(), "treatment model covariates");
    Vector eta = covariates * f_t.tail(p());
    eta.array() += f_t(0);
    return eta;
}

Vector OutputModels::treatment_mean(const Matrix& covariates) const {
    Vector eta = treatment_predictor(covariates);
    if (link == TreatmentLink::Logistic) {
        eta = eta.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    }
    return eta;
}

Matrix OutputModels::mediator_mean(const Vector& treatment, const Matrix& covariates) const {
    require_cols(covariates, p(), "mediator model covariates");
    if (treatment.size() != covariates.rows()) {
        throw InvalidInput("dimension mismatch in mediator model inputs");
    }
    const Index n = treatment.size();
    Matrix out(n, k());
    for (Index j = 0; j < k(); ++j) {
        const auto c = f_m.row(j);
        Vector col = covariates * c.tail(p()).transpose();
        col.array() += c(0);
        col += c(1) * treatment;
        out.col(j) = col;
    }
    return out;
}

Vector OutputModels::outcome_mean(const Vector& treatment, const Matrix& covariates,
                                  const Matrix& mediators) const {
    require_cols(covariates, p(), "outcome model covariates");
    require_cols(mediators, k(), "outcome model mediators");
    Vector out = covariates * f_y.segment(2, p()) + mediators * f_y.tail(k());
    out += f_y(1) * treatment;
    out.array() += f_y(0);
    return out;
}

}  // namespace latmed
