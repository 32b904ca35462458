#include "latmed/dataset.hpp"

#include <cmath>
#include <sstream>

namespace latmed {

MediationDataset MediationDataset::subset(std::span<const Index> rows) const {
    const auto m = static_cast<Index>(rows.size());
    MediationDataset out;
    out.treatment.resize(m);
    out.mediators.resize(m, k());
    out.outcome.resize(m);
    out.covariates.resize(m, p());
    for (Index i = 0; i < m; ++i) {
        const Index r = rows[static_cast<std::size_t>(i)];
        if (r < 0 || r >= n()) {
            throw InvalidInput("subset row index out of range");
        }
        out.treatment(i) = treatment(r);
        out.mediators.row(i) = mediators.row(r);
        out.outcome(i) = outcome(r);
        out.covariates.row(i) = covariates.row(r);
    }
    if (truth) {
        out.truth = *truth;
        if (truth->u_true.size() == n()) {
            Vector u(m);
            for (Index i = 0; i < m; ++i) u(i) = truth->u_true(rows[static_cast<std::size_t>(i)]);
            out.truth->u_true = std::move(u);
        }
    }
    return out;
}

std::vector<std::string> validate(const MediationDataset& ds) {
    std::vector<std::string> report;
    const Index n = ds.treatment.size();

    if (ds.mediators.rows() != n || ds.outcome.size() != n || ds.covariates.rows() != n) {
        std::ostringstream msg;
        msg << "dimension mismatch: treatment has " << n << " rows, mediators "
            << ds.mediators.rows() << ", outcome " << ds.outcome.size() << ", covariates "
            << ds.covariates.rows();
        report.push_back(msg.str());
    }
    if (ds.mediators.cols() < 1) {
        report.push_back("at least one mediator column is required (k >= 1)");
    }

    bool binary = true;
    for (Index i = 0; i < n; ++i) {
        const double t = ds.treatment(i);
        if (t != 0.0 && t != 1.0) binary = false;
    }
    if (!binary) report.push_back("non-binary treatment: entries must be 0 or 1");

    const bool finite = ds.treatment.allFinite() && ds.mediators.allFinite() &&
                        ds.outcome.allFinite() && ds.covariates.allFinite();
    if (!finite) report.push_back("non-finite numeric entry");

    if (ds.truth) {
        const auto& t = *ds.truth;
        if (t.u_true.size() != 0 && t.u_true.size() != n) {
            report.push_back("dimension mismatch: truth.u_true length differs from n");
        }
    }
    return report;
}

void require_valid(const MediationDataset& dataset) {
    const auto problems = validate(dataset);
    if (problems.empty()) return;
    std::string what = "invalid dataset:";
    for (const auto& p : problems) what += " " + p + ";";
    throw InvalidInput(what);
}

Matrix treatment_design(const MediationDataset& ds) { return ds.covariates; }

Matrix mediator_design(const MediationDataset& ds) {
    Matrix d(ds.n(), 1 + ds.p());
    d.col(0) = ds.treatment;
    d.rightCols(ds.p()) = ds.covariates;
    return d;
}

Matrix outcome_design(const MediationDataset& ds) {
    Matrix d(ds.n(), 1 + ds.p() + ds.k());
    d.col(0) = ds.treatment;
    d.middleCols(1, ds.p()) = ds.covariates;
    d.rightCols(ds.k()) = ds.mediators;
    return d;
}

}  // namespace latmed
