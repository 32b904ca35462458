#include "latmed/backfit.hpp"

#include "latmed/diagnostics.hpp"
#include "latmed/regression.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace latmed {

namespace {

constexpr int kMaxHalvings = 30;

double softplus(double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw InvalidInput("invalid backfit config field '" + field + "': " + what);
}

Vector column_norms_centered(const Matrix& e, Matrix& centered) {
    centered = e.rowwise() - e.colwise().mean();
    return centered.colwise().norm().transpose();
}

bool degenerate(double centered_norm, Index n) {
    return !(centered_norm > 1e-12 * std::sqrt(static_cast<double>(n)));
}

/// Penalty and its E-gradient restricted to the columns flagged in `use`.
double penalty_impl(const Matrix& e, const std::vector<bool>& use, Matrix* grad) {
    Matrix c;
    const Vector s = column_norms_centered(e, c);
    const Index w = e.cols();
    Matrix z = Matrix::Zero(e.rows(), w);
    for (Index j = 0; j < w; ++j)
        if (use[static_cast<std::size_t>(j)]) z.col(j) = c.col(j) / s(j);
    const Matrix r = z.transpose() * z;

    double value = 0.0;
    for (Index i = 0; i < w; ++i)
        for (Index j = 0; j < w; ++j)
            if (i != j) value += r(i, j) * r(i, j);

    if (grad) {
        grad->setZero(e.rows(), w);
        for (Index i = 0; i < w; ++i) {
            if (!use[static_cast<std::size_t>(i)]) continue;
            Vector g = Vector::Zero(e.rows());
            for (Index j = 0; j < w; ++j) {
                if (j == i || !use[static_cast<std::size_t>(j)]) continue;
                g += r(i, j) * (z.col(j) - r(i, j) * z.col(i));
            }
            grad->col(i) = 4.0 / s(i) * g;
        }
    }
    return value;
}

std::vector<bool> usable_columns(const Matrix& e) {
    Matrix c;
    const Vector s = column_norms_centered(e, c);
    std::vector<bool> use(static_cast<std::size_t>(e.cols()));
    for (Index j = 0; j < e.cols(); ++j) use[static_cast<std::size_t>(j)] = !degenerate(s(j), e.rows());
    return use;
}

/// dE_c / dG_c: -1 for difference columns, -p(1 - p) for the offset column.
Matrix residual_jacobian(const ObservedResiduals& obs, const Matrix& g_hat) {
    Matrix w = Matrix::Ones(g_hat.rows(), g_hat.cols());
    if (obs.link == TreatmentLink::Logistic) {
        for (Index i = 0; i < g_hat.rows(); ++i) {
            const double p = logistic(obs.treatment_logit(i) + g_hat(i, 0));
            w(i, 0) = p * (1.0 - p);
        }
    }
    return w;
}

}  // namespace

void BackfitConfig::validate(Index k) const {
    require(rank >= 1, "rank", "must be at least 1");
    require(rank <= k + 1, "rank", "must not exceed k + 1 = " + std::to_string(k + 1));
    require(lambda >= 0 && std::isfinite(lambda), "lambda", "must be non-negative");
    require(step > 0 && std::isfinite(step), "step", "must be positive");
    require(stop_tol > 0, "tol", "must be positive");
    require(max_iter >= 1, "max_iter", "must be at least 1");
    require(u_steps_per_iter >= 1, "u_steps_per_iter", "must be at least 1");
}

OutputModels update_f(const MediationDataset& ds, const Matrix& g_hat, TreatmentLink link,
                      bool treatment_offset) {
    const ColumnLayout lay = ds.layout();
    if (g_hat.rows() != ds.n() || g_hat.cols() != lay.width()) {
        throw InvalidInput("dimension mismatch: confounding matrix must be n x (k + 2)");
    }
    OutputModels m;
    m.link = link;

    const Matrix xt = treatment_design(ds);
    if (link == TreatmentLink::Logistic) {
        LogisticOptions opt;
        if (treatment_offset) opt.offset = Vector(g_hat.col(0));
        m.f_t = logistic_fit(xt, ds.treatment, opt).coefficients;
    } else {
        Vector target = ds.treatment;
        if (treatment_offset) target -= g_hat.col(0);
        m.f_t = ols_fit(xt, target).coefficients;
    }

    const Matrix xm = mediator_design(ds);
    m.f_m.resize(ds.k(), 2 + ds.p());
    for (Index j = 0; j < ds.k(); ++j) {
        const Vector target = ds.mediators.col(j) - g_hat.col(lay.mediator(j));
        m.f_m.row(j) = ols_fit(xm, target).coefficients.transpose();
    }
    const Vector target = ds.outcome - g_hat.col(lay.outcome());
    m.f_y = ols_fit(outcome_design(ds), target).coefficients;
    return m;
}

ObservedResiduals observed_residuals(const MediationDataset& ds, const OutputModels& models) {
    if (models.k() != ds.k() || models.p() != ds.p()) {
        throw InvalidInput("dimension mismatch: output models do not match the dataset");
    }
    const ColumnLayout lay = ds.layout();
    ObservedResiduals obs;
    obs.link = models.link;
    obs.treatment = ds.treatment;
    obs.treatment_logit = models.treatment_predictor(ds.covariates);
    obs.l_obs.resize(ds.n(), lay.width());
    if (models.link == TreatmentLink::Logistic) {
        obs.l_obs.col(0) = ds.treatment - obs.treatment_logit.unaryExpr([](double v) { return logistic(v); });
    } else {
        obs.l_obs.col(0) = ds.treatment - obs.treatment_logit;
    }
    obs.l_obs.middleCols(1, ds.k()) = ds.mediators - models.mediator_mean(ds.treatment, ds.covariates);
    obs.l_obs.col(lay.outcome()) =
        ds.outcome - models.outcome_mean(ds.treatment, ds.covariates, ds.mediators);
    return obs;
}

Matrix residuals(const ObservedResiduals& obs, const Matrix& g_hat) {
    if (g_hat.rows() != obs.l_obs.rows() || g_hat.cols() != obs.l_obs.cols()) {
        throw InvalidInput("dimension mismatch: confounding matrix vs observed residuals");
    }
    Matrix e = obs.l_obs - g_hat;
    if (obs.link == TreatmentLink::Logistic) {
        for (Index i = 0; i < e.rows(); ++i) {
            e(i, 0) = obs.treatment(i) - logistic(obs.treatment_logit(i) + g_hat(i, 0));
        }
    }
    return e;
}

double penalty(const Matrix& e) {
    const auto use = usable_columns(e);
    for (std::size_t j = 0; j < use.size(); ++j) {
        if (!use[j]) {
            throw DegenerateResidual("residual column " + std::to_string(j) +
                                     " has zero variance; correlation undefined");
        }
    }
    return penalty_impl(e, use, nullptr);
}

Matrix penalty_gradient_e(const Matrix& e) {
    const auto use = usable_columns(e);
    for (std::size_t j = 0; j < use.size(); ++j) {
        if (!use[j]) {
            throw DegenerateResidual("residual column " + std::to_string(j) +
                                     " has zero variance; correlation undefined");
        }
    }
    Matrix g;
    penalty_impl(e, use, &g);
    return g;
}

Matrix penalty_gradient_u(const ConfounderState& state, const ObservedResiduals& obs) {
    const Matrix& a = state.loadings();
    const Matrix g_hat = state.u_hat * a;
    const Matrix e = residuals(obs, g_hat);
    const Matrix ge = penalty_gradient_e(e);
    const Matrix w = residual_jacobian(obs, g_hat);
    return -(ge.cwiseProduct(w)) * a.transpose();
}

LossParts loss_parts(const ObservedResiduals& obs, const Matrix& g_hat, double lambda) {
    const Matrix e = residuals(obs, g_hat);
    const Index k = e.cols() - 2;
    LossParts parts;
    if (obs.link == TreatmentLink::Logistic) {
        for (Index i = 0; i < e.rows(); ++i) {
            const double eta = obs.treatment_logit(i) + g_hat(i, 0);
            parts.treatment += softplus(eta) - obs.treatment(i) * eta;
        }
    } else {
        parts.treatment = e.col(0).squaredNorm();
    }
    parts.mediators = e.middleCols(1, k).squaredNorm();
    parts.outcome = e.col(k + 1).squaredNorm();
    parts.penalty = penalty_impl(e, usable_columns(e), nullptr);
    parts.total = parts.treatment + parts.mediators + parts.outcome + lambda * parts.penalty;
    return parts;
}

double loss(const MediationDataset& dataset, const OutputModels& models,
            const ConfounderState& state, double lambda) {
    if (!state.is_factor()) throw InvalidInput("loss: factor confounding model required");
    const ObservedResiduals obs = observed_residuals(dataset, models);
    return loss_parts(obs, state.u_hat * state.loadings(), lambda).total;
}

Matrix loss_gradient_u(const ConfounderState& state, const ObservedResiduals& obs, double lambda) {
    const Matrix& a = state.loadings();
    const Matrix g_hat = state.u_hat * a;
    const Matrix e = residuals(obs, g_hat);

    // d loss / d G, column by column.
    Matrix d = -2.0 * e;
    if (obs.link == TreatmentLink::Logistic) d.col(0) = -e.col(0);
    if (lambda > 0) {
        Matrix ge;
        penalty_impl(e, usable_columns(e), &ge);
        d -= lambda * ge.cwiseProduct(residual_jacobian(obs, g_hat));
    }
    return d * a.transpose();
}

Vector normalize(ConfounderState& state) {
    Matrix& u = state.u_hat;
    Matrix& a = state.loadings();
    const Vector mu = u.colwise().mean().transpose();
    const Vector shift = a.transpose() * mu;
    u.rowwise() -= mu.transpose();
    const double n = static_cast<double>(u.rows());
    for (Index j = 0; j < u.cols(); ++j) {
        const double sd = std::sqrt(u.col(j).squaredNorm() / n);
        if (!(sd > 0) || !std::isfinite(sd)) {
            throw NumericalError("surrogate confounder column " + std::to_string(j) + " collapsed");
        }
        u.col(j) /= sd;
        a.row(j) *= sd;
    }
    return shift;
}

void absorb_shift(OutputModels& models, const Vector& shift) {
    const Index k = models.k();
    models.f_t(0) += shift(0);
    for (Index j = 0; j < k; ++j) models.f_m(j, 0) += shift(1 + j);
    models.f_y(0) += shift(k + 1);
}

void absorb_shift(ObservedResiduals& obs, const Vector& shift) {
    const Index w = obs.l_obs.cols();
    for (Index c = 1; c < w; ++c) obs.l_obs.col(c).array() -= shift(c);
    obs.treatment_logit.array() += shift(0);
    if (obs.link == TreatmentLink::Logistic) {
        for (Index i = 0; i < obs.l_obs.rows(); ++i) {
            obs.l_obs(i, 0) = obs.treatment(i) - logistic(obs.treatment_logit(i));
        }
    } else {
        obs.l_obs.col(0).array() -= shift(0);
    }
}

void update_u(ConfounderState& state, ObservedResiduals& obs, const BackfitConfig& config,
              OutputModels* models) {
    const Matrix& a = state.loadings();
    for (int s = 0; s < config.u_steps_per_iter; ++s) {
        const double current = loss_parts(obs, state.u_hat * a, config.lambda).total;
        const Matrix grad = loss_gradient_u(state, obs, config.lambda);
        if (!grad.allFinite()) {
            throw StepSizeError("non-finite gradient for the surrogate confounder; reduce --step");
        }
        double eta = config.step / static_cast<double>(state.u_hat.rows());
        bool accepted = false;
        for (int h = 0; h < kMaxHalvings; ++h) {
            Matrix trial = state.u_hat - eta * grad;
            if (!trial.allFinite()) {
                throw StepSizeError("non-finite surrogate confounder after a gradient step; reduce --step");
            }
            const double value = loss_parts(obs, trial * a, config.lambda).total;
            if (std::isfinite(value) && value <= current) {
                state.u_hat = std::move(trial);
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if (!accepted) break;
        const Vector shift = normalize(state);
        absorb_shift(obs, shift);
        if (models) absorb_shift(*models, shift);
    }
}

Matrix update_a(const ObservedResiduals& obs, const Matrix& u_hat) {
    const Index w = obs.l_obs.cols();
    Matrix a(u_hat.cols(), w);
    Index first = 0;
    if (obs.link == TreatmentLink::Logistic) {
        LogisticOptions opt;
        opt.intercept = false;
        opt.offset = obs.treatment_logit;
        a.col(0) = logistic_fit(u_hat, obs.treatment, opt).coefficients;
        first = 1;
    }
    for (Index c = first; c < w; ++c) {
        a.col(c) = ols_fit(u_hat, obs.l_obs.col(c), false).coefficients;
    }
    return a;
}

OutputModels blend(const OutputModels& a, const OutputModels& b, double s) {
    OutputModels m = a;
    m.f_t = (1.0 - s) * a.f_t + s * b.f_t;
    m.f_m = (1.0 - s) * a.f_m + s * b.f_m;
    m.f_y = (1.0 - s) * a.f_y + s * b.f_y;
    return m;
}

std::pair<OutputModels, ConfounderState> initialize(const MediationDataset& ds,
                                                    const BackfitConfig& config) {
    require_valid(ds);
    config.validate(ds.k());
    if (ds.n() <= ds.k() + ds.p() + 2) {
        throw InvalidInput("insufficient sample: n = " + std::to_string(ds.n()) +
                           " must exceed k + p + 2 = " + std::to_string(ds.k() + ds.p() + 2));
    }
    const ColumnLayout lay = ds.layout();
    OutputModels models = update_f(ds, Matrix::Zero(ds.n(), lay.width()), config.link);
    const ObservedResiduals obs = observed_residuals(ds, models);

    const Matrix block = obs.l_obs.rightCols(ds.k() + 1);
    const Pca pca = correlation_pca(block);

    ConfounderState state;
    state.u_hat = pca.scores(block, config.rank);
    state.effect_model = FactorLoading{Matrix::Zero(config.rank, lay.width())};
    normalize(state);
    Matrix a = update_a(obs, state.u_hat);
    a.col(0).setZero();
    state.loadings() = a;
    return {std::move(models), std::move(state)};
}

FitResult fit_from(const MediationDataset& ds, const BackfitConfig& config, OutputModels models,
                   ConfounderState state) {
    require_valid(ds);
    config.validate(ds.k());
    if (!state.is_factor()) throw InvalidInput("fit_from: factor confounding model required");
    if (state.u_hat.rows() != ds.n() || state.loadings().cols() != ds.layout().width()) {
        throw InvalidInput("dimension mismatch: starting state does not match the dataset");
    }

    FitResult result;
    if (ds.k() == 1) {
        result.warnings.emplace_back(
            "k = 1: a single mediator cannot separate the latent confounder from noise");
    }

    ObservedResiduals obs = observed_residuals(ds, models);
    double current = loss_parts(obs, state.u_hat * state.loadings(), config.lambda).total;
    result.loss_trace.push_back(current);

    for (int it = 1; it <= config.max_iter; ++it) {
        const double previous = current;

        // (i) surrogate confounder
        update_u(state, obs, config, &models);
        Matrix g_hat = state.u_hat * state.loadings();
        current = loss_parts(obs, g_hat, config.lambda).total;

        // (ii) output models, moved toward the refit as far as the loss allows
        const OutputModels candidate = update_f(ds, g_hat, config.link);
        double s = 1.0;
        for (int h = 0; h < kMaxHalvings; ++h, s *= 0.5) {
            OutputModels trial = blend(models, candidate, s);
            ObservedResiduals trial_obs = observed_residuals(ds, trial);
            const double value = loss_parts(trial_obs, g_hat, config.lambda).total;
            if (value <= current) {
                models = std::move(trial);
                obs = std::move(trial_obs);
                current = value;
                break;
            }
        }

        // (iii) loadings
        if (!config.freeze_loadings) {
            const Matrix a_new = update_a(obs, state.u_hat);
            const Matrix a_old = state.loadings();
            s = 1.0;
            for (int h = 0; h < kMaxHalvings; ++h, s *= 0.5) {
                const Matrix trial = (1.0 - s) * a_old + s * a_new;
                const double value = loss_parts(obs, state.u_hat * trial, config.lambda).total;
                if (value <= current) {
                    state.loadings() = trial;
                    current = value;
                    break;
                }
            }
        }

        result.loss_trace.push_back(current);
        result.iterations = it;
        const double change = previous > 0 ? std::abs(current - previous) / previous : 0.0;
        if (change < config.stop_tol) {
            result.converged = true;
            break;
        }
    }

    result.g_hat = state.u_hat * state.loadings();
    result.residuals.e = residuals(obs, result.g_hat);
    result.penalty_final = loss_parts(obs, result.g_hat, 0.0).penalty;
    result.models = std::move(models);
    result.confounder = std::move(state);
    return result;
}

FitResult fit(const MediationDataset& dataset, const BackfitConfig& config) {
    auto [models, state] = initialize(dataset, config);
    return fit_from(dataset, config, std::move(models), std::move(state));
}

}  // namespace latmed
