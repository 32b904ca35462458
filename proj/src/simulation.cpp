#include "latmed/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace latmed {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw InvalidInput("invalid simulation config field '" + field + "': " + what);
}

Vector draw_treatment(const Vector& u, double scale, Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const Index n = u.size();
    Vector t(n);
    // Redraw in the (rare, small-n) event that only one arm is present.
    for (int attempt = 0; attempt < 1000; ++attempt) {
        for (Index i = 0; i < n; ++i) t(i) = unif(rng) < logistic(scale * u(i)) ? 1.0 : 0.0;
        if (n < 2 || (t.minCoeff() == 0.0 && t.maxCoeff() == 1.0)) break;
    }
    return t;
}

Matrix standard_normal(Index rows, Index cols, Rng& rng) {
    std::normal_distribution<double> norm(0.0, 1.0);
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = norm(rng);
    return m;
}

struct Skeleton {
    Vector u;
    Matrix x;
    Vector t;
    Matrix noise_m;
    Vector noise_y;
};

Skeleton draw_skeleton(const LinearSimConfig& c, std::uint64_t seed) {
    Rng rng(seed);
    Skeleton s;
    s.u = gen_confounder(c.n, rng, c.confounder_sd);
    s.x = standard_normal(c.n, c.p, rng);
    s.t = draw_treatment(s.u, c.treat_scale, rng);
    s.noise_m = standard_normal(c.n, c.k, rng) * c.mediator_sd();
    s.noise_y = Vector(standard_normal(c.n, 1, rng).col(0)) * c.outcome_sd();
    return s;
}

/// Assembles M and Y from the linear skeleton plus additive confounding terms.
MediationDataset assemble(const LinearSimConfig& c, const Skeleton& s, const Matrix& g_m,
                          const Vector& g_y) {
    MediationDataset ds;
    ds.treatment = s.t;
    ds.covariates = s.x;
    ds.mediators = s.t * c.beta_m.transpose() + s.x * c.gamma_m + g_m + s.noise_m;
    ds.outcome = c.alpha_y * s.t + s.x * c.gamma_y + ds.mediators * c.beta_y + g_y + s.noise_y;

    SimulationTruth truth;
    truth.u_true = s.u;
    truth.alpha_y = c.alpha_y;
    truth.beta_m = c.beta_m;
    truth.beta_y = c.beta_y;
    truth.gamma_y = c.gamma_y;
    truth.gamma_m = c.gamma_m;
    truth.true_mediation = c.beta_m.dot(c.beta_y);
    truth.true_total = c.alpha_y + truth.true_mediation;
    ds.truth = std::move(truth);
    return ds;
}

const std::vector<PiecewiseSpec>& tables() {
    static const std::vector<PiecewiseSpec> t = [] {
        const std::vector<double> b1{-kInf, -3, -1, 1, 3, kInf};
        const std::vector<double> b2{-kInf, -4, -2, 0, 2, 4, kInf};
        const std::vector<double> b3{-kInf, -3, 3, kInf};
        std::vector<PiecewiseSpec> out{
            {{1, 2, -1, -2, -3}, b1},          // 1
            {{-2, 0.5, 1, 2, 3, 4}, b2},       // 2
            {{-1, 2, 3}, b3},                  // 3
            {{1, 2, -2, -1, 1}, b1},           // 4
            {{2, 3, 0, -1, 2}, b1},            // 5
            {{-2, 0.5, 1, 2, 1, -1}, b2},      // 6
            {{-1, 0, -1}, b3},                 // 7
            {{-0.5, 1, -0.5}, b3},             // 8
        };
        for (const auto& s : out) s.validate();
        return out;
    }();
    return t;
}

void require_k5(const LinearSimConfig& c) {
    if (c.k != 5) throw InvalidInput("nonlinear generators require k = 5, got k = " + std::to_string(c.k));
}

}  // namespace

void PiecewiseSpec::validate() const {
    if (a.empty() || a.size() + 1 != b.size()) {
        throw InvalidInput("piecewise spec needs |a| + 1 = |b| cutoffs");
    }
    if (b.front() != -kInf || b.back() != kInf) {
        throw InvalidInput("piecewise cutoffs must start at -inf and end at +inf");
    }
    for (std::size_t i = 1; i < b.size(); ++i) {
        if (!(b[i] > b[i - 1])) throw InvalidInput("piecewise cutoffs must be strictly ascending");
    }
}

double piecewise(double u, const PiecewiseSpec& spec) {
    // Index of the last cutoff <= u, so that b[l] <= u < b[l+1].
    const auto it = std::upper_bound(spec.b.begin() + 1, spec.b.end() - 1, u);
    return spec.a[static_cast<std::size_t>(it - (spec.b.begin() + 1))];
}

const PiecewiseSpec& piecewise_table(int which) {
    if (which < 1 || which > 8) throw InvalidInput("piecewise table index must be in 1..8");
    return tables()[static_cast<std::size_t>(which - 1)];
}

LinearSimConfig LinearSimConfig::defaults(Index n, Index k, Index p) {
    LinearSimConfig c;
    c.n = n;
    c.k = k;
    c.p = p;
    c.alpha_y = 1.0;
    c.beta_m = Vector::Ones(k);
    c.beta_y = Vector::Constant(k, 0.5);
    c.gamma_y = Vector::Constant(p, 0.5);
    c.gamma_m = Matrix::Constant(p, k, 0.5);
    c.eta = Vector::Ones(k + 1);
    return c;
}

LinearSimConfig LinearSimConfig::table1_profile(Index n, Index k) {
    LinearSimConfig c = defaults(n, k);
    c.eta = Vector::Constant(k + 1, 0.047);
    c.eta(0) = 0.28;
    c.mediator_noise_sd = 0.34;
    c.outcome_noise_sd = 0.77;
    return c;
}

void LinearSimConfig::validate() const {
    require(n >= 2, "n", "must be at least 2");
    require(k >= 1, "k", "must be at least 1");
    require(p >= 0, "p", "must be non-negative");
    require(beta_m.size() == k, "beta_m", "length must equal k");
    require(beta_y.size() == k, "beta_y", "length must equal k");
    require(gamma_y.size() == p, "gamma_y", "length must equal p");
    require(gamma_m.rows() == p && gamma_m.cols() == k, "gamma_m", "shape must be p x k");
    require(eta.size() == k + 1, "eta", "length must equal k + 1");
    require(noise_sd > 0 && std::isfinite(noise_sd), "noise_sd", "must be positive");
    require(std::isfinite(mediator_noise_sd), "mediator_noise_sd", "must be finite");
    require(std::isfinite(outcome_noise_sd), "outcome_noise_sd", "must be finite");
    require(std::isfinite(treat_scale), "treat_scale", "must be finite");
    require(confounder_sd > 0, "confounder_sd", "must be positive");
    require(std::isfinite(alpha_y) && beta_m.allFinite() && beta_y.allFinite() &&
                gamma_y.allFinite() && gamma_m.allFinite() && eta.allFinite(),
            "coefficients", "must be finite");
}

Vector gen_confounder(Index n, Rng& rng, double component_sd) {
    if (n <= 0) throw InvalidInput("gen_confounder: empty input (n = 0)");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> norm(0.0, 1.0);
    Vector u(n);
    for (Index i = 0; i < n; ++i) {
        const double center = unif(rng) < 0.5 ? -2.0 : 2.0;
        u(i) = center + component_sd * norm(rng);
    }
    return u;
}

Vector gen_confounder(Index n, std::uint64_t seed, double component_sd) {
    Rng rng(seed);
    return gen_confounder(n, rng, component_sd);
}

MediationDataset gen_linear(const LinearSimConfig& config) {
    config.validate();
    const Skeleton s = draw_skeleton(config, config.seed);
    const Matrix g_m = s.u * config.eta.tail(config.k).transpose();
    const Vector g_y = config.eta(0) * s.u;
    MediationDataset ds = assemble(config, s, g_m, g_y);
    ds.truth->eta = config.eta;
    return ds;
}

Matrix ConfoundingEffects::stacked() const {
    Matrix g(g_m.rows(), g_m.cols() + 1);
    g.leftCols(g_m.cols()) = g_m;
    g.col(g_m.cols()) = g_y;
    return g;
}

ConfoundingEffects lowrank_effects(const Vector& u) {
    const Index n = u.size();
    ConfoundingEffects e;
    e.g_m.resize(n, 5);
    e.g_y.resize(n);
    for (Index i = 0; i < n; ++i) {
        const double g1 = piecewise(u(i), piecewise_table(1));
        e.g_m(i, 0) = g1;
        e.g_m(i, 1) = piecewise(u(i), piecewise_table(2));
        e.g_m(i, 2) = piecewise(u(i), piecewise_table(3));
        e.g_m(i, 3) = std::sin(u(i));
        e.g_m(i, 4) = g1 * std::cos(u(i));
        e.g_y(i) = g1 * std::exp(-u(i) / 6.0);
    }
    return e;
}

ConfoundingEffects fullrank_effects(const Vector& u, const Vector& treatment) {
    if (u.size() != treatment.size()) throw InvalidInput("dimension mismatch: u vs treatment");
    const Index n = u.size();
    ConfoundingEffects e;
    e.g_m.resize(n, 5);
    e.g_y.resize(n);
    for (Index i = 0; i < n; ++i) {
        const double t = treatment(i);
        const bool treated = t == 1.0;
        const double g1 = piecewise(u(i), piecewise_table(treated ? 5 : 4));
        e.g_m(i, 0) = g1;
        e.g_m(i, 1) = (0.5 + t) * piecewise(u(i), piecewise_table(6));
        e.g_m(i, 2) = 2.0 * piecewise(u(i), piecewise_table(treated ? 8 : 7));
        e.g_m(i, 3) = 2.0 * t * (std::sin(u(i)) + 0.2);
        e.g_m(i, 4) = g1 * (std::cos(u(i)) + 0.5);
        e.g_y(i) = std::exp(-u(i) / 8.0 + 0.9 * t);
    }
    return e;
}

MediationDataset gen_nonlinear_lowrank(const LinearSimConfig& config, std::uint64_t seed) {
    require_k5(config);
    LinearSimConfig c = config;
    if (c.eta.size() != c.k + 1) c.eta = Vector::Zero(c.k + 1);
    c.validate();
    const Skeleton s = draw_skeleton(c, seed);
    const ConfoundingEffects g = lowrank_effects(s.u);
    return assemble(c, s, g.g_m, g.g_y);
}

MediationDataset gen_nonlinear_fullrank(const LinearSimConfig& config, std::uint64_t seed) {
    require_k5(config);
    LinearSimConfig c = config;
    if (c.eta.size() != c.k + 1) c.eta = Vector::Zero(c.k + 1);
    c.validate();
    const Skeleton s = draw_skeleton(c, seed);
    const ConfoundingEffects g = fullrank_effects(s.u, s.t);
    MediationDataset ds = assemble(c, s, g.g_m, g.g_y);

    // The confounding terms shift with T, so the causal effects are the
    // sample-average interventional contrasts over the subjects' own U.
    const Index n = c.n;
    const ConfoundingEffects g0 = fullrank_effects(s.u, Vector::Zero(n));
    const ConfoundingEffects g1 = fullrank_effects(s.u, Vector::Ones(n));
    const Vector shift_m = (g1.g_m - g0.g_m).colwise().mean().transpose();
    const double shift_y = (g1.g_y - g0.g_y).mean();
    auto& truth = *ds.truth;
    truth.true_mediation = (c.beta_m + shift_m).dot(c.beta_y);
    truth.alpha_y = c.alpha_y + shift_y;
    truth.true_total = truth.alpha_y + truth.true_mediation;
    return ds;
}

Generator parse_generator(const std::string& name) {
    if (name == "linear") return Generator::Linear;
    if (name == "lowrank") return Generator::LowRank;
    if (name == "fullrank") return Generator::FullRank;
    throw InvalidInput("unknown generator '" + name + "' (expected linear, lowrank or fullrank)");
}

std::string to_string(Generator g) {
    switch (g) {
        case Generator::Linear: return "linear";
        case Generator::LowRank: return "lowrank";
        case Generator::FullRank: return "fullrank";
    }
    return "linear";
}

MediationDataset generate(Generator generator, const LinearSimConfig& config) {
    switch (generator) {
        case Generator::Linear: return gen_linear(config);
        case Generator::LowRank: return gen_nonlinear_lowrank(config, config.seed);
        case Generator::FullRank: return gen_nonlinear_fullrank(config, config.seed);
    }
    throw InvalidInput("unknown generator");
}

}  // namespace latmed
