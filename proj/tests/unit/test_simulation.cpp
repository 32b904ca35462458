#include "helpers.hpp"
#include "latmed/diagnostics.hpp"

#include <doctest.h>

#include <limits>

using namespace latmed;
using namespace testutil;

TEST_CASE("confounder mixture moments") {
    const Vector u = gen_confounder(100000, 7);
    const double mean = u.mean();
    const double var = (u.array() - mean).square().sum() / static_cast<double>(u.size() - 1);
    CHECK(std::abs(mean) < 0.1);
    CHECK(var >= 6.0);
    CHECK(var <= 6.5);

    // Independent draw of the same mixture through a different engine.
    std::mt19937 rng(12345);
    std::bernoulli_distribution coin(0.5);
    std::normal_distribution<double> norm(0.0, 1.5);
    double s = 0, s2 = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double x = (coin(rng) ? -2.0 : 2.0) + norm(rng);
        s += x;
        s2 += x * x;
    }
    const double ref_var = (s2 - s * s / n) / (n - 1);
    CHECK(std::abs(var - ref_var) < 0.15);
    CHECK(std::abs(ref_var - 6.25) < 0.15);
}

TEST_CASE("confounder draws are deterministic") {
    CHECK(gen_confounder(5, 3) == gen_confounder(5, 3));
    CHECK(gen_confounder(5, 3) != gen_confounder(5, 4));
    CHECK_THROWS_AS(gen_confounder(0, 1), InvalidInput);
}

TEST_CASE("piecewise cells are left closed") {
    const double inf = std::numeric_limits<double>::infinity();
    const PiecewiseSpec s1{{1, 2, -1, -2, -3}, {-inf, -3, -1, 1, 3, inf}};
    CHECK(piecewise(-4.0, s1) == 1.0);
    CHECK(piecewise(-3.0, s1) == 2.0);
    CHECK(piecewise(0.0, s1) == -1.0);
    CHECK(piecewise(3.0, s1) == -3.0);
    const PiecewiseSpec s3{{-1, 2, 3}, {-inf, -3, 3, inf}};
    CHECK(piecewise(0.0, s3) == 2.0);

    CHECK(piecewise_table(1).a == s1.a);
    CHECK(piecewise_table(1).b == s1.b);
    CHECK(piecewise_table(3).a == s3.a);
    CHECK(piecewise_table(3).b == s3.b);
    const PiecewiseSpec bad{{1, 2}, {-inf, 1, 0, inf}};
    CHECK_THROWS_AS(bad.validate(), InvalidInput);
}

TEST_CASE("linear truth uses the coefficient product") {
    auto c2 = LinearSimConfig::defaults(200, 2);
    c2.seed = 1;
    const auto d2 = gen_linear(c2);
    REQUIRE(d2.truth);
    CHECK(d2.truth->true_total == doctest::Approx(2.0));
    CHECK(d2.truth->true_mediation == doctest::Approx(1.0));

    auto c5 = LinearSimConfig::defaults(200, 5);
    c5.seed = 1;
    const auto d5 = gen_linear(c5);
    CHECK(d5.truth->true_total == doctest::Approx(3.5));
    CHECK(d5.truth->true_mediation == doctest::Approx(2.5));
    CHECK(d5.k() == 5);
    CHECK(validate(d5).empty());
    CHECK(d5.treatment.minCoeff() == 0.0);
    CHECK(d5.treatment.maxCoeff() == 1.0);
}

TEST_CASE("no confounding lets plain least squares recover the direct effect") {
    auto c = LinearSimConfig::defaults(100000, 2);
    c.eta = Vector::Zero(3);
    c.seed = 17;
    const auto ds = gen_linear(c);
    // Normal equations on (1, T, X, M) solved directly.
    Matrix z(ds.n(), 1 + 1 + ds.p() + ds.k());
    z.col(0).setOnes();
    z.col(1) = ds.treatment;
    z.middleCols(2, ds.p()) = ds.covariates;
    z.rightCols(ds.k()) = ds.mediators;
    const Eigen::MatrixXd zz = z.transpose() * z;
    const Eigen::VectorXd zy = z.transpose() * ds.outcome;
    const Eigen::VectorXd coef = zz.ldlt().solve(zy);
    CHECK(std::abs(coef(1) - 1.0) < 0.05);
}

TEST_CASE("generators are deterministic and validate their inputs") {
    auto c = LinearSimConfig::defaults(300, 2);
    c.seed = 9;
    const auto a = gen_linear(c);
    const auto b = gen_linear(c);
    CHECK(a.outcome == b.outcome);
    CHECK(a.mediators == b.mediators);
    auto bad = c;
    bad.beta_y = Vector::Ones(3);
    CHECK_THROWS_AS(gen_linear(bad), InvalidInput);
    auto c5 = LinearSimConfig::defaults(300, 5);
    CHECK(gen_nonlinear_lowrank(c5, 4).outcome == gen_nonlinear_lowrank(c5, 4).outcome);
    CHECK(gen_nonlinear_lowrank(c5, 4).k() == 5);
    CHECK_THROWS_AS(gen_nonlinear_lowrank(c, 4), InvalidInput);
    CHECK_THROWS_AS(gen_nonlinear_fullrank(c, 4), InvalidInput);
    CHECK(parse_generator("fullrank") == Generator::FullRank);
    CHECK_THROWS_AS(parse_generator("cubic"), InvalidInput);
}

TEST_CASE("nonlinear confounding functions at fixed points") {
    const Vector zero = Vector::Zero(1);
    const auto low = lowrank_effects(zero);
    CHECK(low.g_m(0, 3) == doctest::Approx(0.0));
    CHECK(low.g_y(0) == doctest::Approx(-1.0));

    Vector u(3);
    u << -2.0, 0.3, 4.0;
    const auto full0 = fullrank_effects(u, Vector::Zero(3));
    CHECK(full0.g_m.col(3).cwiseAbs().maxCoeff() == 0.0);
    const auto at_origin = fullrank_effects(zero, Vector::Zero(1));
    CHECK(at_origin.g_y(0) == doctest::Approx(1.0));
    const auto full1 = fullrank_effects(u, Vector::Ones(3));
    for (Index i = 0; i < 3; ++i) CHECK(full1.g_m(i, 3) == doctest::Approx(2.0 * (std::sin(u(i)) + 0.2)));
    CHECK(full1.g_y(1) == doctest::Approx(std::exp(-0.3 / 8 + 0.9)));
}

TEST_CASE("full-rank truth is the interventional effect") {
    auto c = LinearSimConfig::defaults(4000, 5);
    const auto ds = gen_nonlinear_fullrank(c, 2);
    REQUIRE(ds.truth);
    const Vector& u = ds.truth->u_true;
    const Index n = u.size();
    const auto e0 = fullrank_effects(u, Vector::Zero(n));
    const auto e1 = fullrank_effects(u, Vector::Ones(n));
    const Vector bm = ds.truth->beta_m;
    const Vector by = ds.truth->beta_y;
    // Y(1, M(1)) - Y(0, M(0)) averaged over subjects, noise cancelling.
    const Vector dm = (e1.g_m - e0.g_m).colwise().mean().transpose() + bm;
    const double dy = (e1.g_y - e0.g_y).mean();
    const double alpha = 1.0;
    CHECK(ds.truth->true_total == doctest::Approx(alpha + dy + dm.dot(by)).epsilon(1e-10));
    CHECK(ds.truth->true_mediation == doctest::Approx(dm.dot(by)).epsilon(1e-10));
}

TEST_CASE("dataset validation reports named problems") {
    auto ds = linear_data(10, 2, 1);
    ds.covariates = ds.covariates.leftCols(1);
    CHECK(validate(ds).empty());
    auto half = ds;
    half.treatment(0) = 0.5;
    const auto r1 = validate(half);
    REQUIRE(r1.size() == 1);
    CHECK(r1[0].find("non-binary treatment") != std::string::npos);
    auto short_m = ds;
    short_m.mediators = ds.mediators.topRows(9);
    const auto r2 = validate(short_m);
    REQUIRE_FALSE(r2.empty());
    CHECK(r2[0].find("dimension mismatch") != std::string::npos);
    CHECK_THROWS_AS(require_valid(half), InvalidInput);
}
