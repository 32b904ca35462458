#include "helpers.hpp"
#include "latmed/regression.hpp"

#include <doctest.h>

using namespace latmed;
using namespace testutil;

TEST_CASE("ols recovers an exact line") {
    Matrix x(3, 1);
    x << 1, 2, 3;
    Vector y(3);
    y << 2, 4, 6;
    // One column plus intercept leaves a single residual degree of freedom.
    const LinearFit f = ols_fit(x, y);
    CHECK(f.coefficients(0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(f.coefficients(1) == doctest::Approx(2.0));
    const Vector pred = predict_linear(f, x);
    CHECK((pred - y).norm() < 1e-12);
}

TEST_CASE("ols on a constant response") {
    std::mt19937_64 rng(3);
    const Matrix x = random_matrix(20, 3, rng);
    const Vector y = Vector::Constant(20, 4.5);
    const LinearFit f = ols_fit(x, y);
    CHECK(f.coefficients(0) == doctest::Approx(4.5));
    CHECK(f.coefficients.tail(3).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ols recovers generating coefficients without noise") {
    std::mt19937_64 rng(11);
    const Matrix x = random_matrix(50, 3, rng);
    Vector beta(3);
    beta << 0.7, -1.3, 2.2;
    const Vector y = (x * beta).array() + 0.4;
    const LinearFit f = ols_fit(x, y);
    CHECK(std::abs(f.coefficients(0) - 0.4) < 1e-8);
    CHECK((f.coefficients.tail(3) - beta).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("ols names the dependent column") {
    std::mt19937_64 rng(5);
    Matrix x = random_matrix(30, 3, rng);
    x.col(2) = 2.0 * x.col(0) - x.col(1);
    const Vector y = random_vector(30, rng);
    try {
        ols_fit(x, y);
        FAIL("expected SingularDesign");
    } catch (const SingularDesign& e) {
        CHECK(e.column() == 2);
    }
    CHECK_THROWS_AS(ols_fit(random_matrix(3, 3, rng), Vector::Zero(3)), InvalidInput);
}

TEST_CASE("logistic intercept-only matches the Bernoulli rate") {
    const Index n = 1000;
    Matrix x(n, 0);
    Vector y = Vector::Zero(n);
    for (Index i = 0; i < 300; ++i) y(i) = 1.0;
    const LogisticFit f = logistic_fit(x, y);
    CHECK(f.converged);
    CHECK(std::abs(f.coefficients(0) - std::log(0.3 / 0.7)) < 1e-4);
}

TEST_CASE("logistic slope is consistent on the treatment link") {
    std::mt19937_64 rng(21);
    const Vector u = gen_confounder(100000, rng);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vector t(u.size());
    for (Index i = 0; i < u.size(); ++i) t(i) = unif(rng) < 1.0 / (1.0 + std::exp(-0.4 * u(i))) ? 1.0 : 0.0;
    Matrix x = u;
    const LogisticFit f = logistic_fit(x, t);
    CHECK(f.converged);
    CHECK(std::abs(f.coefficients(1) - 0.4) < 0.03);
}

TEST_CASE("logistic fit is a stationary point of the likelihood") {
    std::mt19937_64 rng(8);
    const Matrix x = random_matrix(200, 2, rng);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vector t(200);
    for (Index i = 0; i < 200; ++i) t(i) = unif(rng) < sigmoid(0.5 * x(i, 0) - x(i, 1)) ? 1.0 : 0.0;
    const LogisticFit f = logistic_fit(x, t);
    REQUIRE(f.converged);
    CHECK(logistic_score(x, t, f.coefficients).norm() / 200.0 < 1e-7);
}

TEST_CASE("logistic score matches finite differences") {
    std::mt19937_64 rng(9);
    const Matrix x = random_matrix(40, 2, rng);
    Vector t(40);
    for (Index i = 0; i < 40; ++i) t(i) = i % 3 == 0 ? 1.0 : 0.0;
    LogisticOptions opt;
    opt.offset = random_vector(40, rng, 0.5);
    const Vector beta = random_vector(3, rng);
    const Vector score = logistic_score(x, t, beta, opt);
    for (Index j = 0; j < 3; ++j) {
        Vector hi = beta, lo = beta;
        hi(j) += 1e-6;
        lo(j) -= 1e-6;
        const double fd = -(logistic_negloglik(x, t, hi, opt) - logistic_negloglik(x, t, lo, opt)) / 2e-6;
        CHECK(rel_err(score(j), fd) < 1e-6);
    }
}

TEST_CASE("logistic flags complete separation and rejects one class") {
    Matrix x(20, 1);
    Vector t(20);
    for (Index i = 0; i < 20; ++i) {
        x(i, 0) = i < 10 ? -1.0 - 0.1 * static_cast<double>(i) : 1.0 + 0.1 * static_cast<double>(i);
        t(i) = i < 10 ? 0.0 : 1.0;
    }
    const LogisticFit f = logistic_fit(x, t);
    CHECK_FALSE(f.converged);
    const Vector p = predict_proba(f, x);
    for (Index i = 0; i < 20; ++i)
        for (Index j = 0; j < 20; ++j)
            if (x(i, 0) < x(j, 0)) CHECK(p(i) <= p(j));
    CHECK_THROWS_AS(logistic_fit(x, Vector::Ones(20)), InvalidInput);
}

TEST_CASE("predict_proba matches the direct formula") {
    std::mt19937_64 rng(2);
    LogisticFit f;
    f.coefficients = random_vector(4, rng);
    const Matrix x = random_matrix(25, 3, rng);
    const Vector p = predict_proba(f, x);
    for (Index i = 0; i < 25; ++i) {
        const double eta = f.coefficients(0) + x.row(i).dot(f.coefficients.tail(3));
        CHECK(std::abs(p(i) - 1.0 / (1.0 + std::exp(-eta))) < 1e-12);
    }
    f.coefficients.setZero();
    CHECK((predict_proba(f, x).array() == 0.5).all());
    CHECK_THROWS_AS(predict_proba(f, random_matrix(5, 2, rng)), InvalidInput);
}
