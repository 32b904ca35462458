#pragma once

#include "latmed/dataset.hpp"
#include "latmed/simulation.hpp"

#include <random>

namespace testutil {

using latmed::Index;
using latmed::Matrix;
using latmed::Vector;

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> norm(0.0, sd);
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = norm(rng);
    return m;
}

inline Vector random_vector(Index n, std::mt19937_64& rng, double sd = 1.0) {
    return random_matrix(n, 1, rng, sd).col(0);
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

inline double pearson(const Vector& a, const Vector& b) {
    const Vector x = a.array() - a.mean();
    const Vector y = b.array() - b.mean();
    return x.dot(y) / std::sqrt(x.squaredNorm() * y.squaredNorm());
}

// Default linear generator with a fixed seed.
inline latmed::MediationDataset linear_data(Index n, Index k, std::uint64_t seed) {
    auto c = latmed::LinearSimConfig::defaults(n, k);
    c.seed = seed;
    return latmed::gen_linear(c);
}

}  // namespace testutil
