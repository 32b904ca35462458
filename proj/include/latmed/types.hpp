#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace latmed {

// Dense row-major storage throughout; subjects are rows.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Column order shared by the residual matrix E, the observed residuals
/// L_obs and the confounding-effect matrix G: (T, M1..Mk, Y).
struct ColumnLayout {
    Index k = 0;

    static constexpr Index treatment() { return 0; }
    constexpr Index mediator(Index j) const { return 1 + j; }
    constexpr Index outcome() const { return k + 1; }
    constexpr Index width() const { return k + 2; }
};

// Error hierarchy. InvalidInput marks caller/config mistakes; everything
// else derived from NumericalError is a runtime numerical failure.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

class SingularDesign : public NumericalError {
public:
    SingularDesign(Index column, const std::string& what)
        : NumericalError(what), column_(column) {}
    Index column() const { return column_; }

private:
    Index column_;
};

class DegenerateResidual : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class StepSizeError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace latmed
