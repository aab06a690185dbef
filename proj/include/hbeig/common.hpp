#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace hbeig {

using Vec3 = Eigen::Vector3d;
using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr const char* kVersion = "0.3.1";

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid arguments or configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerical failure (non-convergence, failed factorization, overflow).
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what, double lambda = 0.0,
                          bool has_lambda = false)
        : Error(what), lambda_(lambda), has_lambda_(has_lambda) {}

    double lambda() const noexcept { return lambda_; }
    bool has_lambda() const noexcept { return has_lambda_; }

private:
    double lambda_;
    bool has_lambda_;
};

/// Requested work would exceed the configured memory budget.
class ResourceError : public Error {
public:
    using Error::Error;
};

}  // namespace hbeig
