#pragma once

#include <cmath>
#include <complex>
#include <functional>

#include <Eigen/Dense>

#include "hbeig/common.hpp"

namespace hbeig::test {

using Field = std::function<cplx(const Vec3&)>;

inline Eigen::Matrix<cplx, 3, 1> fd_gradient(const Field& f, const Vec3& x, double h, int dims = 3) {
    Eigen::Matrix<cplx, 3, 1> g = Eigen::Matrix<cplx, 3, 1>::Zero();
    for (int d = 0; d < dims; ++d) {
        Vec3 e = Vec3::Zero();
        e[d] = h;
        // fourth-order central difference
        g[d] = (-f(x + 2 * e) + 8.0 * f(x + e) - 8.0 * f(x - e) + f(x - 2 * e)) / (12.0 * h);
    }
    return g;
}

inline Eigen::Matrix<cplx, 3, 3> fd_hessian(const Field& f, const Vec3& x, double h, int dims = 3) {
    Eigen::Matrix<cplx, 3, 3> H = Eigen::Matrix<cplx, 3, 3>::Zero();
    for (int a = 0; a < dims; ++a) {
        for (int b = 0; b < dims; ++b) {
            Vec3 ea = Vec3::Zero(), eb = Vec3::Zero();
            ea[a] = h;
            eb[b] = h;
            H(a, b) = (f(x + ea + eb) - f(x + ea - eb) - f(x - ea + eb) + f(x - ea - eb)) / (4.0 * h * h);
        }
    }
    return H;
}

inline double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

inline double rel_err(cplx got, cplx want) { return std::abs(got - want) / std::abs(want); }

}  // namespace hbeig::test
