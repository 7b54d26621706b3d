#pragma once

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "hmprate/errors.hpp"

namespace hmprate {

/// Hilbert projective metric between two strictly positive vectors:
/// d(u, v) = ln max_{i,j} u(i)v(j) / (v(i)u(j)). Scale invariant and zero
/// exactly when u is a positive multiple of v.
inline double hilbert_distance(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    if (u.size() != v.size() || u.size() == 0)
        throw NonPositiveVector("vectors must be nonempty with equal dimension");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < u.size(); ++i) {
        if (!(u(i) > 0.0) || !(v(i) > 0.0))
            throw NonPositiveVector("entries must be strictly positive");
        const double r = std::log(u(i)) - std::log(v(i));
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    return hi - lo;
}

struct BirkhoffCoefficients {
    double phi;  ///< cross-ratio minimum, in (0, 1] for positive matrices
    double tau;  ///< contraction coefficient (1 - sqrt(phi)) / (1 + sqrt(phi))
};

/// Birkhoff contraction data of an entrywise positive matrix:
/// phi = min_{i,j,k,l} M_ik M_jl / (M_jk M_il), tau = (1-sqrt(phi))/(1+sqrt(phi)).
/// tau bounds the Hilbert-metric contraction of both column and row action
/// (tau(M) = tau(M^T)). Matrices with zero entries have no finite phi; use
/// k-step products of the model instead.
inline BirkhoffCoefficients birkhoff_coefficients(const Eigen::MatrixXd& m) {
    const int n = static_cast<int>(m.rows());
    if (n == 0 || m.cols() != n) throw ZeroEntry("matrix must be nonempty and square");
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (!(m(i, j) > 0.0))
                throw ZeroEntry("phi is undefined for matrices with a zero entry; "
                                "use k-step products");
    double phi = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l) {
                    const double r = (m(i, k) * m(j, l)) / (m(j, k) * m(i, l));
                    phi = std::min(phi, r);
                }
    const double s = std::sqrt(phi);
    return {phi, (1.0 - s) / (1.0 + s)};
}

}  // namespace hmprate
