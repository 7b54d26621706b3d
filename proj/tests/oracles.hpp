// Independent oracles used to freeze expected values: brute-force
// enumeration, repeated-squaring stationary vectors, spectral radii via
// matrix powers, and Richardson-extrapolated finite differences. These stay
// independent of the library code paths they check.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "hmprate/model.hpp"

namespace oracle {

/// Stationary vector via repeated squaring of P (rows of P^(2^k) converge).
inline Eigen::VectorXd stationary_by_squaring(const Eigen::MatrixXd& p, int doublings = 60) {
    Eigen::MatrixXd m = p;
    for (int k = 0; k < doublings; ++k) m = m * m;
    Eigen::VectorXd pi = m.row(0).transpose();
    return pi / pi.sum();
}

/// Spectral radius via log-norm of matrix powers (repeated squaring with
/// rescaling).
inline double spectral_radius(const Eigen::MatrixXd& m, int doublings = 40) {
    Eigen::MatrixXd a = m;
    double log_scale = 0.0;
    double steps = 1.0;
    for (int k = 0; k < doublings; ++k) {
        const double norm = a.norm();
        a /= norm;
        log_scale = 2.0 * (log_scale + std::log(norm));
        steps *= 2.0;
        a = a * a;
    }
    log_scale += std::log(a.norm());
    return std::exp(log_scale / steps);
}

/// Brute-force block probability: sum over all state paths of
/// pi(q1) prod p_{q_t q_{t+1}} h_{q_t q_{t+1}}(y_t).
inline double brute_force_block_probability(const hmprate::HiddenMarkovModel& model,
                                            const std::vector<int>& symbols) {
    const int n = model.num_states();
    const int len = static_cast<int>(symbols.size());
    double total = 0.0;
    std::vector<int> path(len + 1, 0);
    std::function<void(int, double)> rec = [&](int depth, double weight) {
        if (depth == len + 1) {
            total += weight;
            return;
        }
        for (int q = 0; q < n; ++q) {
            path[depth] = q;
            double w = weight;
            if (depth == 0) {
                w *= model.stationary()(q);
            } else {
                const int prev = path[depth - 1];
                w *= model.transition()(prev, q) * model.kernel(prev, q, symbols[depth - 1]);
            }
            if (w > 0.0) rec(depth + 1, w);
        }
    };
    rec(0, 1.0);
    return total;
}

/// Minimum cross-ratio phi by direct enumeration of index quadruples.
inline double phi_by_enumeration(const Eigen::MatrixXd& m) {
    double phi = std::numeric_limits<double>::infinity();
    const int n = static_cast<int>(m.rows());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l)
                    phi = std::min(phi, m(i, k) * m(j, l) / (m(j, k) * m(i, l)));
    return phi;
}

/// Central difference with Richardson extrapolation (steps h and h/2):
/// first derivative of f at x, O(h^4) accurate.
inline double richardson_d1(const std::function<double(double)>& f, double x, double h) {
    auto d = [&](double s) { return (f(x + s) - f(x - s)) / (2.0 * s); };
    return (4.0 * d(h / 2.0) - d(h)) / 3.0;
}

/// Second derivative of f at x via Richardson-extrapolated central
/// second differences.
inline double richardson_d2(const std::function<double(double)>& f, double x, double h) {
    auto d = [&](double s) { return (f(x + s) - 2.0 * f(x) + f(x - s)) / (s * s); };
    return (4.0 * d(h / 2.0) - d(h)) / 3.0;
}

/// Standard error of a binomial frequency estimate.
inline double binomial_se(double p, double n) { return std::sqrt(p * (1.0 - p) / n); }

}  // namespace oracle
