#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "hmprate/errors.hpp"
#include "hmprate/model.hpp"

namespace hmprate {

/// Forward belief alpha (on the simplex) and backward belief beta
/// (pi-normalized: pi^T beta = 1).
struct BeliefPair {
    Eigen::VectorXd alpha;
    Eigen::VectorXd beta;
};

struct BeliefStep {
    Eigen::VectorXd belief;
    double normalizer;
};

/// One forward update: alpha' = alpha^T M(y) / (alpha^T M(y) 1). The
/// normalizer psi equals Pr(Y_t = y | past) (a density for Gaussian outputs).
inline BeliefStep forward_step(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& m) {
    Eigen::VectorXd w = m.transpose() * alpha;
    const double psi = w.sum();
    if (!(psi > 0.0) || !std::isfinite(psi))
        throw DegenerateBelief("forward normalizer vanished: impossible observation");
    w /= psi;
    return {std::move(w), psi};
}

/// One backward update: beta' = M(y) beta / (pi^T M(y) beta), keeping
/// pi^T beta' = 1.
inline BeliefStep backward_step(const Eigen::VectorXd& beta, const Eigen::MatrixXd& m,
                                const Eigen::VectorXd& pi) {
    Eigen::VectorXd v = m * beta;
    const double phi = pi.dot(v);
    if (!(phi > 0.0) || !std::isfinite(phi))
        throw DegenerateBelief("backward normalizer vanished: impossible observation");
    v /= phi;
    return {std::move(v), phi};
}

namespace detail {

template <typename MatrixAt>
double block_probability_impl(const Eigen::VectorXd& pi, MatrixAt&& matrix_at,
                              std::size_t count) {
    if (count == 0) return pi.sum();
    Eigen::VectorXd alpha = pi;
    double log_prob = 0.0;
    for (std::size_t t = 0; t < count; ++t) {
        Eigen::VectorXd w = matrix_at(t).transpose() * alpha;
        const double psi = w.sum();
        if (!(psi > 0.0)) return 0.0;
        log_prob += std::log(psi);
        alpha = w / psi;
    }
    return std::exp(log_prob);
}

}  // namespace detail

/// Block probability pi^T M(y_1) ... M(y_n) 1, accumulated with per-step
/// normalization so long blocks do not underflow.
inline double block_probability(const Eigen::VectorXd& pi, const HiddenMarkovModel& model,
                                const std::vector<int>& symbols) {
    return detail::block_probability_impl(
        pi, [&](std::size_t t) -> const Eigen::MatrixXd& { return model.matrix(symbols[t]); },
        symbols.size());
}

/// Gaussian case: joint output density of the block.
inline double block_probability(const Eigen::VectorXd& pi, const HiddenMarkovModel& model,
                                const std::vector<double>& values) {
    return detail::block_probability_impl(
        pi, [&](std::size_t t) { return model.matrix_at(values[t]); }, values.size());
}

}  // namespace hmprate
