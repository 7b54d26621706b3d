#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hmprate/errors.hpp"
#include "hmprate/util.hpp"

namespace hmprate {

/// Wielandt bound: a primitive n-state chain has P^k > 0 for some
/// k <= (n-1)^2 + 1.
inline int wielandt_bound(int n) { return (n - 1) * (n - 1) + 1; }

/// Smallest k <= k_max such that the zero pattern of P^k is entrywise
/// positive, or -1 if none exists.
inline int smallest_positive_power(const Eigen::MatrixXd& p, int k_max) {
    const int n = static_cast<int>(p.rows());
    Eigen::MatrixXi base = (p.array() > 0.0).cast<int>();
    Eigen::MatrixXi cur = base;
    for (int k = 1; k <= k_max; ++k) {
        if ((cur.array() > 0).all()) return k;
        cur = (cur * base).cwiseMin(1);
    }
    return -1;
}

/// Stationary distribution of a primitive row-stochastic matrix by power
/// iteration on P^T. Residual stop at 1e-13 in 1-norm, then extra sweeps
/// until the iterate is a bitwise fixed point of the normalized map.
inline Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& p) {
    const int n = static_cast<int>(p.rows());
    if (n == 0 || p.cols() != n)
        throw ModelValidationError("P", "must be a nonempty square matrix");
    if (smallest_positive_power(p, wielandt_bound(n)) < 0)
        throw NonPrimitiveChain("no power P^k is positive within the Wielandt bound");
    const Eigen::MatrixXd pt = p.transpose();
    Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / n);
    bool converged = false;
    for (std::int64_t it = 0; it < 1000000; ++it) {
        Eigen::VectorXd y = pt * x;
        y /= y.sum();
        if ((pt * y - y).lpNorm<1>() <= 1e-13) {
            x = y;
            converged = true;
            break;
        }
        x = y;
    }
    if (!converged)
        throw NonPrimitiveChain("stationary power iteration did not converge within 1e6 steps");
    for (int it = 0; it < 256; ++it) {
        Eigen::VectorXd y = pt * x;
        y /= y.sum();
        if (y == x) break;
        x = y;
    }
    return x;
}

/// Finite-state Markov chain with a row-stochastic, primitive transition
/// matrix. Immutable after construction; the stationary distribution is
/// computed and cached up front.
class MarkovChain {
  public:
    explicit MarkovChain(Eigen::MatrixXd transition, std::vector<std::string> names = {})
        : p_(std::move(transition)), names_(std::move(names)) {
        const int n = static_cast<int>(p_.rows());
        if (n == 0 || p_.cols() != n)
            throw ModelValidationError("P", "must be a nonempty square matrix");
        if (names_.empty()) {
            names_.reserve(n);
            for (int i = 0; i < n; ++i) names_.push_back(std::to_string(i));
        } else if (static_cast<int>(names_.size()) != n) {
            throw ModelValidationError("states", "size does not match P");
        }
        for (int i = 0; i < n; ++i) {
            double row = 0.0;
            for (int j = 0; j < n; ++j) {
                const double v = p_(i, j);
                if (!(v >= 0.0) || !std::isfinite(v))
                    throw ModelValidationError("P[" + std::to_string(i) + "]",
                                               "entries must be finite and nonnegative");
                row += v;
            }
            if (std::abs(row - 1.0) > 1e-12)
                throw ModelValidationError("P[" + std::to_string(i) + "]", "row must sum to 1");
        }
        if (smallest_positive_power(p_, wielandt_bound(n)) < 0)
            throw NonPrimitiveChain("chain is not primitive within the Wielandt bound");
        pi_ = stationary_distribution(p_);
    }

    int num_states() const { return static_cast<int>(p_.rows()); }
    const Eigen::MatrixXd& transition() const { return p_; }
    const Eigen::VectorXd& stationary() const { return pi_; }
    const std::vector<std::string>& state_names() const { return names_; }
    bool valid_edge(int i, int j) const { return p_(i, j) > 0.0; }

    std::vector<std::pair<int, int>> valid_edges() const {
        std::vector<std::pair<int, int>> e;
        for (int i = 0; i < num_states(); ++i)
            for (int j = 0; j < num_states(); ++j)
                if (p_(i, j) > 0.0) e.emplace_back(i, j);
        return e;
    }

  private:
    Eigen::MatrixXd p_;
    std::vector<std::string> names_;
    Eigen::VectorXd pi_;
};

/// Entropy rate of the chain itself in nats: -sum_ij pi(i) p_ij ln p_ij.
inline double markov_entropy_rate(const MarkovChain& chain) {
    double h = 0.0;
    const auto& p = chain.transition();
    const auto& pi = chain.stationary();
    for (int i = 0; i < chain.num_states(); ++i)
        for (int j = 0; j < chain.num_states(); ++j) h -= pi(i) * xlogx(p(i, j));
    return h;
}

}  // namespace hmprate
