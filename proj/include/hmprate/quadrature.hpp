#pragma once

#include <cmath>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "hmprate/errors.hpp"

namespace hmprate {

/// Gauss-Hermite rule for integrals against e^{-x^2}, built from the
/// symmetric tridiagonal Jacobi matrix (Golub-Welsch). Nodes and weights
/// are symmetrized so odd integrands vanish exactly.
class GaussHermite {
  public:
    explicit GaussHermite(int order) {
        if (order < 1) throw Error("quadrature order must be positive");
        Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
        for (int k = 1; k < order; ++k) {
            const double b = std::sqrt(k / 2.0);
            jacobi(k - 1, k) = b;
            jacobi(k, k - 1) = b;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
        nodes_ = solver.eigenvalues();
        weights_.resize(order);
        const double sqrt_pi = std::sqrt(M_PI);
        for (int k = 0; k < order; ++k)
            weights_(k) = sqrt_pi * solver.eigenvectors()(0, k) * solver.eigenvectors()(0, k);
        for (int k = 0; k < order / 2; ++k) {
            const int r = order - 1 - k;
            const double x = 0.5 * (nodes_(r) - nodes_(k));
            nodes_(k) = -x;
            nodes_(r) = x;
            const double w = 0.5 * (weights_(k) + weights_(r));
            weights_(k) = w;
            weights_(r) = w;
        }
        if (order % 2 == 1) nodes_(order / 2) = 0.0;
    }

    const Eigen::VectorXd& nodes() const { return nodes_; }
    const Eigen::VectorXd& weights() const { return weights_; }

    /// E[g(Z)] for Z ~ N(0, 1).
    template <typename Fn>
    double normal_expectation(Fn&& g) const {
        double acc = 0.0;
        const double inv_sqrt_pi = 1.0 / std::sqrt(M_PI);
        for (int k = 0; k < nodes_.size(); ++k)
            acc += weights_(k) * g(std::sqrt(2.0) * nodes_(k)) * inv_sqrt_pi;
        return acc;
    }

  private:
    Eigen::VectorXd nodes_;
    Eigen::VectorXd weights_;
};

}  // namespace hmprate
