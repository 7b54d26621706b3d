#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hmprate/errors.hpp"
#include "hmprate/markov.hpp"
#include "hmprate/util.hpp"

namespace hmprate {

/// Hidden Markov process: a primitive finite-state chain whose transitions
/// emit observations. Outputs are either symbols from a finite alphabet with
/// per-edge distributions h_ij(y), or reals with per-edge unit-variance
/// Gaussian densities. The transition-observation matrices
/// [M(y)]_ij = p_ij h_ij(y) are precomputed for the finite case and
/// evaluated on demand for the Gaussian case.
class HiddenMarkovModel {
  public:
    /// Finite-output model. `kernels[y](i, j)` holds h_ij(y); entries must
    /// vanish off the valid-edge set and sum to one over y on each edge.
    static HiddenMarkovModel finite(MarkovChain chain, std::vector<std::string> alphabet,
                                    std::vector<Eigen::MatrixXd> kernels) {
        const int n = chain.num_states();
        const int ny = static_cast<int>(alphabet.size());
        if (ny == 0) throw ModelValidationError("alphabet", "must be nonempty");
        if (static_cast<int>(kernels.size()) != ny)
            throw ModelValidationError("h", "number of kernel matrices must match alphabet");
        for (int y = 0; y < ny; ++y) {
            if (kernels[y].rows() != n || kernels[y].cols() != n)
                throw ModelValidationError("h[" + alphabet[y] + "]",
                                           "kernel matrix has wrong dimensions");
        }
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                double sum = 0.0;
                for (int y = 0; y < ny; ++y) {
                    const double v = kernels[y](i, j);
                    const std::string field = "h[" + alphabet[y] + "](" + std::to_string(i) +
                                              "," + std::to_string(j) + ")";
                    if (!(v >= 0.0) || !std::isfinite(v))
                        throw ModelValidationError(field, "must be finite and nonnegative");
                    if (!chain.valid_edge(i, j) && v != 0.0)
                        throw ModelValidationError(field, "kernel defined off a valid edge");
                    sum += v;
                }
                if (chain.valid_edge(i, j) && std::abs(sum - 1.0) > 1e-12)
                    throw ModelValidationError(
                        "h(" + std::to_string(i) + "," + std::to_string(j) + ")",
                        "edge distribution must sum to 1");
            }
        }
        HiddenMarkovModel m(std::move(chain));
        m.alphabet_ = std::move(alphabet);
        m.kernels_ = std::move(kernels);
        m.matrices_.reserve(ny);
        for (int y = 0; y < ny; ++y)
            m.matrices_.push_back(m.chain_.transition().cwiseProduct(m.kernels_[y]));
        return m;
    }

    /// Conditionally Gaussian model: the edge (i, j) emits a unit-variance
    /// Gaussian with mean means(i, j).
    static HiddenMarkovModel gaussian(MarkovChain chain, Eigen::MatrixXd means,
                                      double variance = 1.0) {
        const int n = chain.num_states();
        if (means.rows() != n || means.cols() != n)
            throw ModelValidationError("gaussian.means", "must be a |Q| x |Q| matrix");
        if (!means.allFinite())
            throw ModelValidationError("gaussian.means", "entries must be finite");
        if (variance != 1.0)
            throw ModelValidationError("gaussian.variance", "only unit variance is supported");
        HiddenMarkovModel m(std::move(chain));
        m.gaussian_ = true;
        m.means_ = std::move(means);
        return m;
    }

    const MarkovChain& chain() const { return chain_; }
    int num_states() const { return chain_.num_states(); }
    const Eigen::MatrixXd& transition() const { return chain_.transition(); }
    const Eigen::VectorXd& stationary() const { return chain_.stationary(); }

    bool finite_output() const { return !gaussian_; }
    int alphabet_size() const { return static_cast<int>(alphabet_.size()); }
    const std::vector<std::string>& alphabet() const { return alphabet_; }

    const std::vector<Eigen::MatrixXd>& matrices() const { return matrices_; }
    const Eigen::MatrixXd& matrix(int symbol) const { return matrices_[symbol]; }
    double kernel(int i, int j, int symbol) const { return kernels_[symbol](i, j); }

    /// Gaussian case: density-valued matrix [M(y)]_ij = p_ij phi(y - m_ij).
    Eigen::MatrixXd matrix_at(double y) const {
        const int n = num_states();
        Eigen::MatrixXd m(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                m(i, j) = chain_.transition()(i, j) == 0.0
                              ? 0.0
                              : chain_.transition()(i, j) * std_normal_pdf(y - means_(i, j));
        return m;
    }

    const Eigen::MatrixXd& means() const { return means_; }
    double variance() const { return 1.0; }

    /// Minimum kernel value over valid edges and symbols (finite case).
    /// Zero means some valid transition cannot produce some output.
    double min_kernel() const {
        double lo = std::numeric_limits<double>::infinity();
        for (int i = 0; i < num_states(); ++i)
            for (int j = 0; j < num_states(); ++j)
                if (chain_.valid_edge(i, j))
                    for (int y = 0; y < alphabet_size(); ++y) lo = std::min(lo, kernels_[y](i, j));
        return lo;
    }

  private:
    explicit HiddenMarkovModel(MarkovChain chain) : chain_(std::move(chain)) {}

    MarkovChain chain_;
    bool gaussian_ = false;
    std::vector<std::string> alphabet_;
    std::vector<Eigen::MatrixXd> kernels_;
    std::vector<Eigen::MatrixXd> matrices_;
    Eigen::MatrixXd means_;
};

}  // namespace hmprate
