#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "hmprate/contraction.hpp"
#include "hmprate/errors.hpp"
#include "hmprate/model.hpp"
#include "hmprate/rng.hpp"

namespace hmprate {

/// (epsilon, k)-primitivity data: every k-step transition-observation
/// product M(y_1..y_k) has all entries > k*epsilon. Implies the forward and
/// backward recursions forget their initialization at rate gamma = e^{-2 eps}
/// per step with constant C = -2 ln(k eps) gamma^{-k}.
struct PrimitivityCertificate {
    int k = 0;
    double epsilon = 0.0;
    double gamma = 1.0;            ///< e^{-2 epsilon}
    double mixing_constant = 0.0;  ///< -2 ln(k epsilon) gamma^{-k}
    double delta = 0.0;            ///< min_{(i,j) valid, y} [M(y)]_ij
    bool certified = true;         ///< false when epsilon came from sampling
};

namespace detail {

inline void enumerate_products(const std::vector<Eigen::MatrixXd>& mats, int depth, int k,
                               const Eigen::MatrixXd& prefix, double& min_entry,
                               std::vector<Eigen::MatrixXd>& spot_checks) {
    if (depth == k) {
        min_entry = std::min(min_entry, prefix.minCoeff());
        if (spot_checks.size() < 256) spot_checks.push_back(prefix);
        return;
    }
    for (const auto& m : mats)
        enumerate_products(mats, depth + 1, k, (prefix * m).eval(), min_entry, spot_checks);
}

}  // namespace detail

/// Certificate for a finite-output model, or nullopt for Gaussian outputs
/// (likelihood ratios are unbounded there, so no uniform epsilon exists).
///
/// k is the smallest power with P^k positive (searched up to k_max, default
/// the Wielandt bound). epsilon = min over y_1^k of the smallest entry of
/// M(y_1^k), divided by k; computed by exact enumeration when |Y|^k <= 1e6
/// and otherwise estimated from 1e5 sampled sequences with certified=false.
inline std::optional<PrimitivityCertificate> primitivity_certificate(
    const HiddenMarkovModel& model, int k_max = 0) {
    if (!model.finite_output()) return std::nullopt;
    const int n = model.num_states();
    if (k_max <= 0) k_max = wielandt_bound(n);
    const int k = smallest_positive_power(model.transition(), k_max);
    if (k < 0)
        throw NotPrimitiveWithin("no positive power of P within k_max = " +
                                 std::to_string(k_max));

    PrimitivityCertificate cert;
    cert.k = k;
    cert.delta = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (model.chain().valid_edge(i, j))
                for (int y = 0; y < model.alphabet_size(); ++y)
                    cert.delta = std::min(cert.delta, model.matrix(y)(i, j));
    if (!(cert.delta > 0.0))
        throw ZeroObservationProbability(
            "some valid transition has a zero-probability output; k-step products "
            "cannot be bounded away from zero");

    double min_entry = std::numeric_limits<double>::infinity();
    std::vector<Eigen::MatrixXd> spot_checks;
    const double total = std::pow(static_cast<double>(model.alphabet_size()), k);
    if (total <= 1e6) {
        detail::enumerate_products(model.matrices(), 0, k,
                                   Eigen::MatrixXd::Identity(n, n), min_entry, spot_checks);
    } else {
        cert.certified = false;
        CounterRng rng(0x5EEDCE27u, 0);
        Eigen::VectorXd uniform = Eigen::VectorXd::Constant(model.alphabet_size(),
                                                            1.0 / model.alphabet_size());
        for (int trial = 0; trial < 100000; ++trial) {
            Eigen::MatrixXd prod = Eigen::MatrixXd::Identity(n, n);
            for (int t = 0; t < k; ++t) prod *= model.matrix(rng.categorical(uniform));
            min_entry = std::min(min_entry, prod.minCoeff());
            if (spot_checks.size() < 256) spot_checks.push_back(prod);
        }
    }
    cert.epsilon = min_entry / k;
    cert.gamma = std::exp(-2.0 * cert.epsilon);
    cert.mixing_constant = -2.0 * std::log(k * cert.epsilon) * std::pow(cert.gamma, -k);

    const double tau_bound = std::exp(-2.0 * k * cert.epsilon);
    for (const auto& prod : spot_checks) {
        if (prod.minCoeff() <= 0.0) continue;
        if (birkhoff_coefficients(prod).tau > tau_bound + 1e-12)
            throw Error("certificate contraction bound violated on a sampled product");
    }
    return cert;
}

/// Default burn-in: 50 k / epsilon steps from the certificate when one
/// exists, else 1000.
inline std::int64_t default_burn_in(const HiddenMarkovModel& model) {
    auto cert = primitivity_certificate(model);
    if (!cert) return 1000;
    return static_cast<std::int64_t>(std::ceil(50.0 * cert->k / cert->epsilon));
}

}  // namespace hmprate
