#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "hmprate/derivative.hpp"
#include "hmprate/entropy.hpp"
#include "hmprate/families.hpp"
#include "oracles.hpp"

using namespace hmprate;

namespace {

ParametrizedFamily dyadic_factorized_family() {
    Eigen::MatrixXd p(2, 2);
    p << 0.5, 0.5, 0.5, 0.5;
    Eigen::VectorXd s(2);
    s << 0.25, 0.75;
    return linear_noise_family(factorized_model(MarkovChain(p), s), 0.5);
}

/// Rebuilds the model with edge occupancies e + t * delta (kernels fixed).
HiddenMarkovModel perturbed_occupancy_model(const HiddenMarkovModel& model,
                                            const Eigen::MatrixXd& delta, double t) {
    const int n = model.num_states();
    Eigen::MatrixXd occ(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            occ(i, j) = model.stationary()(i) * model.transition()(i, j) + t * delta(i, j);
    Eigen::MatrixXd p(n, n);
    for (int i = 0; i < n; ++i) p.row(i) = occ.row(i) / occ.row(i).sum();
    std::vector<Eigen::MatrixXd> kernels;
    for (int y = 0; y < model.alphabet_size(); ++y) {
        Eigen::MatrixXd h(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) h(i, j) = model.kernel(i, j, y);
        kernels.push_back(std::move(h));
    }
    return HiddenMarkovModel::finite(MarkovChain(p, model.chain().state_names()),
                                     model.alphabet(), std::move(kernels));
}

double edge_derivative_oracle(const HiddenMarkovModel& model, const Eigen::MatrixXd& delta) {
    return oracle::richardson_d1(
        [&](double t) { return entropy_rate_exact(perturbed_occupancy_model(model, delta, t), 12); },
        0.0, 1e-3);
}

}  // namespace

// =============================================================================
// Log-spectral-radius derivative
// =============================================================================

TEST(LsrDerivative, DiagonalCase) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
    m(0, 0) = 2.0;
    m(1, 1) = 1.0;
    Eigen::MatrixXd mp = Eigen::MatrixXd::Zero(2, 2);
    mp(0, 0) = 1.0;
    // d/dtheta ln(2 + theta) at 0
    EXPECT_NEAR(lsr_derivative(m, mp), 0.5, 1e-12);
}

TEST(LsrDerivative, RankOnePerturbedByIdentity) {
    Eigen::MatrixXd m(2, 2);
    m << 1, 1, 1, 1;
    // rho(M + h I) = 2 + h, so the log derivative is 1/2
    EXPECT_NEAR(lsr_derivative(m, Eigen::MatrixXd::Identity(2, 2)), 0.5, 1e-12);
}

TEST(LsrDerivative, MatchesFiniteDifferences) {
    CounterRng rng(41, 0);
    for (int trial = 0; trial < 25; ++trial) {
        const int n = trial % 2 == 0 ? 3 : 5;
        Eigen::MatrixXd m(n, n), mp(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                m(i, j) = 0.1 + rng.uniform();
                mp(i, j) = 2.0 * rng.uniform() - 1.0;
            }
        const double h = 1e-5;
        const double fd = (std::log(oracle::spectral_radius(m + h * mp)) -
                           std::log(oracle::spectral_radius(m - h * mp))) /
                          (2.0 * h);
        EXPECT_NEAR(lsr_derivative(m, mp), fd, 1e-6);
    }
}

TEST(LsrDerivative, DegenerateSpectrumRejected) {
    EXPECT_THROW(lsr_derivative(Eigen::MatrixXd::Identity(2, 2),
                                Eigen::MatrixXd::Identity(2, 2)),
                 DegenerateSpectrum);
}

// =============================================================================
// Theorem-style entropy derivative Monte Carlo
// =============================================================================

TEST(EntropyDerivativeMc, SymmetricFamilyIsZeroAtHighNoise) {
    // relabeling symmetry makes the entropy even in theta, so the derivative
    // vanishes at the high-noise point theta* = 0
    const auto family = bsc_markov_family(0.7, 0.7);
    const auto r = entropy_derivative_mc(family, 0.0, 2000, 200, 3);
    EXPECT_NEAR(r.estimate, 0.0, 3.0 * r.std_error + 1e-12);
}

TEST(EntropyDerivativeMc, FactorizedPointHasZeroVariance) {
    const auto family = dyadic_factorized_family();
    const auto r = entropy_derivative_mc(family, 0.0, 200, 100, 7);
    EXPECT_EQ(r.std_error, 0.0);
    // beliefs are constants, so the estimator is the closed form
    // -sum_y pi^T M'(y) 1 ln s(y)
    const auto model = family.model_at(0.0);
    const auto d1 = family.matrix_derivative(0.0, 1);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(2);
    double expected = 0.0;
    Eigen::VectorXd s(2);
    s << 0.25, 0.75;
    for (int y = 0; y < 2; ++y)
        expected -= model.stationary().dot(d1[y] * ones) * std::log(s(y));
    EXPECT_NEAR(r.estimate, expected, 1e-12);
}

TEST(EntropyDerivativeMc, MatchesCommonRandomNumberFiniteDifference) {
    const auto family = bsc_markov_family(0.9, 0.5);
    const double theta = 0.15;
    const auto deriv = entropy_derivative_mc(family, theta, 20000, -1, 11, 2);

    const double h = 0.01;
    const std::int64_t n = 400000;
    const auto hi = entropy_rate_mc(family.model_at(theta + h), n, 500);
    const auto lo = entropy_rate_mc(family.model_at(theta - h), n, 500);
    const double fd = (hi.estimate - lo.estimate) / (2.0 * h);
    double s2 = 0.0, mean = 0.0;
    std::vector<double> diffs(hi.batch_means.size());
    for (std::size_t b = 0; b < diffs.size(); ++b) {
        diffs[b] = (hi.batch_means[b] - lo.batch_means[b]) / (2.0 * h);
        mean += diffs[b];
    }
    mean /= diffs.size();
    for (double d : diffs) s2 += (d - mean) * (d - mean);
    const double fd_se = std::sqrt(s2 / (diffs.size() - 1) / diffs.size());

    const double sigma = std::sqrt(deriv.std_error * deriv.std_error + fd_se * fd_se);
    EXPECT_NEAR(deriv.estimate, fd, 3.0 * sigma + 1e-3);
    // sanity: the derivative is distinctly negative at theta = 0.15
    EXPECT_LT(deriv.estimate, -0.1);
}

TEST(EntropyDerivativeMc, RejectsThetaDependentStationary) {
    auto model_fn = [](double theta) {
        return bsc_state_observation_model(two_state_chain(0.7 + theta, 0.5), 0.2);
    };
    const auto family =
        ParametrizedFamily::finite(model_fn, ThetaInterval{-0.1, 0.1}, 0.0);
    EXPECT_THROW(entropy_derivative_mc(family, 0.0, 100, 50, 1), PiNotConstant);
}

TEST(EntropyDerivativeMc, WorkerCountInvariance) {
    const auto family = bsc_markov_family(0.8, 0.6);
    const auto one = entropy_derivative_mc(family, 0.1, 500, 200, 3, 1);
    const auto two = entropy_derivative_mc(family, 0.1, 500, 200, 3, 2);
    const auto eight = entropy_derivative_mc(family, 0.1, 500, 200, 3, 8);
    EXPECT_EQ(one.estimate, two.estimate);
    EXPECT_EQ(one.estimate, eight.estimate);
    EXPECT_EQ(one.std_error, eight.std_error);
}

// =============================================================================
// Stationary-measure identities
// =============================================================================

TEST(MeasureCheck, FactorizedResidualsExactlyZero) {
    const auto family = dyadic_factorized_family();
    const auto report = measure_property_check(family, 0.0, 200, 5);
    ASSERT_EQ(report.items.size(), 5u);
    for (const auto& item : report.items) {
        EXPECT_EQ(item.residual, 0.0) << item.name;
        EXPECT_EQ(item.std_error, 0.0) << item.name;
    }
}

TEST(MeasureCheck, BscMarkovWithinThreeSigma) {
    const auto family = bsc_markov_family(0.8, 0.6);
    const auto report = measure_property_check(family, 0.3, 20000, 29, 2);
    ASSERT_EQ(report.items.size(), 5u);
    for (const auto& item : report.items)
        EXPECT_LE(item.residual, 3.0 * item.std_error + 1e-12) << item.name;
}

TEST(MeasureCheck, ModelOnlyOverloadHasFourItems) {
    const auto model = bsc_state_observation_model(two_state_chain(0.8, 0.6), 0.2);
    const auto report = measure_property_check(model, 2000, 31);
    EXPECT_EQ(report.items.size(), 4u);
    for (const auto& item : report.items)
        EXPECT_LE(item.residual, 3.0 * item.std_error + 1e-12) << item.name;
}

// =============================================================================
// Edge-occupancy derivative
// =============================================================================

TEST(EdgeOccupancyDerivative, ZeroPerturbationGivesZero) {
    const auto model = bsc_state_observation_model(two_state_chain(0.8, 0.6), 0.2);
    EdgePerturbation d{Eigen::MatrixXd::Zero(2, 2)};
    const auto r = edge_occupancy_entropy_derivative(model, d, 200, 100, 3);
    EXPECT_EQ(r.estimate, 0.0);
    EXPECT_EQ(r.std_error, 0.0);
}

TEST(EdgeOccupancyDerivative, InvalidPerturbationsRejected) {
    const auto model = bsc_state_observation_model(two_state_chain(0.8, 0.6), 0.2);
    Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
    bad(0, 0) = 0.1;  // nonzero total mass
    EXPECT_THROW(
        edge_occupancy_entropy_derivative(model, EdgePerturbation{bad}, 10, 10, 1),
        InvalidPerturbation);
    Eigen::MatrixXd imbalanced = Eigen::MatrixXd::Zero(2, 2);
    imbalanced(0, 1) = 0.1;  // total zero but flow-imbalanced
    imbalanced(1, 0) = -0.1;
    EXPECT_THROW(
        edge_occupancy_entropy_derivative(model, EdgePerturbation{imbalanced}, 10, 10, 1),
        InvalidPerturbation);
    Eigen::MatrixXd moves_pi = Eigen::MatrixXd::Zero(2, 2);
    moves_pi(0, 0) = 0.1;  // balanced circulation direction, but d pi != 0
    moves_pi(1, 1) = -0.1;
    EXPECT_THROW(
        edge_occupancy_entropy_derivative(model, EdgePerturbation{moves_pi}, 10, 10, 1),
        InvalidPerturbation);
    const auto rll = bsc_state_observation_model(rll_chain(0.5), 0.1);
    Eigen::MatrixXd off_v = Eigen::MatrixXd::Zero(2, 2);
    off_v(1, 1) = 0.1;  // invalid edge of the RLL chain
    off_v(0, 0) = -0.1;
    EXPECT_THROW(
        edge_occupancy_entropy_derivative(rll, EdgePerturbation{off_v}, 10, 10, 1),
        InvalidPerturbation);
}

TEST(EdgeOccupancyDerivative, StateIndependentKernelsGiveZero) {
    // identical kernels on every edge: outputs carry no chain information,
    // so moving the occupancies cannot change the entropy rate
    Eigen::VectorXd s(2);
    s << 0.3, 0.7;
    const auto model = factorized_model(two_state_chain(0.7, 0.4), s);
    Eigen::MatrixXd delta(2, 2);
    delta << -0.02, 0.02, 0.02, -0.02;
    const auto r = edge_occupancy_entropy_derivative(model, EdgePerturbation{delta}, 2000,
                                                     -1, 13, 2);
    EXPECT_NEAR(r.estimate, 0.0, 3.0 * r.std_error + 1e-10);
    EXPECT_NEAR(edge_derivative_oracle(model, delta), 0.0, 1e-6);
}

TEST(EdgeOccupancyDerivative, MatchesExactFiniteDifferenceOracleTwoState) {
    const auto model = bsc_state_observation_model(two_state_chain(0.8, 0.6), 0.2);
    CounterRng rng(51, 0);
    for (int trial = 0; trial < 3; ++trial) {
        // pi-preserving feasible directions of a two-state chain: x * [[-1,1],[1,-1]]
        const double x = 0.04 * (2.0 * rng.uniform() - 1.0);
        Eigen::MatrixXd delta(2, 2);
        delta << -x, x, x, -x;
        const auto r = edge_occupancy_entropy_derivative(model, EdgePerturbation{delta},
                                                         20000, -1, 60 + trial, 2);
        const double expected = edge_derivative_oracle(model, delta);
        EXPECT_NEAR(r.estimate, expected, 3.0 * r.std_error + 1e-3) << "trial " << trial;
    }
}

TEST(EdgeOccupancyDerivative, MatchesOracleOnThreeStateCirculations) {
    Eigen::MatrixXd p(3, 3);
    p << 0.5, 0.3, 0.2, 0.25, 0.5, 0.25, 0.3, 0.3, 0.4;
    MarkovChain chain(p);
    Eigen::MatrixXd h0(3, 3), h1(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            h0(i, j) = (i + j) % 2 ? 0.3 : 0.75;
            h1(i, j) = 1.0 - h0(i, j);
        }
    const auto model = HiddenMarkovModel::finite(chain, {"0", "1"}, {h0, h1});
    CounterRng rng(53, 0);
    for (int trial = 0; trial < 2; ++trial) {
        // random combination of cycle-difference directions: rows and
        // columns sum to zero
        const double a = 0.02 * (2.0 * rng.uniform() - 1.0);
        const double b = 0.02 * (2.0 * rng.uniform() - 1.0);
        Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(3, 3);
        delta(0, 1) += a;
        delta(1, 2) += a;
        delta(2, 0) += a;
        delta(1, 0) -= a;
        delta(2, 1) -= a;
        delta(0, 2) -= a;
        delta(0, 1) += b;
        delta(1, 0) += b;
        delta(0, 0) -= b;
        delta(1, 1) -= b;
        const auto r = edge_occupancy_entropy_derivative(model, EdgePerturbation{delta},
                                                         20000, -1, 70 + trial, 2);
        const double expected = edge_derivative_oracle(model, delta);
        EXPECT_NEAR(r.estimate, expected, 3.0 * r.std_error + 1e-3) << "trial " << trial;
    }
}
