#include <cmath>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "hmprate/entropy.hpp"
#include "hmprate/families.hpp"
#include "hmprate/quadrature.hpp"
#include "hmprate/series.hpp"
#include "oracles.hpp"

using namespace hmprate;

// =============================================================================
// High-noise point detection
// =============================================================================

TEST(HighNoisePoint, BscFamilyFactorizesAtZero) {
    const auto family = bsc_markov_family(0.9, 0.5);
    const auto hp = detect_high_noise_point(family, 0.0);
    EXPECT_FALSE(hp.gaussian);
    EXPECT_NEAR(hp.s(0), 0.5, 1e-15);
    EXPECT_NEAR(hp.s(1), 0.5, 1e-15);
    EXPECT_LE(hp.residual, 1e-15);
}

TEST(HighNoisePoint, GaussianFamilyFactorizesAtZero) {
    Eigen::MatrixXd slope(2, 2);
    slope << 0.0, -2.0, 2.0, 0.0;
    const auto family = gaussian_mean_family(two_state_chain(0.5, 0.5), slope);
    const auto hp = detect_high_noise_point(family, 0.0);
    EXPECT_TRUE(hp.gaussian);
    EXPECT_EQ(hp.residual, 0.0);
}

TEST(HighNoisePoint, AwayFromNoiseRejected) {
    const auto family = bsc_markov_family(0.9, 0.5);
    EXPECT_THROW(detect_high_noise_point(family, 0.1), NotFactorized);
}

// =============================================================================
// Single-letter entropy derivatives
// =============================================================================

TEST(SingleLetter, PureNoisePoint) {
    const auto family = bsc_markov_family(0.9, 0.5);
    const auto d = single_letter_entropy_and_derivatives(family, 0.0);
    EXPECT_NEAR(d.value, std::log(2.0), 1e-14);
    EXPECT_NEAR(d.d1, 0.0, 1e-14);
}

TEST(SingleLetter, SecondDerivativeAgainstFiniteDifference) {
    // d2 H(Y)/dtheta2 at 0 = -4 (p00 - p11)^2 / (2 - p00 - p11)^2 = -16/9
    const auto family = bsc_markov_family(0.9, 0.5);
    const auto d = single_letter_entropy_and_derivatives(family, 0.0);
    const double fd = oracle::richardson_d2(
        [&](double theta) {
            return single_letter_entropy_and_derivatives(family, theta).value;
        },
        0.0, 0.02);
    EXPECT_NEAR(d.d2, fd, 1e-7);
    EXPECT_NEAR(d.d2, -16.0 / 9.0, 1e-10);
}

TEST(SingleLetter, GaussianLocationFamilyIsFlat) {
    // all slopes equal: the output is a shifted Gaussian for every theta
    Eigen::MatrixXd slope = Eigen::MatrixXd::Constant(2, 2, 1.3);
    const auto family = gaussian_mean_family(two_state_chain(0.7, 0.4), slope);
    const auto d = single_letter_entropy_and_derivatives(family, 0.0);
    EXPECT_NEAR(d.value, gaussian_entropy_unit_variance(), 1e-10);
    EXPECT_NEAR(d.d1, 0.0, 1e-10);
    EXPECT_NEAR(d.d2, 0.0, 1e-8);
}

TEST(SingleLetter, RejectsThetaDependentStationary) {
    auto model_fn = [](double theta) {
        return bsc_state_observation_model(two_state_chain(0.7 + theta, 0.5), 0.2);
    };
    const auto family =
        ParametrizedFamily::finite(model_fn, ThetaInterval{-0.05, 0.05}, 0.0);
    EXPECT_THROW(single_letter_entropy_and_derivatives(family, 0.0), PiNotConstant);
}

// =============================================================================
// High-noise derivatives (entropy-rate series coefficients)
// =============================================================================

TEST(HighNoiseDerivatives, SymmetricChainVanishes) {
    for (double p : {0.3, 0.5, 0.8}) {
        const auto [c1, c2] = high_noise_derivatives(bsc_markov_family(p, p));
        EXPECT_NEAR(c1, 0.0, 1e-12);
        EXPECT_NEAR(c2, 0.0, 1e-12);
    }
}

TEST(HighNoiseDerivatives, BscMarkovClosedForm) {
    const auto [c1, c2] = high_noise_derivatives(bsc_markov_family(0.9, 0.5));
    EXPECT_NEAR(c1, 0.0, 1e-12);
    EXPECT_NEAR(c2, -16.0 / 9.0, 1e-12);
}

TEST(HighNoiseDerivatives, MatchesSingleLetterAtHighNoise) {
    // the upper bound H(Y) is tight to second order: both routes agree
    CounterRng rng(71, 0);
    for (int trial = 0; trial < 6; ++trial) {
        const int states = trial % 2 == 0 ? 2 : 3;
        const int symbols = 2 + trial % 2;
        auto family = random_factorized_family(states, symbols, rng, trial % 3 == 0);
        const auto [c1, c2] = high_noise_derivatives(family);
        const auto sl = single_letter_entropy_and_derivatives(family, 0.0);
        EXPECT_NEAR(c1, sl.d1, 1e-10) << "trial " << trial;
        EXPECT_NEAR(c2, sl.d2, 1e-10) << "trial " << trial;
    }
}

TEST(HighNoiseDerivatives, GaussianMatchesOccupancyVariance) {
    Eigen::MatrixXd slope(2, 2);
    slope << 0.4, -1.1, 0.9, 0.2;
    const MarkovChain chain = two_state_chain(0.8, 0.6);
    const auto family = gaussian_mean_family(chain, slope);
    const auto [c1, c2] = high_noise_derivatives(family);
    EXPECT_NEAR(c1, 0.0, 1e-12);
    EXPECT_NEAR(c2, gaussian_second_derivative(chain, slope), 1e-10);
    // and both agree with the Lemma-style mixture quadrature route
    const auto sl = single_letter_entropy_and_derivatives(family, 0.0);
    EXPECT_NEAR(c2, sl.d2, 1e-10);
}

// =============================================================================
// Gaussian occupancy-weighted variance
// =============================================================================

TEST(GaussianSecondDerivative, ConstantMeansVanish) {
    EXPECT_DOUBLE_EQ(
        gaussian_second_derivative(two_state_chain(0.7, 0.4),
                                   Eigen::MatrixXd::Constant(2, 2, 3.0)),
        0.0);
}

TEST(GaussianSecondDerivative, SymmetricTwoState) {
    Eigen::MatrixXd m(2, 2);
    m << 1, -1, 1, -1;
    // e_ij = 1/4 each: sum e m^2 = 1, sum e m = 0
    EXPECT_NEAR(gaussian_second_derivative(two_state_chain(0.5, 0.5), m), 1.0, 1e-14);
}

TEST(GaussianSecondDerivative, DicodeMeans) {
    Eigen::MatrixXd m(2, 2);
    m << 0, -2, 2, 0;
    EXPECT_NEAR(gaussian_second_derivative(two_state_chain(0.5, 0.5), m), 2.0, 1e-14);
}

// =============================================================================
// Series assembly
// =============================================================================

TEST(EntropySeries, BscMarkovQuadratic) {
    const auto family = bsc_markov_family(0.9, 0.5);
    const auto se = entropy_series(family);
    EXPECT_NEAR(se.c0, std::log(2.0), 1e-14);
    EXPECT_NEAR(se.c1, 0.0, 1e-12);
    EXPECT_NEAR(se.c2, -16.0 / 9.0, 1e-12);
    EXPECT_NEAR(se.predict(0.05), 0.69093, 5e-6);
    const double exact = entropy_rate_exact(family.model_at(0.05), 14);
    EXPECT_NEAR(se.predict(0.05), exact, 2e-4);
}

TEST(EntropySeries, ConstantFamilyIsFlat) {
    Eigen::MatrixXd p(2, 2);
    p << 0.5, 0.5, 0.5, 0.5;
    Eigen::VectorXd s(2);
    s << 0.25, 0.75;
    const auto family = linear_noise_family(factorized_model(MarkovChain(p), s), 0.5);
    // the family direction through a factorized base model is zero
    const auto se = entropy_series(family);
    EXPECT_NEAR(se.c0, -(0.25 * std::log(0.25) + 0.75 * std::log(0.75)), 1e-14);
    EXPECT_NEAR(se.c1, 0.0, 1e-12);
    EXPECT_NEAR(se.c2, 0.0, 1e-12);
}

TEST(EntropySeries, SingleLetterEqualsBlockEntropyAtHighNoise) {
    const auto family = bsc_markov_family(0.9, 0.5);
    const auto model = family.model_at(0.0);
    const auto se = entropy_series(family);
    for (int n = 1; n <= 8; ++n)
        EXPECT_NEAR(entropy_rate_exact(model, n), se.c0, 1e-10) << "n=" << n;
}

TEST(EntropySeries, QuadraticPredictorErrorIsCubicOrBetter) {
    const auto family = bsc_markov_family(0.85, 0.45);
    const auto se = entropy_series(family);
    std::vector<double> thetas{0.02, 0.04, 0.08};
    std::vector<double> errs;
    for (double theta : thetas)
        errs.push_back(std::abs(se.predict(theta) -
                                entropy_rate_exact(family.model_at(theta), 14)));
    // log-log slope across the grid endpoints
    const double slope = std::log(errs[2] / errs[0]) / std::log(thetas[2] / thetas[0]);
    EXPECT_GE(slope, 2.5);
}

TEST(EntropySeries, QuadratureOrderDoublingStable) {
    Eigen::MatrixXd slope(2, 2);
    slope << 0.4, -1.1, 0.9, 0.2;
    const auto family = gaussian_mean_family(two_state_chain(0.8, 0.6), slope);
    const auto a = entropy_series(family, 64);
    const auto b = entropy_series(family, 128);
    EXPECT_NEAR(a.c2, b.c2, 1e-8);
    const auto sl64 = single_letter_entropy_and_derivatives(family, 0.3, 64);
    const auto sl128 = single_letter_entropy_and_derivatives(family, 0.3, 128);
    EXPECT_NEAR(sl64.value, sl128.value, 1e-8);
    EXPECT_NEAR(sl64.d2, sl128.d2, 1e-8);
}
