#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "hmprate/belief.hpp"
#include "hmprate/certificate.hpp"
#include "hmprate/contraction.hpp"
#include "hmprate/families.hpp"
#include "hmprate/simulate.hpp"
#include "oracles.hpp"

using namespace hmprate;

namespace {

// i.i.d.-state model whose noisy observation reveals the *destination*
// state: h_ij(y) = 0.9 if y == j else 0.1.
HiddenMarkovModel iid_state_destination_model() {
    Eigen::MatrixXd p(2, 2);
    p << 0.5, 0.5, 0.5, 0.5;
    Eigen::MatrixXd h0(2, 2), h1(2, 2);
    h0 << 0.9, 0.1, 0.9, 0.1;
    h1 << 0.1, 0.9, 0.1, 0.9;
    return HiddenMarkovModel::finite(MarkovChain(p), {"0", "1"}, {h0, h1});
}

}  // namespace

// =============================================================================
// Forward / backward steps
// =============================================================================

TEST(ForwardStep, FactorizedStationaryFixedPoint) {
    Eigen::VectorXd s(2);
    s << 0.3, 0.7;
    const auto model = factorized_model(two_state_chain(0.8, 0.6), s);
    const auto step = forward_step(model.stationary(), model.matrix(0));
    EXPECT_NEAR(step.normalizer, 0.3, 1e-14);
    EXPECT_LE((step.belief - model.stationary()).lpNorm<1>(), 1e-14);
}

TEST(ForwardStep, HandComputedUpdate) {
    const auto model = iid_state_destination_model();
    Eigen::VectorXd alpha(2);
    alpha << 0.5, 0.5;
    const auto step = forward_step(alpha, model.matrix(0));
    EXPECT_NEAR(step.normalizer, 0.5, 1e-15);
    EXPECT_NEAR(step.belief(0), 0.9, 1e-15);
    EXPECT_NEAR(step.belief(1), 0.1, 1e-15);
}

TEST(ForwardStep, AlwaysNormalized) {
    const auto model = bsc_state_observation_model(two_state_chain(0.9, 0.5), 0.2);
    CounterRng rng(3, 0);
    Eigen::VectorXd alpha(2);
    for (int trial = 0; trial < 50; ++trial) {
        alpha << rng.uniform() + 0.01, rng.uniform() + 0.01;
        alpha /= alpha.sum();
        for (int y = 0; y < 2; ++y) {
            const auto step = forward_step(alpha, model.matrix(y));
            EXPECT_NEAR(step.belief.sum(), 1.0, 1e-14);
        }
    }
}

TEST(ForwardStep, ImpossibleObservationThrows) {
    const auto model = noiseless_edge_model(two_state_chain(0.7, 0.4));
    Eigen::VectorXd alpha(2);
    alpha << 0.0, 1.0;  // mass only on state 1, but symbol 0 needs edge (0,0)
    EXPECT_THROW(forward_step(alpha, model.matrix(0)), DegenerateBelief);
}

TEST(BackwardStep, FactorizedOnesFixedPoint) {
    Eigen::VectorXd s(2);
    s << 0.4, 0.6;
    const auto model = factorized_model(two_state_chain(0.8, 0.6), s);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(2);
    const auto step = backward_step(ones, model.matrix(1), model.stationary());
    EXPECT_NEAR(step.normalizer, 0.6, 1e-14);
    EXPECT_LE((step.belief - ones).lpNorm<1>(), 1e-13);
}

TEST(BackwardStep, HandComputedUpdate) {
    const auto model = bsc_state_observation_model(two_state_chain(0.9, 0.5), 0.2);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(2);
    const auto& pi = model.stationary();
    const auto step = backward_step(ones, model.matrix(0), pi);
    const Eigen::VectorXd expected_num = model.matrix(0) * ones;
    const double expected_phi = pi.dot(expected_num);
    EXPECT_NEAR(step.normalizer, expected_phi, 1e-15);
    EXPECT_LE((step.belief - expected_num / expected_phi).lpNorm<1>(), 1e-14);
}

TEST(BackwardStep, PiNormPreserved) {
    const auto model = bsc_state_observation_model(two_state_chain(0.8, 0.3), 0.25);
    const auto& pi = model.stationary();
    Eigen::VectorXd beta = Eigen::VectorXd::Ones(2);
    CounterRng rng(4, 0);
    Eigen::VectorXd probs = Eigen::VectorXd::Constant(2, 0.5);
    for (int t = 0; t < 200; ++t) {
        beta = backward_step(beta, model.matrix(rng.categorical(probs)), pi).belief;
        EXPECT_NEAR(pi.dot(beta), 1.0, 1e-13);
    }
}

// =============================================================================
// Path simulation
// =============================================================================

TEST(SimulatePath, ZeroLength) {
    const auto model = bsc_state_observation_model(two_state_chain(0.9, 0.5), 0.2);
    const auto path = simulate_path(model, 0, 42);
    EXPECT_EQ(path.states.size(), 1u);
    EXPECT_TRUE(path.symbols.empty());
}

TEST(SimulatePath, SymmetricStateFrequency) {
    const auto model = bsc_state_observation_model(two_state_chain(0.9, 0.9), 0.2);
    const std::int64_t n = 100000;
    const auto path = simulate_path(model, n, 7);
    double freq0 = 0.0;
    for (int q : path.states) freq0 += q == 0 ? 1.0 : 0.0;
    freq0 /= path.states.size();
    // slowly mixing chain: inflate the binomial se by the correlation time
    // (1+rho)/(1-rho) = 9 in standard-deviation terms ~ 3x
    const double se = oracle::binomial_se(0.5, static_cast<double>(n)) * 3.0;
    EXPECT_NEAR(freq0, 0.5, 3.0 * se);
}

TEST(SimulatePath, EdgeFrequenciesMatchOccupancy) {
    const auto model = bsc_state_observation_model(two_state_chain(0.9, 0.5), 0.2);
    const std::int64_t n = 1000000;
    const auto path = simulate_path(model, n, 11);
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(2, 2);
    for (std::int64_t t = 0; t < n; ++t) counts(path.states[t], path.states[t + 1]) += 1.0;
    counts /= static_cast<double>(n);
    const auto& pi = model.stationary();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const double expected = pi(i) * model.transition()(i, j);
            const double se = oracle::binomial_se(expected, static_cast<double>(n));
            EXPECT_NEAR(counts(i, j), expected, 5.0 * se) << "edge " << i << "->" << j;
        }
}

TEST(SimulatePath, SeedReplayIsBitExact) {
    const auto model = bsc_state_observation_model(two_state_chain(0.8, 0.4), 0.15);
    const auto a = simulate_path(model, 5000, 123, 9);
    const auto b = simulate_path(model, 5000, 123, 9);
    EXPECT_EQ(a.states, b.states);
    EXPECT_EQ(a.symbols, b.symbols);
    const auto c = simulate_path(model, 5000, 124, 9);
    EXPECT_NE(a.symbols, c.symbols);
}

TEST(SimulatePath, ValidEdgesOnly) {
    const auto model = bsc_state_observation_model(rll_chain(0.5), 0.1);
    const auto path = simulate_path(model, 20000, 5);
    for (std::size_t t = 0; t + 1 < path.states.size(); ++t)
        EXPECT_TRUE(model.chain().valid_edge(path.states[t], path.states[t + 1]));
}

// =============================================================================
// psi-product identity and forgetting
// =============================================================================

TEST(PsiProduct, MatchesBlockProbability) {
    const auto model = bsc_state_observation_model(two_state_chain(0.9, 0.5), 0.2);
    const auto path = simulate_path(model, 20, 31);
    Eigen::VectorXd alpha = model.stationary();
    double log_prob = 0.0;
    for (int t = 0; t < 20; ++t) {
        const auto step = forward_step(alpha, model.matrix(path.symbols[t]));
        alpha = step.belief;
        log_prob += std::log(step.normalizer);
    }
    const double direct = block_probability(model.stationary(), model, path.symbols);
    EXPECT_NEAR(std::exp(log_prob) / direct, 1.0, 1e-9);
}

TEST(Forgetting, CertificateBoundOnSimulatedPaths) {
    const auto model = bsc_state_observation_model(rll_chain(0.5), 0.1);
    const auto cert = primitivity_certificate(model);
    ASSERT_TRUE(cert.has_value());
    CounterRng rng(77, 0);
    for (int trial = 0; trial < 25; ++trial) {
        const auto path = simulate_path(model, 64, 1000 + trial);
        Eigen::VectorXd a = model.stationary();
        Eigen::VectorXd b(2);
        b << 0.05 + rng.uniform(), 0.05 + rng.uniform();
        b /= b.sum();
        for (int t = 0; t < 64; ++t) {
            a = forward_step(a, model.matrix(path.symbols[t])).belief;
            b = forward_step(b, model.matrix(path.symbols[t])).belief;
            const int n = t + 1;
            if (n >= 2 * cert->k) {
                const double bound =
                    cert->mixing_constant * std::pow(cert->gamma, n - cert->k);
                EXPECT_LE(hilbert_distance(a, b), bound)
                    << "trial " << trial << " step " << n;
            }
        }
    }
}
