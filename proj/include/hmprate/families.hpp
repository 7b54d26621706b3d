#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hmprate/family.hpp"
#include "hmprate/model.hpp"
#include "hmprate/rng.hpp"

namespace hmprate {

inline MarkovChain two_state_chain(double p00, double p11) {
    Eigen::MatrixXd p(2, 2);
    p << p00, 1.0 - p00, 1.0 - p11, p11;
    return MarkovChain(p);
}

/// (0,1) run-length limited chain: state 1 cannot repeat.
inline MarkovChain rll_chain(double p00) { return two_state_chain(p00, 0.0); }

/// Binary observation of the source state of a two-state chain through a
/// symmetric error channel: h_ij(y) = 1-eps if y == i, else eps.
inline HiddenMarkovModel bsc_state_observation_model(const MarkovChain& chain, double eps) {
    if (chain.num_states() != 2) throw Error("state observation model needs two states");
    Eigen::MatrixXd h0(2, 2), h1(2, 2);
    h0 << 1.0 - eps, 1.0 - eps, eps, eps;
    h1 << eps, eps, 1.0 - eps, 1.0 - eps;
    auto mask = [&](Eigen::MatrixXd m) {
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                if (!chain.valid_edge(i, j)) m(i, j) = 0.0;
        return m;
    };
    return HiddenMarkovModel::finite(chain, {"0", "1"}, {mask(h0), mask(h1)});
}

/// Fully factorized model M(y) = s(y) P: outputs carry no state information.
inline HiddenMarkovModel factorized_model(const MarkovChain& chain, const Eigen::VectorXd& s,
                                          std::vector<std::string> alphabet = {}) {
    const int n = chain.num_states();
    const int ny = static_cast<int>(s.size());
    if (alphabet.empty())
        for (int y = 0; y < ny; ++y) alphabet.push_back(std::to_string(y));
    std::vector<Eigen::MatrixXd> kernels(ny);
    for (int y = 0; y < ny; ++y) {
        kernels[y] = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (chain.valid_edge(i, j)) kernels[y](i, j) = s(y);
    }
    return HiddenMarkovModel::finite(chain, std::move(alphabet), std::move(kernels));
}

/// Noiseless observation: each valid edge emits its own distinct symbol.
inline HiddenMarkovModel noiseless_edge_model(const MarkovChain& chain) {
    const int n = chain.num_states();
    const auto edges = chain.valid_edges();
    const int ny = static_cast<int>(edges.size());
    std::vector<std::string> alphabet;
    std::vector<Eigen::MatrixXd> kernels(ny, Eigen::MatrixXd::Zero(n, n));
    for (int y = 0; y < ny; ++y) {
        alphabet.push_back("e" + std::to_string(edges[y].first) + std::to_string(edges[y].second));
        kernels[y](edges[y].first, edges[y].second) = 1.0;
    }
    return HiddenMarkovModel::finite(chain, std::move(alphabet), std::move(kernels));
}

/// Two-state Markov source observed through a binary symmetric channel with
/// crossover 1/2 - theta. M_theta(0) = P/2 + theta B, M_theta(1) = P/2 - theta B
/// with B = [[p00, -p01], [p10, -p11]]; linear in theta, so the derivative
/// tables are exact. High-noise point theta* = 0.
inline ParametrizedFamily bsc_markov_family(double p00, double p11,
                                            ThetaInterval domain = {-0.45, 0.45}) {
    MarkovChain chain = two_state_chain(p00, p11);
    Eigen::MatrixXd b(2, 2);
    b << p00, -(1.0 - p00), 1.0 - p11, -p11;
    const Eigen::MatrixXd p = chain.transition();
    auto model = [chain, b, p](double theta) {
        Eigen::MatrixXd m0 = 0.5 * p + theta * b;
        Eigen::MatrixXd m1 = 0.5 * p - theta * b;
        Eigen::MatrixXd h0(2, 2), h1(2, 2);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                h0(i, j) = p(i, j) > 0.0 ? m0(i, j) / p(i, j) : 0.0;
                h1(i, j) = p(i, j) > 0.0 ? m1(i, j) / p(i, j) : 0.0;
            }
        return HiddenMarkovModel::finite(chain, {"0", "1"}, {h0, h1});
    };
    auto d1 = [b](double) { return std::vector<Eigen::MatrixXd>{b, -b}; };
    auto d2 = [](double) {
        return std::vector<Eigen::MatrixXd>{Eigen::MatrixXd::Zero(2, 2),
                                            Eigen::MatrixXd::Zero(2, 2)};
    };
    return ParametrizedFamily::finite(model, domain, 0.0, d1, d2);
}

/// Conditionally Gaussian family with means theta * slope(i, j).
inline ParametrizedFamily gaussian_mean_family(MarkovChain chain, Eigen::MatrixXd slope,
                                               ThetaInterval domain = {-10.0, 10.0}) {
    return ParametrizedFamily::gaussian(std::move(chain), std::move(slope), domain, 0.0);
}

/// Linear family through an arbitrary finite model: M_theta(y) =
/// s(y) P + theta D(y) with s(y) the single-letter output law of the base
/// model and D(y) = (M_base(y) - s(y) P) / theta_base, so the base model
/// sits at theta = theta_base and the factorized point at theta = 0.
/// The domain is the largest symmetric-ish interval keeping all kernels
/// nonnegative, shrunk by 2%.
inline ParametrizedFamily linear_noise_family(const HiddenMarkovModel& base,
                                              double theta_base) {
    if (!base.finite_output()) throw Error("linear_noise_family requires finite output");
    if (theta_base == 0.0) throw ModelValidationError("family.theta", "must be nonzero");
    const MarkovChain chain = base.chain();
    const Eigen::MatrixXd p = chain.transition();
    const int ny = base.alphabet_size();
    const int n = chain.num_states();
    Eigen::VectorXd s(ny);
    for (int y = 0; y < ny; ++y) s(y) = base.stationary().dot(base.matrix(y) * Eigen::VectorXd::Ones(n));
    for (int y = 0; y < ny; ++y)
        if (!(s(y) > 0.0))
            throw ModelValidationError("alphabet[" + std::to_string(y) + "]",
                                       "symbol has zero probability under the base model");
    auto dir = std::make_shared<std::vector<Eigen::MatrixXd>>();
    double lo = -100.0 * std::abs(theta_base), hi = 100.0 * std::abs(theta_base);
    for (int y = 0; y < ny; ++y) {
        Eigen::MatrixXd d = (base.matrix(y) - s(y) * p) / theta_base;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (p(i, j) == 0.0) {
                    d(i, j) = 0.0;
                    continue;
                }
                const double m0 = s(y) * p(i, j);
                if (d(i, j) > 0.0) lo = std::max(lo, -m0 / d(i, j));
                if (d(i, j) < 0.0) hi = std::min(hi, m0 / -d(i, j));
            }
        dir->push_back(std::move(d));
    }
    const ThetaInterval domain{0.98 * lo, 0.98 * hi};
    std::vector<std::string> alphabet = base.alphabet();
    auto model = [chain, p, s, dir, alphabet](double theta) {
        std::vector<Eigen::MatrixXd> kernels;
        kernels.reserve(dir->size());
        for (int y = 0; y < static_cast<int>(dir->size()); ++y) {
            Eigen::MatrixXd h = Eigen::MatrixXd::Zero(p.rows(), p.cols());
            for (int i = 0; i < p.rows(); ++i)
                for (int j = 0; j < p.cols(); ++j)
                    if (p(i, j) > 0.0) h(i, j) = s(y) + theta * (*dir)[y](i, j) / p(i, j);
            kernels.push_back(std::move(h));
        }
        return HiddenMarkovModel::finite(chain, alphabet, std::move(kernels));
    };
    auto d1 = [dir](double) { return *dir; };
    auto d2 = [ny, n](double) {
        return std::vector<Eigen::MatrixXd>(ny, Eigen::MatrixXd::Zero(n, n));
    };
    return ParametrizedFamily::finite(model, domain, 0.0, d1, d2);
}

/// Random family factorized at theta = 0: M_theta(y) = s(y) P + theta B(y)
/// (+ theta^2/2 C(y) when `with_quadratic`), with sum_y B(y) = sum_y C(y) = 0
/// so the chain, and hence pi, stays fixed. Used to exercise the closed-form
/// derivative identities on generic instances.
inline ParametrizedFamily random_factorized_family(int states, int symbols, CounterRng& rng,
                                                   bool with_quadratic) {
    Eigen::MatrixXd p(states, states);
    for (int i = 0; i < states; ++i) {
        double row = 0.0;
        for (int j = 0; j < states; ++j) {
            p(i, j) = 0.2 + 0.8 * rng.uniform();
            row += p(i, j);
        }
        p.row(i) /= row;
    }
    MarkovChain chain(p);
    Eigen::VectorXd s(symbols);
    double total = 0.0;
    for (int y = 0; y < symbols; ++y) {
        s(y) = 0.2 + 0.8 * rng.uniform();
        total += s(y);
    }
    s /= total;

    auto centered_set = [&](double scale) {
        std::vector<Eigen::MatrixXd> g(symbols, Eigen::MatrixXd::Zero(states, states));
        for (int y = 0; y < symbols; ++y)
            for (int i = 0; i < states; ++i)
                for (int j = 0; j < states; ++j)
                    g[y](i, j) = scale * (2.0 * rng.uniform() - 1.0) * s(y) * p(i, j);
        Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(states, states);
        for (const auto& m : g) mean += m;
        mean /= symbols;
        for (auto& m : g) m -= mean;
        return g;
    };
    auto b = std::make_shared<std::vector<Eigen::MatrixXd>>(centered_set(0.25));
    auto c = std::make_shared<std::vector<Eigen::MatrixXd>>(
        with_quadratic ? centered_set(0.15)
                       : std::vector<Eigen::MatrixXd>(symbols,
                                                      Eigen::MatrixXd::Zero(states, states)));

    double theta_max = 1.0;
    for (int pass = 0; pass < 3; ++pass) {
        double t = theta_max;
        theta_max = 1.0;
        for (int y = 0; y < symbols; ++y)
            for (int i = 0; i < states; ++i)
                for (int j = 0; j < states; ++j) {
                    const double m0 = s(y) * p(i, j);
                    const double denom = std::abs((*b)[y](i, j)) + 0.5 * t * std::abs((*c)[y](i, j));
                    if (denom > 0.0) theta_max = std::min(theta_max, m0 / denom);
                }
    }
    const ThetaInterval domain{-0.9 * theta_max, 0.9 * theta_max};
    std::vector<std::string> alphabet;
    for (int y = 0; y < symbols; ++y) alphabet.push_back(std::to_string(y));
    auto model = [chain, p, s, b, c, states, symbols, alphabet](double theta) {
        std::vector<Eigen::MatrixXd> kernels;
        kernels.reserve(symbols);
        for (int y = 0; y < symbols; ++y) {
            Eigen::MatrixXd h = Eigen::MatrixXd::Zero(states, states);
            for (int i = 0; i < states; ++i)
                for (int j = 0; j < states; ++j)
                    if (p(i, j) > 0.0)
                        h(i, j) = s(y) + (theta * (*b)[y](i, j) +
                                          0.5 * theta * theta * (*c)[y](i, j)) /
                                             p(i, j);
            kernels.push_back(std::move(h));
        }
        return HiddenMarkovModel::finite(chain, alphabet, std::move(kernels));
    };
    auto d1 = [b, c](double theta) {
        std::vector<Eigen::MatrixXd> d;
        d.reserve(b->size());
        for (std::size_t y = 0; y < b->size(); ++y) d.push_back((*b)[y] + theta * (*c)[y]);
        return d;
    };
    auto d2 = [c](double) { return *c; };
    return ParametrizedFamily::finite(model, domain, 0.0, d1, d2);
}

}  // namespace hmprate
