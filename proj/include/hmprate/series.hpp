#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "hmprate/errors.hpp"
#include "hmprate/family.hpp"
#include "hmprate/model.hpp"
#include "hmprate/quadrature.hpp"
#include "hmprate/util.hpp"

namespace hmprate {

/// A certified factorization point: M_{theta*}(y) = s(y) P, where the output
/// law s carries no state information. For Gaussian output the factorization
/// means all edge means coincide (common shift).
struct HighNoisePoint {
    double theta_star = 0.0;
    bool gaussian = false;
    Eigen::VectorXd s;           ///< finite case: the scalar output law
    double gaussian_shift = 0.0; ///< gaussian case: the common mean
    double residual = 0.0;       ///< max_y ||M(y) - s(y) P||_inf (finite) or mean spread
};

/// Extracts s(y) = [M(y)]_ij / p_ij per valid edge, cross-checks it over all
/// edges, and certifies residual <= 1e-10. Throws NotFactorized otherwise.
inline HighNoisePoint detect_high_noise_point(const ParametrizedFamily& family,
                                              double theta_star) {
    const HiddenMarkovModel model = family.model_at(theta_star);
    HighNoisePoint hp;
    hp.theta_star = theta_star;
    const auto edges = model.chain().valid_edges();
    if (!model.finite_output()) {
        hp.gaussian = true;
        double mean = 0.0;
        for (const auto& [i, j] : edges) mean += model.means()(i, j);
        mean /= edges.size();
        double spread = 0.0;
        for (const auto& [i, j] : edges)
            spread = std::max(spread, std::abs(model.means()(i, j) - mean));
        hp.gaussian_shift = mean;
        hp.residual = spread;
        if (hp.residual > 1e-10)
            throw NotFactorized("edge means do not coincide at theta*");
        return hp;
    }
    const int ny = model.alphabet_size();
    const auto& p = model.transition();
    hp.s.resize(ny);
    for (int y = 0; y < ny; ++y) {
        const auto& [i0, j0] = edges.front();
        hp.s(y) = model.matrix(y)(i0, j0) / p(i0, j0);
    }
    double residual = 0.0;
    for (int y = 0; y < ny; ++y)
        for (const auto& [i, j] : edges)
            residual = std::max(residual, std::abs(model.matrix(y)(i, j) - hp.s(y) * p(i, j)));
    hp.residual = residual;
    if (residual > 1e-10)
        throw NotFactorized("observation matrices do not factor as s(y) P at theta*");
    return hp;
}

struct SingleLetterDerivatives {
    double value = 0.0;  ///< H(Y) in nats
    double d1 = 0.0;
    double d2 = 0.0;
};

namespace detail {

/// Single-letter entropy and theta-derivatives of a Gaussian-mixture output
/// law f(y) = sum_e w_e phi(y - theta s_e), by Gauss-Hermite quadrature.
inline SingleLetterDerivatives gaussian_single_letter(const MarkovChain& chain,
                                                      const Eigen::MatrixXd& slope,
                                                      double theta, int gh_order) {
    const GaussHermite gh(gh_order);
    const auto edges = chain.valid_edges();
    std::vector<double> w, a, s;
    for (const auto& [i, j] : edges) {
        w.push_back(chain.stationary()(i) * chain.transition()(i, j));
        s.push_back(slope(i, j));
        a.push_back(theta * slope(i, j));
    }
    auto f = [&](double y) {
        double acc = 0.0;
        for (std::size_t e = 0; e < w.size(); ++e) acc += w[e] * std_normal_pdf(y - a[e]);
        return acc;
    };
    auto fp = [&](double y) {
        double acc = 0.0;
        for (std::size_t e = 0; e < w.size(); ++e)
            acc += w[e] * s[e] * (y - a[e]) * std_normal_pdf(y - a[e]);
        return acc;
    };
    SingleLetterDerivatives out;
    double h = 0.0, d1 = 0.0, t1 = 0.0, t2 = 0.0;
    for (std::size_t e = 0; e < w.size(); ++e) {
        h -= w[e] * gh.normal_expectation([&](double z) { return std::log(f(a[e] + z)); });
        d1 -= w[e] * s[e] * gh.normal_expectation([&](double z) { return z * std::log(f(a[e] + z)); });
        t1 += w[e] * s[e] * s[e] *
              gh.normal_expectation([&](double z) { return (z * z - 1.0) * std::log(f(a[e] + z)); });
        t2 += w[e] * s[e] *
              gh.normal_expectation([&](double z) { return z * fp(a[e] + z) / f(a[e] + z); });
    }
    out.value = h;
    out.d1 = d1;
    out.d2 = -t2 - t1;
    return out;
}

}  // namespace detail

/// Single-letter entropy H(Y; theta) with its first two theta-derivatives:
///   H   = -sum_y f(y) ln f(y),            f(y) = pi^T M(y) 1
///   H'  = -sum_y f'(y) ln f(y)
///   H'' = -sum_y f'(y)^2 / f(y) - sum_y f''(y) ln f(y)
/// valid when the stationary distribution is constant in theta (verified).
/// Gaussian outputs use Gauss-Hermite quadrature of the same expressions.
inline SingleLetterDerivatives single_letter_entropy_and_derivatives(
    const ParametrizedFamily& family, double theta, int gh_order = 64) {
    family.require_constant_stationary();
    if (family.gaussian_output())
        return detail::gaussian_single_letter(family.gaussian_chain(), family.gaussian_slope(),
                                              theta, gh_order);
    const HiddenMarkovModel model = family.model_at(theta);
    const auto d1 = family.matrix_derivative(theta, 1);
    const auto d2 = family.matrix_derivative(theta, 2);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(model.num_states());
    const auto& pi = model.stationary();
    SingleLetterDerivatives out;
    for (int y = 0; y < model.alphabet_size(); ++y) {
        const double f = pi.dot(model.matrix(y) * ones);
        const double fp = pi.dot(d1[y] * ones);
        const double fpp = pi.dot(d2[y] * ones);
        out.value -= xlogx(f);
        out.d1 -= xlogy(fp, f);
        out.d2 -= fp * fp / f + xlogy(fpp, f);
    }
    return out;
}

/// Closed-form first and second derivatives of the entropy rate at a
/// certified high-noise point:
///   c1 = -sum_y pi^T M'(y) 1 ln s(y)
///   c2 = -sum_y pi^T M''(y) 1 ln s(y) - sum_y (pi^T M'(y) 1)^2 / (pi^T M(y) 1).
/// Gaussian outputs evaluate the same expressions against the factorized
/// density by quadrature.
inline std::pair<double, double> high_noise_derivatives(const ParametrizedFamily& family,
                                                        int gh_order = 64) {
    const double theta_star = family.theta_star();
    const HighNoisePoint hp = detect_high_noise_point(family, theta_star);
    if (hp.gaussian) {
        const GaussHermite gh(gh_order);
        const auto& chain = family.gaussian_chain();
        const auto& slope = family.gaussian_slope();
        const auto edges = chain.valid_edges();
        double wm = 0.0, wm2 = 0.0;
        for (const auto& [i, j] : edges) {
            const double w = chain.stationary()(i) * chain.transition()(i, j);
            wm += w * slope(i, j);
            wm2 += w * slope(i, j) * slope(i, j);
        }
        auto log_s = [&](double z) { return std::log(std_normal_pdf(z)); };
        const double c1 = -wm * gh.normal_expectation([&](double z) { return z * log_s(z); });
        const double t1 = wm2 * gh.normal_expectation(
                                    [&](double z) { return (z * z - 1.0) * log_s(z); });
        const double t2 = wm * wm * gh.normal_expectation([](double z) { return z * z; });
        return {c1, -t1 - t2};
    }
    const HiddenMarkovModel model = family.model_at(theta_star);
    const auto d1 = family.matrix_derivative(theta_star, 1);
    const auto d2 = family.matrix_derivative(theta_star, 2);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(model.num_states());
    const auto& pi = model.stationary();
    double c1 = 0.0, c2 = 0.0;
    for (int y = 0; y < model.alphabet_size(); ++y) {
        const double fp = pi.dot(d1[y] * ones);
        const double fpp = pi.dot(d2[y] * ones);
        const double f = pi.dot(model.matrix(y) * ones);
        c1 -= xlogy(fp, hp.s(y));
        c2 -= xlogy(fpp, hp.s(y)) + fp * fp / f;
    }
    return {c1, c2};
}

/// Edge-occupancy-weighted variance of the mean parameters:
/// sum_ij e_ij m_ij^2 - (sum_ij e_ij m_ij)^2 with e_ij = pi(i) p_ij. Equals
/// the second theta-derivative of the entropy rate of the conditionally
/// Gaussian model with means theta m_ij at theta = 0.
inline double gaussian_second_derivative(const MarkovChain& chain,
                                         const Eigen::MatrixXd& means) {
    double m1 = 0.0, m2 = 0.0;
    for (const auto& [i, j] : chain.valid_edges()) {
        const double e = chain.stationary()(i) * chain.transition()(i, j);
        m1 += e * means(i, j);
        m2 += e * means(i, j) * means(i, j);
    }
    return m2 - m1 * m1;
}

/// Quadratic high-noise expansion H(theta) ~= c0 + c1 (theta - theta*) +
/// c2 (theta - theta*)^2 / 2.
struct SeriesExpansion {
    double theta_star = 0.0;
    double c0 = 0.0;  ///< H at theta*, the entropy of s(y)
    double c1 = 0.0;
    double c2 = 0.0;
    double predict(double theta) const {
        const double d = theta - theta_star;
        return c0 + c1 * d + 0.5 * c2 * d * d;
    }
};

inline SeriesExpansion entropy_series(const ParametrizedFamily& family, int gh_order = 64) {
    SeriesExpansion se;
    se.theta_star = family.theta_star();
    const HighNoisePoint hp = detect_high_noise_point(family, se.theta_star);
    if (hp.gaussian) {
        se.c0 = gaussian_entropy_unit_variance();
    } else {
        se.c0 = 0.0;
        for (int y = 0; y < hp.s.size(); ++y) se.c0 -= xlogx(hp.s(y));
    }
    const auto [c1, c2] = high_noise_derivatives(family, gh_order);
    se.c1 = c1;
    se.c2 = c2;
    return se;
}

}  // namespace hmprate
