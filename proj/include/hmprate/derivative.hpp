#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hmprate/belief.hpp"
#include "hmprate/certificate.hpp"
#include "hmprate/entropy.hpp"
#include "hmprate/errors.hpp"
#include "hmprate/family.hpp"
#include "hmprate/model.hpp"
#include "hmprate/parallel.hpp"
#include "hmprate/simulate.hpp"
#include "hmprate/util.hpp"

namespace hmprate {

namespace detail {

struct DominantPair {
    double rho = 0.0;
    Eigen::VectorXd left, right;
    double gap = 1.0;  ///< 1 - |lambda_2| / lambda_1 estimate
};

inline Eigen::VectorXd power_iterate(const Eigen::MatrixXd& m, double* rho_out) {
    Eigen::VectorXd v = Eigen::VectorXd::Constant(m.rows(), 1.0 / m.rows());
    double rho = 0.0;
    for (int it = 0; it < 100000; ++it) {
        Eigen::VectorXd w = m * v;
        const double norm = w.norm();
        if (!(norm > 0.0)) throw DegenerateSpectrum("power iteration collapsed");
        w /= norm;
        if ((w - v).norm() < 1e-15 && it > 4) {
            v = w;
            rho = norm;
            break;
        }
        v = w;
        rho = norm;
    }
    if (rho_out) *rho_out = rho;
    return v;
}

inline DominantPair dominant_eigen(const Eigen::MatrixXd& m) {
    DominantPair d;
    d.right = power_iterate(m, &d.rho);
    d.left = power_iterate(m.transpose(), nullptr);
    // second eigenvalue magnitude from deflated power iteration
    const double ab = d.left.dot(d.right);
    Eigen::MatrixXd deflated = m - (d.rho / ab) * (d.right * d.left.transpose());
    Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(m.rows(), 1.0, 2.0).normalized();
    double lambda2 = 0.0;
    for (int it = 0; it < 2000; ++it) {
        Eigen::VectorXd w = deflated * v;
        const double norm = w.norm();
        if (norm < 1e-300) {
            lambda2 = 0.0;
            break;
        }
        lambda2 = norm;
        v = w / norm;
    }
    d.gap = 1.0 - lambda2 / d.rho;
    return d;
}

}  // namespace detail

/// Derivative of the log spectral radius: d/dtheta ln rho(M_theta) =
/// a^T M' b / (a^T M b) with a, b the dominant left/right eigenvectors of M.
/// Requires a real dominant eigenvalue with a spectral gap.
inline double lsr_derivative(const Eigen::MatrixXd& m, const Eigen::MatrixXd& m_prime) {
    if (m.rows() != m.cols() || m.rows() != m_prime.rows() || m.cols() != m_prime.cols())
        throw Error("lsr_derivative needs square matrices of equal size");
    const auto d = detail::dominant_eigen(m);
    if (d.gap < 1e-8)
        throw DegenerateSpectrum("dominant eigenvalue gap below 1e-8");
    const double denom = d.left.dot(m * d.right);
    return d.left.dot(m_prime * d.right) / denom;
}

namespace detail {

/// Shared sample loop: draws count independent (alpha, beta) pairs from the
/// forward/backward stationary laws (streams 2i and 2i+1 of `seed`) and
/// stores fn(alpha, beta, forward_sampler_after_burn_in) per index.
template <typename Fn>
void for_each_belief_pair(const HiddenMarkovModel& model, std::int64_t burn_in,
                          std::int64_t count, std::uint64_t seed, int workers, Fn&& fn) {
    parallel_for(count, workers, [&](std::int64_t idx) {
        PathSampler fwd(model, CounterRng(seed, 2 * static_cast<std::uint64_t>(idx)));
        Eigen::VectorXd alpha = model.stationary();
        for (std::int64_t t = 0; t < burn_in; ++t) {
            const auto e = fwd.advance();
            alpha = model.finite_output()
                        ? forward_step(alpha, model.matrix(e.symbol)).belief
                        : forward_step(alpha, model.matrix_at(e.value)).belief;
        }
        ReversePathSampler bwd(model, CounterRng(seed, 2 * static_cast<std::uint64_t>(idx) + 1));
        Eigen::VectorXd beta = Eigen::VectorXd::Ones(model.num_states());
        const auto& pi = model.stationary();
        for (std::int64_t t = 0; t < burn_in; ++t) {
            const auto e = bwd.retreat();
            beta = model.finite_output()
                       ? backward_step(beta, model.matrix(e.symbol), pi).belief
                       : backward_step(beta, model.matrix_at(e.value), pi).belief;
        }
        fn(idx, alpha, beta, fwd);
    });
}

inline EstimatorResult reduce_samples(const std::vector<double>& x, std::uint64_t seed,
                                      std::int64_t burn_in) {
    EstimatorResult r;
    const std::int64_t n = static_cast<std::int64_t>(x.size());
    detail::BatchMeans acc(n, std::min<std::int64_t>(30, n));
    for (std::int64_t i = 0; i < n; ++i) acc.add(i, x[i]);
    double mean = acc.mean();
    double s2 = 0.0;
    for (double v : x) s2 += (v - mean) * (v - mean);
    r.estimate = mean;
    r.std_error = n > 1 ? std::sqrt(s2 / (n - 1) / n) : 0.0;
    r.n_samples = n;
    r.path_length = burn_in;
    r.seed = {seed, 0};
    r.batch_means = acc.batch_values();
    return r;
}

}  // namespace detail

/// Monte Carlo estimate of dH/dtheta at theta*, averaging
/// -sum_y alpha^T M'(y) beta ln(alpha^T M(y) beta) over independent draws
/// (alpha, beta) from the forward and backward stationary belief laws.
/// For Gaussian outputs the sum over y becomes an expectation over the next
/// output of the alpha path, weighted by 1 / (alpha^T M(y) 1).
inline EstimatorResult entropy_derivative_mc(const ParametrizedFamily& family,
                                             double theta_star, std::int64_t samples,
                                             std::int64_t burn_in, std::uint64_t seed,
                                             int workers = 1) {
    family.require_constant_stationary();
    const HiddenMarkovModel model = family.model_at(theta_star);
    if (burn_in < 0) burn_in = default_burn_in(model);
    if (model.finite_output()) primitivity_certificate(model);  // NotPrimitive gate

    std::vector<double> x(samples);
    if (model.finite_output()) {
        const auto d1 = family.matrix_derivative(theta_star, 1);
        detail::for_each_belief_pair(
            model, burn_in, samples, seed, workers,
            [&](std::int64_t idx, const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
                PathSampler&) {
                double acc = 0.0;
                for (int y = 0; y < model.alphabet_size(); ++y) {
                    const double inner = alpha.dot(model.matrix(y) * beta);
                    acc += alpha.dot(d1[y] * beta) * std::log(inner);
                }
                x[idx] = acc;
            });
    } else {
        detail::for_each_belief_pair(
            model, burn_in, samples, seed, workers,
            [&](std::int64_t idx, const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
                PathSampler& fwd) {
                const auto e = fwd.advance();  // y* drawn from the stationary output law
                const Eigen::MatrixXd m = model.matrix_at(e.value);
                const Eigen::MatrixXd md =
                    family.gaussian_matrix_derivative(theta_star, e.value, 1);
                const double density = (m.transpose() * alpha).sum();
                x[idx] = alpha.dot(md * beta) * std::log(alpha.dot(m * beta)) / density;
            });
    }
    for (double& v : x) v = -v;
    auto r = detail::reduce_samples(x, seed, burn_in);
    return r;
}

struct ResidualItem {
    std::string name;
    double residual = 0.0;
    double std_error = 0.0;
};

struct MeasureCheckReport {
    std::vector<ResidualItem> items;
};

namespace detail {

inline MeasureCheckReport measure_check_impl(const HiddenMarkovModel& model,
                                             const std::vector<Eigen::MatrixXd>* d1,
                                             std::int64_t samples, std::uint64_t seed,
                                             int workers) {
    const std::int64_t burn = default_burn_in(model);
    const int n = model.num_states();
    const auto& pi = model.stationary();
    const auto& p = model.transition();

    Eigen::MatrixXd alphas(samples, n), betas(samples, n);
    std::vector<double> deriv_sum(d1 ? samples : 0);
    detail::for_each_belief_pair(
        model, burn, samples, seed, workers,
        [&](std::int64_t idx, const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
            PathSampler&) {
            alphas.row(idx) = alpha.transpose();
            betas.row(idx) = beta.transpose();
            if (d1) {
                double acc = 0.0;
                for (const auto& m : *d1) acc += alpha.dot(m * beta);
                deriv_sum[idx] = acc;
            }
        });

    MeasureCheckReport report;
    auto vector_item = [&](const std::string& name, const Eigen::MatrixXd& rows,
                           const Eigen::VectorXd& target) {
        Eigen::VectorXd mean = rows.colwise().mean();
        double se = 0.0;
        for (int c = 0; c < n; ++c) {
            const double m = mean(c);
            double s2 = 0.0;
            for (std::int64_t i = 0; i < samples; ++i) s2 += sq(rows(i, c) - m);
            se += std::sqrt(s2 / (samples - 1) / samples);
        }
        report.items.push_back({name, (mean - target).lpNorm<1>(), se});
    };
    vector_item("forward_mean_vs_pi", alphas, pi);
    vector_item("backward_mean_vs_one", betas, Eigen::VectorXd::Ones(n));

    auto scalar_item = [&](const std::string& name, const std::vector<double>& vals,
                           double target) {
        double m = 0.0;
        for (double v : vals) m += v;
        m /= vals.size();
        double s2 = 0.0;
        for (double v : vals) s2 += sq(v - m);
        const double se = vals.size() > 1 ? std::sqrt(s2 / (vals.size() - 1) / vals.size()) : 0.0;
        report.items.push_back({name, std::abs(m - target), se});
    };
    {
        const Eigen::VectorXd beta_fixed = betas.row(0).transpose();
        std::vector<double> vals(samples);
        for (std::int64_t i = 0; i < samples; ++i)
            vals[i] = alphas.row(i).dot((p * beta_fixed).transpose());
        scalar_item("forward_kernel_sum", vals, 1.0);
    }
    {
        const Eigen::VectorXd alpha_fixed = alphas.row(0).transpose();
        std::vector<double> vals(samples);
        for (std::int64_t i = 0; i < samples; ++i)
            vals[i] = alpha_fixed.dot(p * betas.row(i).transpose());
        scalar_item("backward_kernel_sum", vals, 1.0);
    }
    if (d1) scalar_item("derivative_zero_mean", deriv_sum, 0.0);
    return report;
}

}  // namespace detail

/// Monte Carlo residuals of the stationary-belief identities:
/// E[alpha] = pi, E[beta] = 1, E_alpha[alpha^T P beta] = 1 (fixed beta),
/// E_beta[alpha^T P beta] = 1 (fixed alpha). The model-only overload covers
/// these four; the family overload adds E[sum_y alpha^T M'(y) beta] = 0.
inline MeasureCheckReport measure_property_check(const HiddenMarkovModel& model,
                                                 std::int64_t samples, std::uint64_t seed,
                                                 int workers = 1) {
    return detail::measure_check_impl(model, nullptr, samples, seed, workers);
}

inline MeasureCheckReport measure_property_check(const ParametrizedFamily& family, double theta,
                                                 std::int64_t samples, std::uint64_t seed,
                                                 int workers = 1) {
    const HiddenMarkovModel model = family.model_at(theta);
    if (family.gaussian_output()) {
        // integral over y of M'(y) vanishes identically, so the fifth
        // identity holds pointwise; report the four sampled ones plus an
        // exact zero.
        auto report = detail::measure_check_impl(model, nullptr, samples, seed, workers);
        report.items.push_back({"derivative_zero_mean", 0.0, 0.0});
        return report;
    }
    const auto d1 = family.matrix_derivative(theta, 1);
    return detail::measure_check_impl(model, &d1, samples, seed, workers);
}

/// Direction of change of the edge occupancies e_ij = pi(i) p_ij: zero off
/// the valid edges, zero total mass, per-state flow balance, and zero row
/// sums. The last condition keeps the stationary distribution fixed
/// (d pi/dt = Sum_j Delta_ij); the derivative below is only defined on such
/// directions.
struct EdgePerturbation {
    Eigen::MatrixXd delta;
};

inline void validate_perturbation(const HiddenMarkovModel& model, const EdgePerturbation& d) {
    const int n = model.num_states();
    if (d.delta.rows() != n || d.delta.cols() != n)
        throw InvalidPerturbation("delta has wrong dimensions");
    double total = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (!model.chain().valid_edge(i, j) && d.delta(i, j) != 0.0)
                throw InvalidPerturbation("delta must vanish off the valid edges");
            total += d.delta(i, j);
        }
    if (std::abs(total) > 1e-10) throw InvalidPerturbation("delta must have zero total mass");
    for (int i = 0; i < n; ++i) {
        const double balance = d.delta.row(i).sum() - d.delta.col(i).sum();
        if (std::abs(balance) > 1e-10)
            throw InvalidPerturbation("delta must satisfy per-state flow balance");
        if (std::abs(d.delta.row(i).sum()) > 1e-10)
            throw InvalidPerturbation(
                "delta must keep the stationary distribution fixed (zero row sums)");
    }
}

/// Monte Carlo derivative of the entropy rate with respect to the edge
/// occupancies along a pi-preserving direction delta. Moving the occupancies
/// with the kernels fixed moves the transition-observation matrices by
/// M'(y)_ij = (Delta_ij / pi(i)) h_ij(y), so the stationary-measure
/// derivative formula applies with that direction:
///   dH = -E_{alpha, beta}[ sum_y alpha^T M'(y) beta ln(alpha^T M(y) beta) ].
inline EstimatorResult edge_occupancy_entropy_derivative(const HiddenMarkovModel& model,
                                                         const EdgePerturbation& d,
                                                         std::int64_t samples,
                                                         std::int64_t burn_in,
                                                         std::uint64_t seed, int workers = 1) {
    if (!model.finite_output())
        throw Error("edge occupancy derivative requires a finite output alphabet");
    validate_perturbation(model, d);
    primitivity_certificate(model);  // NotPrimitive / Condition-1 gate
    if (burn_in < 0) burn_in = default_burn_in(model);

    const int n = model.num_states();
    const auto& pi = model.stationary();
    std::vector<Eigen::MatrixXd> direction(model.alphabet_size(),
                                           Eigen::MatrixXd::Zero(n, n));
    for (int y = 0; y < model.alphabet_size(); ++y)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (d.delta(i, j) != 0.0)
                    direction[y](i, j) = d.delta(i, j) / pi(i) * model.kernel(i, j, y);

    std::vector<double> x(samples);
    detail::for_each_belief_pair(
        model, burn_in, samples, seed, workers,
        [&](std::int64_t idx, const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
            PathSampler&) {
            double acc = 0.0;
            for (int y = 0; y < model.alphabet_size(); ++y) {
                const double inner = alpha.dot(model.matrix(y) * beta);
                acc += alpha.dot(direction[y] * beta) * std::log(inner);
            }
            x[idx] = -acc;
        });
    return detail::reduce_samples(x, seed, burn_in);
}

}  // namespace hmprate
