#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "hmprate/belief.hpp"
#include "hmprate/certificate.hpp"
#include "hmprate/errors.hpp"
#include "hmprate/model.hpp"
#include "hmprate/parallel.hpp"
#include "hmprate/simulate.hpp"
#include "hmprate/util.hpp"

namespace hmprate {

/// Monte Carlo estimate with a batch-means standard error and the seed
/// record needed to replay it.
struct EstimatorResult {
    double estimate = 0.0;
    double std_error = 0.0;
    std::int64_t n_samples = 0;
    std::int64_t path_length = 0;
    SeedRecord seed;
    std::vector<double> batch_means;
};

struct McOptions {
    std::int64_t burn_in = -1;  ///< -1: certificate default (50 k / eps, else 1000)
    int batches = 30;
    int workers = 1;
};

namespace detail {

/// Batch-means accumulator over a fixed number of contributions.
class BatchMeans {
  public:
    BatchMeans(std::int64_t count, int batches)
        : count_(count), batches_(batches), sums_(batches, 0.0), sizes_(batches, 0) {}

    void add(std::int64_t index, double value) {
        const int b = static_cast<int>(index * batches_ / count_);
        sums_[b] += value;
        sizes_[b] += 1;
        total_ += value;
    }

    double mean() const { return total_ / static_cast<double>(count_); }

    std::vector<double> batch_values() const {
        std::vector<double> v(batches_);
        for (int b = 0; b < batches_; ++b) v[b] = sums_[b] / static_cast<double>(sizes_[b]);
        return v;
    }

    double std_error() const {
        const auto v = batch_values();
        double m = 0.0;
        for (double x : v) m += x;
        m /= v.size();
        double s2 = 0.0;
        for (double x : v) s2 += (x - m) * (x - m);
        s2 /= (v.size() - 1);
        return std::sqrt(s2 / v.size());
    }

  private:
    std::int64_t count_;
    int batches_;
    std::vector<double> sums_;
    std::vector<std::int64_t> sizes_;
    double total_ = 0.0;
};

}  // namespace detail

/// Monte Carlo entropy rate in nats: -(1/n) sum ln psi along one simulated
/// path of length n, after discarding `burn_in` initial steps. The standard
/// error comes from batch means (default 30 batches) since successive psi
/// values are correlated.
inline EstimatorResult entropy_rate_mc(const HiddenMarkovModel& model, std::int64_t n,
                                       std::uint64_t seed, McOptions opts = {}) {
    const std::int64_t burn = opts.burn_in >= 0 ? opts.burn_in : default_burn_in(model);
    if (n < 10 * burn || n <= 0)
        throw PathTooShort("path length must be at least 10x the burn-in (" +
                           std::to_string(10 * burn) + ")");
    const std::int64_t kept = n - burn;
    if (kept < opts.batches) throw PathTooShort("too few steps for batch means");

    PathSampler sampler(model, CounterRng(seed, 0));
    Eigen::VectorXd alpha = model.stationary();
    detail::BatchMeans acc(kept, opts.batches);
    for (std::int64_t t = 0; t < n; ++t) {
        const auto e = sampler.advance();
        const auto step = model.finite_output() ? forward_step(alpha, model.matrix(e.symbol))
                                                : forward_step(alpha, model.matrix_at(e.value));
        alpha = step.belief;
        if (t >= burn) acc.add(t - burn, -std::log(step.normalizer));
    }

    EstimatorResult r;
    r.estimate = acc.mean();
    r.std_error = acc.std_error();
    r.n_samples = kept;
    r.path_length = n;
    r.seed = {seed, 0};
    r.batch_means = acc.batch_values();
    return r;
}

namespace detail {

inline double block_entropy(const HiddenMarkovModel& model, int n) {
    if (n <= 0) return 0.0;
    double h = 0.0;
    std::function<void(int, const Eigen::VectorXd&)> rec = [&](int depth,
                                                               const Eigen::VectorXd& u) {
        if (depth == n) {
            h -= xlogx(u.sum());
            return;
        }
        for (int y = 0; y < model.alphabet_size(); ++y)
            rec(depth + 1, (model.matrix(y).transpose() * u).eval());
    };
    rec(0, model.stationary());
    return h;
}

}  // namespace detail

/// Exact conditional entropy H(Y_n | Y_1^{n-1}) = H(Y_1^n) - H(Y_1^{n-1})
/// by full enumeration of output blocks. Non-increasing in n and an upper
/// bound on the entropy rate. Cost |Y|^n, guarded at 1e7.
inline double entropy_rate_exact(const HiddenMarkovModel& model, int n) {
    if (!model.finite_output())
        throw AlphabetTooLarge("exact enumeration requires a finite output alphabet");
    if (n < 1) throw Error("entropy_rate_exact requires n >= 1");
    if (std::pow(static_cast<double>(model.alphabet_size()), n) > 1e7)
        throw AlphabetTooLarge("|Y|^n exceeds the enumeration guard of 1e7");
    return detail::block_entropy(model, n) - detail::block_entropy(model, n - 1);
}

enum class BeliefDirection { forward, backward };

/// A stationary belief draw paired with the true state at its time index
/// (the Furstenberg coupling).
struct BlackwellSample {
    Eigen::VectorXd belief;
    int state = 0;
};

/// Draws `count` beliefs from the forward (alpha) or backward (beta)
/// stationary law. Each sample runs its own independent path, keyed by
/// (seed, 2*index) for forward and (seed, 2*index + 1) for backward draws,
/// for `burn_in` steps from alpha = pi (resp. beta = 1).
inline std::vector<BlackwellSample> sample_blackwell(const HiddenMarkovModel& model,
                                                     std::int64_t burn_in, std::int64_t count,
                                                     std::uint64_t seed,
                                                     BeliefDirection direction,
                                                     int workers = 1) {
    if (model.finite_output()) {
        auto cert = primitivity_certificate(model);  // throws when Condition 1 fails
        if (burn_in < 0)
            burn_in = static_cast<std::int64_t>(std::ceil(50.0 * cert->k / cert->epsilon));
    } else if (burn_in < 0) {
        burn_in = 1000;
    }

    std::vector<BlackwellSample> out(count);
    if (direction == BeliefDirection::forward) {
        parallel_for(count, workers, [&](std::int64_t i) {
            PathSampler sampler(model, CounterRng(seed, 2 * static_cast<std::uint64_t>(i)));
            Eigen::VectorXd alpha = model.stationary();
            for (std::int64_t t = 0; t < burn_in; ++t) {
                const auto e = sampler.advance();
                alpha = model.finite_output()
                            ? forward_step(alpha, model.matrix(e.symbol)).belief
                            : forward_step(alpha, model.matrix_at(e.value)).belief;
            }
            out[i] = {std::move(alpha), sampler.state()};
        });
    } else {
        parallel_for(count, workers, [&](std::int64_t i) {
            ReversePathSampler sampler(model,
                                       CounterRng(seed, 2 * static_cast<std::uint64_t>(i) + 1));
            Eigen::VectorXd beta = Eigen::VectorXd::Ones(model.num_states());
            const auto& pi = model.stationary();
            for (std::int64_t t = 0; t < burn_in; ++t) {
                const auto e = sampler.retreat();
                beta = model.finite_output()
                           ? backward_step(beta, model.matrix(e.symbol), pi).belief
                           : backward_step(beta, model.matrix_at(e.value), pi).belief;
            }
            out[i] = {std::move(beta), sampler.state()};
        });
    }
    return out;
}

}  // namespace hmprate
