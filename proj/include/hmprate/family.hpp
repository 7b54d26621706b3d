#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hmprate/errors.hpp"
#include "hmprate/model.hpp"
#include "hmprate/util.hpp"

namespace hmprate {

struct ThetaInterval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double t) const { return t >= lo && t <= hi; }
};

/// One-parameter family of hidden Markov models theta -> M_theta(y), with
/// first and second derivative matrices M'(y), M''(y) either supplied in
/// closed form or obtained by central differences (step 1e-4, re-projected
/// so that sum_y M'(y) 1 = 0 holds exactly).
///
/// The derivative formulas downstream additionally require the stationary
/// distribution to be constant in theta; require_constant_stationary()
/// verifies this on an 11-point grid instead of trusting the caller.
class ParametrizedFamily {
  public:
    using ModelFn = std::function<HiddenMarkovModel(double)>;
    using MatrixSetFn = std::function<std::vector<Eigen::MatrixXd>(double)>;

    static ParametrizedFamily finite(ModelFn model, ThetaInterval domain,
                                     std::optional<double> theta_star = std::nullopt,
                                     MatrixSetFn d1 = nullptr, MatrixSetFn d2 = nullptr,
                                     double fd_step = 1e-4) {
        ParametrizedFamily f;
        f.model_ = std::move(model);
        f.domain_ = domain;
        f.theta_star_ = theta_star;
        f.d1_ = std::move(d1);
        f.d2_ = std::move(d2);
        f.fd_step_ = fd_step;
        return f;
    }

    /// Conditionally Gaussian family: the edge (i, j) emits a unit-variance
    /// Gaussian with mean theta * slope(i, j).
    static ParametrizedFamily gaussian(MarkovChain chain, Eigen::MatrixXd slope,
                                       ThetaInterval domain = {-10.0, 10.0},
                                       double theta_star = 0.0) {
        ParametrizedFamily f;
        f.gaussian_chain_.emplace(std::move(chain));
        f.slope_ = std::move(slope);
        f.domain_ = domain;
        f.theta_star_ = theta_star;
        return f;
    }

    bool gaussian_output() const { return gaussian_chain_.has_value(); }
    const ThetaInterval& domain() const { return domain_; }

    bool has_high_noise_point() const { return theta_star_.has_value(); }
    double theta_star() const {
        if (!theta_star_) throw NotFactorized("family has no designated high-noise point");
        return *theta_star_;
    }

    HiddenMarkovModel model_at(double theta) const {
        if (!domain_.contains(theta))
            throw Error("theta outside the family domain");
        if (gaussian_output())
            return HiddenMarkovModel::gaussian(*gaussian_chain_, theta * slope_);
        return model_(theta);
    }

    const MarkovChain& gaussian_chain() const { return *gaussian_chain_; }
    const Eigen::MatrixXd& gaussian_slope() const { return slope_; }

    /// M'(y) (order 1) or M''(y) (order 2) tables for finite alphabets.
    std::vector<Eigen::MatrixXd> matrix_derivative(double theta, int order) const {
        if (gaussian_output())
            throw Error("finite derivative tables are undefined for Gaussian output");
        if (order == 1 && d1_) return d1_(theta);
        if (order == 2 && d2_) return d2_(theta);
        return finite_difference(theta, order);
    }

    /// Gaussian case: pointwise derivative matrices in theta at output y.
    /// With mean a = theta * s: d/dtheta [p phi(y-a)] = p phi(y-a) s (y-a),
    /// d2/dtheta2 = p phi(y-a) s^2 ((y-a)^2 - 1).
    Eigen::MatrixXd gaussian_matrix_derivative(double theta, double y, int order) const {
        const auto& chain = *gaussian_chain_;
        const int n = chain.num_states();
        Eigen::MatrixXd out(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double p = chain.transition()(i, j);
                if (p == 0.0) {
                    out(i, j) = 0.0;
                    continue;
                }
                const double s = slope_(i, j);
                const double z = y - theta * s;
                const double base = p * std_normal_pdf(z);
                out(i, j) = order == 1 ? base * s * z : base * s * s * (z * z - 1.0);
            }
        return out;
    }

    /// Verifies d pi / d theta = 0 on an 11-point grid over the domain,
    /// tolerance 1e-8 in 1-norm.
    void require_constant_stationary() const {
        if (gaussian_output()) return;  // the chain itself is fixed
        Eigen::VectorXd ref;
        for (int g = 0; g <= 10; ++g) {
            const double theta = domain_.lo + (domain_.hi - domain_.lo) * g / 10.0;
            const Eigen::VectorXd pi = model_(theta).stationary();
            if (g == 0) {
                ref = pi;
            } else if ((pi - ref).lpNorm<1>() > 1e-8) {
                throw PiNotConstant("stationary distribution varies over the theta grid");
            }
        }
    }

  private:
    ParametrizedFamily() = default;

    std::vector<Eigen::MatrixXd> finite_difference(double theta, int order) const {
        const double h = fd_step_;
        if (theta - h < domain_.lo || theta + h > domain_.hi)
            throw Error("finite-difference stencil leaves the family domain");
        const HiddenMarkovModel lo = model_(theta - h);
        const HiddenMarkovModel hi = model_(theta + h);
        const int ny = hi.alphabet_size();
        std::vector<Eigen::MatrixXd> d(ny);
        if (order == 1) {
            for (int y = 0; y < ny; ++y) d[y] = (hi.matrix(y) - lo.matrix(y)) / (2.0 * h);
        } else {
            const HiddenMarkovModel mid = model_(theta);
            for (int y = 0; y < ny; ++y)
                d[y] = (hi.matrix(y) - 2.0 * mid.matrix(y) + lo.matrix(y)) / (h * h);
        }
        project_zero_sum(d, hi.transition());
        return d;
    }

    /// Removes the rounding residual so that sum_y D(y) 1 = 0 exactly,
    /// spreading the per-row excess uniformly over valid entries.
    static void project_zero_sum(std::vector<Eigen::MatrixXd>& d, const Eigen::MatrixXd& p) {
        const int n = static_cast<int>(p.rows());
        const int ny = static_cast<int>(d.size());
        Eigen::MatrixXd total = Eigen::MatrixXd::Zero(n, n);
        for (const auto& m : d) total += m;
        for (int i = 0; i < n; ++i) {
            int valid = 0;
            for (int j = 0; j < n; ++j)
                if (p(i, j) > 0.0) ++valid;
            if (valid == 0) continue;
            const double excess = total.row(i).sum() / (ny * valid);
            for (int y = 0; y < ny; ++y)
                for (int j = 0; j < n; ++j)
                    if (p(i, j) > 0.0) d[y](i, j) -= excess;
        }
    }

    ModelFn model_;
    MatrixSetFn d1_, d2_;
    double fd_step_ = 1e-4;
    ThetaInterval domain_;
    std::optional<double> theta_star_;
    std::optional<MarkovChain> gaussian_chain_;
    Eigen::MatrixXd slope_;
};

}  // namespace hmprate
