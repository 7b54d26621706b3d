#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "hmprate/belief.hpp"
#include "hmprate/certificate.hpp"
#include "hmprate/circulation.hpp"
#include "hmprate/entropy.hpp"
#include "hmprate/errors.hpp"
#include "hmprate/family.hpp"
#include "hmprate/model.hpp"
#include "hmprate/series.hpp"
#include "hmprate/util.hpp"

namespace hmprate {

/// Finite-alphabet channel with internal state: W(y, s' | x, s).
struct FiniteChannel {
    int num_states = 0;
    int num_inputs = 0;
    int num_outputs = 0;
    std::vector<std::string> output_names;
    std::vector<double> w;  ///< indexed ((s * X + x) * S + s') * Y + y

    double W(int s, int x, int sp, int y) const {
        return w[(static_cast<std::size_t>((s * num_inputs + x) * num_states + sp)) *
                     num_outputs +
                 y];
    }
    double& W(int s, int x, int sp, int y) {
        return w[(static_cast<std::size_t>((s * num_inputs + x) * num_states + sp)) *
                     num_outputs +
                 y];
    }

    static FiniteChannel make(int S, int X, int Y, std::vector<std::string> names = {}) {
        FiniteChannel c;
        c.num_states = S;
        c.num_inputs = X;
        c.num_outputs = Y;
        c.w.assign(static_cast<std::size_t>(S) * X * S * Y, 0.0);
        if (names.empty())
            for (int y = 0; y < Y; ++y) names.push_back(std::to_string(y));
        c.output_names = std::move(names);
        return c;
    }

    /// Checks sum_{y, s'} W(y, s' | x, s) = 1 per (x, s).
    void validate() const {
        for (int s = 0; s < num_states; ++s)
            for (int x = 0; x < num_inputs; ++x) {
                double total = 0.0;
                for (int sp = 0; sp < num_states; ++sp)
                    for (int y = 0; y < num_outputs; ++y) {
                        const double v = W(s, x, sp, y);
                        if (!(v >= 0.0) || !std::isfinite(v))
                            throw ModelValidationError(
                                "W[" + std::to_string(s) + "][" + std::to_string(x) + "]",
                                "entries must be finite and nonnegative");
                        total += v;
                    }
                if (std::abs(total - 1.0) > 1e-12)
                    throw ModelValidationError(
                        "W[" + std::to_string(s) + "][" + std::to_string(x) + "]",
                        "must sum to 1 over (y, s')");
            }
    }
};

/// Intersymbol-interference channel with unit-variance additive Gaussian
/// noise: the state is the last `memory` inputs and the output mean on
/// (state s, input x) is means(s, x).
struct IsiChannel {
    int memory = 1;
    int num_inputs = 2;
    Eigen::MatrixXd means;  ///< X^memory rows, X columns

    int num_states() const { return static_cast<int>(means.rows()); }
    int next_state(int s, int x) const {
        int span = 1;
        for (int k = 0; k < memory; ++k) span *= num_inputs;
        return memory == 0 ? 0 : (s * num_inputs + x) % span;
    }
};

using Channel = std::variant<FiniteChannel, IsiChannel>;

/// Markov input of memory m over the input alphabet: law(u, x) =
/// Pr(X_t = x | context u), contexts u in X^m.
struct MarkovInput {
    int memory = 1;
    int num_inputs = 2;
    Eigen::MatrixXd law;  ///< X^memory rows, X columns

    int num_contexts() const { return static_cast<int>(law.rows()); }
    int next_context(int u, int x) const {
        int span = num_contexts();
        return memory == 0 ? 0 : (u * num_inputs + x) % span;
    }
    void validate() const {
        for (int u = 0; u < num_contexts(); ++u) {
            double total = 0.0;
            for (int x = 0; x < num_inputs; ++x) {
                if (!(law(u, x) >= 0.0) || !std::isfinite(law(u, x)))
                    throw ModelValidationError("input_law[" + std::to_string(u) + "]",
                                               "entries must be finite and nonnegative");
                total += law(u, x);
            }
            if (std::abs(total - 1.0) > 1e-12)
                throw ModelValidationError("input_law[" + std::to_string(u) + "]",
                                           "row must sum to 1");
        }
    }
};

/// Binary symmetric channel with crossover probability eps (stateless).
inline FiniteChannel bsc_channel(double eps) {
    FiniteChannel c = FiniteChannel::make(1, 2, 2, {"0", "1"});
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) c.W(0, x, 0, y) = (y == x) ? 1.0 - eps : eps;
    c.validate();
    return c;
}

/// Memory-1 (0,1)-RLL input: no two consecutive ones.
inline MarkovInput rll_input(double p00) {
    MarkovInput in;
    in.memory = 1;
    in.num_inputs = 2;
    in.law.resize(2, 2);
    in.law << p00, 1.0 - p00, 1.0, 0.0;
    in.validate();
    return in;
}

/// Dicode channel: memory-1 linear ISI with response 1 - D over inputs
/// mapped to +1 / -1, so the noiseless output is x_t - x_{t-1} in {0, +-2}.
inline IsiChannel dicode_channel() {
    IsiChannel c;
    c.memory = 1;
    c.num_inputs = 2;
    c.means.resize(2, 2);
    auto level = [](int x) { return x == 0 ? 1.0 : -1.0; };
    for (int s = 0; s < 2; ++s)
        for (int x = 0; x < 2; ++x) c.means(s, x) = level(x) - level(s);
    return c;
}

/// Result of composing a channel with a Markov input. The joint chain lives
/// on (channel state, input context) pairs, restricted to the unique closed
/// communicating class; the output process is an HMP on that chain.
struct Composition {
    HiddenMarkovModel output;
    std::optional<HiddenMarkovModel> joint;  ///< outputs (x, y); finite channels only
    std::vector<int> state_s, state_u;       ///< composed index -> (s, u)
    MarkovInput input;
    double input_entropy_rate = 0.0;  ///< exact H(X) of the input process
    Eigen::VectorXd input_marginal;   ///< stationary Pr(X = x)
};

namespace detail {

struct ProductSpace {
    int S = 0, U = 0;
    int full = 0;
    int index(int s, int u) const { return s * U + u; }
};

/// Unique closed communicating class of the pattern, as sorted full-space
/// indices. Throws NotPrimitive when the closed class is not unique.
inline std::vector<int> closed_class(const Eigen::MatrixXd& p_full) {
    EdgeList g;
    g.num_nodes = static_cast<int>(p_full.rows());
    for (int i = 0; i < g.num_nodes; ++i)
        for (int j = 0; j < g.num_nodes; ++j)
            if (p_full(i, j) > 0.0) g.edges.emplace_back(i, j);
    const auto comps = strongly_connected_components(g);
    std::vector<int> comp_of(g.num_nodes, -1);
    for (int c = 0; c < static_cast<int>(comps.size()); ++c)
        for (int v : comps[c]) comp_of[v] = c;
    std::vector<int> closed;
    for (int c = 0; c < static_cast<int>(comps.size()); ++c) {
        bool leaves = false;
        for (int v : comps[c])
            for (int j = 0; j < g.num_nodes; ++j)
                if (p_full(v, j) > 0.0 && comp_of[j] != c) leaves = true;
        if (!leaves) {
            if (!closed.empty())
                throw NotPrimitive("composed chain has more than one closed class");
            closed = comps[c];
        }
    }
    if (closed.empty()) throw NotPrimitive("composed chain has no closed class");
    return closed;
}

}  // namespace detail

/// Composes a channel with a Markov input into the output hidden Markov
/// process (and, for finite channels, the joint (x, y) process used for
/// conditional entropies).
inline Composition compose(const Channel& channel, const MarkovInput& input) {
    input.validate();
    const bool finite = std::holds_alternative<FiniteChannel>(channel);
    const int S = finite ? std::get<FiniteChannel>(channel).num_states
                         : std::get<IsiChannel>(channel).num_states();
    const int X = input.num_inputs;
    const int U = input.num_contexts();
    detail::ProductSpace space{S, U, S * U};

    Eigen::MatrixXd p_full = Eigen::MatrixXd::Zero(space.full, space.full);
    if (finite) {
        const auto& ch = std::get<FiniteChannel>(channel);
        ch.validate();
        if (ch.num_inputs != X)
            throw ModelValidationError("input_law", "input alphabet does not match the channel");
        for (int s = 0; s < S; ++s)
            for (int u = 0; u < U; ++u)
                for (int x = 0; x < X; ++x) {
                    const int up = input.next_context(u, x);
                    for (int sp = 0; sp < S; ++sp) {
                        double t = 0.0;
                        for (int y = 0; y < ch.num_outputs; ++y) t += ch.W(s, x, sp, y);
                        p_full(space.index(s, u), space.index(sp, up)) += input.law(u, x) * t;
                    }
                }
    } else {
        const auto& ch = std::get<IsiChannel>(channel);
        if (ch.num_inputs != X)
            throw ModelValidationError("input_law", "input alphabet does not match the channel");
        for (int s = 0; s < S; ++s)
            for (int u = 0; u < U; ++u)
                for (int x = 0; x < X; ++x)
                    p_full(space.index(s, u), space.index(ch.next_state(s, x),
                                                          input.next_context(u, x))) +=
                        input.law(u, x);
    }

    const std::vector<int> keep = detail::closed_class(p_full);
    const int n = static_cast<int>(keep.size());
    std::vector<int> local(space.full, -1);
    for (int k = 0; k < n; ++k) local[keep[k]] = k;

    Eigen::MatrixXd p(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) p(a, b) = p_full(keep[a], keep[b]);
    std::vector<std::string> names;
    std::vector<int> state_s(n), state_u(n);
    for (int k = 0; k < n; ++k) {
        state_s[k] = keep[k] / U;
        state_u[k] = keep[k] % U;
        names.push_back("s" + std::to_string(state_s[k]) + "u" + std::to_string(state_u[k]));
    }

    MarkovChain chain = [&]() -> MarkovChain {
        try {
            return MarkovChain(p, names);
        } catch (const NonPrimitiveChain& err) {
            throw NotPrimitive(std::string("composed chain is not primitive: ") + err.what());
        }
    }();

    std::optional<HiddenMarkovModel> output;
    std::optional<HiddenMarkovModel> joint;
    if (finite) {
        const auto& ch = std::get<FiniteChannel>(channel);
        const int Y = ch.num_outputs;
        std::vector<Eigen::MatrixXd> h(Y, Eigen::MatrixXd::Zero(n, n));
        std::vector<Eigen::MatrixXd> hj(X * Y, Eigen::MatrixXd::Zero(n, n));
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                if (p(a, b) == 0.0) continue;
                const int s = state_s[a], u = state_u[a];
                const int sp = state_s[b], up = state_u[b];
                for (int x = 0; x < X; ++x) {
                    if (input.next_context(u, x) != up || input.law(u, x) == 0.0) continue;
                    for (int y = 0; y < Y; ++y) {
                        const double mass = input.law(u, x) * ch.W(s, x, sp, y);
                        h[y](a, b) += mass / p(a, b);
                        hj[x * Y + y](a, b) += mass / p(a, b);
                    }
                }
            }
        output.emplace(HiddenMarkovModel::finite(chain, ch.output_names, std::move(h)));
        std::vector<std::string> joint_names;
        for (int x = 0; x < X; ++x)
            for (int y = 0; y < Y; ++y)
                joint_names.push_back("x" + std::to_string(x) + ":" + ch.output_names[y]);
        joint.emplace(HiddenMarkovModel::finite(chain, std::move(joint_names), std::move(hj)));
    } else {
        const auto& ch = std::get<IsiChannel>(channel);
        Eigen::MatrixXd means = Eigen::MatrixXd::Zero(n, n);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                if (p(a, b) == 0.0) continue;
                const int s = state_s[a], u = state_u[a];
                for (int x = 0; x < X; ++x)
                    if (ch.next_state(s, x) == state_s[b] &&
                        input.next_context(u, x) == state_u[b] && input.law(u, x) > 0.0)
                        means(a, b) = ch.means(s, x);
            }
        output.emplace(HiddenMarkovModel::gaussian(chain, means));
    }

    Composition comp{std::move(*output), std::move(joint), std::move(state_s),
                     std::move(state_u),  input,            0.0,
                     Eigen::VectorXd()};

    // Exact input statistics under the composed stationary law.
    const auto& pi = comp.output.stationary();
    Eigen::VectorXd pi_u = Eigen::VectorXd::Zero(U);
    for (int k = 0; k < n; ++k) pi_u(comp.state_u[k]) += pi(k);
    comp.input_marginal = Eigen::VectorXd::Zero(X);
    double hx = 0.0;
    for (int u = 0; u < U; ++u)
        for (int x = 0; x < X; ++x) {
            comp.input_marginal(x) += pi_u(u) * input.law(u, x);
            hx -= pi_u(u) * xlogx(input.law(u, x));
        }
    comp.input_entropy_rate = hx;
    return comp;
}

namespace detail {

/// Generative walker over (channel state, input context) with explicit
/// inputs, so the joint and marginal recursions share one path.
class ChannelWalker {
  public:
    ChannelWalker(const Channel& channel, const Composition& comp, CounterRng rng)
        : channel_(&channel), comp_(&comp), rng_(std::move(rng)) {
        const int k = rng_.categorical(comp.output.stationary());
        s_ = comp.state_s[k];
        u_ = comp.state_u[k];
    }

    struct Step {
        int x = 0;
        int y_symbol = -1;
        double y_value = 0.0;
        int context = 0;  ///< context before the step
    };

    Step step() {
        Step st;
        st.context = u_;
        st.x = rng_.categorical(comp_->input.law.row(u_));
        if (std::holds_alternative<FiniteChannel>(*channel_)) {
            const auto& ch = std::get<FiniteChannel>(*channel_);
            // draw (y, s') jointly from W(., . | x, s)
            const double u = rng_.uniform();
            double acc = 0.0;
            int pick_sp = 0, pick_y = 0;
            bool done = false;
            for (int sp = 0; sp < ch.num_states && !done; ++sp)
                for (int y = 0; y < ch.num_outputs && !done; ++y) {
                    const double p = ch.W(s_, st.x, sp, y);
                    if (p <= 0.0) continue;
                    pick_sp = sp;
                    pick_y = y;
                    acc += p;
                    if (u < acc) done = true;
                }
            st.y_symbol = pick_y;
            s_ = pick_sp;
        } else {
            const auto& ch = std::get<IsiChannel>(*channel_);
            st.y_value = ch.means(s_, st.x) + rng_.normal();
            s_ = ch.next_state(s_, st.x);
        }
        u_ = comp_->input.next_context(u_, st.x);
        return st;
    }

  private:
    const Channel* channel_;
    const Composition* comp_;
    CounterRng rng_;
    int s_, u_;
};

/// Closed-form H(Y|X) when available: stateless finite channels give
/// sum_x p_X(x) H(W(.|x)); ISI channels give the unit-variance Gaussian
/// entropy. nullopt otherwise.
inline std::optional<double> conditional_entropy_closed_form(const Channel& channel,
                                                             const Composition& comp) {
    if (std::holds_alternative<IsiChannel>(channel)) return gaussian_entropy_unit_variance();
    const auto& ch = std::get<FiniteChannel>(channel);
    if (ch.num_states != 1) return std::nullopt;
    double h = 0.0;
    for (int x = 0; x < ch.num_inputs; ++x) {
        double hx = 0.0;
        for (int y = 0; y < ch.num_outputs; ++y) hx -= xlogx(ch.W(0, x, 0, y));
        h += comp.input_marginal(x) * hx;
    }
    return h;
}

}  // namespace detail

/// Monte Carlo mutual information rate I = H(Y) - H(Y|X) over one simulated
/// path (common random numbers across the terms). H(Y|X) uses the closed
/// form for stateless or ISI channels; otherwise it is estimated on the same
/// path via the joint process, H(Y|X) = H(X,Y) - H(X) with H(X) exact.
inline EstimatorResult mutual_information_rate_mc(const Channel& channel,
                                                  const MarkovInput& input, std::int64_t n,
                                                  std::uint64_t seed, McOptions opts = {}) {
    const Composition comp = compose(channel, input);
    const std::int64_t burn = opts.burn_in >= 0 ? opts.burn_in : default_burn_in(comp.output);
    if (n < 10 * burn || n <= 0)
        throw PathTooShort("path length must be at least 10x the burn-in (" +
                           std::to_string(10 * burn) + ")");
    const std::int64_t kept = n - burn;
    const auto closed = detail::conditional_entropy_closed_form(channel, comp);
    const bool finite = comp.output.finite_output();
    const int Y = finite ? comp.output.alphabet_size() : 0;

    detail::ChannelWalker walker(channel, comp, CounterRng(seed, 0));
    Eigen::VectorXd alpha_y = comp.output.stationary();
    Eigen::VectorXd alpha_j = comp.output.stationary();
    detail::BatchMeans acc(kept, opts.batches);
    for (std::int64_t t = 0; t < n; ++t) {
        const auto st = walker.step();
        double contrib = 0.0;
        if (finite) {
            const auto step_y = forward_step(alpha_y, comp.output.matrix(st.y_symbol));
            alpha_y = step_y.belief;
            contrib = -std::log(step_y.normalizer);
            if (!closed) {
                const auto step_j =
                    forward_step(alpha_j, comp.joint->matrix(st.x * Y + st.y_symbol));
                alpha_j = step_j.belief;
                contrib += std::log(step_j.normalizer) -
                           std::log(comp.input.law(st.context, st.x));
            }
        } else {
            const auto step_y = forward_step(alpha_y, comp.output.matrix_at(st.y_value));
            alpha_y = step_y.belief;
            contrib = -std::log(step_y.normalizer);
        }
        if (t >= burn) acc.add(t - burn, contrib);
    }

    EstimatorResult r;
    r.estimate = acc.mean() - (closed ? *closed : 0.0);
    r.std_error = acc.std_error();
    r.n_samples = kept;
    r.path_length = n;
    r.seed = {seed, 0};
    r.batch_means = acc.batch_values();
    if (closed)
        for (double& b : r.batch_means) b -= *closed;
    return r;
}

/// Leading mutual-information coefficient of the BSC under the (0,1)-RLL
/// constraint in the high-noise expansion I ~= coef * theta^2 with
/// theta = 1/2 - eps: coef = 8 (1 - p00) / (2 - p00)^2 nats.
inline double rll_bsc_capacity_coefficient(double p00) {
    return 8.0 * (1.0 - p00) / sq(2.0 - p00);
}

/// One-parameter channel family. `at` must keep the transition structure
/// fixed in theta (only the output kernels may move). Optional analytic
/// tables d1/d2 hold entrywise theta-derivatives of W in the same layout.
struct FscFamily {
    std::function<Channel(double)> at;
    std::function<FiniteChannel(double)> d1;  ///< optional, finite channels
    std::function<FiniteChannel(double)> d2;  ///< optional, finite channels
    ThetaInterval domain;
    double theta_star = 0.0;
};

/// BSC family with crossover 1/2 - theta; linear in theta with exact
/// derivative tables. High-noise point theta* = 0.
inline FscFamily bsc_channel_family(ThetaInterval domain = {-0.45, 0.45}) {
    FscFamily f;
    f.at = [](double theta) { return Channel(bsc_channel(0.5 - theta)); };
    f.d1 = [](double) {
        FiniteChannel d = FiniteChannel::make(1, 2, 2);
        for (int x = 0; x < 2; ++x)
            for (int y = 0; y < 2; ++y) d.W(0, x, 0, y) = (y == x) ? 1.0 : -1.0;
        return d;
    };
    f.d2 = [](double) { return FiniteChannel::make(1, 2, 2); };
    f.domain = domain;
    f.theta_star = 0.0;
    return f;
}

/// ISI family with means theta * base.means.
inline FscFamily isi_channel_family(IsiChannel base, ThetaInterval domain = {-10.0, 10.0}) {
    FscFamily f;
    f.at = [base](double theta) {
        IsiChannel c = base;
        c.means = theta * base.means;
        return Channel(c);
    };
    f.domain = domain;
    f.theta_star = 0.0;
    return f;
}

namespace detail {

/// Maps a per-channel derivative table through the composition, producing
/// the composed M'(y) set on the restricted state space.
inline std::vector<Eigen::MatrixXd> compose_derivative(const FiniteChannel& d,
                                                       const Composition& comp) {
    const int n = comp.output.num_states();
    const int Y = d.num_outputs;
    std::vector<Eigen::MatrixXd> out(Y, Eigen::MatrixXd::Zero(n, n));
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const int s = comp.state_s[a], u = comp.state_u[a];
            const int sp = comp.state_s[b], up = comp.state_u[b];
            for (int x = 0; x < comp.input.num_inputs; ++x) {
                if (comp.input.next_context(u, x) != up || comp.input.law(u, x) == 0.0)
                    continue;
                for (int y = 0; y < Y; ++y)
                    out[y](a, b) += comp.input.law(u, x) * d.W(s, x, sp, y);
            }
        }
    return out;
}

/// Composed output family of a channel family at a fixed Markov input.
inline ParametrizedFamily composed_output_family(const FscFamily& fam,
                                                 const MarkovInput& input) {
    const Composition base = compose(fam.at(fam.theta_star), input);
    if (!base.output.finite_output()) {
        // ISI families scale means linearly; recover the slope from theta = 1.
        IsiChannel unit = std::get<IsiChannel>(fam.at(1.0));
        const Composition slope_comp = compose(Channel(unit), input);
        return ParametrizedFamily::gaussian(base.output.chain(), slope_comp.output.means(),
                                            fam.domain, fam.theta_star);
    }
    auto model_fn = [fam, input](double theta) {
        return compose(fam.at(theta), input).output;
    };
    ParametrizedFamily::MatrixSetFn d1 = nullptr, d2 = nullptr;
    if (fam.d1)
        d1 = [fam, input](double theta) {
            const Composition c = compose(fam.at(theta), input);
            return compose_derivative(fam.d1(theta), c);
        };
    if (fam.d2)
        d2 = [fam, input](double theta) {
            const Composition c = compose(fam.at(theta), input);
            return compose_derivative(fam.d2(theta), c);
        };
    return ParametrizedFamily::finite(model_fn, fam.domain, fam.theta_star, d1, d2);
}

struct ConditionalSeries {
    double value = 0.0, d1 = 0.0, d2 = 0.0;
};

/// Series of H(Y|X; theta) at theta*. Stateless finite channels use the
/// exact per-input formulas (with analytic W-derivatives when provided,
/// Richardson differences otherwise); ISI channels are theta-independent.
inline ConditionalSeries conditional_series(const FscFamily& fam, const Composition& comp) {
    if (std::holds_alternative<IsiChannel>(fam.at(fam.theta_star)))
        return {gaussian_entropy_unit_variance(), 0.0, 0.0};
    const FiniteChannel ch = std::get<FiniteChannel>(fam.at(fam.theta_star));
    if (ch.num_states != 1)
        throw Error("conditional entropy series requires a stateless or ISI channel");
    ConditionalSeries out;
    if (fam.d1 && fam.d2) {
        const FiniteChannel dw = fam.d1(fam.theta_star);
        const FiniteChannel d2w = fam.d2(fam.theta_star);
        for (int x = 0; x < ch.num_inputs; ++x) {
            const double px = comp.input_marginal(x);
            for (int y = 0; y < ch.num_outputs; ++y) {
                const double r = ch.W(0, x, 0, y);
                const double rp = dw.W(0, x, 0, y);
                const double rpp = d2w.W(0, x, 0, y);
                out.value -= px * xlogx(r);
                out.d1 -= px * xlogy(rp, r);
                out.d2 -= px * (rp * rp / r + xlogy(rpp, r));
            }
        }
        return out;
    }
    auto cond_at = [&](double theta) {
        const FiniteChannel c = std::get<FiniteChannel>(fam.at(theta));
        double h = 0.0;
        for (int x = 0; x < c.num_inputs; ++x) {
            double hx = 0.0;
            for (int y = 0; y < c.num_outputs; ++y) hx -= xlogx(c.W(0, x, 0, y));
            h += comp.input_marginal(x) * hx;
        }
        return h;
    };
    const double t0 = fam.theta_star;
    const double h = std::min(0.02, (fam.domain.hi - fam.domain.lo) / 10.0);
    auto d1_at = [&](double step) { return (cond_at(t0 + step) - cond_at(t0 - step)) / (2 * step); };
    auto d2_at = [&](double step) {
        return (cond_at(t0 + step) - 2.0 * cond_at(t0) + cond_at(t0 - step)) / (step * step);
    };
    out.value = cond_at(t0);
    out.d1 = (4.0 * d1_at(h / 2) - d1_at(h)) / 3.0;
    out.d2 = (4.0 * d2_at(h / 2) - d2_at(h)) / 3.0;
    return out;
}

}  // namespace detail

/// Second theta-derivative of the mutual information rate at the high-noise
/// point, for a fixed Markov input: c2(output entropy) - c2(conditional
/// entropy). Requires the Markov-m capacity premises C(theta*) = 0 and
/// C'(theta*) = 0, which are verified and otherwise raise NotHighNoise.
inline double capacity_second_derivative(const FscFamily& fam, const MarkovInput& input,
                                         int gh_order = 64) {
    const Composition comp = compose(fam.at(fam.theta_star), input);
    const ParametrizedFamily out_fam = detail::composed_output_family(fam, input);
    const SeriesExpansion out_series = entropy_series(out_fam, gh_order);
    const detail::ConditionalSeries cond = detail::conditional_series(fam, comp);
    if (std::abs(out_series.c0 - cond.value) > 1e-9)
        throw NotHighNoise("mutual information does not vanish at theta*");
    if (std::abs(out_series.c1 - cond.d1) > 1e-10)
        throw NotHighNoise("first derivative of mutual information does not vanish at theta*");
    return out_series.c2 - cond.d2;
}

struct CapacityRow {
    std::string input_id;
    double c2 = 0.0;
    double theta_check = 0.0;
    double quadratic = 0.0;  ///< c2 * (theta_check - theta*)^2 / 2
    double i_mc = 0.0;
    double std_error = 0.0;
};

struct CapacityReport {
    std::vector<CapacityRow> rows;
    int argmax = -1;  ///< row index with the largest c2
};

struct InputGridEntry {
    std::string id;
    MarkovInput input;
};

/// Per-input high-noise expansion of the mutual information with a Monte
/// Carlo cross-check at theta_check.
inline CapacityReport capacity_expansion_report(const FscFamily& fam,
                                                const std::vector<InputGridEntry>& grid,
                                                double theta_check, std::int64_t n,
                                                std::uint64_t seed, McOptions opts = {}) {
    CapacityReport report;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& entry : grid) {
        CapacityRow row;
        row.input_id = entry.id;
        row.c2 = capacity_second_derivative(fam, entry.input);
        row.theta_check = theta_check;
        row.quadratic = 0.5 * row.c2 * sq(theta_check - fam.theta_star);
        const auto mc = mutual_information_rate_mc(fam.at(theta_check), entry.input, n, seed, opts);
        row.i_mc = mc.estimate;
        row.std_error = mc.std_error;
        if (row.c2 > best) {
            best = row.c2;
            report.argmax = static_cast<int>(report.rows.size());
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

/// Edge list and weights of an ISI channel's state graph, for the occupancy
/// optimizer: one edge per (state, input) with weight means(s, x).
inline std::pair<EdgeList, Eigen::VectorXd> isi_state_graph(const IsiChannel& ch) {
    EdgeList g;
    g.num_nodes = ch.num_states();
    std::vector<double> w;
    for (int s = 0; s < ch.num_states(); ++s)
        for (int x = 0; x < ch.num_inputs; ++x) {
            g.edges.emplace_back(s, ch.next_state(s, x));
            w.push_back(ch.means(s, x));
        }
    Eigen::VectorXd weights = Eigen::Map<Eigen::VectorXd>(w.data(), w.size());
    return {g, weights};
}

}  // namespace hmprate
