#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "hmprate/model.hpp"
#include "hmprate/rng.hpp"

namespace hmprate {

struct SeedRecord {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

/// A simulated trajectory: states q_1..q_{n+1} and outputs y_1..y_n
/// (symbol indices for finite alphabets, reals for Gaussian outputs).
/// Replaying the seed record reproduces the path bit-exactly.
struct SamplePath {
    std::vector<int> states;
    std::vector<int> symbols;
    std::vector<double> values;
    SeedRecord seed;
};

/// Generative sampler for the stationary chain: draws q_1 from pi and then
/// transitions and per-edge outputs one step at a time.
class PathSampler {
  public:
    PathSampler(const HiddenMarkovModel& model, CounterRng rng)
        : model_(&model), rng_(std::move(rng)) {
        state_ = rng_.categorical(model.stationary());
    }

    int state() const { return state_; }

    struct Emission {
        int symbol = -1;
        double value = 0.0;
    };

    /// Samples the next transition and its output; advances the state.
    Emission advance() {
        const int i = state_;
        const int j = rng_.categorical(model_->transition().row(i));
        Emission e;
        if (model_->finite_output()) {
            e.symbol = sample_kernel(i, j);
        } else {
            e.value = model_->means()(i, j) + rng_.normal();
        }
        state_ = j;
        return e;
    }

  private:
    int sample_kernel(int i, int j) {
        const double u = rng_.uniform();
        double acc = 0.0;
        int last = 0;
        for (int y = 0; y < model_->alphabet_size(); ++y) {
            const double p = model_->kernel(i, j, y);
            if (p <= 0.0) continue;
            last = y;
            acc += p;
            if (u < acc) return y;
        }
        return last;
    }

    const HiddenMarkovModel* model_;
    CounterRng rng_;
    int state_;
};

/// Time-reversed sampler: draws q from pi and walks backwards with
/// Pr(Q_{t-1} = i | Q_t = j) = p_ij pi(i) / pi(j), emitting the output of
/// the traversed edge (i -> current).
class ReversePathSampler {
  public:
    ReversePathSampler(const HiddenMarkovModel& model, CounterRng rng)
        : model_(&model), rng_(std::move(rng)) {
        const int n = model.num_states();
        const auto& p = model.transition();
        const auto& pi = model.stationary();
        reversed_.resize(n, n);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) reversed_(j, i) = p(i, j) * pi(i) / pi(j);
        state_ = rng_.categorical(pi);
    }

    int state() const { return state_; }

    PathSampler::Emission retreat() {
        const int j = state_;
        const int i = rng_.categorical(reversed_.row(j));
        PathSampler::Emission e;
        if (model_->finite_output()) {
            e.symbol = sample_kernel(i, j);
        } else {
            e.value = model_->means()(i, j) + rng_.normal();
        }
        state_ = i;
        return e;
    }

  private:
    int sample_kernel(int i, int j) {
        const double u = rng_.uniform();
        double acc = 0.0;
        int last = 0;
        for (int y = 0; y < model_->alphabet_size(); ++y) {
            const double p = model_->kernel(i, j, y);
            if (p <= 0.0) continue;
            last = y;
            acc += p;
            if (u < acc) return y;
        }
        return last;
    }

    const HiddenMarkovModel* model_;
    CounterRng rng_;
    Eigen::MatrixXd reversed_;
    int state_;
};

inline SamplePath simulate_path(const HiddenMarkovModel& model, std::int64_t n,
                                std::uint64_t seed, std::uint64_t stream = 0) {
    SamplePath path;
    path.seed = {seed, stream};
    PathSampler sampler(model, CounterRng(seed, stream));
    path.states.reserve(n + 1);
    path.states.push_back(sampler.state());
    if (model.finite_output())
        path.symbols.reserve(n);
    else
        path.values.reserve(n);
    for (std::int64_t t = 0; t < n; ++t) {
        auto e = sampler.advance();
        if (model.finite_output())
            path.symbols.push_back(e.symbol);
        else
            path.values.push_back(e.value);
        path.states.push_back(sampler.state());
    }
    return path;
}

}  // namespace hmprate
