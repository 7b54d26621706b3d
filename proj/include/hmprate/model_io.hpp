#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hmprate/channel.hpp"
#include "hmprate/errors.hpp"
#include "hmprate/families.hpp"
#include "hmprate/family.hpp"
#include "hmprate/model.hpp"

namespace hmprate {

/// Model file layout:
/// {
///   "states": ["a", "b"],
///   "P": [0.9, 0.1, 0.5, 0.5],                       // row-major
///   "alphabet": ["0", "1"],                           // finite output
///   "h": { "a->b": [0.9, 0.1], ... },                 // per valid edge
///   -- or --
///   "gaussian": { "means": [...], "variance": 1.0 },  // row-major means
///   "family": { "theta": 0.2 }                        // optional
/// }
/// The optional family block declares that the file's kernels sit at the
/// given theta of a linear noise family whose factorized point is theta = 0
/// (finite: kernel interpolation toward the single-letter law; Gaussian:
/// mean scaling toward zero).
struct ModelFile {
    HiddenMarkovModel model;
    std::optional<double> family_theta;
};

namespace io_detail {

using nlohmann::json;

inline const json& require(const json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key)) throw ModelValidationError(path.empty() ? key : path + "." + key,
                                                     "missing required field");
    return j.at(key);
}

inline double number_at(const json& j, const std::string& path) {
    if (!j.is_number()) throw ModelValidationError(path, "must be a number");
    return j.get<double>();
}

inline Eigen::MatrixXd row_major_matrix(const json& j, int rows, int cols,
                                        const std::string& path) {
    if (!j.is_array() || static_cast<int>(j.size()) != rows * cols)
        throw ModelValidationError(path, "must be a row-major array of " +
                                             std::to_string(rows * cols) + " numbers");
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int c = 0; c < cols; ++c)
            m(i, c) = number_at(j.at(i * cols + c), path + "[" + std::to_string(i * cols + c) + "]");
    return m;
}

inline std::vector<std::string> string_list(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) throw ModelValidationError(path, "must be a nonempty array");
    std::vector<std::string> out;
    for (const auto& item : j) {
        if (!item.is_string()) throw ModelValidationError(path, "entries must be strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

}  // namespace io_detail

inline ModelFile load_model(const nlohmann::json& j) {
    using io_detail::require;
    const auto states = io_detail::string_list(require(j, "states", ""), "states");
    const int n = static_cast<int>(states.size());
    const Eigen::MatrixXd p = io_detail::row_major_matrix(require(j, "P", ""), n, n, "P");
    MarkovChain chain(p, states);

    std::optional<double> family_theta;
    if (j.contains("family")) {
        const auto& fam = j.at("family");
        family_theta = io_detail::number_at(require(fam, "theta", "family"), "family.theta");
        if (*family_theta == 0.0)
            throw ModelValidationError("family.theta", "must be nonzero");
    }

    if (j.contains("gaussian")) {
        const auto& g = j.at("gaussian");
        const Eigen::MatrixXd means =
            io_detail::row_major_matrix(require(g, "means", "gaussian"), n, n, "gaussian.means");
        const double variance =
            g.contains("variance") ? io_detail::number_at(g.at("variance"), "gaussian.variance")
                                   : 1.0;
        return {HiddenMarkovModel::gaussian(std::move(chain), means, variance), family_theta};
    }

    const auto alphabet = io_detail::string_list(require(j, "alphabet", ""), "alphabet");
    const int ny = static_cast<int>(alphabet.size());
    const auto& h = require(j, "h", "");
    if (!h.is_object()) throw ModelValidationError("h", "must be an object keyed by edges");
    std::vector<Eigen::MatrixXd> kernels(ny, Eigen::MatrixXd::Zero(n, n));
    auto state_index = [&](const std::string& name, const std::string& path) {
        for (int i = 0; i < n; ++i)
            if (states[i] == name) return i;
        throw ModelValidationError(path, "unknown state '" + name + "'");
    };
    for (const auto& [key, dist] : h.items()) {
        const std::string path = "h." + key;
        const auto arrow = key.find("->");
        if (arrow == std::string::npos)
            throw ModelValidationError(path, "edge keys use the form 'from->to'");
        const int i = state_index(key.substr(0, arrow), path);
        const int jdx = state_index(key.substr(arrow + 2), path);
        if (!chain.valid_edge(i, jdx))
            throw ModelValidationError(path, "kernel given for an invalid edge");
        if (!dist.is_array() || static_cast<int>(dist.size()) != ny)
            throw ModelValidationError(path, "must list one probability per alphabet symbol");
        for (int y = 0; y < ny; ++y)
            kernels[y](i, jdx) =
                io_detail::number_at(dist.at(y), path + "[" + std::to_string(y) + "]");
    }
    for (const auto& [i, jdx] : chain.valid_edges()) {
        double total = 0.0;
        for (int y = 0; y < ny; ++y) total += kernels[y](i, jdx);
        if (total == 0.0)
            throw ModelValidationError("h." + states[i] + "->" + states[jdx],
                                       "missing kernel for a valid edge");
    }
    return {HiddenMarkovModel::finite(std::move(chain), alphabet, std::move(kernels)),
            family_theta};
}

inline ModelFile load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ModelValidationError(path, std::string("invalid JSON: ") + e.what());
    }
    return load_model(j);
}

/// Family implied by a model file's family block.
inline ParametrizedFamily family_from_model(const ModelFile& mf) {
    if (!mf.family_theta)
        throw ConfigError("this operation needs a parametrized family; "
                          "add a \"family\": {\"theta\": ...} block to the model file");
    if (mf.model.finite_output()) return linear_noise_family(mf.model, *mf.family_theta);
    return gaussian_mean_family(mf.model.chain(), mf.model.means() / *mf.family_theta);
}

/// Channel file layout:
/// {
///   "channel_states": ["s0"], "inputs": ["0", "1"],
///   "outputs": ["0", "1"],
///   "W": [[[[...]]]],                       // [s][x][s'][y]
///   -- or --
///   "isi_means": { "memory": 1, "means": [[0,-2],[2,0]] },
///   "input_law": [[0.5, 0.5], [1.0, 0.0]],  // X^m rows
///   "family": { "theta": 0.05 }             // optional
/// }
struct ChannelFile {
    Channel channel;
    MarkovInput input;
    std::optional<double> family_theta;
};

inline ChannelFile load_channel(const nlohmann::json& j) {
    using io_detail::require;
    const auto inputs = io_detail::string_list(require(j, "inputs", ""), "inputs");
    const int X = static_cast<int>(inputs.size());

    std::optional<double> family_theta;
    if (j.contains("family")) {
        family_theta = io_detail::number_at(require(j.at("family"), "theta", "family"),
                                            "family.theta");
        if (*family_theta == 0.0)
            throw ModelValidationError("family.theta", "must be nonzero");
    }

    const auto& law_json = require(j, "input_law", "");
    if (!law_json.is_array() || law_json.empty())
        throw ModelValidationError("input_law", "must be a nonempty array of rows");
    const int contexts = static_cast<int>(law_json.size());
    int memory = 0;
    for (int span = 1; span < contexts; span *= X) ++memory;
    {
        int span = 1;
        for (int k = 0; k < memory; ++k) span *= X;
        if (span != contexts)
            throw ModelValidationError("input_law", "row count must be |X|^m for integer m");
    }
    MarkovInput input;
    input.memory = memory;
    input.num_inputs = X;
    input.law.resize(contexts, X);
    for (int u = 0; u < contexts; ++u) {
        const auto& row = law_json.at(u);
        if (!row.is_array() || static_cast<int>(row.size()) != X)
            throw ModelValidationError("input_law[" + std::to_string(u) + "]",
                                       "must list one probability per input");
        for (int x = 0; x < X; ++x)
            input.law(u, x) = io_detail::number_at(
                row.at(x), "input_law[" + std::to_string(u) + "][" + std::to_string(x) + "]");
    }
    input.validate();

    if (j.contains("isi_means")) {
        const auto& isi = j.at("isi_means");
        IsiChannel ch;
        ch.memory = static_cast<int>(io_detail::number_at(require(isi, "memory", "isi_means"),
                                                          "isi_means.memory"));
        ch.num_inputs = X;
        int span = 1;
        for (int k = 0; k < ch.memory; ++k) span *= X;
        const auto& means = require(isi, "means", "isi_means");
        if (!means.is_array() || static_cast<int>(means.size()) != span)
            throw ModelValidationError("isi_means.means", "must list one row per channel state");
        ch.means.resize(span, X);
        for (int s = 0; s < span; ++s) {
            const auto& row = means.at(s);
            if (!row.is_array() || static_cast<int>(row.size()) != X)
                throw ModelValidationError("isi_means.means[" + std::to_string(s) + "]",
                                           "must list one mean per input");
            for (int x = 0; x < X; ++x)
                ch.means(s, x) = io_detail::number_at(
                    row.at(x),
                    "isi_means.means[" + std::to_string(s) + "][" + std::to_string(x) + "]");
        }
        return {Channel(std::move(ch)), std::move(input), family_theta};
    }

    const auto states = io_detail::string_list(require(j, "channel_states", ""), "channel_states");
    const auto outputs = io_detail::string_list(require(j, "outputs", ""), "outputs");
    const int S = static_cast<int>(states.size());
    const int Y = static_cast<int>(outputs.size());
    const auto& w = require(j, "W", "");
    FiniteChannel ch = FiniteChannel::make(S, X, Y, outputs);
    if (!w.is_array() || static_cast<int>(w.size()) != S)
        throw ModelValidationError("W", "must be nested [s][x][s'][y]");
    for (int s = 0; s < S; ++s)
        for (int x = 0; x < X; ++x)
            for (int sp = 0; sp < S; ++sp)
                for (int y = 0; y < Y; ++y) {
                    const std::string path = "W[" + std::to_string(s) + "][" + std::to_string(x) +
                                             "][" + std::to_string(sp) + "][" + std::to_string(y) +
                                             "]";
                    try {
                        ch.W(s, x, sp, y) =
                            io_detail::number_at(w.at(s).at(x).at(sp).at(y), path);
                    } catch (const nlohmann::json::exception&) {
                        throw ModelValidationError(path, "missing entry");
                    }
                }
    ch.validate();
    return {Channel(std::move(ch)), std::move(input), family_theta};
}

inline ChannelFile load_channel_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open channel file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ModelValidationError(path, std::string("invalid JSON: ") + e.what());
    }
    return load_channel(j);
}

/// Family implied by a channel file's family block: finite kernels
/// interpolate linearly toward the uniform output law (factorized at
/// theta = 0, the file's channel at theta = theta_file); ISI means scale
/// linearly in theta.
inline FscFamily family_from_channel(const ChannelFile& cf) {
    if (!cf.family_theta)
        throw ConfigError("this operation needs a channel family; "
                          "add a \"family\": {\"theta\": ...} block to the channel file");
    const double theta_file = *cf.family_theta;
    if (std::holds_alternative<IsiChannel>(cf.channel)) {
        IsiChannel base = std::get<IsiChannel>(cf.channel);
        base.means /= theta_file;
        FscFamily f = isi_channel_family(base);
        return f;
    }
    const FiniteChannel base = std::get<FiniteChannel>(cf.channel);
    const int S = base.num_states, X = base.num_inputs, Y = base.num_outputs;
    // W_theta = T(s'|x,s) [ 1/Y + (theta/theta_file) (r - 1/Y) ]
    FiniteChannel dir = FiniteChannel::make(S, X, Y, base.output_names);
    FiniteChannel uniform = FiniteChannel::make(S, X, Y, base.output_names);
    double lo = -100.0 * std::abs(theta_file), hi = 100.0 * std::abs(theta_file);
    for (int s = 0; s < S; ++s)
        for (int x = 0; x < X; ++x)
            for (int sp = 0; sp < S; ++sp) {
                double t = 0.0;
                for (int y = 0; y < Y; ++y) t += base.W(s, x, sp, y);
                for (int y = 0; y < Y; ++y) {
                    const double u = t / Y;
                    uniform.W(s, x, sp, y) = u;
                    const double d = (base.W(s, x, sp, y) - u) / theta_file;
                    dir.W(s, x, sp, y) = d;
                    if (d > 0.0) lo = std::max(lo, -u / d);
                    if (d < 0.0) hi = std::min(hi, u / -d);
                }
            }
    FscFamily f;
    f.domain = {0.98 * lo, 0.98 * hi};
    f.theta_star = 0.0;
    f.at = [uniform, dir, S, X, Y](double theta) {
        FiniteChannel c = uniform;
        for (std::size_t k = 0; k < c.w.size(); ++k) c.w[k] += theta * dir.w[k];
        return Channel(std::move(c));
    };
    f.d1 = [dir](double) { return dir; };
    f.d2 = [S, X, Y, names = base.output_names](double) {
        return FiniteChannel::make(S, X, Y, names);
    };
    return f;
}

}  // namespace hmprate
