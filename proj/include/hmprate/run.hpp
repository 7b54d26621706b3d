#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "hmprate/belief.hpp"
#include "hmprate/channel.hpp"
#include "hmprate/contraction.hpp"
#include "hmprate/derivative.hpp"
#include "hmprate/entropy.hpp"
#include "hmprate/errors.hpp"
#include "hmprate/model_io.hpp"
#include "hmprate/series.hpp"
#include "hmprate/simulate.hpp"
#include "hmprate/version.hpp"

namespace hmprate {

struct GridSpec {
    double start = 0.0, stop = 0.0, step = 0.0;

    std::vector<double> values() const {
        if (step <= 0.0) throw ConfigError("grid step must be positive");
        std::vector<double> v;
        for (double x = start; x <= stop + 1e-12; x += step) v.push_back(x);
        if (v.empty()) throw ConfigError("grid is empty");
        return v;
    }

    static GridSpec parse(const std::string& text) {
        GridSpec g;
        const auto a = text.find(':');
        const auto b = text.find(':', a == std::string::npos ? a : a + 1);
        if (a == std::string::npos || b == std::string::npos)
            throw ConfigError("grid must have the form start:stop:step");
        try {
            g.start = std::stod(text.substr(0, a));
            g.stop = std::stod(text.substr(a + 1, b - a - 1));
            g.step = std::stod(text.substr(b + 1));
        } catch (const std::exception&) {
            throw ConfigError("grid must contain numbers: " + text);
        }
        return g;
    }
};

struct ExperimentConfig {
    std::string operation;  ///< entropy | entropy-exact | deriv | series |
                            ///< capacity-expansion | isi-optimize | check
    std::string model_path;
    std::string channel_path;
    std::string delta_path;  ///< deriv --mode edge: JSON {"delta": row-major}
    std::string mode = "observation";
    std::optional<double> theta;
    std::optional<GridSpec> theta_grid;
    std::optional<GridSpec> input_grid;  ///< capacity-expansion: grid over p00
    std::int64_t n = 0;
    std::int64_t samples = 0;
    std::int64_t burn_in = -1;
    std::optional<std::uint64_t> seed;
    int workers = 1;
    std::string out_path = "-";
    std::string format = "csv";
    bool bits = false;
};

/// Tabular result. Cells are numbers or strings; `entropy_valued` marks the
/// columns that the --bits flag rescales by 1/ln 2.
struct ResultRecord {
    std::string operation;
    std::vector<std::string> comments;  ///< inputs echo, schema notes
    std::vector<std::string> columns;
    std::vector<bool> entropy_valued;
    using Cell = std::variant<double, std::string>;
    std::vector<std::vector<Cell>> rows;
    std::uint64_t seed = 0;
    std::string version = kVersion;
    double wall_ms = 0.0;  ///< not serialized; byte-identical reruns stay byte-identical
};

namespace detail {

inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace detail

inline void write_record(const ResultRecord& r, std::ostream& os, const std::string& format,
                         bool bits) {
    const double scale = bits ? 1.0 / std::log(2.0) : 1.0;
    auto cell_value = [&](const ResultRecord::Cell& c, std::size_t col) -> ResultRecord::Cell {
        if (std::holds_alternative<double>(c) && bits && r.entropy_valued[col])
            return std::get<double>(c) * scale;
        return c;
    };
    if (format == "json") {
        nlohmann::json j;
        j["schema"] = 1;
        j["version"] = r.version;
        j["operation"] = r.operation;
        j["seed"] = r.seed;
        j["units"] = bits ? "bits" : "nats";
        j["columns"] = r.columns;
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& row : r.rows) {
            nlohmann::json jr = nlohmann::json::array();
            for (std::size_t c = 0; c < row.size(); ++c) {
                const auto v = cell_value(row[c], c);
                if (std::holds_alternative<double>(v))
                    jr.push_back(std::get<double>(v));
                else
                    jr.push_back(std::get<std::string>(v));
            }
            rows.push_back(std::move(jr));
        }
        j["rows"] = std::move(rows);
        os << j.dump(2) << "\n";
        return;
    }
    os << "# hmprate " << r.version << " csv-schema 1\n";
    os << "# operation=" << r.operation << " seed=" << r.seed
       << " units=" << (bits ? "bits" : "nats") << "\n";
    for (const auto& c : r.comments) os << "# " << c << "\n";
    for (std::size_t c = 0; c < r.columns.size(); ++c)
        os << r.columns[c] << (c + 1 < r.columns.size() ? "," : "\n");
    for (const auto& row : r.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            const auto v = cell_value(row[c], c);
            if (std::holds_alternative<double>(v))
                os << detail::format_double(std::get<double>(v));
            else
                os << std::get<std::string>(v);
            os << (c + 1 < row.size() ? "," : "\n");
        }
    }
}

/// Pass/fail report of the model invariant suite run by `check`.
struct CheckReport {
    struct Item {
        std::string group;
        std::string name;
        double residual = 0.0;
        double threshold = 0.0;
        bool pass = false;
    };
    std::vector<Item> items;
    bool all_pass = true;

    void add(const std::string& group, const std::string& name, double residual,
             double threshold) {
        const bool ok = residual <= threshold;
        items.push_back({group, name, residual, threshold, ok});
        all_pass = all_pass && ok;
    }
};

/// Runs the contraction, normalization, stationary-measure and forgetting
/// property groups against a model with fixed internal seeds.
inline CheckReport check_model(const HiddenMarkovModel& model, std::uint64_t seed) {
    CheckReport report;

    {  // Birkhoff contraction on random positive matrices
        CounterRng rng(seed, 1);
        double worst = 0.0;
        for (int trial = 0; trial < 1000; ++trial) {
            Eigen::MatrixXd m(3, 3);
            Eigen::VectorXd u(3), v(3);
            for (int i = 0; i < 3; ++i) {
                u(i) = 0.1 + rng.uniform();
                v(i) = 0.1 + rng.uniform();
                for (int j = 0; j < 3; ++j) m(i, j) = 0.05 + rng.uniform();
            }
            const double lhs = hilbert_distance(m.transpose() * u, m.transpose() * v);
            const double rhs = birkhoff_coefficients(m).tau * hilbert_distance(u, v);
            worst = std::max(worst, lhs - rhs);
        }
        report.add("contraction", "birkhoff_inequality", worst, 1e-12);
    }

    std::optional<PrimitivityCertificate> cert;
    if (model.finite_output()) {
        cert = primitivity_certificate(model);
        report.add("contraction", "certificate_pi_bound",
                   cert->k * cert->epsilon - model.stationary().minCoeff(), 0.0);
    }

    {  // forward/backward normalization and the psi-product identity
        const int n_steps = 2000;
        const SamplePath path = simulate_path(model, n_steps, seed, 7);
        Eigen::VectorXd alpha = model.stationary();
        Eigen::VectorXd beta = Eigen::VectorXd::Ones(model.num_states());
        double worst_a = 0.0, worst_b = 0.0;
        for (int t = 0; t < n_steps; ++t) {
            const Eigen::MatrixXd m = model.finite_output() ? model.matrix(path.symbols[t])
                                                            : model.matrix_at(path.values[t]);
            alpha = forward_step(alpha, m).belief;
            beta = backward_step(beta, m, model.stationary()).belief;
            worst_a = std::max(worst_a, std::abs(alpha.sum() - 1.0));
            worst_b = std::max(worst_b, std::abs(model.stationary().dot(beta) - 1.0));
        }
        report.add("normalization", "forward_simplex", worst_a, 1e-10);
        report.add("normalization", "backward_pi_norm", worst_b, 1e-10);
        if (model.finite_output()) {
            std::vector<int> prefix(path.symbols.begin(), path.symbols.begin() + 12);
            Eigen::VectorXd a = model.stationary();
            double log_prob = 0.0;
            for (int t = 0; t < 12; ++t) {
                const auto st = forward_step(a, model.matrix(prefix[t]));
                a = st.belief;
                log_prob += std::log(st.normalizer);
            }
            const double direct = block_probability(model.stationary(), model, prefix);
            report.add("normalization", "psi_product_identity",
                       std::abs(std::exp(log_prob) - direct) / direct, 1e-9);
        }
    }

    {  // stationary-measure identities
        const auto mc = measure_property_check(model, 10000, seed, 1);
        for (const auto& item : mc.items)
            report.add("measure", item.name, item.residual,
                       std::max(3.0 * item.std_error, 1e-12));
    }

    if (cert) {  // forgetting with certificate constants
        const double gamma = cert->gamma;
        const double c = cert->mixing_constant;
        CounterRng rng(seed, 9);
        double worst = -1.0;
        for (int trial = 0; trial < 20; ++trial) {
            const SamplePath path = simulate_path(model, 64 * cert->k, seed, 100 + trial);
            Eigen::VectorXd a1 = model.stationary();
            Eigen::VectorXd a2(model.num_states());
            for (int i = 0; i < model.num_states(); ++i) a2(i) = 0.05 + rng.uniform();
            a2 /= a2.sum();
            for (int t = 0; t < static_cast<int>(path.symbols.size()); ++t) {
                a1 = forward_step(a1, model.matrix(path.symbols[t])).belief;
                a2 = forward_step(a2, model.matrix(path.symbols[t])).belief;
                const int n_seen = t + 1;
                if (n_seen >= 2 * cert->k) {
                    const double bound = c * std::pow(gamma, n_seen - cert->k);
                    worst = std::max(worst, hilbert_distance(a1, a2) - bound);
                }
            }
        }
        report.add("forgetting", "certificate_bound", worst, 0.0);
    }

    return report;
}

namespace detail {

inline ModelFile require_model(const ExperimentConfig& cfg) {
    if (cfg.model_path.empty()) throw ConfigError("--model is required for this operation");
    return load_model_file(cfg.model_path);
}

inline std::uint64_t require_seed(const ExperimentConfig& cfg) {
    if (!cfg.seed) throw ConfigError("--seed is required (no silent nondeterminism)");
    return *cfg.seed;
}

inline EdgePerturbation load_delta(const std::string& path, int n) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open delta file: " + path);
    nlohmann::json j;
    in >> j;
    if (!j.contains("delta")) throw ModelValidationError("delta", "missing required field");
    EdgePerturbation d;
    d.delta = io_detail::row_major_matrix(j.at("delta"), n, n, "delta");
    return d;
}

inline std::vector<double> theta_values(const ExperimentConfig& cfg, bool required) {
    if (cfg.theta_grid) return cfg.theta_grid->values();
    if (cfg.theta) return {*cfg.theta};
    if (required) throw ConfigError("--theta or --theta-grid is required");
    return {};
}

}  // namespace detail

/// Dispatches one configured experiment and collects its result table.
inline ResultRecord run(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    ResultRecord rec;
    rec.operation = cfg.operation;
    rec.seed = cfg.seed.value_or(0);

    if (cfg.operation == "entropy") {
        const auto mf = detail::require_model(cfg);
        const auto seed = detail::require_seed(cfg);
        if (cfg.n <= 0) throw ConfigError("--n must be positive");
        const auto thetas = detail::theta_values(cfg, false);
        rec.columns = {"theta", "estimate", "std_error", "n", "burn_in", "seed"};
        rec.entropy_valued = {false, true, true, false, false, false};
        McOptions opts{cfg.burn_in, 30, cfg.workers};
        if (thetas.empty()) {
            const auto r = entropy_rate_mc(mf.model, cfg.n, seed, opts);
            rec.rows.push_back({0.0, r.estimate, r.std_error,
                                static_cast<double>(cfg.n),
                                static_cast<double>(cfg.n - r.n_samples),
                                static_cast<double>(seed)});
        } else {
            const auto family = family_from_model(mf);
            for (double theta : thetas) {
                const auto r = entropy_rate_mc(family.model_at(theta), cfg.n, seed, opts);
                rec.rows.push_back({theta, r.estimate, r.std_error,
                                    static_cast<double>(cfg.n),
                                    static_cast<double>(cfg.n - r.n_samples),
                                    static_cast<double>(seed)});
            }
        }
    } else if (cfg.operation == "entropy-exact") {
        const auto mf = detail::require_model(cfg);
        if (cfg.n <= 0) throw ConfigError("--n must be positive");
        const auto thetas = detail::theta_values(cfg, false);
        rec.columns = {"theta", "n", "value"};
        rec.entropy_valued = {false, false, true};
        if (thetas.empty()) {
            rec.rows.push_back({0.0, static_cast<double>(cfg.n),
                                entropy_rate_exact(mf.model, static_cast<int>(cfg.n))});
        } else {
            const auto family = family_from_model(mf);
            for (double theta : thetas)
                rec.rows.push_back(
                    {theta, static_cast<double>(cfg.n),
                     entropy_rate_exact(family.model_at(theta), static_cast<int>(cfg.n))});
        }
    } else if (cfg.operation == "deriv") {
        const auto mf = detail::require_model(cfg);
        const auto seed = detail::require_seed(cfg);
        if (cfg.samples <= 0) throw ConfigError("--samples must be positive");
        rec.columns = {"theta", "estimate", "std_error", "samples", "seed"};
        rec.entropy_valued = {false, true, true, false, false};
        if (cfg.mode == "observation") {
            const auto family = family_from_model(mf);
            for (double theta : detail::theta_values(cfg, true)) {
                const auto r = entropy_derivative_mc(family, theta, cfg.samples, cfg.burn_in,
                                                     seed, cfg.workers);
                rec.rows.push_back({theta, r.estimate, r.std_error,
                                    static_cast<double>(cfg.samples),
                                    static_cast<double>(seed)});
            }
        } else if (cfg.mode == "edge") {
            if (cfg.delta_path.empty())
                throw ConfigError("--delta FILE is required for --mode edge");
            const auto d = detail::load_delta(cfg.delta_path, mf.model.num_states());
            const auto r = edge_occupancy_entropy_derivative(mf.model, d, cfg.samples,
                                                             cfg.burn_in, seed, cfg.workers);
            rec.rows.push_back({0.0, r.estimate, r.std_error,
                                static_cast<double>(cfg.samples), static_cast<double>(seed)});
        } else {
            throw ConfigError("--mode must be observation or edge");
        }
    } else if (cfg.operation == "series") {
        const auto mf = detail::require_model(cfg);
        const auto family = family_from_model(mf);
        const auto se = entropy_series(family);
        rec.columns = {"theta_star", "c0", "c1", "c2"};
        rec.entropy_valued = {false, true, true, true};
        rec.rows.push_back({se.theta_star, se.c0, se.c1, se.c2});
    } else if (cfg.operation == "capacity-expansion") {
        if (cfg.channel_path.empty()) throw ConfigError("--channel is required");
        const auto cf = load_channel_file(cfg.channel_path);
        const auto seed = detail::require_seed(cfg);
        if (cfg.n <= 0) throw ConfigError("--n must be positive");
        if (!cfg.theta) throw ConfigError("--theta (the MC check point) is required");
        const auto fam = family_from_channel(cf);
        std::vector<InputGridEntry> grid;
        if (cfg.input_grid) {
            if (cf.input.num_inputs != 2 || cf.input.memory != 1)
                throw ConfigError("--input-grid needs a binary memory-1 input law");
            for (double p00 : cfg.input_grid->values()) {
                MarkovInput in = cf.input;
                in.law(0, 0) = p00;
                in.law(0, 1) = 1.0 - p00;
                grid.push_back({"p00=" + detail::format_double(p00), in});
            }
        } else {
            grid.push_back({"0", cf.input});
        }
        const auto report = capacity_expansion_report(fam, grid, *cfg.theta, cfg.n, seed,
                                                      {cfg.burn_in, 30, cfg.workers});
        rec.columns = {"input_id", "c2", "theta_check", "I_mc", "stderr"};
        rec.entropy_valued = {false, true, false, true, true};
        for (const auto& row : report.rows)
            rec.rows.push_back({row.input_id, row.c2, row.theta_check, row.i_mc, row.std_error});
        rec.comments.push_back("argmax=" +
                               (report.argmax >= 0 ? report.rows[report.argmax].input_id : ""));
    } else if (cfg.operation == "isi-optimize") {
        if (cfg.channel_path.empty()) throw ConfigError("--channel is required");
        const auto cf = load_channel_file(cfg.channel_path);
        if (!std::holds_alternative<IsiChannel>(cf.channel))
            throw ConfigError("isi-optimize needs an ISI channel file");
        const auto [graph, weights] = isi_state_graph(std::get<IsiChannel>(cf.channel));
        const auto opt = isi_edge_optimizer(graph, weights);
        rec.columns = {"from", "to", "weight", "e_opt"};
        rec.entropy_valued = {false, false, false, false};
        for (int e = 0; e < static_cast<int>(graph.edges.size()); ++e)
            rec.rows.push_back({static_cast<double>(graph.edges[e].first),
                                static_cast<double>(graph.edges[e].second), weights(e),
                                opt.e(e)});
        rec.comments.push_back("value=" + detail::format_double(opt.value));
        rec.comments.push_back("gap=" + detail::format_double(opt.gap));
    } else if (cfg.operation == "check") {
        const auto mf = detail::require_model(cfg);
        const auto seed = detail::require_seed(cfg);
        const auto report = check_model(mf.model, seed);
        rec.columns = {"group", "item", "residual", "threshold", "pass"};
        rec.entropy_valued = {false, false, false, false, false};
        for (const auto& item : report.items)
            rec.rows.push_back({item.group, item.name, item.residual, item.threshold,
                                item.pass ? std::string("pass") : std::string("fail")});
        rec.comments.push_back(std::string("all_pass=") + (report.all_pass ? "true" : "false"));
    } else {
        throw ConfigError("unknown operation: " + cfg.operation);
    }

    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                      .count();
    return rec;
}

/// Writes the record to cfg.out_path ("-" for stdout).
inline void emit(const ResultRecord& rec, const ExperimentConfig& cfg, std::ostream& stdout_os) {
    if (cfg.out_path == "-" || cfg.out_path.empty()) {
        write_record(rec, stdout_os, cfg.format, cfg.bits);
        return;
    }
    std::ofstream out(cfg.out_path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file: " + cfg.out_path);
    write_record(rec, out, cfg.format, cfg.bits);
}

}  // namespace hmprate
