#pragma once

// Experiment configuration: JSON object, every key optional, unknown keys
// rejected. See README.md for the schema.

#include <array>
#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace holder_hj {

class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"conjugates", "benchmark-quadratic", "counterexample", "revholder",
                                                "hardy",      "bridge",              "moments",        "gallery",
                                                "full-suite"};
    return names;
}

struct ExperimentConfig {
    std::string experiment = "full-suite";
    std::string output_dir = "artifacts";
    std::uint64_t seed = 12345;

    // counterexample family
    double gamma = 0.75;
    double G = 1.5;
    std::vector<int> n_list{4, 8, 16, 32};
    std::size_t grid_x = 801;  // Lipschitz / Hölder / arc-energy grid
    std::size_t grid_t = 801;
    std::size_t value_grid_x = 3201;  // value and arc-convergence grid
    std::size_t value_grid_t = 801;
    std::size_t grid_csv_stride = 4;
    std::array<double, 4> lipschitz_region{-0.2, 0.2, 0.0, 0.25};  // x_lo, x_hi, t_lo, t_hi
    double holder_alpha = 0.25;
    std::array<double, 2> decay_window{0.02, 0.5};
    double envelope_delta = 8.0;
    double slack = 1.25;

    // quadratic benchmark
    std::size_t quadratic_grid = 401;

    // reverse Hölder
    double backoff = 0.95;
    std::size_t soundness_instances = 100;
    std::size_t conjugate_samples = 50;

    // stochastic
    double p = 1.5;
    std::vector<double> T_list{0.25, 0.5, 1.0};
    double dt = 1e-3;
    std::size_t paths = 20000;
    std::size_t persist_paths = 100;
    std::size_t moment_paths = 20000;
    std::size_t moment_pairs = 30;
    std::size_t revholder_paths = 2000;

    void validate() const {
        auto fail = [](const std::string& m) { throw config_error(m); };
        bool known = false;
        for (const auto& n : experiment_names()) {
            known = known || n == experiment;
        }
        if (!known) {
            fail("unknown experiment '" + experiment + "'");
        }
        if (!(gamma > 2.0 - std::sqrt(2.0) && gamma < 1.0)) {
            fail("gamma must lie in (2 - sqrt 2, 1)");
        }
        if (!(G > gamma * gamma / (2.0 * gamma - 1.0))) {
            fail("G must exceed gamma^2 / (2 gamma - 1)");
        }
        if (n_list.empty()) {
            fail("n_list must not be empty");
        }
        for (int n : n_list) {
            if (n < 1) {
                fail("n_list entries must be positive");
            }
        }
        if (grid_x < 3 || grid_t < 3 || value_grid_x < 3 || value_grid_t < 3 || quadratic_grid < 3) {
            fail("grid sizes must be at least 3");
        }
        if (grid_csv_stride < 1) {
            fail("grid_csv_stride must be positive");
        }
        if (!(lipschitz_region[0] < lipschitz_region[1] && lipschitz_region[2] <= lipschitz_region[3])) {
            fail("lipschitz_region must be [x_lo, x_hi, t_lo, t_hi] with x_lo < x_hi, t_lo <= t_hi");
        }
        if (!(holder_alpha > 0.0 && holder_alpha <= 1.0)) {
            fail("holder_alpha must lie in (0, 1]");
        }
        if (!(decay_window[0] > 0.0 && decay_window[1] > decay_window[0])) {
            fail("decay_window must be [h_min, h_max] with 0 < h_min < h_max");
        }
        if (!(envelope_delta >= 1.0)) {
            fail("envelope_delta must be >= 1");
        }
        if (!(slack >= 1.0)) {
            fail("slack must be >= 1");
        }
        if (!(backoff > 0.0 && backoff < 1.0)) {
            fail("backoff must lie in (0, 1)");
        }
        if (soundness_instances < 1 || conjugate_samples < 1) {
            fail("instance counts must be positive");
        }
        if (!(p > 1.0 && p < 2.0)) {
            fail("p must lie in (1, 2)");
        }
        if (T_list.size() < 2) {
            fail("T_list needs at least two horizons");
        }
        for (double T : T_list) {
            if (!(T > 0.0) || !(dt <= T / 100.0 * (1.0 + 1e-9))) {
                fail("every T must be positive with dt <= T/100");
            }
        }
        if (!(dt > 0.0)) {
            fail("dt must be positive");
        }
        if (paths < 20 || moment_paths < 20 || revholder_paths < 20) {
            fail("path counts must be at least 20 (batch means use 20 batches)");
        }
        if (persist_paths > paths) {
            fail("persist_paths cannot exceed paths");
        }
        if (moment_pairs < 3) {
            fail("moment_pairs must be at least 3");
        }
    }
};

namespace detail {

template <class T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw config_error(std::string("bad value for '") + key + "': " + e.what());
        }
    }
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw config_error("config must be a JSON object");
    }
    static const std::set<std::string> keys{
        "experiment",      "output_dir",       "seed",           "gamma",          "G",
        "n_list",          "grid_x",           "grid_t",         "value_grid_x",   "value_grid_t",
        "grid_csv_stride", "lipschitz_region", "holder_alpha",   "decay_window",   "envelope_delta",
        "slack",           "quadratic_grid",   "backoff",        "soundness_instances",
        "conjugate_samples", "p",              "T_list",         "dt",             "paths",
        "persist_paths",   "moment_paths",     "moment_pairs",   "revholder_paths"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!keys.contains(it.key())) {
            throw config_error("unknown config key '" + it.key() + "'");
        }
    }
    ExperimentConfig c;
    using detail::read_key;
    read_key(j, "experiment", c.experiment);
    read_key(j, "output_dir", c.output_dir);
    read_key(j, "seed", c.seed);
    read_key(j, "gamma", c.gamma);
    read_key(j, "G", c.G);
    read_key(j, "n_list", c.n_list);
    read_key(j, "grid_x", c.grid_x);
    read_key(j, "grid_t", c.grid_t);
    read_key(j, "value_grid_x", c.value_grid_x);
    read_key(j, "value_grid_t", c.value_grid_t);
    read_key(j, "grid_csv_stride", c.grid_csv_stride);
    read_key(j, "lipschitz_region", c.lipschitz_region);
    read_key(j, "holder_alpha", c.holder_alpha);
    read_key(j, "decay_window", c.decay_window);
    read_key(j, "envelope_delta", c.envelope_delta);
    read_key(j, "slack", c.slack);
    read_key(j, "quadratic_grid", c.quadratic_grid);
    read_key(j, "backoff", c.backoff);
    read_key(j, "soundness_instances", c.soundness_instances);
    read_key(j, "conjugate_samples", c.conjugate_samples);
    read_key(j, "p", c.p);
    read_key(j, "T_list", c.T_list);
    read_key(j, "dt", c.dt);
    read_key(j, "paths", c.paths);
    read_key(j, "persist_paths", c.persist_paths);
    read_key(j, "moment_paths", c.moment_paths);
    read_key(j, "moment_pairs", c.moment_pairs);
    read_key(j, "revholder_paths", c.revholder_paths);
    c.validate();
    return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw config_error(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(j);
}

}  // namespace holder_hj
