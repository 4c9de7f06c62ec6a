#pragma once

#include "airfc/ao_solver.hpp"
#include "airfc/channel_model.hpp"
#include "airfc/eval_harness.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace airfc {

/// Validation failure; `field` is the dotted key path, `line` is 1-based (0 if unknown).
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, int line, const std::string& message);
    const std::string& field() const { return field_; }
    int line() const { return line_; }

private:
    std::string field_;
    int line_;
};

struct SweepGrid {
    std::vector<int> groups;
    std::vector<int> relays_per_group;
    std::vector<double> p_relay_w;
    std::vector<double> d_max_m;
    std::vector<bool> direct_link;
    int trials = 20;

    /// Cartesian product, ordered (d_max, p_relay, direct, L, K) with K varying fastest.
    std::vector<GridPoint> points() const;
};

struct ExperimentConfig {
    std::string preset;  // "" or "table1"
    std::uint64_t seed = 1;

    // system
    int antennas = 0;
    double carrier_frequency_hz = 28e9;
    double noise_psd_dbm_hz = -174.0;
    double bandwidth_hz = 300e6;
    std::vector<double> relay_noise_w;       // empty: N0 B for every group; one value: all groups
    std::optional<double> receiver_noise_w;  // empty: N0 B
    double p_max_w = 0.0;
    double p_relay_w = 0.0;

    // topology
    double d_max_m = 0.0;
    int groups = 0;
    int relays_per_group = 0;
    Heights heights;
    bool direct_link = false;
    double rician_kappa = 1.0;  // linear

    // channel
    LinkConfig links;
    std::optional<std::string> channel_file;

    AoConfig ao;

    // task
    int classes = 4;
    int samples = 2000;
    double spread = 0.3;
    std::optional<std::uint64_t> task_seed;
    double ridge = 1e-3;
    std::optional<std::string> weights_file;

    // eval
    int noise_draws = 1;
    TieBreak tie = TieBreak::LowestIndex;

    std::optional<SweepGrid> sweep;

    // output (not part of the config hash)
    std::string out_dir = "out";
    bool plots = true;
    bool plot_timestamps = false;
    int workers = 0;

    /// N0 * B in watts.
    double thermal_noise_w() const;
    NoiseModel noise_model(std::size_t num_groups) const;
    std::uint64_t effective_task_seed() const;
    SweepSetup sweep_setup() const;
    ChannelSetConfig channel_config() const;
};

/// Parses and validates; every range is checked here, before any computation.
/// Throws ConfigError naming the offending field and line.
ExperimentConfig parse_config(const std::string& yaml_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Resolved configuration (semantic fields only) as canonical JSON.
nlohmann::json canonical_json(const ExperimentConfig& cfg);

/// SHA-256 (hex) of canonical_json(cfg).dump().
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace airfc
