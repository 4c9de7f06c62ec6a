#pragma once

#include "airfc/eval_harness.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace airfc {

/// Per-trial results, one row per (grid point, trial) in sweep order. Column set is fixed:
inline constexpr const char* kTrialCsvHeader =
    "point,groups,relays_per_group,p_relay_w,d_max_m,direct_link,trial,seed,ok,iterations,termination,"
    "nmse,accuracy,imitation_error,noise_penalty,objective,max_violation,error";

void write_trials_csv(std::ostream& os, const std::vector<SweepResult>& results);

/// Grid-point summaries. Failed trials are listed with their error messages.
nlohmann::json sweep_summary_json(const std::vector<SweepResult>& results, double baseline_accuracy);

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> mean;
    std::vector<double> std;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_y = false;
    std::vector<PlotSeries> series;
    std::optional<double> reference;  // dashed horizontal line
    std::string reference_label;
    std::optional<std::string> timestamp;  // omitted unless set
};

/// Static SVG line plot with +-1 std error bars.
std::string render_svg(const PlotSpec& spec);

/// One spec per (d_max, p_relay, direct_link) slice: x = K, one series per L.
/// `metric` is "accuracy" or "nmse".
struct SlicePlot {
    std::string stem;  // file name without extension
    PlotSpec spec;
};
std::vector<SlicePlot> sweep_plots(const std::vector<SweepResult>& results, const std::string& metric,
                                   std::optional<double> baseline_accuracy);

/// Output inventory plus provenance. `add` records size and SHA-256 of a written file.
class RunManifest {
public:
    RunManifest(std::string command, std::string config_path, std::string config_hash);

    void set_seeds(nlohmann::json seeds) { seeds_ = std::move(seeds); }
    void set_workers(int n) { workers_ = n; }
    void add(const std::filesystem::path& file, const std::string& role);
    void finish(const std::filesystem::path& manifest_path);

    nlohmann::json to_json() const;

private:
    std::string command_;
    std::string config_path_;
    std::string config_hash_;
    std::string started_;
    std::string finished_;
    int workers_ = 1;
    nlohmann::json seeds_ = nlohmann::json::object();
    nlohmann::json outputs_ = nlohmann::json::array();
};

std::string file_sha256(const std::filesystem::path& file);
std::string utc_timestamp();

}  // namespace airfc
