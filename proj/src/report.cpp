#include "airfc/report.hpp"

#include "airfc/format.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#ifndef AIRFC_VERSION
#define AIRFC_VERSION "0.0.0"
#endif

namespace airfc {

using nlohmann::json;

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += (c == '\n' || c == '\r') ? ' ' : c;
    }
    return out + "\"";
}

json stats_json(const SampleStats& s) { return {{"mean", s.mean}, {"std", s.std}}; }

}  // namespace

void write_trials_csv(std::ostream& os, const std::vector<SweepResult>& results) {
    os << kTrialCsvHeader << '\n';
    for (std::size_t p = 0; p < results.size(); ++p) {
        const auto& pt = results[p].point;
        for (const auto& t : results[p].trials) {
            os << p << ',' << pt.groups << ',' << pt.relays_per_group << ',' << format_double(pt.p_relay_w) << ','
               << format_double(pt.d_max_m) << ',' << (pt.direct_link ? 1 : 0) << ',' << t.trial << ',' << t.seed
               << ',' << (t.ok ? 1 : 0) << ',' << t.iterations << ',' << to_string(t.termination) << ','
               << format_double(t.nmse) << ',' << format_double(t.accuracy) << ','
               << format_double(t.imitation_error) << ',' << format_double(t.noise_penalty) << ','
               << format_double(t.objective) << ',' << format_double(t.max_violation) << ',' << csv_field(t.error)
               << '\n';
        }
    }
}

json sweep_summary_json(const std::vector<SweepResult>& results, double baseline_accuracy) {
    json points = json::array();
    int failed_points = 0;
    for (std::size_t p = 0; p < results.size(); ++p) {
        const auto& r = results[p];
        json failures = json::array();
        for (const auto& t : r.trials)
            if (!t.ok) failures.push_back({{"trial", t.trial}, {"seed", t.seed}, {"error", t.error}});
        if (r.completed == 0) ++failed_points;
        points.push_back({{"point", p},
                          {"groups", r.point.groups},
                          {"relays_per_group", r.point.relays_per_group},
                          {"p_relay_w", r.point.p_relay_w},
                          {"d_max_m", r.point.d_max_m},
                          {"direct_link", r.point.direct_link},
                          {"trials", r.trials.size()},
                          {"completed", r.completed},
                          {"partial", r.partial},
                          {"nmse", stats_json(r.nmse)},
                          {"accuracy", stats_json(r.accuracy)},
                          {"objective", stats_json(r.objective)},
                          {"failures", std::move(failures)}});
    }
    return {{"baseline_accuracy", baseline_accuracy},
            {"points", std::move(points)},
            {"failed_points", failed_points}};
}

// ---------------------------------------------------------------------------
// SVG
// ---------------------------------------------------------------------------

namespace {

constexpr double kWidth = 680, kHeight = 440;
constexpr double kLeft = 78, kRight = 150, kTop = 44, kBottom = 58;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2",
                                    "#17becf"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// ~n "nice" ticks covering [lo, hi]
std::vector<double> nice_ticks(double lo, double hi, int n) {
    const double span = hi - lo;
    const double raw = span / n;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double r = raw / mag;
    const double step = (r < 1.5 ? 1 : r < 3 ? 2 : r < 7 ? 5 : 10) * mag;
    std::vector<double> ticks;
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step)
        ticks.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
    return ticks;
}

}  // namespace

std::string render_svg(const PlotSpec& spec) {
    auto tr = [&](double y) { return spec.log_y ? std::log10(y) : y; };
    auto usable = [&](double y) { return std::isfinite(y) && (!spec.log_y || y > 0.0); };

    double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
    auto grow_y = [&](double y) {
        if (!usable(y)) return;
        y_lo = std::min(y_lo, tr(y));
        y_hi = std::max(y_hi, tr(y));
    };
    for (const auto& s : spec.series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            x_lo = std::min(x_lo, s.x[i]);
            x_hi = std::max(x_hi, s.x[i]);
            grow_y(s.mean[i]);
            grow_y(s.mean[i] + s.std[i]);
            grow_y(s.mean[i] - s.std[i]);
        }
    if (spec.reference) grow_y(*spec.reference);
    if (!std::isfinite(x_lo)) x_lo = 0, x_hi = 1;
    if (!std::isfinite(y_lo)) y_lo = 0, y_hi = 1;
    if (x_hi - x_lo < 1e-12) x_lo -= 1, x_hi += 1;
    if (y_hi - y_lo < 1e-12) y_lo -= 0.5, y_hi += 0.5;
    const double xpad = 0.06 * (x_hi - x_lo), ypad = 0.08 * (y_hi - y_lo);
    x_lo -= xpad, x_hi += xpad, y_lo -= ypad, y_hi += ypad;
    if (spec.log_y) y_lo = std::floor(y_lo), y_hi = std::ceil(y_hi);

    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * pw; };
    auto py = [&](double ty) { return kTop + (y_hi - ty) / (y_hi - y_lo) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
      << xml_escape(spec.title) << "</text>\n";

    // axes and ticks
    o << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    std::vector<double> xticks;
    for (const auto& s : spec.series)
        for (double x : s.x) xticks.push_back(x);
    std::sort(xticks.begin(), xticks.end());
    xticks.erase(std::unique(xticks.begin(), xticks.end()), xticks.end());
    if (xticks.size() > 12) xticks = nice_ticks(x_lo, x_hi, 6);
    for (double x : xticks) {
        o << "<line x1=\"" << num(px(x)) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(px(x)) << "\" y2=\""
          << num(kTop + ph + 5) << "\" stroke=\"black\"/>";
        o << "<text x=\"" << num(px(x)) << "\" y=\"" << num(kTop + ph + 19) << "\" text-anchor=\"middle\">"
          << tick_label(x) << "</text>\n";
    }
    std::vector<double> yticks;
    if (spec.log_y) {
        for (double e = y_lo; e <= y_hi + 1e-9; e += 1) yticks.push_back(e);
    } else {
        yticks = nice_ticks(y_lo, y_hi, 6);
    }
    for (double t : yticks) {
        o << "<line x1=\"" << num(kLeft - 5) << "\" y1=\"" << num(py(t)) << "\" x2=\"" << num(kLeft + pw) << "\" y2=\""
          << num(py(t)) << "\" stroke=\"#dddddd\"/>";
        const std::string label = spec.log_y ? "1e" + tick_label(t) : tick_label(t);
        o << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(py(t) + 4) << "\" text-anchor=\"end\">" << label
          << "</text>\n";
    }
    o << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 14) << "\" text-anchor=\"middle\">"
      << xml_escape(spec.x_label) << "</text>\n";
    o << "<text transform=\"translate(18," << num(kTop + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << xml_escape(spec.y_label) << "</text>\n";

    double legend_y = kTop + 10;
    auto legend = [&](const std::string& colour, const std::string& label, bool dashed) {
        const double lx = kLeft + pw + 14;
        o << "<line x1=\"" << num(lx) << "\" y1=\"" << num(legend_y) << "\" x2=\"" << num(lx + 24) << "\" y2=\""
          << num(legend_y) << "\" stroke=\"" << colour << "\" stroke-width=\"2\""
          << (dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>";
        o << "<text x=\"" << num(lx + 30) << "\" y=\"" << num(legend_y + 4) << "\">" << xml_escape(label)
          << "</text>\n";
        legend_y += 20;
    };

    if (spec.reference && usable(*spec.reference)) {
        const double y = py(tr(*spec.reference));
        o << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(y) << "\" x2=\"" << num(kLeft + pw) << "\" y2=\""
          << num(y) << "\" stroke=\"black\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\"/>\n";
    }

    for (std::size_t si = 0; si < spec.series.size(); ++si) {
        const auto& s = spec.series[si];
        const std::string colour = kPalette[si % std::size(kPalette)];
        std::string points;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!usable(s.mean[i])) continue;
            const double x = px(s.x[i]), y = py(tr(s.mean[i]));
            points += num(x) + "," + num(y) + " ";
            const double hi = s.mean[i] + s.std[i];
            const double lo = s.mean[i] - s.std[i];
            if (s.std[i] > 0.0) {
                const double yh = py(tr(hi));
                const double yl = usable(lo) ? py(tr(lo)) : kTop + ph;
                o << "<path d=\"M" << num(x) << ' ' << num(yl) << "V" << num(yh) << "M" << num(x - 4) << ' '
                  << num(yh) << "h8M" << num(x - 4) << ' ' << num(yl) << "h8\" stroke=\"" << colour
                  << "\" fill=\"none\"/>\n";
            }
            o << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"3.5\" fill=\"" << colour << "\"/>\n";
        }
        if (!points.empty()) {
            points.pop_back();
            o << "<polyline points=\"" << points << "\" fill=\"none\" stroke=\"" << colour
              << "\" stroke-width=\"2\"/>\n";
        }
        legend(colour, s.label, false);
    }
    if (spec.reference) legend("black", spec.reference_label, true);
    if (spec.timestamp)
        o << "<text x=\"" << num(kWidth - 6) << "\" y=\"" << num(kHeight - 4)
          << "\" text-anchor=\"end\" font-size=\"9\" fill=\"#888888\">" << xml_escape(*spec.timestamp) << "</text>\n";
    o << "</svg>\n";
    return o.str();
}

std::vector<SlicePlot> sweep_plots(const std::vector<SweepResult>& results, const std::string& metric,
                                   std::optional<double> baseline_accuracy) {
    const bool accuracy = metric == "accuracy";
    if (!accuracy && metric != "nmse") throw std::invalid_argument("unknown plot metric '" + metric + "'");

    using SliceKey = std::tuple<double, double, bool>;
    std::map<SliceKey, std::map<int, std::vector<const SweepResult*>>> slices;
    for (const auto& r : results) slices[{r.point.d_max_m, r.point.p_relay_w, r.point.direct_link}][r.point.groups].push_back(&r);

    std::vector<SlicePlot> out;
    for (const auto& [key, by_l] : slices) {
        const auto& [d_max, p_relay, direct] = key;
        SlicePlot plot;
        plot.stem = metric;
        if (slices.size() > 1)
            plot.stem += "_dmax" + format_double(d_max) + "_prelay" + format_double(p_relay) +
                         (direct ? "_direct" : "_blocked");
        auto& spec = plot.spec;
        spec.title = std::string(accuracy ? "Accuracy" : "NMSE") + " vs K (D_max = " + format_double(d_max) +
                     " m, P_k = " + format_double(p_relay) + " W, direct link " + (direct ? "on" : "off") + ")";
        spec.x_label = "relays per group K";
        spec.y_label = accuracy ? "accuracy" : "NMSE";
        spec.log_y = !accuracy;
        if (accuracy && baseline_accuracy) {
            spec.reference = baseline_accuracy;
            spec.reference_label = "digital";
        }
        for (const auto& [l, rs] : by_l) {
            std::vector<const SweepResult*> sorted = rs;
            std::stable_sort(sorted.begin(), sorted.end(), [](const SweepResult* a, const SweepResult* b) {
                return a->point.relays_per_group < b->point.relays_per_group;
            });
            PlotSeries s;
            s.label = "L = " + std::to_string(l);
            for (const auto* r : sorted) {
                if (r->completed == 0) continue;
                const auto& st = accuracy ? r->accuracy : r->nmse;
                s.x.push_back(r->point.relays_per_group);
                s.mean.push_back(st.mean);
                s.std.push_back(st.std);
            }
            spec.series.push_back(std::move(s));
        }
        out.push_back(std::move(plot));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string file_sha256(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + file.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 15];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

RunManifest::RunManifest(std::string command, std::string config_path, std::string config_hash)
    : command_(std::move(command)),
      config_path_(std::move(config_path)),
      config_hash_(std::move(config_hash)),
      started_(utc_timestamp()) {}

void RunManifest::add(const std::filesystem::path& file, const std::string& role) {
    outputs_.push_back({{"path", file.filename().string()},
                        {"role", role},
                        {"bytes", std::filesystem::file_size(file)},
                        {"sha256", file_sha256(file)}});
}

json RunManifest::to_json() const {
    return {{"tool", "airfc"},
            {"version", AIRFC_VERSION},
            {"command", command_},
            {"config_path", config_path_},
            {"config_hash", config_hash_},
            {"seeds", seeds_},
            {"workers", workers_},
            {"started_utc", started_},
            {"finished_utc", finished_},
            {"outputs", outputs_}};
}

void RunManifest::finish(const std::filesystem::path& manifest_path) {
    finished_ = utc_timestamp();
    json j = to_json();
    j["outputs"].push_back({{"path", manifest_path.filename().string()}, {"role", "manifest"}});
    std::ofstream out(manifest_path);
    if (!out) throw std::runtime_error("cannot write " + manifest_path.string());
    out << j.dump(2) << '\n';
}

}  // namespace airfc
