#include "airfc/config.hpp"

#include "airfc/rng.hpp"

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace airfc {

using nlohmann::json;

ConfigError::ConfigError(std::string field, int line, const std::string& message)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + field + ": " + message
                                  : field + ": " + message),
      field_(std::move(field)),
      line_(line) {}

namespace {

int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

std::string join(const std::string& parent, const std::string& key) {
    return parent.empty() ? key : parent + "." + key;
}

// A mapping node with a fixed key set; every access records the dotted field path so
// diagnostics can name it.
class Section {
public:
    Section(YAML::Node node, std::string path, std::set<std::string> allowed)
        : node_(present(node) ? node : YAML::Node(YAML::NodeType::Map)), path_(std::move(path)) {
        if (!node_.IsMap()) throw ConfigError(path_.empty() ? "<root>" : path_, line_of(node_), "expected a mapping");
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (!allowed.count(key)) throw ConfigError(join(path_, key), line_of(kv.first), "unknown key");
        }
    }

    static bool present(const YAML::Node& n) { return n.IsDefined() && !n.IsNull(); }
    bool has(const std::string& key) const { return present(node_[key]); }
    YAML::Node get(const std::string& key) const { return node_[key]; }
    std::string field(const std::string& key) const { return join(path_, key); }
    int line() const { return line_of(node_); }
    int line(const std::string& key) const { return has(key) ? line_of(node_[key]) : line(); }

    ConfigError error(const std::string& key, const std::string& message) const {
        return ConfigError(field(key), line(key), message);
    }

    template <typename T>
    T scalar(const std::string& key, const char* kind) const {
        const auto n = node_[key];
        if (!n.IsScalar()) throw error(key, std::string("expected ") + kind);
        try {
            return n.as<T>();
        } catch (const YAML::Exception&) {
            throw error(key, std::string("expected ") + kind + ", got '" + n.Scalar() + "'");
        }
    }

    void read(const std::string& key, double& out) const {
        if (!has(key)) return;
        out = scalar<double>(key, "a number");
        if (!std::isfinite(out)) throw error(key, "must be finite");
    }
    void read(const std::string& key, int& out) const {
        if (!has(key)) return;
        out = scalar<int>(key, "an integer");
    }
    void read(const std::string& key, bool& out) const {
        if (!has(key)) return;
        out = scalar<bool>(key, "true or false");
    }
    void read(const std::string& key, std::string& out) const {
        if (!has(key)) return;
        out = scalar<std::string>(key, "a string");
    }
    void read(const std::string& key, std::uint64_t& out) const {
        if (!has(key)) return;
        const auto n = node_[key];
        if (n.IsScalar() && !n.Scalar().empty() && n.Scalar()[0] == '-') throw error(key, "must be non-negative");
        out = scalar<std::uint64_t>(key, "an unsigned integer");
    }
    template <typename T>
    void read(const std::string& key, std::optional<T>& out) const {
        if (!has(key)) return;
        T v{};
        read(key, v);
        out = v;
    }

    template <typename T>
    std::vector<T> list(const std::string& key, const char* kind) const {
        const auto n = node_[key];
        std::vector<T> out;
        if (n.IsScalar()) {
            out.push_back(scalar<T>(key, kind));
            return out;
        }
        if (!n.IsSequence() || n.size() == 0) throw error(key, std::string("expected a non-empty list of ") + kind);
        for (std::size_t i = 0; i < n.size(); ++i) {
            try {
                out.push_back(n[i].as<T>());
            } catch (const YAML::Exception&) {
                throw ConfigError(field(key) + "[" + std::to_string(i) + "]", line_of(n[i]),
                                  std::string("expected ") + kind);
            }
        }
        return out;
    }

private:
    YAML::Node node_;
    std::string path_;
};

void read_coefficients(const Section& s, const std::string& key, PathlossCoefficients& c) {
    if (!s.has(key)) return;
    const auto v = s.list<double>(key, "numbers");
    if (v.size() != 3) throw s.error(key, "expected [intercept, distance_slope, frequency_slope]");
    for (double x : v)
        if (!std::isfinite(x)) throw s.error(key, "must be finite");
    c = {v[0], v[1], v[2]};
}

void read_link(const Section& links, const std::string& key, LinkParams& link) {
    if (!links.has(key)) return;
    Section s(links.get(key), links.field(key), {"model", "los"});
    if (s.has("model")) {
        try {
            link.model = pathloss_model_from_string(s.scalar<std::string>("model", "a string"));
        } catch (const std::invalid_argument& e) {
            throw s.error("model", e.what());
        }
    }
    if (s.has("los")) {
        try {
            link.los = los_state_from_string(s.scalar<std::string>("los", "a string"));
        } catch (const std::invalid_argument& e) {
            throw s.error("los", e.what());
        }
    }
}

void apply_table1(ExperimentConfig& c) {
    c.antennas = 49;
    c.carrier_frequency_hz = 28e9;
    c.noise_psd_dbm_hz = -174.0;
    c.bandwidth_hz = 300e6;
    c.p_relay_w = 1.0;
    c.d_max_m = 200.0;
    c.groups = 5;
    c.relays_per_group = 12;
    c.heights = Heights{};
    c.direct_link = false;
    c.rician_kappa = 1.0;  // 0 dB
}

void require_positive(const Section& s, const std::string& key, double v) {
    if (!(v > 0.0)) throw s.error(key, "must be > 0");
}
void require_at_least(const Section& s, const std::string& key, long long v, long long lo) {
    if (v < lo) throw s.error(key, "must be >= " + std::to_string(lo));
}

}  // namespace

std::vector<GridPoint> SweepGrid::points() const {
    std::vector<GridPoint> out;
    for (double d : d_max_m)
        for (double p : p_relay_w)
            for (bool direct : direct_link)
                for (int l : groups)
                    for (int k : relays_per_group) out.push_back({l, k, p, d, direct});
    return out;
}

double ExperimentConfig::thermal_noise_w() const {
    return std::pow(10.0, (noise_psd_dbm_hz - 30.0) / 10.0) * bandwidth_hz;
}

NoiseModel ExperimentConfig::noise_model(std::size_t num_groups) const {
    NoiseModel n;
    n.sigma_c_sq = receiver_noise_w.value_or(thermal_noise_w());
    if (relay_noise_w.empty())
        n.sigma_u_sq.assign(num_groups, thermal_noise_w());
    else if (relay_noise_w.size() == 1)
        n.sigma_u_sq.assign(num_groups, relay_noise_w.front());
    else
        n.sigma_u_sq = relay_noise_w;
    n.validate(num_groups);
    return n;
}

std::uint64_t ExperimentConfig::effective_task_seed() const {
    return task_seed.value_or(derive_seed(seed, {0x7A5CULL}));
}

ChannelSetConfig ExperimentConfig::channel_config() const {
    ChannelSetConfig c;
    c.n_t = antennas;
    c.n_r = antennas;
    c.carrier_frequency_hz = carrier_frequency_hz;
    c.direct_link = direct_link;
    c.links = links;
    c.links.bs_rx.rician_kappa = rician_kappa;
    return c;
}

SweepSetup ExperimentConfig::sweep_setup() const {
    SweepSetup s;
    s.antennas = antennas;
    s.p_max_w = p_max_w;
    s.sigma_u_sq = relay_noise_w.empty() ? thermal_noise_w() : relay_noise_w.front();
    s.sigma_c_sq = receiver_noise_w.value_or(thermal_noise_w());
    s.heights = heights;
    s.channel = channel_config();
    s.ao = ao;
    s.noise_draws = noise_draws;
    s.tie = tie;
    return s;
}

ExperimentConfig parse_config(const std::string& yaml_text) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError("<syntax>", e.mark.line + 1, e.msg);
    }

    ExperimentConfig c;
    const Section top(root, "",
                      {"defaults", "seed", "system", "topology", "channel", "ao", "task", "eval", "sweep", "output"});
    top.read("defaults", c.preset);
    if (!c.preset.empty() && c.preset != "table1") throw top.error("defaults", "unknown preset '" + c.preset + "'");
    const bool preset = !c.preset.empty();
    if (preset) apply_table1(c);
    top.read("seed", c.seed);

    // system
    const Section sys(top.get("system"), "system",
                      {"antennas", "carrier_frequency_hz", "noise_psd_dbm_hz", "bandwidth_hz", "relay_noise_w",
                       "receiver_noise_w", "p_max_w", "p_relay_w"});
    sys.read("antennas", c.antennas);
    sys.read("carrier_frequency_hz", c.carrier_frequency_hz);
    sys.read("noise_psd_dbm_hz", c.noise_psd_dbm_hz);
    sys.read("bandwidth_hz", c.bandwidth_hz);
    if (sys.has("relay_noise_w")) c.relay_noise_w = sys.list<double>("relay_noise_w", "numbers");
    sys.read("receiver_noise_w", c.receiver_noise_w);
    const bool has_p_max = sys.has("p_max_w");
    sys.read("p_max_w", c.p_max_w);
    sys.read("p_relay_w", c.p_relay_w);

    // topology
    const Section topo(top.get("topology"), "topology",
                       {"d_max_m", "groups", "relays_per_group", "bs_height_m", "rx_height_m", "relay_height_m",
                        "direct_link", "rician_kappa", "rician_k_db"});
    topo.read("d_max_m", c.d_max_m);
    topo.read("groups", c.groups);
    topo.read("relays_per_group", c.relays_per_group);
    topo.read("bs_height_m", c.heights.bs_m);
    topo.read("rx_height_m", c.heights.rx_m);
    topo.read("relay_height_m", c.heights.relay_m);
    topo.read("direct_link", c.direct_link);
    if (topo.has("rician_kappa") && topo.has("rician_k_db"))
        throw topo.error("rician_k_db", "give either rician_kappa or rician_k_db, not both");
    topo.read("rician_kappa", c.rician_kappa);
    if (topo.has("rician_k_db")) {
        double db = 0.0;
        topo.read("rician_k_db", db);
        c.rician_kappa = db_to_linear(db);
    }

    // channel
    const Section chan(top.get("channel"), "channel", {"file", "links", "pathloss"});
    chan.read("file", c.channel_file);
    if (chan.has("links")) {
        const Section links(chan.get("links"), "channel.links", {"bs_relay", "relay_relay", "relay_rx", "bs_rx"});
        read_link(links, "bs_relay", c.links.bs_relay);
        read_link(links, "relay_relay", c.links.relay_relay);
        read_link(links, "relay_rx", c.links.relay_rx);
        read_link(links, "bs_rx", c.links.bs_rx);
    }
    if (chan.has("pathloss")) {
        const Section pl(chan.get("pathloss"), "channel.pathloss",
                         {"umi_los", "umi_los_far", "umi_nlos", "umi_nlos_height_slope", "sidelink_los",
                          "sidelink_nlos", "min_distance_m"});
        auto& t = c.links.table;
        read_coefficients(pl, "umi_los", t.umi_los);
        read_coefficients(pl, "umi_los_far", t.umi_los_far);
        read_coefficients(pl, "umi_nlos", t.umi_nlos);
        pl.read("umi_nlos_height_slope", t.umi_nlos_height_slope);
        read_coefficients(pl, "sidelink_los", t.sidelink_los);
        read_coefficients(pl, "sidelink_nlos", t.sidelink_nlos);
        pl.read("min_distance_m", t.min_distance_m);
        require_positive(pl, "min_distance_m", t.min_distance_m);
    }

    // ao
    const Section ao(top.get("ao"), "ao",
                     {"max_iters", "rel_tolerance", "patience", "bisection_tolerance", "bisection_max_steps", "init_gain_rho",
                      "regularizer", "fixed_epsilon", "include_upstream_noise"});
    ao.read("max_iters", c.ao.max_iters);
    ao.read("rel_tolerance", c.ao.rel_tolerance);
    ao.read("patience", c.ao.patience);
    ao.read("bisection_tolerance", c.ao.bisection_tolerance);
    ao.read("bisection_max_steps", c.ao.bisection_max_steps);
    ao.read("init_gain_rho", c.ao.init_gain_rho);
    if (ao.has("regularizer")) {
        try {
            c.ao.regularizer = regularizer_mode_from_string(ao.scalar<std::string>("regularizer", "a string"));
        } catch (const std::invalid_argument& e) {
            throw ao.error("regularizer", e.what());
        }
    }
    ao.read("fixed_epsilon", c.ao.fixed_epsilon);
    ao.read("include_upstream_noise", c.ao.include_upstream_noise);

    // task
    const Section task(top.get("task"), "task", {"classes", "samples", "spread", "seed", "ridge", "weights_file"});
    task.read("classes", c.classes);
    task.read("samples", c.samples);
    task.read("spread", c.spread);
    task.read("seed", c.task_seed);
    task.read("ridge", c.ridge);
    task.read("weights_file", c.weights_file);

    // eval
    const Section ev(top.get("eval"), "eval", {"noise_draws", "tie_break"});
    ev.read("noise_draws", c.noise_draws);
    if (ev.has("tie_break")) {
        const auto t = ev.scalar<std::string>("tie_break", "a string");
        if (t == "lowest")
            c.tie = TieBreak::LowestIndex;
        else if (t == "uniform")
            c.tie = TieBreak::SeededUniform;
        else
            throw ev.error("tie_break", "expected 'lowest' or 'uniform'");
    }

    // sweep
    if (top.has("sweep")) {
        const Section sw(top.get("sweep"), "sweep",
                         {"groups", "relays_per_group", "p_relay_w", "d_max_m", "direct_link", "trials"});
        SweepGrid g;
        g.groups = sw.has("groups") ? sw.list<int>("groups", "integers") : std::vector<int>{c.groups};
        g.relays_per_group = sw.has("relays_per_group") ? sw.list<int>("relays_per_group", "integers")
                                                        : std::vector<int>{c.relays_per_group};
        g.p_relay_w = sw.has("p_relay_w") ? sw.list<double>("p_relay_w", "numbers") : std::vector<double>{c.p_relay_w};
        g.d_max_m = sw.has("d_max_m") ? sw.list<double>("d_max_m", "numbers") : std::vector<double>{c.d_max_m};
        if (sw.has("direct_link")) {
            for (bool b : sw.list<bool>("direct_link", "booleans")) g.direct_link.push_back(b);
        } else {
            g.direct_link = {c.direct_link};
        }
        sw.read("trials", g.trials);
        require_at_least(sw, "trials", g.trials, 1);
        for (int v : g.groups) require_at_least(sw, "groups", v, 1);
        for (int v : g.relays_per_group) require_at_least(sw, "relays_per_group", v, 1);
        for (double v : g.p_relay_w) require_positive(sw, "p_relay_w", v);
        for (double v : g.d_max_m) require_positive(sw, "d_max_m", v);
        for (int l : g.groups)
            for (int k : g.relays_per_group)
                if (static_cast<std::size_t>(l) * static_cast<std::size_t>(k) > kMaxTotalRelays)
                    throw sw.error("relays_per_group", "groups x relays_per_group exceeds " +
                                                           std::to_string(kMaxTotalRelays) + " relays");
        if (c.relay_noise_w.size() > 1)
            throw sys.error("relay_noise_w", "a sweep needs a single relay noise value (group counts vary)");
        // the scalar topology fields may be omitted when the grid supplies them
        if (c.groups == 0) c.groups = g.groups.front();
        if (c.relays_per_group == 0) c.relays_per_group = g.relays_per_group.front();
        if (c.p_relay_w == 0.0) c.p_relay_w = g.p_relay_w.front();
        if (c.d_max_m == 0.0) c.d_max_m = g.d_max_m.front();
        c.sweep = std::move(g);
    }

    // output
    const Section out(top.get("output"), "output", {"dir", "plots", "plot_timestamps", "workers"});
    out.read("dir", c.out_dir);
    out.read("plots", c.plots);
    out.read("plot_timestamps", c.plot_timestamps);
    out.read("workers", c.workers);
    require_at_least(out, "workers", c.workers, 0);

    // required fields and ranges
    if (!preset) {
        if (!sys.has("antennas")) throw sys.error("antennas", "required field missing");
        if (!has_p_max) throw sys.error("p_max_w", "required field missing");
        if (!sys.has("p_relay_w") && !c.sweep) throw sys.error("p_relay_w", "required field missing");
        if (!topo.has("d_max_m") && !c.sweep) throw topo.error("d_max_m", "required field missing");
        if (!topo.has("groups") && !c.sweep) throw topo.error("groups", "required field missing");
        if (!topo.has("relays_per_group") && !c.sweep) throw topo.error("relays_per_group", "required field missing");
    }
    if (preset && !has_p_max) c.p_max_w = static_cast<double>(c.antennas);

    require_at_least(sys, "antennas", c.antennas, 1);
    if (c.antennas > 4096) throw sys.error("antennas", "must be <= 4096");
    require_positive(sys, "carrier_frequency_hz", c.carrier_frequency_hz);
    require_positive(sys, "bandwidth_hz", c.bandwidth_hz);
    for (double v : c.relay_noise_w)
        if (!(v >= 0.0) || !std::isfinite(v)) throw sys.error("relay_noise_w", "must be finite and >= 0");
    if (c.relay_noise_w.size() > 1 && c.relay_noise_w.size() != static_cast<std::size_t>(c.groups))
        throw sys.error("relay_noise_w", "needs one value or one per group (" + std::to_string(c.groups) + ")");
    if (c.receiver_noise_w && !(*c.receiver_noise_w >= 0.0)) throw sys.error("receiver_noise_w", "must be >= 0");
    require_positive(sys, "p_max_w", c.p_max_w);
    require_positive(sys, "p_relay_w", c.p_relay_w);

    require_positive(topo, "d_max_m", c.d_max_m);
    require_at_least(topo, "groups", c.groups, 1);
    require_at_least(topo, "relays_per_group", c.relays_per_group, 1);
    if (static_cast<std::size_t>(c.groups) * static_cast<std::size_t>(c.relays_per_group) > kMaxTotalRelays)
        throw topo.error("relays_per_group", "groups x relays_per_group exceeds " + std::to_string(kMaxTotalRelays));
    require_positive(topo, "bs_height_m", c.heights.bs_m);
    require_positive(topo, "rx_height_m", c.heights.rx_m);
    require_positive(topo, "relay_height_m", c.heights.relay_m);
    if (!(c.rician_kappa >= 0.0)) throw topo.error("rician_kappa", "must be >= 0");

    require_at_least(ao, "max_iters", c.ao.max_iters, 1);
    require_positive(ao, "rel_tolerance", c.ao.rel_tolerance);
    require_at_least(ao, "patience", c.ao.patience, 1);
    require_positive(ao, "bisection_tolerance", c.ao.bisection_tolerance);
    require_at_least(ao, "bisection_max_steps", c.ao.bisection_max_steps, 1);
    require_positive(ao, "init_gain_rho", c.ao.init_gain_rho);
    require_positive(ao, "fixed_epsilon", c.ao.fixed_epsilon);

    require_at_least(task, "classes", c.classes, 2);
    if (c.classes > c.antennas) throw task.error("classes", "must not exceed system.antennas");
    require_at_least(task, "samples", c.samples, 2 * c.classes);
    require_positive(task, "spread", c.spread);
    require_positive(task, "ridge", c.ridge);
    require_at_least(ev, "noise_draws", c.noise_draws, 1);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("<file>", 0, "cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    auto c = parse_config(ss.str());
    // relative data paths resolve against the config's directory
    const auto base = path.parent_path();
    auto resolve = [&](std::optional<std::string>& p) {
        if (p && std::filesystem::path(*p).is_relative()) p = (base / *p).lexically_normal().string();
    };
    resolve(c.channel_file);
    resolve(c.weights_file);
    return c;
}

namespace {

json coefficients_json(const PathlossCoefficients& c) { return {c.intercept, c.distance_slope, c.frequency_slope}; }

json link_json(const LinkParams& l) {
    return {{"model", std::string(to_string(l.model))}, {"los", std::string(to_string(l.los))}};
}

}  // namespace

json canonical_json(const ExperimentConfig& c) {
    const auto& t = c.links.table;
    json j;
    j["seed"] = c.seed;
    j["system"] = {{"antennas", c.antennas},
                   {"carrier_frequency_hz", c.carrier_frequency_hz},
                   {"noise_psd_dbm_hz", c.noise_psd_dbm_hz},
                   {"bandwidth_hz", c.bandwidth_hz},
                   {"relay_noise_w", c.relay_noise_w},
                   {"receiver_noise_w", c.receiver_noise_w ? json(*c.receiver_noise_w) : json(nullptr)},
                   {"p_max_w", c.p_max_w},
                   {"p_relay_w", c.p_relay_w}};
    j["topology"] = {{"d_max_m", c.d_max_m},
                     {"groups", c.groups},
                     {"relays_per_group", c.relays_per_group},
                     {"bs_height_m", c.heights.bs_m},
                     {"rx_height_m", c.heights.rx_m},
                     {"relay_height_m", c.heights.relay_m},
                     {"direct_link", c.direct_link},
                     {"rician_kappa", c.rician_kappa}};
    j["channel"] = {{"file", c.channel_file ? json(*c.channel_file) : json(nullptr)},
                    {"links",
                     {{"bs_relay", link_json(c.links.bs_relay)},
                      {"relay_relay", link_json(c.links.relay_relay)},
                      {"relay_rx", link_json(c.links.relay_rx)},
                      {"bs_rx", link_json(c.links.bs_rx)}}},
                    {"pathloss",
                     {{"umi_los", coefficients_json(t.umi_los)},
                      {"umi_los_far", coefficients_json(t.umi_los_far)},
                      {"umi_nlos", coefficients_json(t.umi_nlos)},
                      {"umi_nlos_height_slope", t.umi_nlos_height_slope},
                      {"sidelink_los", coefficients_json(t.sidelink_los)},
                      {"sidelink_nlos", coefficients_json(t.sidelink_nlos)},
                      {"min_distance_m", t.min_distance_m}}}};
    j["ao"] = {{"max_iters", c.ao.max_iters},
               {"rel_tolerance", c.ao.rel_tolerance},
               {"patience", c.ao.patience},
               {"bisection_tolerance", c.ao.bisection_tolerance},
               {"bisection_max_steps", c.ao.bisection_max_steps},
               {"init_gain_rho", c.ao.init_gain_rho},
               {"regularizer", std::string(to_string(c.ao.regularizer))},
               {"fixed_epsilon", c.ao.fixed_epsilon},
               {"include_upstream_noise", c.ao.include_upstream_noise}};
    j["task"] = {{"classes", c.classes},
                 {"samples", c.samples},
                 {"spread", c.spread},
                 {"seed", c.effective_task_seed()},
                 {"ridge", c.ridge},
                 {"weights_file", c.weights_file ? json(*c.weights_file) : json(nullptr)}};
    j["eval"] = {{"noise_draws", c.noise_draws},
                 {"tie_break", c.tie == TieBreak::LowestIndex ? "lowest" : "uniform"}};
    if (c.sweep) {
        const auto& g = *c.sweep;
        j["sweep"] = {{"groups", g.groups},
                      {"relays_per_group", g.relays_per_group},
                      {"p_relay_w", g.p_relay_w},
                      {"d_max_m", g.d_max_m},
                      {"direct_link", g.direct_link},
                      {"trials", g.trials}};
    } else {
        j["sweep"] = nullptr;
    }
    return j;
}

std::string config_hash(const ExperimentConfig& cfg) {
    const auto text = canonical_json(cfg).dump();
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

}  // namespace airfc
