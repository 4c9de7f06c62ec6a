#include "airfc/channel_model.hpp"

#include "airfc/errors.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace airfc {

namespace {

constexpr double kSpeedOfLight = 299792458.0;

bool all_finite(const CMatrix& m) {
    return m.allFinite();
}

}  // namespace

std::vector<int> Topology::relays_per_group() const {
    std::vector<int> k;
    k.reserve(relay_positions.size());
    for (const auto& g : relay_positions) k.push_back(static_cast<int>(g.size()));
    return k;
}

std::size_t Topology::total_relays() const {
    std::size_t n = 0;
    for (const auto& g : relay_positions) n += g.size();
    return n;
}

Topology generate_topology(double d_max_m, const std::vector<int>& relays_per_group,
                           const Heights& heights, std::uint64_t seed) {
    if (!(d_max_m > 0.0) || !std::isfinite(d_max_m))
        throw std::invalid_argument("generate_topology: area length must be positive");
    if (relays_per_group.empty())
        throw std::invalid_argument("generate_topology: need at least one relay group");
    std::size_t total = 0;
    for (int k : relays_per_group) {
        if (k < 1) throw std::invalid_argument("generate_topology: every group needs at least one relay");
        total += static_cast<std::size_t>(k);
    }
    if (total > kMaxTotalRelays)
        throw resource_limit("generate_topology: more than 10000 relays requested");

    Topology topo;
    topo.area_length_m = d_max_m;
    topo.heights = heights;
    topo.bs_position = {0.0, d_max_m / 2.0, heights.bs_m};
    topo.rx_position = {d_max_m, d_max_m / 2.0, heights.rx_m};

    const auto num_groups = relays_per_group.size();
    const double slab = d_max_m / static_cast<double>(num_groups);
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    topo.relay_positions.resize(num_groups);
    for (std::size_t l = 0; l < num_groups; ++l) {
        auto& group = topo.relay_positions[l];
        group.reserve(static_cast<std::size_t>(relays_per_group[l]));
        for (int k = 0; k < relays_per_group[l]; ++k) {
            const double x = (static_cast<double>(l) + unit(rng)) * slab;
            const double y = unit(rng) * d_max_m;
            group.push_back({x, y, heights.relay_m});
        }
    }
    return topo;
}

Topology generate_topology(double d_max_m, int num_groups, int relays_per_group,
                           const Heights& heights, std::uint64_t seed) {
    if (num_groups < 1) throw std::invalid_argument("generate_topology: need at least one relay group");
    return generate_topology(d_max_m, std::vector<int>(static_cast<std::size_t>(num_groups), relays_per_group),
                             heights, seed);
}

std::string_view to_string(LinkKind kind) {
    switch (kind) {
        case LinkKind::BsRelay: return "bs-relay";
        case LinkKind::RelayRelay: return "relay-relay";
        case LinkKind::RelayRx: return "relay-rx";
        case LinkKind::BsRx: return "bs-rx";
    }
    return "?";
}

std::string_view to_string(PathlossModel model) {
    switch (model) {
        case PathlossModel::UmiStreetCanyon: return "umi-street-canyon";
        case PathlossModel::Sidelink: return "sidelink";
    }
    return "?";
}

std::string_view to_string(LosState state) {
    switch (state) {
        case LosState::Los: return "los";
        case LosState::Nlos: return "nlos";
        case LosState::Probabilistic: return "probabilistic";
    }
    return "?";
}

PathlossModel pathloss_model_from_string(std::string_view id) {
    if (id == "umi-street-canyon" || id == "umi") return PathlossModel::UmiStreetCanyon;
    if (id == "sidelink") return PathlossModel::Sidelink;
    throw unsupported_model("unknown pathloss model '" + std::string(id) + "'");
}

LosState los_state_from_string(std::string_view id) {
    if (id == "los") return LosState::Los;
    if (id == "nlos") return LosState::Nlos;
    if (id == "probabilistic") return LosState::Probabilistic;
    throw std::invalid_argument("unknown LoS state '" + std::string(id) + "'");
}

double pathloss_db(const LinkParams& link, double distance_3d_m, double fc_hz, const PathlossTable& table) {
    if (!(fc_hz > 0.0)) throw std::invalid_argument("pathloss_db: carrier frequency must be positive");
    if (link.los == LosState::Probabilistic)
        throw std::invalid_argument("pathloss_db: LoS state must be resolved before evaluating pathloss");
    const double d = std::max(distance_3d_m, table.min_distance_m);
    const double fc_ghz = fc_hz / 1e9;

    switch (link.model) {
        case PathlossModel::UmiStreetCanyon: {
            const double h_bs = std::max(link.high_end_height_m, link.low_end_height_m);
            const double h_ut = std::min(link.high_end_height_m, link.low_end_height_m);
            // effective environment height 1 m; breakpoint compared against the 3D distance
            const double d_bp = 4.0 * (h_bs - 1.0) * (h_ut - 1.0) * fc_hz / kSpeedOfLight;
            double los = table.umi_los.eval(d, fc_ghz);
            if (d > d_bp && d_bp > 0.0) {
                const double far = table.umi_los_far.eval(d, fc_ghz) -
                                   9.5 * std::log10(d_bp * d_bp + (h_bs - h_ut) * (h_bs - h_ut));
                los = std::max(los, far);  // keeps the curve monotone across the breakpoint
            }
            if (link.los == LosState::Los) return los;
            const double nlos = table.umi_nlos.eval(d, fc_ghz) - table.umi_nlos_height_slope * (h_ut - 1.5);
            return std::max(los, nlos);
        }
        case PathlossModel::Sidelink: {
            const double los = table.sidelink_los.eval(d, fc_ghz);
            if (link.los == LosState::Los) return los;
            return std::max(los, table.sidelink_nlos.eval(d, fc_ghz));
        }
    }
    throw unsupported_model("pathloss_db: unknown model id");
}

double los_probability(double d_2d_m) {
    if (d_2d_m < 0.0) throw std::invalid_argument("los_probability: distance must be non-negative");
    if (d_2d_m <= 18.0) return 1.0;
    const double e = std::exp(-d_2d_m / 36.0);
    return (18.0 / d_2d_m) * (1.0 - e) + e;
}

CMatrix draw_small_scale(const LinkParams& link, Index rows, Index cols, Rng& rng) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("draw_small_scale: dimensions must be positive");
    if (link.kind != LinkKind::BsRx) return complex_gaussian_matrix(rng, rows, cols);

    const double kappa = link.rician_kappa;
    if (kappa < 0.0) throw std::invalid_argument("draw_small_scale: Rician factor must be non-negative");
    const CMatrix los = CMatrix::Ones(rows, cols);
    if (std::isinf(kappa)) return los;
    const CMatrix scattered = complex_gaussian_matrix(rng, rows, cols);
    return std::sqrt(kappa / (kappa + 1.0)) * los + std::sqrt(1.0 / (kappa + 1.0)) * scattered;
}

std::vector<int> ChannelSet::relays_per_group() const {
    std::vector<int> k;
    for (std::size_t l = 0; l < num_groups(); ++l) k.push_back(static_cast<int>(hops[l].rows()));
    return k;
}

void ChannelSet::validate() const {
    if (hops.size() < 2) throw shape_error("channel set needs at least two hops (one relay group)");
    for (std::size_t i = 1; i < hops.size(); ++i)
        if (hops[i].cols() != hops[i - 1].rows())
            throw shape_error("channel set hop " + std::to_string(i + 1) + " does not chain with hop " +
                              std::to_string(i));
    for (const auto& h : hops)
        if (!all_finite(h)) throw shape_error("channel set contains non-finite entries");
    if (direct) {
        if (direct->rows() != n_r() || direct->cols() != n_t())
            throw shape_error("direct link must be N_r x N_t");
        if (!all_finite(*direct)) throw shape_error("direct link contains non-finite entries");
    }
}

namespace {

struct Node {
    Vec3 position;
};

// Fills one hop between transmitters `tx` and receivers `rx`. Antennas of a
// multi-antenna node share its position, so `tx`/`rx` may repeat coordinates.
CMatrix draw_hop(const std::vector<Vec3>& tx, const std::vector<Vec3>& rx, LinkParams link,
                 const ChannelSetConfig& cfg, Rng& rng, bool per_node_los_tx, bool per_node_los_rx) {
    const auto rows = static_cast<Index>(rx.size());
    const auto cols = static_cast<Index>(tx.size());
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // LoS draws: one per (distinct rx node, distinct tx node); antennas of one array share a draw.
    std::vector<std::uint8_t> los(static_cast<std::size_t>(rows * cols), link.los == LosState::Los);
    if (link.los == LosState::Probabilistic) {
        for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < cols; ++j) {
                const bool reuse_row = !per_node_los_rx && i > 0;
                const bool reuse_col = !per_node_los_tx && j > 0;
                auto& slot = los[static_cast<std::size_t>(i * cols + j)];
                if (reuse_row) slot = los[static_cast<std::size_t>(j)];
                else if (reuse_col) slot = los[static_cast<std::size_t>(i * cols)];
                else slot = unit(rng) < los_probability(distance_2d(rx[i], tx[j]));
            }
    }

    CMatrix h = draw_small_scale(link, rows, cols, rng);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) {
            LinkParams resolved = link;
            resolved.los = los[static_cast<std::size_t>(i * cols + j)] ? LosState::Los : LosState::Nlos;
            resolved.high_end_height_m = std::max(tx[j].z, rx[i].z);
            resolved.low_end_height_m = std::min(tx[j].z, rx[i].z);
            const double pl = pathloss_db(resolved, distance_3d(tx[j], rx[i]), cfg.carrier_frequency_hz,
                                          cfg.links.table);
            h(i, j) *= std::sqrt(db_to_linear(-pl));
        }
    return h;
}

}  // namespace

ChannelSet generate_channel_set(const Topology& topo, const ChannelSetConfig& cfg, std::uint64_t seed) {
    if (topo.relay_positions.empty()) throw std::invalid_argument("generate_channel_set: empty topology");
    if (cfg.n_t < 1 || cfg.n_r < 1) throw std::invalid_argument("generate_channel_set: antenna counts must be positive");
    if (topo.total_relays() > kMaxTotalRelays)
        throw resource_limit("generate_channel_set: more than 10000 relays");
    for (const auto& g : topo.relay_positions)
        if (g.empty()) throw std::invalid_argument("generate_channel_set: empty relay group");

    const std::vector<Vec3> bs(static_cast<std::size_t>(cfg.n_t), topo.bs_position);
    const std::vector<Vec3> rx(static_cast<std::size_t>(cfg.n_r), topo.rx_position);

    ChannelSet ch;
    ch.carrier_frequency_hz = cfg.carrier_frequency_hz;
    ch.realization_seed = seed;

    Rng rng(seed);
    const auto num_groups = topo.relay_positions.size();
    ch.hops.reserve(num_groups + 1);
    ch.hops.push_back(draw_hop(bs, topo.relay_positions.front(), cfg.links.bs_relay, cfg, rng, false, true));
    for (std::size_t l = 1; l < num_groups; ++l)
        ch.hops.push_back(draw_hop(topo.relay_positions[l - 1], topo.relay_positions[l], cfg.links.relay_relay,
                                   cfg, rng, true, true));
    ch.hops.push_back(draw_hop(topo.relay_positions.back(), rx, cfg.links.relay_rx, cfg, rng, true, false));

    if (cfg.direct_link) {
        // separate stream so toggling the direct link leaves the relay hops untouched
        Rng direct_rng(derive_seed(seed, {0xD1EC7ULL}));
        LinkParams link = cfg.links.bs_rx;
        link.kind = LinkKind::BsRx;
        ch.direct = draw_hop(bs, rx, link, cfg, direct_rng, false, false);
    }
    return ch;
}

}  // namespace airfc
