#pragma once

#include "airfc/rng.hpp"
#include "airfc/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace airfc {

// ---------------------------------------------------------------------------
// Topology
// ---------------------------------------------------------------------------

struct Heights {
    double bs_m = 5.0;
    double rx_m = 5.0;
    double relay_m = 1.5;
};

/// Serial relay layout: a D_max x D_max square split into L slabs of width D_max/L
/// along the BS->Rx axis (x). Group l (0-based) lives in slab l.
struct Topology {
    Vec3 bs_position;
    Vec3 rx_position;
    std::vector<std::vector<Vec3>> relay_positions;
    double area_length_m = 0.0;
    Heights heights;

    std::size_t num_groups() const { return relay_positions.size(); }
    std::vector<int> relays_per_group() const;
    std::size_t total_relays() const;
};

/// Hard cap on relays in one topology / channel set.
inline constexpr std::size_t kMaxTotalRelays = 10000;

Topology generate_topology(double d_max_m, const std::vector<int>& relays_per_group,
                           const Heights& heights, std::uint64_t seed);

Topology generate_topology(double d_max_m, int num_groups, int relays_per_group,
                           const Heights& heights, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Pathloss
// ---------------------------------------------------------------------------

enum class LinkKind { BsRelay, RelayRelay, RelayRx, BsRx };
enum class PathlossModel { UmiStreetCanyon, Sidelink };
enum class LosState { Los, Nlos, Probabilistic };

std::string_view to_string(LinkKind kind);
std::string_view to_string(PathlossModel model);
std::string_view to_string(LosState state);
PathlossModel pathloss_model_from_string(std::string_view id);
LosState los_state_from_string(std::string_view id);

/// PL[dB] = intercept + distance_slope*log10(d[m]) + frequency_slope*log10(f_c[GHz])
struct PathlossCoefficients {
    double intercept = 0.0;
    double distance_slope = 0.0;
    double frequency_slope = 0.0;

    double eval(double d_m, double fc_ghz) const {
        return intercept + distance_slope * std::log10(d_m) + frequency_slope * std::log10(fc_ghz);
    }
};

/// Closed-form coefficients; defaults are the TR 38.901 UMi street canyon forms and the
/// TR 37.885 urban sidelink forms. Every entry can be overridden from a config file.
struct PathlossTable {
    PathlossCoefficients umi_los{32.4, 21.0, 20.0};
    PathlossCoefficients umi_los_far{32.4, 40.0, 20.0};  // beyond breakpoint, before the -9.5 log10 term
    PathlossCoefficients umi_nlos{22.4, 35.3, 21.3};
    double umi_nlos_height_slope = 0.3;                  // dB per metre of (h_ut - 1.5)
    PathlossCoefficients sidelink_los{38.77, 16.7, 18.2};
    PathlossCoefficients sidelink_nlos{36.85, 30.0, 18.9};
    double min_distance_m = 1.0;
};

struct LinkParams {
    LinkKind kind = LinkKind::BsRelay;
    PathlossModel model = PathlossModel::UmiStreetCanyon;
    double rician_kappa = 0.0;  // linear; only read for BsRx
    LosState los = LosState::Nlos;
    double high_end_height_m = 5.0;
    double low_end_height_m = 1.5;
};

/// Pathloss in dB. `link.los` must be resolved (Los or Nlos); distances below
/// `table.min_distance_m` are clamped. NLoS never reports less loss than LoS.
double pathloss_db(const LinkParams& link, double distance_3d_m, double fc_hz,
                   const PathlossTable& table = {});

/// UMi street-canyon LoS probability, min(18/d,1)(1-exp(-d/36)) + exp(-d/36).
double los_probability(double d_2d_m);

/// Small-scale coefficients with unit per-entry second moment. BsRx links are Rician around
/// an all-ones rank-one LoS component; every other link is i.i.d. CN(0,1).
CMatrix draw_small_scale(const LinkParams& link, Index rows, Index cols, Rng& rng);

// ---------------------------------------------------------------------------
// Channel sets
// ---------------------------------------------------------------------------

struct LinkConfig {
    LinkParams bs_relay{LinkKind::BsRelay, PathlossModel::UmiStreetCanyon, 0.0, LosState::Nlos};
    LinkParams relay_relay{LinkKind::RelayRelay, PathlossModel::Sidelink, 0.0, LosState::Probabilistic};
    LinkParams relay_rx{LinkKind::RelayRx, PathlossModel::UmiStreetCanyon, 0.0, LosState::Nlos};
    LinkParams bs_rx{LinkKind::BsRx, PathlossModel::UmiStreetCanyon, 1.0, LosState::Nlos};
    PathlossTable table;
};

struct ChannelSetConfig {
    int n_t = 1;
    int n_r = 1;
    double carrier_frequency_hz = 28e9;
    bool direct_link = false;
    LinkConfig links;
};

/// H_1 .. H_{L+1} plus an optional direct BS->Rx matrix. hops[0] is H_1 (K_1 x N_t),
/// hops[l] is H_{l+1} (K_{l+1} x K_l), hops.back() is H_{L+1} (N_r x K_L).
struct ChannelSet {
    std::optional<CMatrix> direct;
    std::vector<CMatrix> hops;
    double carrier_frequency_hz = 0.0;
    std::uint64_t realization_seed = 0;

    std::size_t num_groups() const { return hops.empty() ? 0 : hops.size() - 1; }
    Index n_t() const { return hops.front().cols(); }
    Index n_r() const { return hops.back().rows(); }
    Index group_size(std::size_t group) const { return hops.at(group).rows(); }
    std::vector<int> relays_per_group() const;

    /// Throws shape_error if adjacent hops do not chain or an entry is non-finite.
    void validate() const;
};

ChannelSet generate_channel_set(const Topology& topo, const ChannelSetConfig& cfg, std::uint64_t seed);

}  // namespace airfc
