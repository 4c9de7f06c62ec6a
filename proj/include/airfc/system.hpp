#pragma once

#include "airfc/channel_model.hpp"
#include "airfc/rng.hpp"
#include "airfc/types.hpp"

#include <vector>

namespace airfc {

/// Optimisation variables: precoder F1 (N_t x N), combiner F2 (N x N_r) and one gain
/// vector per relay group (A_l = diag(gains[l])).
struct AirFcParams {
    CMatrix f1;
    CMatrix f2;
    std::vector<CVector> gains;
};

/// Per-group relay noise variance (injected before amplification) and receiver noise variance.
struct NoiseModel {
    std::vector<double> sigma_u_sq;
    double sigma_c_sq = 0.0;

    static NoiseModel uniform(std::size_t num_groups, double relay_sq, double receiver_sq) {
        return {std::vector<double>(num_groups, relay_sq), receiver_sq};
    }
    void validate(std::size_t num_groups) const;
};

struct PowerBudget {
    double p_max_tx = 0.0;
    std::vector<RVector> p_relay;  // p_relay[l](k) in watts

    static PowerBudget uniform(double p_max, const std::vector<int>& relays_per_group, double p_relay_w);
    void validate(const std::vector<int>& relays_per_group) const;
};

struct ObjectiveValue {
    double imitation_error = 0.0;
    double noise_penalty = 0.0;
    double total = 0.0;
};

/// Checks that `gains` has one vector per group of the matching length.
void check_gains(const ChannelSet& ch, const std::vector<CVector>& gains);

/// H_eff = H_0 + H_{L+1} A_L H_L ... A_1 H_1 (H_0 omitted when absent).
CMatrix effective_channel(const ChannelSet& ch, const std::vector<CVector>& gains);

/// Relay cascade only, H_{L+1} A_L ... A_1 H_1.
CMatrix cascade_channel(const ChannelSet& ch, const std::vector<CVector>& gains);

/// T_j = H_{L+1} A_L H_L ... H_{j+1} A_j for 0-based group j.
CMatrix transfer_matrix(const ChannelSet& ch, const std::vector<CVector>& gains, std::size_t group);

/// R_n^in = sigma_c^2 I + sum_j sigma_{u,j}^2 T_j T_j^H.
CMatrix noise_covariance(const ChannelSet& ch, const std::vector<CVector>& gains, const NoiseModel& noise);

/// Instantaneous input-power surrogate per relay of `group`:
/// ||row k of (H_l A_{l-1} ... A_1 H_1 F1)||^2 + sigma_{u,l}^2.
/// With `include_upstream_noise`, amplified noise injected at earlier groups is added too.
RVector relay_input_power(const ChannelSet& ch, const std::vector<CVector>& gains, const CMatrix& f1,
                          std::size_t group, const NoiseModel& noise, bool include_upstream_noise = false);

/// min{N_t, N_r, K_1..K_L, rank(H_l)}; zero if any argument is zero.
int chain_rank_bound(int n_t, int n_r, const std::vector<int>& relays_per_group, const std::vector<int>& hop_ranks);

/// Number of singular values above rel_tol * sigma_max.
int numerical_rank(const CMatrix& m, double rel_tol = 1e-10);

/// Bound for the realized map of a channel set. Without a direct link this is
/// chain_rank_bound on the hop ranks; a direct link adds at most rank(H_0).
int realized_rank_bound(const ChannelSet& ch);

/// F2 H_eff F1.
CMatrix realized_map(const AirFcParams& params, const ChannelSet& ch);

/// ||F2 H_eff F1 - W||_F^2 + tr(F2 R_n^in F2^H). Requires square W with N_t = N_r = N.
ObjectiveValue objective(const AirFcParams& params, const ChannelSet& ch, const CMatrix& w, const NoiseModel& noise);

/// One noisy pass through the physical chain: fresh CN noise is injected at every relay
/// group and at the receiver, then propagated hop by hop. Returns F2 (H_eff F1 x + n_in).
CVector simulate_forward(const AirFcParams& params, const ChannelSet& ch, const NoiseModel& noise,
                         const CVector& x, Rng& rng);

}  // namespace airfc
