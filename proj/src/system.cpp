#include "airfc/system.hpp"

#include "airfc/errors.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace airfc {

namespace {

// diag(a) * m without forming the diagonal matrix
CMatrix scale_rows(const CVector& a, const CMatrix& m) {
    return a.asDiagonal() * m;
}

CVector draw_noise(Rng& rng, Index n, double variance) {
    if (variance <= 0.0) return CVector::Zero(n);
    return complex_gaussian_vector(rng, n, variance);
}

}  // namespace

void NoiseModel::validate(std::size_t num_groups) const {
    if (sigma_u_sq.size() != num_groups)
        throw shape_error("noise model has " + std::to_string(sigma_u_sq.size()) + " relay variances for " +
                          std::to_string(num_groups) + " groups");
    for (double s : sigma_u_sq)
        if (!(s >= 0.0)) throw std::invalid_argument("relay noise variance must be non-negative");
    if (!(sigma_c_sq >= 0.0)) throw std::invalid_argument("receiver noise variance must be non-negative");
}

PowerBudget PowerBudget::uniform(double p_max, const std::vector<int>& relays_per_group, double p_relay_w) {
    PowerBudget b;
    b.p_max_tx = p_max;
    for (int k : relays_per_group) b.p_relay.push_back(RVector::Constant(k, p_relay_w));
    return b;
}

void PowerBudget::validate(const std::vector<int>& relays_per_group) const {
    if (!(p_max_tx > 0.0)) throw std::invalid_argument("transmit power budget must be positive");
    if (p_relay.size() != relays_per_group.size()) throw shape_error("relay budget group count mismatch");
    for (std::size_t l = 0; l < p_relay.size(); ++l) {
        if (p_relay[l].size() != relays_per_group[l]) throw shape_error("relay budget size mismatch");
        if (!(p_relay[l].array() > 0.0).all()) throw std::invalid_argument("relay power budgets must be positive");
    }
}

void check_gains(const ChannelSet& ch, const std::vector<CVector>& gains) {
    if (gains.size() != ch.num_groups())
        throw shape_error("expected " + std::to_string(ch.num_groups()) + " gain vectors, got " +
                          std::to_string(gains.size()));
    for (std::size_t l = 0; l < gains.size(); ++l)
        if (gains[l].size() != ch.group_size(l))
            throw shape_error("gain vector " + std::to_string(l) + " has length " + std::to_string(gains[l].size()) +
                              ", group has " + std::to_string(ch.group_size(l)) + " relays");
}

CMatrix cascade_channel(const ChannelSet& ch, const std::vector<CVector>& gains) {
    check_gains(ch, gains);
    CMatrix acc = ch.hops.front();
    for (std::size_t l = 0; l < gains.size(); ++l) acc = ch.hops[l + 1] * scale_rows(gains[l], acc);
    return acc;
}

CMatrix effective_channel(const ChannelSet& ch, const std::vector<CVector>& gains) {
    CMatrix h = cascade_channel(ch, gains);
    if (ch.direct) h += *ch.direct;
    return h;
}

CMatrix transfer_matrix(const ChannelSet& ch, const std::vector<CVector>& gains, std::size_t group) {
    check_gains(ch, gains);
    if (group >= ch.num_groups()) throw std::out_of_range("transfer_matrix: group index out of range");
    // build right to left: start at A_j, then H_{j+1}, A_{j+1}, ..., H_{L+1}
    CMatrix t = gains[group].asDiagonal();
    for (std::size_t l = group + 1; l < gains.size(); ++l) t = scale_rows(gains[l], ch.hops[l] * t);
    return ch.hops.back() * t;
}

CMatrix noise_covariance(const ChannelSet& ch, const std::vector<CVector>& gains, const NoiseModel& noise) {
    check_gains(ch, gains);
    noise.validate(ch.num_groups());
    const Index n_r = ch.n_r();
    CMatrix r = CMatrix::Identity(n_r, n_r) * noise.sigma_c_sq;
    for (std::size_t j = 0; j < ch.num_groups(); ++j) {
        if (noise.sigma_u_sq[j] == 0.0) continue;
        const CMatrix t = transfer_matrix(ch, gains, j);
        r.noalias() += noise.sigma_u_sq[j] * (t * t.adjoint());
    }
    return r;
}

RVector relay_input_power(const ChannelSet& ch, const std::vector<CVector>& gains, const CMatrix& f1,
                          std::size_t group, const NoiseModel& noise, bool include_upstream_noise) {
    check_gains(ch, gains);
    if (group >= ch.num_groups()) throw std::out_of_range("relay_input_power: group index out of range");
    noise.validate(ch.num_groups());
    if (f1.rows() != ch.n_t()) throw shape_error("relay_input_power: F1 must have N_t rows");

    CMatrix v = ch.hops.front() * f1;
    for (std::size_t l = 0; l < group; ++l) v = ch.hops[l + 1] * scale_rows(gains[l], v);
    RVector p = v.rowwise().squaredNorm();
    p.array() += noise.sigma_u_sq[group];

    if (include_upstream_noise) {
        for (std::size_t j = 0; j < group; ++j) {
            if (noise.sigma_u_sq[j] == 0.0) continue;
            // H_l A_{l-1} ... H_{j+1} A_j
            CMatrix t = gains[j].asDiagonal();
            for (std::size_t m = j + 1; m < group; ++m) t = scale_rows(gains[m], ch.hops[m] * t);
            t = ch.hops[group] * t;
            p += noise.sigma_u_sq[j] * t.rowwise().squaredNorm();
        }
    }
    return p;
}

int chain_rank_bound(int n_t, int n_r, const std::vector<int>& relays_per_group, const std::vector<int>& hop_ranks) {
    int bound = std::min(n_t, n_r);
    for (int k : relays_per_group) bound = std::min(bound, k);
    for (int r : hop_ranks) bound = std::min(bound, r);
    return std::max(bound, 0);
}

int numerical_rank(const CMatrix& m, double rel_tol) {
    if (m.size() == 0) return 0;
    Eigen::BDCSVD<CMatrix> svd(m);
    const RVector& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) return 0;
    const double cutoff = rel_tol * s(0);
    return static_cast<int>((s.array() > cutoff).count());
}

int realized_rank_bound(const ChannelSet& ch) {
    std::vector<int> ranks;
    ranks.reserve(ch.hops.size());
    for (const auto& h : ch.hops) ranks.push_back(numerical_rank(h));
    const int n_t = static_cast<int>(ch.n_t());
    const int n_r = static_cast<int>(ch.n_r());
    int bound = chain_rank_bound(n_t, n_r, ch.relays_per_group(), ranks);
    if (ch.direct) bound = std::min({n_t, n_r, bound + numerical_rank(*ch.direct)});
    return bound;
}

CMatrix realized_map(const AirFcParams& params, const ChannelSet& ch) {
    return params.f2 * effective_channel(ch, params.gains) * params.f1;
}

ObjectiveValue objective(const AirFcParams& params, const ChannelSet& ch, const CMatrix& w, const NoiseModel& noise) {
    if (w.rows() != w.cols()) throw shape_error("objective: target W must be square");
    const Index n = w.rows();
    if (ch.n_t() != n || ch.n_r() != n) throw shape_error("objective: requires N_t = N_r = N");
    if (params.f1.rows() != n || params.f1.cols() != n || params.f2.rows() != n || params.f2.cols() != n)
        throw shape_error("objective: F1 and F2 must be N x N");
    noise.validate(ch.num_groups());

    ObjectiveValue v;
    v.imitation_error = (realized_map(params, ch) - w).squaredNorm();
    // tr(F2 R F2^H) expanded term by term; each summand is a squared norm, so the sum is >= 0
    double penalty = noise.sigma_c_sq * params.f2.squaredNorm();
    for (std::size_t j = 0; j < ch.num_groups(); ++j) {
        if (noise.sigma_u_sq[j] == 0.0) continue;
        penalty += noise.sigma_u_sq[j] * (params.f2 * transfer_matrix(ch, params.gains, j)).squaredNorm();
    }
    v.noise_penalty = penalty;
    v.total = v.imitation_error + v.noise_penalty;
    return v;
}

CVector simulate_forward(const AirFcParams& params, const ChannelSet& ch, const NoiseModel& noise, const CVector& x,
                         Rng& rng) {
    check_gains(ch, params.gains);
    const CVector s = params.f1 * x;
    CVector u = ch.hops.front() * s + draw_noise(rng, ch.group_size(0), noise.sigma_u_sq[0]);
    for (std::size_t l = 0; l + 1 < ch.num_groups(); ++l) {
        const CVector forwarded = params.gains[l].cwiseProduct(u);
        u = ch.hops[l + 1] * forwarded + draw_noise(rng, ch.group_size(l + 1), noise.sigma_u_sq[l + 1]);
    }
    CVector r = ch.hops.back() * params.gains.back().cwiseProduct(u);
    if (ch.direct) r += *ch.direct * s;
    r += draw_noise(rng, ch.n_r(), noise.sigma_c_sq);
    return params.f2 * r;
}

}  // namespace airfc
