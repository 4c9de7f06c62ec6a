#include "airfc/ao_solver.hpp"

#include "airfc/errors.hpp"
#include "airfc/format.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace airfc {

std::string_view to_string(RegularizerMode mode) {
    switch (mode) {
        case RegularizerMode::NoiseAware: return "noise-aware";
        case RegularizerMode::FixedEpsilon: return "fixed-epsilon";
        case RegularizerMode::Off: return "off";
    }
    return "?";
}

RegularizerMode regularizer_mode_from_string(std::string_view id) {
    if (id == "noise-aware") return RegularizerMode::NoiseAware;
    if (id == "fixed-epsilon") return RegularizerMode::FixedEpsilon;
    if (id == "off") return RegularizerMode::Off;
    throw std::invalid_argument("unknown regularizer mode '" + std::string(id) + "'");
}

std::string_view to_string(Termination t) {
    switch (t) {
        case Termination::Converged: return "converged";
        case Termination::MaxIterations: return "max-iterations";
        case Termination::NonFinite: return "non-finite";
    }
    return "?";
}

void AoConfig::validate() const {
    if (max_iters < 1) throw std::invalid_argument("ao.max_iters must be >= 1");
    if (!(rel_tolerance > 0.0)) throw std::invalid_argument("ao.rel_tolerance must be positive");
    if (patience < 1) throw std::invalid_argument("ao.patience must be >= 1");
    if (!(bisection_tolerance > 0.0)) throw std::invalid_argument("ao.bisection_tolerance must be positive");
    if (bisection_max_steps < 1) throw std::invalid_argument("ao.bisection_max_steps must be >= 1");
    if (!(init_gain_rho > 0.0)) throw std::invalid_argument("ao.init_gain_rho must be positive");
    if (!(fixed_epsilon >= 0.0)) throw std::invalid_argument("ao.fixed_epsilon must be non-negative");
}

// ---------------------------------------------------------------------------
// Block 1
// ---------------------------------------------------------------------------

F1Update update_f1(const CMatrix& xi, const CMatrix& w, double p_max, const AoConfig& cfg) {
    if (!(p_max > 0.0)) throw std::invalid_argument("update_f1: power budget must be positive");
    if (xi.rows() != w.rows()) throw shape_error("update_f1: Xi and W row counts differ");

    F1Update out;
    const Index n_t = xi.cols();
    if (xi.squaredNorm() == 0.0) {
        out.f1 = CMatrix::Zero(n_t, w.cols());
        out.rank_deficient = w.squaredNorm() > 0.0;
        return out;
    }

    // Xi = P S Q^H  =>  F1(lambda) = Q diag(s / (s^2 + lambda)) P^H W
    Eigen::BDCSVD<CMatrix> svd(xi, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const RVector& s = svd.singularValues();
    const CMatrix proj = svd.matrixU().adjoint() * w;  // r x N
    const RVector proj_sq = proj.rowwise().squaredNorm();
    const double s_cut = s(0) * 1e-13;

    auto coeff = [&](Index i, double lambda) {
        if (lambda == 0.0) return s(i) > s_cut ? 1.0 / s(i) : 0.0;
        return s(i) / (s(i) * s(i) + lambda);
    };
    auto norm_sq = [&](double lambda) {
        double acc = 0.0;
        for (Index i = 0; i < s.size(); ++i) {
            const double c = coeff(i, lambda);
            acc += c * c * proj_sq(i);
        }
        return acc;
    };
    auto build = [&](double lambda) {
        RVector c(s.size());
        for (Index i = 0; i < s.size(); ++i) c(i) = coeff(i, lambda);
        return CMatrix(svd.matrixV() * (c.asDiagonal() * proj));
    };

    double lambda = 0.0;
    if (norm_sq(0.0) > p_max) {
        double lo = 0.0;
        double hi = std::max(s.squaredNorm() / static_cast<double>(std::max<Index>(n_t, 1)),
                             std::numeric_limits<double>::min());
        int grow = 0;
        while (norm_sq(hi) > p_max && grow++ < 2000) hi *= 2.0;
        int steps = 0;
        while (steps < cfg.bisection_max_steps) {
            const double f_hi = norm_sq(hi);
            if (std::abs(f_hi - p_max) <= cfg.bisection_tolerance * p_max) break;
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            if (norm_sq(mid) > p_max) lo = mid;
            else hi = mid;
            ++steps;
        }
        out.bisection_steps = steps;
        lambda = hi;  // feasible side of the bracket
    }
    out.lambda = lambda;
    out.f1 = build(lambda);

    const double f1_sq = out.f1.squaredNorm();
    if (f1_sq > p_max) {
        out.f1 *= std::sqrt(p_max / f1_sq);
        out.rescaled = true;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Block 2
// ---------------------------------------------------------------------------

F2Update update_f2(const CMatrix& u, const CMatrix& r_n, const CMatrix& w) {
    if (r_n.rows() != u.rows() || r_n.cols() != u.rows()) throw shape_error("update_f2: R_n must be N_r x N_r");
    if (w.cols() != u.cols()) throw shape_error("update_f2: W and U column counts differ");

    F2Update out;
    CMatrix s = u * u.adjoint() + r_n;
    s = 0.5 * (s + s.adjoint());
    const CMatrix rhs = u * w.adjoint();  // S F2^H = U W^H

    Eigen::LDLT<CMatrix> ldlt(s);
    if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-15)) {
        const double eps = 1e-12 * std::max(s.trace().real(), std::numeric_limits<double>::min());
        s.diagonal().array() += eps;
        ldlt.compute(s);
        out.regularized = true;
    }
    out.f2 = ldlt.solve(rhs).adjoint();
    return out;
}

// ---------------------------------------------------------------------------
// Block 3
// ---------------------------------------------------------------------------

std::vector<CMatrix> fold_suffixes(const ChannelSet& ch, const AirFcParams& params) {
    check_gains(ch, params.gains);
    const std::size_t num_groups = ch.num_groups();
    std::vector<CMatrix> suffix(num_groups);
    suffix[num_groups - 1] = params.f2 * ch.hops[num_groups];
    for (std::size_t l = num_groups - 1; l-- > 0;)
        suffix[l] = (suffix[l + 1] * params.gains[l + 1].asDiagonal()) * ch.hops[l + 1];
    return suffix;
}

BlockFold fold_chain(const ChannelSet& ch, const AirFcParams& params, std::size_t group) {
    check_gains(ch, params.gains);
    if (group >= ch.num_groups()) throw std::out_of_range("fold_chain: group index out of range");
    BlockFold fold;
    fold.v = ch.hops.front() * params.f1;
    for (std::size_t l = 0; l < group; ++l) fold.v = ch.hops[l + 1] * (params.gains[l].asDiagonal() * fold.v);
    fold.u = params.f2 * ch.hops.back();
    for (std::size_t l = ch.num_groups() - 1; l > group; --l)
        fold.u = (fold.u * params.gains[l].asDiagonal()) * ch.hops[l];
    return fold;
}

CMatrix residual_target(const CMatrix& w, const CMatrix& realized, const BlockFold& fold, const CVector& gains) {
    return w - (realized - fold.u * gains.asDiagonal() * fold.v);
}

RVector noise_aware_regularizer(const CMatrix& u_l, double sigma_u_sq) {
    if (!(sigma_u_sq >= 0.0)) throw std::invalid_argument("noise_aware_regularizer: variance must be non-negative");
    return sigma_u_sq * u_l.colwise().squaredNorm().transpose();
}

CMatrix gain_gram(const BlockFold& fold) {
    const CMatrix vv = fold.v * fold.v.adjoint();
    const CMatrix uu = fold.u.adjoint() * fold.u;
    return vv.conjugate().cwiseProduct(uu);
}

CVector gain_rhs(const BlockFold& fold, const CMatrix& e) {
    const CMatrix ue = fold.u.adjoint() * e;  // K x N
    return ue.cwiseProduct(fold.v.conjugate()).rowwise().sum();
}

GainSolve solve_relay_gains(const BlockFold& fold, const CMatrix& e, const RVector& d) {
    const Index k = fold.u.cols();
    if (fold.v.rows() != k) throw shape_error("solve_relay_gains: U_l and V_l disagree on K_l");
    if (e.rows() != fold.u.rows() || e.cols() != fold.v.cols()) throw shape_error("solve_relay_gains: E_l shape");
    if (d.size() != k) throw shape_error("solve_relay_gains: regularizer length");

    GainSolve out;
    CMatrix m = gain_gram(fold);
    m.diagonal() += d.cast<cdouble>();
    m = 0.5 * (m + m.adjoint());
    const CVector eta = gain_rhs(fold, e);

    const double tr = m.trace().real();
    if (!(tr > 0.0)) {
        out.gains = CVector::Zero(k);
        out.rcond = 0.0;
        out.regularized = eta.squaredNorm() > 0.0;
        return out;
    }
    Eigen::LDLT<CMatrix> ldlt(m);
    out.rcond = ldlt.info() == Eigen::Success ? ldlt.rcond() : 0.0;
    if (!(out.rcond >= 1e-12)) {
        m.diagonal().array() += 1e-10 * tr;
        ldlt.compute(m);
        out.regularized = true;
    }
    out.gains = ldlt.solve(eta);
    return out;
}

CVector project_gains(const CVector& gains, const RVector& p_in, const RVector& p_budget, int* clipped) {
    if (p_in.size() != gains.size() || p_budget.size() != gains.size())
        throw shape_error("project_gains: length mismatch");
    CVector out = gains;
    int active = 0;
    for (Index k = 0; k < gains.size(); ++k) {
        const double mag = std::abs(gains(k));
        if (mag == 0.0) continue;
        const double bound = std::sqrt(p_budget(k) / p_in(k));
        if (mag > bound) {
            out(k) = gains(k) * (bound / mag);
            ++active;
        }
    }
    if (clipped) *clipped = active;
    return out;
}

// ---------------------------------------------------------------------------
// AO loop
// ---------------------------------------------------------------------------

namespace {

RVector relay_powers(const ChannelSet& ch, const AirFcParams& params, const NoiseModel& noise, std::size_t group,
                     const CMatrix& prefix, bool include_upstream_noise) {
    if (include_upstream_noise) return relay_input_power(ch, params.gains, params.f1, group, noise, true);
    RVector p = prefix.rowwise().squaredNorm();
    p.array() += noise.sigma_u_sq[group];
    return p;
}

RVector block_regularizer(const AoConfig& cfg, const BlockFold& fold, double sigma_u_sq) {
    switch (cfg.regularizer) {
        case RegularizerMode::NoiseAware: return noise_aware_regularizer(fold.u, sigma_u_sq);
        case RegularizerMode::FixedEpsilon: {
            const Index k = fold.u.cols();
            const RVector g = fold.u.colwise().squaredNorm().transpose().cwiseProduct(
                fold.v.rowwise().squaredNorm());
            return RVector::Constant(k, cfg.fixed_epsilon * g.mean());
        }
        case RegularizerMode::Off: break;
    }
    return RVector::Zero(fold.u.cols());
}

AoIteration record(const AirFcParams& params, const ChannelSet& ch, const CMatrix& w, const NoiseModel& noise,
                   const PowerBudget& budget, const AoConfig& cfg) {
    AoIteration it;
    it.objective = objective(params, ch, w, noise);
    it.max_violation = max_constraint_violation(params, ch, noise, budget, cfg.include_upstream_noise);
    double reg = 0.0;
    const auto suffix = fold_suffixes(ch, params);
    for (std::size_t l = 0; l < ch.num_groups(); ++l) {
        BlockFold fold{suffix[l], CMatrix()};
        if (cfg.regularizer == RegularizerMode::FixedEpsilon) fold = fold_chain(ch, params, l);
        const RVector d = block_regularizer(cfg, fold, noise.sigma_u_sq[l]);
        reg += (d.array() * params.gains[l].array().abs2()).sum();
    }
    it.surrogate = it.objective.imitation_error + reg;
    return it;
}

bool finite(const ObjectiveValue& v) {
    return std::isfinite(v.imitation_error) && std::isfinite(v.noise_penalty) && std::isfinite(v.total);
}

}  // namespace

AirFcParams initial_params(const ChannelSet& ch, const NoiseModel& noise, const PowerBudget& budget,
                           const AoConfig& cfg) {
    const Index n_t = ch.n_t();
    const Index n_r = ch.n_r();
    const Index n = n_r;
    AirFcParams p;
    const double scale = std::min(1.0, std::sqrt(budget.p_max_tx / static_cast<double>(std::min(n_t, n))));
    p.f1 = CMatrix::Identity(n_t, n) * scale;
    p.f2 = CMatrix::Identity(n, n_r);
    for (std::size_t l = 0; l < ch.num_groups(); ++l)
        p.gains.push_back(CVector::Constant(ch.group_size(l), cdouble(cfg.init_gain_rho, 0.0)));
    for (std::size_t l = 0; l < ch.num_groups(); ++l) {
        const RVector p_in = relay_input_power(ch, p.gains, p.f1, l, noise, cfg.include_upstream_noise);
        p.gains[l] = project_gains(p.gains[l], p_in, budget.p_relay[l]);
    }
    return p;
}

double max_constraint_violation(const AirFcParams& params, const ChannelSet& ch, const NoiseModel& noise,
                                const PowerBudget& budget, bool include_upstream_noise) {
    double worst = std::max(0.0, params.f1.squaredNorm() / budget.p_max_tx - 1.0);
    for (std::size_t l = 0; l < ch.num_groups(); ++l) {
        const RVector p_in = relay_input_power(ch, params.gains, params.f1, l, noise, include_upstream_noise);
        const RVector used = params.gains[l].array().abs2().matrix().cwiseProduct(p_in);
        worst = std::max(worst, (used.array() / budget.p_relay[l].array() - 1.0).maxCoeff());
    }
    return worst;
}

AoResult run_ao(const ChannelSet& ch, const CMatrix& w, const NoiseModel& noise, const PowerBudget& budget,
                const AoConfig& cfg) {
    cfg.validate();
    ch.validate();
    noise.validate(ch.num_groups());
    budget.validate(ch.relays_per_group());
    if (w.rows() != w.cols()) throw shape_error("run_ao: W must be square");
    if (ch.n_t() != w.rows() || ch.n_r() != w.rows()) throw shape_error("run_ao: requires N_t = N_r = N");

    AoResult res;
    AirFcParams& p = res.params;
    p = initial_params(ch, noise, budget, cfg);
    res.trace.iterations.push_back(record(p, ch, w, noise, budget, cfg));
    if (!finite(res.trace.iterations.back().objective)) {
        res.trace.reason = Termination::NonFinite;
        throw ao_failure("run_ao: non-finite objective at the initial point", res.trace);
    }

    const std::size_t num_groups = ch.num_groups();
    // From a near-silent start the first sweep can leave the objective almost unchanged even
    // though the gains moved to their bounds, so one flat step alone does not end the run.
    int flat_steps = 0;
    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        AoIteration it;
        const CMatrix h_eff = effective_channel(ch, p.gains);

        const F1Update f1 = update_f1(p.f2 * h_eff, w, budget.p_max_tx, cfg);
        p.f1 = f1.f1;
        it.lambda = f1.lambda;

        const F2Update f2 = update_f2(h_eff * p.f1, noise_covariance(ch, p.gains, noise), w);
        p.f2 = f2.f2;
        it.regularized_solves += f2.regularized;

        const std::vector<CMatrix> suffix = fold_suffixes(ch, p);
        const CMatrix direct_term = ch.direct ? CMatrix(p.f2 * *ch.direct * p.f1) : CMatrix::Zero(w.rows(), w.cols());
        CMatrix prefix = ch.hops.front() * p.f1;
        for (std::size_t l = 0; l < num_groups; ++l) {
            const BlockFold fold{suffix[l], prefix};
            const CMatrix realized = fold.u * p.gains[l].asDiagonal() * fold.v + direct_term;
            const CMatrix e = residual_target(w, realized, fold, p.gains[l]);
            const RVector d = block_regularizer(cfg, fold, noise.sigma_u_sq[l]);
            const GainSolve solved = solve_relay_gains(fold, e, d);
            it.regularized_solves += solved.regularized;

            const RVector p_in = relay_powers(ch, p, noise, l, prefix, cfg.include_upstream_noise);
            int clipped = 0;
            p.gains[l] = project_gains(solved.gains, p_in, budget.p_relay[l], &clipped);
            it.projections_active += clipped;
            if (l + 1 < num_groups) prefix = ch.hops[l + 1] * (p.gains[l].asDiagonal() * prefix);
        }

        const AoIteration rec = record(p, ch, w, noise, budget, cfg);
        it.objective = rec.objective;
        it.surrogate = rec.surrogate;
        it.max_violation = rec.max_violation;
        res.trace.iterations.push_back(it);
        res.trace.iteration_count = iter;

        if (!finite(it.objective)) {
            res.trace.reason = Termination::NonFinite;
            throw ao_failure("run_ao: non-finite objective at iteration " + std::to_string(iter), res.trace);
        }
        const double prev = res.trace.iterations[res.trace.iterations.size() - 2].objective.total;
        const double cur = it.objective.total;
        if (prev == 0.0) {
            res.trace.reason = Termination::Converged;
            return res;
        }
        flat_steps = std::abs(prev - cur) < cfg.rel_tolerance * prev ? flat_steps + 1 : 0;
        if (flat_steps >= cfg.patience) {
            res.trace.reason = Termination::Converged;
            return res;
        }
    }
    res.trace.reason = Termination::MaxIterations;
    return res;
}

void write_trace_csv(std::ostream& os, const AoTrace& trace) {
    os << "iteration,imitation_error,noise_penalty,total,max_violation,surrogate,lambda,projections_active\n";
    for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
        const auto& it = trace.iterations[i];
        os << i << ',' << format_double(it.objective.imitation_error) << ','
           << format_double(it.objective.noise_penalty) << ',' << format_double(it.objective.total) << ','
           << format_double(it.max_violation) << ',' << format_double(it.surrogate) << ','
           << format_double(it.lambda) << ',' << it.projections_active << '\n';
    }
}

}  // namespace airfc
