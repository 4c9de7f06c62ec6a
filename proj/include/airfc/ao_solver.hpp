#pragma once

#include "airfc/system.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace airfc {

enum class RegularizerMode { NoiseAware, FixedEpsilon, Off };

std::string_view to_string(RegularizerMode mode);
RegularizerMode regularizer_mode_from_string(std::string_view id);

struct AoConfig {
    int max_iters = 200;
    double rel_tolerance = 1e-6;
    int patience = 2;                   // consecutive below-tolerance iterations before stopping
    double bisection_tolerance = 1e-8;  // relative error on ||F1||_F^2 at an active power constraint
    int bisection_max_steps = 100;
    double init_gain_rho = 1e-2;
    RegularizerMode regularizer = RegularizerMode::NoiseAware;
    double fixed_epsilon = 1e-6;        // FixedEpsilon: D_l = eps * mean(diag Gamma_l) * I
    bool include_upstream_noise = false;

    void validate() const;
};

// ---------------------------------------------------------------------------
// Block 1: precoder
// ---------------------------------------------------------------------------

struct F1Update {
    CMatrix f1;
    double lambda = 0.0;
    int bisection_steps = 0;
    bool rank_deficient = false;  // Xi == 0 while W != 0
    bool rescaled = false;        // final feasibility guard fired
};

/// argmin ||Xi F1 - W||_F^2 s.t. ||F1||_F^2 <= p_max, via the ridge family
/// F1(lambda) = (Xi^H Xi + lambda I)^{-1} Xi^H W and bisection on lambda.
F1Update update_f1(const CMatrix& xi, const CMatrix& w, double p_max, const AoConfig& cfg = {});

// ---------------------------------------------------------------------------
// Block 2: combiner
// ---------------------------------------------------------------------------

struct F2Update {
    CMatrix f2;
    bool regularized = false;
};

/// F2 = W U^H (U U^H + R_n)^{-1}.
F2Update update_f2(const CMatrix& u, const CMatrix& r_n, const CMatrix& w);

// ---------------------------------------------------------------------------
// Block 3: relay gains
// ---------------------------------------------------------------------------

/// U_l (N x K_l, everything after group l including F2) and V_l (K_l x N, everything
/// before group l including F1), so that F2 (H_eff - H_0) F1 = U_l diag(a_l) V_l.
struct BlockFold {
    CMatrix u;
    CMatrix v;
};

BlockFold fold_chain(const ChannelSet& ch, const AirFcParams& params, std::size_t group);

/// Suffix products U_0..U_{L-1} for the current gains, computed right to left in one pass.
std::vector<CMatrix> fold_suffixes(const ChannelSet& ch, const AirFcParams& params);

/// E_l = W - (M - U_l diag(a_l) V_l).
CMatrix residual_target(const CMatrix& w, const CMatrix& realized, const BlockFold& fold, const CVector& gains);

/// Diagonal of D_l = sigma^2 diag(diag(U_l^H U_l)).
RVector noise_aware_regularizer(const CMatrix& u_l, double sigma_u_sq);

/// Gamma_l = conj(V V^H) o (U^H U); the Gram matrix of the Khatri-Rao design V^T (.) U.
CMatrix gain_gram(const BlockFold& fold);

/// eta_l = (V^T (.) U)^H vec(E) = diag(U^H E V^H).
CVector gain_rhs(const BlockFold& fold, const CMatrix& e);

struct GainSolve {
    CVector gains;
    bool regularized = false;
    double rcond = 1.0;
};

/// a_l = (Gamma_l + D_l)^{-1} eta_l. A 1e-10 * trace ridge is added (and flagged) when the
/// reciprocal condition estimate falls below 1e-12.
GainSolve solve_relay_gains(const BlockFold& fold, const CMatrix& e, const RVector& d);

/// Per-relay magnitude clip to sqrt(P_{l,k} / p^in_{l,k}); phase preserved.
CVector project_gains(const CVector& gains, const RVector& p_in, const RVector& p_budget,
                      int* clipped = nullptr);

// ---------------------------------------------------------------------------
// Alternating optimisation
// ---------------------------------------------------------------------------

enum class Termination { Converged, MaxIterations, NonFinite };
std::string_view to_string(Termination t);

struct AoIteration {
    ObjectiveValue objective;
    double surrogate = 0.0;       // imitation error + sum_l a_l^H D_l a_l under the configured regularizer
    double max_violation = 0.0;   // max relative constraint excess, >= 0
    double lambda = 0.0;
    int projections_active = 0;
    int regularized_solves = 0;
};

struct AoTrace {
    std::vector<AoIteration> iterations;  // iterations[0] is the initial point
    int iteration_count = 0;
    Termination reason = Termination::MaxIterations;
};

struct AoResult {
    AirFcParams params;
    AoTrace trace;
};

class ao_failure : public std::runtime_error {
public:
    ao_failure(const std::string& what, AoTrace trace) : std::runtime_error(what), trace_(std::move(trace)) {}
    const AoTrace& trace() const { return trace_; }

private:
    AoTrace trace_;
};

/// Feasible starting point: F1 = min(1, sqrt(P_max/N)) I, F2 = I, a_l = rho 1 projected group by group.
AirFcParams initial_params(const ChannelSet& ch, const NoiseModel& noise, const PowerBudget& budget,
                           const AoConfig& cfg);

/// max(0, ||F1||^2/P_max - 1, |a_{l,k}|^2 p^in_{l,k}/P_{l,k} - 1).
double max_constraint_violation(const AirFcParams& params, const ChannelSet& ch, const NoiseModel& noise,
                                const PowerBudget& budget, bool include_upstream_noise = false);

/// Block order per iteration: H_eff, F1, F2, then groups 0..L-1 (fold, solve, project).
/// Stops once |f_{k-1} - f_k| < rel_tolerance * f_{k-1} has held for `patience` consecutive
/// iterations, or after max_iters.
/// Throws ao_failure (carrying the trace so far) if the objective becomes non-finite.
AoResult run_ao(const ChannelSet& ch, const CMatrix& w, const NoiseModel& noise, const PowerBudget& budget,
                const AoConfig& cfg = {});

/// Columns: iteration,imitation_error,noise_penalty,total,max_violation,surrogate,lambda,projections_active
void write_trace_csv(std::ostream& os, const AoTrace& trace);

}  // namespace airfc
