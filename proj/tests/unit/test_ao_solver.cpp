#include "airfc/ao_solver.hpp"
#include "airfc/errors.hpp"
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <sstream>

using namespace airfc;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double ridge_objective(const CMatrix& xi, const CMatrix& f1, const CMatrix& w) { return (xi * f1 - w).squaredNorm(); }

double combiner_objective(const CMatrix& f2, const CMatrix& u, const CMatrix& r, const CMatrix& w) {
    return (f2 * u - w).squaredNorm() + (f2 * r * f2.adjoint()).trace().real();
}

double gain_objective(const BlockFold& fold, const CVector& a, const CMatrix& e, const RVector& d) {
    return (fold.u * a.asDiagonal() * fold.v - e).squaredNorm() + (a.cwiseAbs2().array() * d.array()).sum();
}

CMatrix random_hermitian_pd(Rng& rng, Index n, double floor) {
    const CMatrix g = complex_gaussian_matrix(rng, n, n);
    return g * g.adjoint() + floor * CMatrix::Identity(n, n);
}

}  // namespace

// ---------------------------------------------------------------------------
// Block 1
// ---------------------------------------------------------------------------

TEST_CASE("update_f1: identity design, inactive constraint") {
    Rng rng(1);
    const CMatrix w = 0.3 * complex_gaussian_matrix(rng, 3, 3);
    const F1Update u = update_f1(CMatrix::Identity(3, 3), w, w.squaredNorm() * 1.01);
    CHECK(u.lambda == 0.0);
    CHECK(oracle::rel_diff(u.f1, w) < 1e-14);
    CHECK_FALSE(u.rank_deficient);
}

TEST_CASE("update_f1: secular equation 2/(1+lambda)^2 = 0.5") {
    const F1Update u = update_f1(CMatrix::Identity(2, 2), CMatrix::Identity(2, 2), 0.5);
    CHECK_THAT(u.lambda, WithinRel(1.0, 1e-7));
    CHECK(oracle::rel_diff(u.f1, CMatrix(0.5 * CMatrix::Identity(2, 2))) < 1e-7);
    CHECK(u.f1.squaredNorm() <= 0.5);
}

TEST_CASE("update_f1: zero design and invalid budget") {
    const F1Update u = update_f1(CMatrix::Zero(3, 3), CMatrix::Identity(3, 3), 1.0);
    CHECK(u.rank_deficient);
    CHECK(u.f1.isZero(0.0));
    CHECK_FALSE(update_f1(CMatrix::Zero(3, 3), CMatrix::Zero(3, 3), 1.0).rank_deficient);
    CHECK_THROWS_AS(update_f1(CMatrix::Identity(2, 2), CMatrix::Identity(2, 2), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(update_f1(CMatrix::Identity(2, 2), CMatrix::Identity(2, 2), -1.0), std::invalid_argument);
}

TEST_CASE("update_f1: matches the TOMS 748 secular-equation oracle and beats random feasible points") {
    Rng rng(2);
    AoConfig cfg;
    cfg.bisection_tolerance = 1e-12;
    for (int trial = 0; trial < 25; ++trial) {
        const CMatrix xi = complex_gaussian_matrix(rng, 4, 4);
        const CMatrix w = complex_gaussian_matrix(rng, 4, 4);
        const double p_max = std::pow(10.0, -1.0 + 2.5 * (trial % 5) / 4.0);
        const F1Update got = update_f1(xi, w, p_max, cfg);
        CHECK(got.f1.squaredNorm() <= p_max * (1 + 1e-12));
        const CMatrix ref = oracle::precoder_constrained(xi, w, p_max);
        CHECK(std::abs(ridge_objective(xi, got.f1, w) - ridge_objective(xi, ref, w)) <= 1e-9 * w.squaredNorm());

        const double best = ridge_objective(xi, got.f1, w);
        for (int s = 0; s < 200; ++s) {
            CMatrix f = complex_gaussian_matrix(rng, 4, 4);
            f *= std::sqrt(p_max) * std::pow(std::uniform_real_distribution<double>(0, 1)(rng), 0.5) / f.norm();
            CHECK(ridge_objective(xi, f, w) >= best * (1 - 1e-12));
        }
    }
}

TEST_CASE("update_f1: rank-deficient design keeps the minimum-norm fit") {
    Rng rng(3);
    const CMatrix thin = complex_gaussian_matrix(rng, 4, 2) * complex_gaussian_matrix(rng, 2, 4);
    const CMatrix w = complex_gaussian_matrix(rng, 4, 4);
    const F1Update u = update_f1(thin, w, 1e6);
    CHECK(u.lambda == 0.0);
    const CMatrix ref = thin.completeOrthogonalDecomposition().solve(w);
    CHECK(oracle::rel_diff(u.f1, ref) < 1e-9);
}

// ---------------------------------------------------------------------------
// Block 2
// ---------------------------------------------------------------------------

TEST_CASE("update_f2: closed-form cases") {
    Rng rng(4);
    const CMatrix w = complex_gaussian_matrix(rng, 3, 3);
    CHECK(update_f2(CMatrix::Identity(3, 3), 0.1 * CMatrix::Identity(3, 3), CMatrix::Zero(3, 3)).f2.isZero(0.0));
    const double s2 = 0.25;
    const F2Update u = update_f2(CMatrix::Identity(3, 3), s2 * CMatrix::Identity(3, 3), w);
    CHECK(oracle::rel_diff(u.f2, CMatrix(w / (1 + s2))) < 1e-14);
    CHECK_FALSE(u.regularized);
}

TEST_CASE("update_f2: stationarity and least-squares oracle") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const CMatrix u = complex_gaussian_matrix(rng, 4, 4);
        const CMatrix r = random_hermitian_pd(rng, 4, 0.05);
        const CMatrix w = complex_gaussian_matrix(rng, 4, 4);
        const CMatrix f2 = update_f2(u, r, w).f2;
        const CMatrix stationarity = (f2 * u - w) * u.adjoint() + f2 * r;
        CHECK(stationarity.norm() <= 1e-10 * (w * u.adjoint()).norm());
        const CMatrix ref = oracle::combiner_least_squares(u, r, w);
        CHECK(oracle::rel_diff(combiner_objective(f2, u, r, w), combiner_objective(ref, u, r, w)) < 1e-9);
    }
}

TEST_CASE("update_f2: singular system is regularized and flagged") {
    Rng rng(6);
    const CMatrix u = complex_gaussian_matrix(rng, 4, 1) * complex_gaussian_matrix(rng, 1, 4);
    const F2Update got = update_f2(u, CMatrix::Zero(4, 4), complex_gaussian_matrix(rng, 4, 4));
    CHECK(got.regularized);
    CHECK(got.f2.allFinite());
}

// ---------------------------------------------------------------------------
// Block 3
// ---------------------------------------------------------------------------

TEST_CASE("fold_chain: boundary groups and chain consistency") {
    Rng rng(7);
    const std::vector<int> ks{3, 4, 2};
    const ChannelSet ch = oracle::random_channel(rng, 3, ks, true);
    const AirFcParams p = oracle::random_params(rng, 3, ks);
    const BlockFold last = fold_chain(ch, p, 2);
    CHECK(oracle::rel_diff(last.u, CMatrix(p.f2 * ch.hops[3])) < 1e-14);
    const BlockFold first = fold_chain(ch, p, 0);
    CHECK(oracle::rel_diff(first.v, CMatrix(ch.hops[0] * p.f1)) < 1e-14);

    const CMatrix cascade = p.f2 * (oracle::effective_channel(ch, p.gains) - *ch.direct) * p.f1;
    const auto suffixes = fold_suffixes(ch, p);
    for (std::size_t l = 0; l < ks.size(); ++l) {
        const BlockFold f = fold_chain(ch, p, l);
        CHECK(f.u.rows() == 3);
        CHECK(f.u.cols() == ks[l]);
        CHECK(f.v.rows() == ks[l]);
        CHECK(f.v.cols() == 3);
        CHECK(oracle::rel_diff(CMatrix(f.u * p.gains[l].asDiagonal() * f.v), cascade) < 1e-12);
        CHECK(oracle::rel_diff(suffixes[l], f.u) < 1e-12);
    }
    CHECK_THROWS_AS(fold_chain(ch, p, 3), std::out_of_range);
}

TEST_CASE("residual_target") {
    Rng rng(8);
    const BlockFold f{complex_gaussian_matrix(rng, 3, 4), complex_gaussian_matrix(rng, 4, 3)};
    const CVector a = complex_gaussian_vector(rng, 4);
    const CMatrix w = complex_gaussian_matrix(rng, 3, 3);
    const CMatrix own = f.u * a.asDiagonal() * f.v;
    CHECK(oracle::rel_diff(residual_target(w, own, f, a), w) < 1e-12);
    CHECK(oracle::rel_diff(residual_target(own, own, f, a), own) < 1e-12);
    const CMatrix other = complex_gaussian_matrix(rng, 3, 3);
    CHECK(oracle::rel_diff(residual_target(w, CMatrix(own + other), f, a), CMatrix(w - other)) < 1e-12);
}

TEST_CASE("noise-aware regularizer") {
    Rng rng(9);
    const CMatrix u = complex_gaussian_matrix(rng, 5, 3);
    CHECK(noise_aware_regularizer(u, 0.0).isZero(0.0));
    CMatrix unit = u;
    for (Index k = 0; k < 3; ++k) unit.col(k).normalize();
    CHECK((noise_aware_regularizer(unit, 0.3) - RVector::Constant(3, 0.3)).norm() < 1e-15);
    const RVector d = noise_aware_regularizer(u, 0.7);
    for (Index k = 0; k < 3; ++k) CHECK_THAT(d(k), WithinRel(0.7 * u.col(k).squaredNorm(), 1e-14));
    CHECK_THROWS_AS(noise_aware_regularizer(u, -1.0), std::invalid_argument);
}

TEST_CASE("Khatri-Rao vec and Gram identities") {
    Rng rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        const Index n1 = 1 + trial % 8, k = 1 + trial % 6, n2 = 1 + (trial * 3) % 8;
        const BlockFold f{complex_gaussian_matrix(rng, n1, k), complex_gaussian_matrix(rng, k, n2)};
        const CVector a = complex_gaussian_vector(rng, k);
        const CMatrix b = oracle::khatri_rao(f.u, f.v);
        CHECK(oracle::rel_diff(CMatrix(b * a), CMatrix(oracle::vec(f.u * a.asDiagonal() * f.v))) < 1e-12);
        CHECK(oracle::rel_diff(gain_gram(f), CMatrix(b.adjoint() * b)) < 1e-12);
        const CMatrix e = complex_gaussian_matrix(rng, n1, n2);
        CHECK(oracle::rel_diff(CMatrix(gain_rhs(f, e)), CMatrix(b.adjoint() * oracle::vec(e))) < 1e-12);
    }
}

TEST_CASE("solve_relay_gains: closed-form cases") {
    Rng rng(11);
    const BlockFold f{complex_gaussian_matrix(rng, 3, 4), complex_gaussian_matrix(rng, 4, 3)};
    CHECK(solve_relay_gains(f, CMatrix::Zero(3, 3), RVector::Constant(4, 0.5)).gains.isZero(0.0));

    const cdouble u(1.5, -0.5), v(0.25, 2.0), e(-1.0, 3.0);
    const BlockFold s{CMatrix::Constant(1, 1, u), CMatrix::Constant(1, 1, v)};
    const GainSolve got = solve_relay_gains(s, CMatrix::Constant(1, 1, e), RVector::Zero(1));
    CHECK(std::abs(got.gains(0) - e / (u * v)) < 1e-14 * std::abs(e / (u * v)));
}

TEST_CASE("solve_relay_gains: materialized Khatri-Rao oracle") {
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        const BlockFold f{complex_gaussian_matrix(rng, 3, 4), complex_gaussian_matrix(rng, 4, 3)};
        const CMatrix e = complex_gaussian_matrix(rng, 3, 3);
        const RVector d = trial % 2 ? RVector::Zero(4) : noise_aware_regularizer(f.u, 0.3);
        const CVector a = solve_relay_gains(f, e, d).gains;
        const CVector ref = oracle::gains_least_squares(f.u, f.v, e, d);
        CHECK(oracle::rel_diff(CMatrix(a), CMatrix(ref)) < 1e-9);
        const double best = gain_objective(f, a, e, d);
        for (int s = 0; s < 500; ++s) {
            const CVector pert = a + 0.1 * complex_gaussian_vector(rng, 4);
            CHECK(gain_objective(f, pert, e, d) >= best * (1 - 1e-12));
        }
    }
}

TEST_CASE("solve_relay_gains: ill-conditioned Gram matrix is ridged and flagged") {
    Rng rng(13);
    CMatrix u = complex_gaussian_matrix(rng, 3, 3);
    CMatrix v = complex_gaussian_matrix(rng, 3, 3);
    u.col(2) = u.col(1);
    v.row(2) = v.row(1);
    const GainSolve got = solve_relay_gains({u, v}, complex_gaussian_matrix(rng, 3, 3), RVector::Zero(3));
    CHECK(got.regularized);
    CHECK(got.rcond < 1e-12);
    CHECK(got.gains.allFinite());
}

TEST_CASE("project_gains") {
    const cdouble a(1.2, 1.6);  // |a| = 2
    int clipped = -1;
    const CVector out = project_gains(CVector::Constant(1, a), RVector::Constant(1, 1.0), RVector::Constant(1, 1.0), &clipped);
    CHECK_THAT(std::abs(out(0)), WithinRel(1.0, 1e-15));
    CHECK_THAT(std::arg(out(0)), WithinAbs(std::arg(a), 1e-15));
    CHECK(clipped == 1);

    const CVector in_bound = project_gains(CVector::Constant(1, a), RVector::Constant(1, 0.1), RVector::Constant(1, 1.0), &clipped);
    CHECK(in_bound(0) == a);
    CHECK(clipped == 0);
    CHECK(project_gains(CVector::Zero(2), RVector::Ones(2), RVector::Ones(2))(1) == cdouble(0.0));

    Rng rng(14);
    std::uniform_real_distribution<double> pos(0.01, 10.0);
    for (int trial = 0; trial < 100; ++trial) {
        const CVector g = 5.0 * complex_gaussian_vector(rng, 6);
        RVector p_in(6), p_b(6);
        for (Index k = 0; k < 6; ++k) p_in(k) = pos(rng), p_b(k) = pos(rng);
        const CVector pr = project_gains(g, p_in, p_b);
        for (Index k = 0; k < 6; ++k) CHECK(std::norm(pr(k)) * p_in(k) <= p_b(k) * (1 + 1e-12));
    }
    CHECK_THROWS_AS(project_gains(CVector::Ones(2), RVector::Ones(3), RVector::Ones(2)), shape_error);
}

// ---------------------------------------------------------------------------
// Alternating optimisation
// ---------------------------------------------------------------------------

TEST_CASE("AoConfig validation and string forms") {
    AoConfig c;
    CHECK_NOTHROW(c.validate());
    c.max_iters = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.rel_tolerance = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.patience = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.init_gain_rho = -1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    for (auto m : {RegularizerMode::NoiseAware, RegularizerMode::FixedEpsilon, RegularizerMode::Off})
        CHECK(regularizer_mode_from_string(to_string(m)) == m);
    CHECK_THROWS_AS(regularizer_mode_from_string("tikhonov"), std::invalid_argument);
}

TEST_CASE("initial point is feasible") {
    Rng rng(15);
    const std::vector<int> ks{4, 3};
    const ChannelSet ch = oracle::random_channel(rng, 4, ks);
    const NoiseModel noise = NoiseModel::uniform(2, 0.1, 0.1);
    for (double p_max : {0.5, 4.0, 40.0}) {
        const PowerBudget budget = PowerBudget::uniform(p_max, ks, 1e-3);
        const AirFcParams p = initial_params(ch, noise, budget, AoConfig{});
        CHECK(oracle::rel_diff(p.f1, CMatrix(std::min(1.0, std::sqrt(p_max / 4.0)) * CMatrix::Identity(4, 4))) < 1e-15);
        CHECK(p.f2 == CMatrix::Identity(4, 4));
        CHECK(max_constraint_violation(p, ch, noise, budget) <= 1e-12);
        for (const auto& g : p.gains) CHECK((g.cwiseAbs().array() <= 1e-2 * (1 + 1e-15)).all());
    }
}

TEST_CASE("run_ao: noiseless scalar chain reaches the target") {
    ChannelSet ch;
    ch.hops = {CMatrix::Constant(1, 1, cdouble(0.8, 0.3)), CMatrix::Constant(1, 1, cdouble(-0.4, 1.1))};
    const CMatrix w = CMatrix::Constant(1, 1, cdouble(0.7, -0.2));
    const AoResult r = run_ao(ch, w, NoiseModel{{0.0}, 0.0}, PowerBudget::uniform(100.0, {1}, 100.0));
    CHECK(r.trace.iterations.back().objective.imitation_error < 1e-8 * w.squaredNorm());
}

TEST_CASE("run_ao: max_iters = 1 runs exactly one pass") {
    Rng rng(16);
    const std::vector<int> ks{3, 3};
    const ChannelSet ch = oracle::random_channel(rng, 3, ks);
    AoConfig cfg;
    cfg.max_iters = 1;
    const AoResult r = run_ao(ch, complex_gaussian_matrix(rng, 3, 3), NoiseModel::uniform(2, 0.01, 0.01),
                              PowerBudget::uniform(3.0, ks, 1.0), cfg);
    CHECK(r.trace.iterations.size() == 2);
    CHECK(r.trace.iteration_count == 1);
    CHECK(r.trace.reason == Termination::MaxIterations);
}

TEST_CASE("run_ao: monotone without projections or regularizer") {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const std::vector<int> ks{3, 3};
        const ChannelSet ch = oracle::random_channel(rng, 4, ks);
        AoConfig cfg;
        cfg.regularizer = RegularizerMode::Off;
        cfg.max_iters = 60;
        cfg.bisection_tolerance = 1e-12;
        const AoResult r = run_ao(ch, complex_gaussian_matrix(rng, 4, 4), NoiseModel::uniform(2, 0.0, 0.05),
                                  PowerBudget::uniform(4.0, ks, 1e12), cfg);
        for (std::size_t i = 1; i < r.trace.iterations.size(); ++i) {
            CHECK(r.trace.iterations[i].projections_active == 0);
            CHECK(r.trace.iterations[i].objective.total <=
                  r.trace.iterations[i - 1].objective.total * (1 + 1e-10));
        }
    }
}

TEST_CASE("run_ao: single group with the noise-aware regularizer is monotone in the true objective") {
    Rng rng(18);
    for (int trial = 0; trial < 10; ++trial) {
        const std::vector<int> ks{5};
        const ChannelSet ch = oracle::random_channel(rng, 3, ks);
        AoConfig cfg;
        cfg.max_iters = 60;
        cfg.bisection_tolerance = 1e-12;
        const AoResult r = run_ao(ch, complex_gaussian_matrix(rng, 3, 3), NoiseModel::uniform(1, 0.2, 0.05),
                                  PowerBudget::uniform(3.0, ks, 1e12), cfg);
        for (std::size_t i = 1; i < r.trace.iterations.size(); ++i)
            CHECK(r.trace.iterations[i].objective.total <=
                  r.trace.iterations[i - 1].objective.total * (1 + 1e-10));
    }
}

TEST_CASE("run_ao: every iterate is feasible and the final objective improves on the start") {
    Rng rng(19);
    for (int trial = 0; trial < 10; ++trial) {
        const std::vector<int> ks{4, 4, 4};
        const ChannelSet ch = oracle::random_channel(rng, 4, ks);
        const NoiseModel noise = NoiseModel::uniform(3, 0.05, 0.05);
        const PowerBudget budget = PowerBudget::uniform(2.0, ks, 0.5);
        const AoResult r = run_ao(ch, complex_gaussian_matrix(rng, 4, 4), noise, budget);
        for (const auto& it : r.trace.iterations) CHECK(it.max_violation <= 1e-9);
        CHECK(r.trace.iterations.back().objective.total <= r.trace.iterations.front().objective.total);
        CHECK(r.params.f1.squaredNorm() <= 2.0 * (1 + 1e-9));
        for (std::size_t l = 0; l < ks.size(); ++l) {
            const RVector p_in = oracle::relay_input_power(ch, r.params.gains, r.params.f1, l, 0.05);
            for (Index k = 0; k < ks[l]; ++k) CHECK(std::norm(r.params.gains[l](k)) * p_in(k) <= 0.5 * (1 + 1e-9));
        }
    }
}

TEST_CASE("run_ao: closed-form blocks are fixed points after their own update") {
    Rng rng(20);
    const std::vector<int> ks{3, 4};
    const ChannelSet ch = oracle::random_channel(rng, 3, ks, true);
    const CMatrix w = complex_gaussian_matrix(rng, 3, 3);
    const NoiseModel noise = NoiseModel::uniform(2, 0.1, 0.1);
    AoConfig cfg;
    cfg.bisection_tolerance = 1e-13;
    AirFcParams p = oracle::random_params(rng, 3, ks);

    const CMatrix h = effective_channel(ch, p.gains);
    p.f1 = update_f1(p.f2 * h, w, 2.0, cfg).f1;
    CHECK(oracle::rel_diff(update_f1(p.f2 * h, w, 2.0, cfg).f1, p.f1) < 1e-8);
    p.f2 = update_f2(h * p.f1, noise_covariance(ch, p.gains, noise), w).f2;
    CHECK(oracle::rel_diff(update_f2(h * p.f1, noise_covariance(ch, p.gains, noise), w).f2, p.f2) < 1e-8);

    for (std::size_t l = 0; l < ks.size(); ++l) {
        auto solve = [&] {
            const BlockFold f = fold_chain(ch, p, l);
            const CMatrix e = residual_target(w, realized_map(p, ch), f, p.gains[l]);
            return solve_relay_gains(f, e, noise_aware_regularizer(f.u, noise.sigma_u_sq[l])).gains;
        };
        p.gains[l] = solve();
        CHECK(oracle::rel_diff(CMatrix(solve()), CMatrix(p.gains[l])) < 1e-8);
    }
}

TEST_CASE("run_ao: non-finite input aborts with a trace") {
    Rng rng(21);
    const ChannelSet ch = oracle::random_channel(rng, 2, {2});
    CMatrix w = CMatrix::Identity(2, 2);
    w(0, 0) = std::numeric_limits<double>::infinity();
    try {
        run_ao(ch, w, NoiseModel::uniform(1, 0.1, 0.1), PowerBudget::uniform(1.0, {2}, 1.0));
        FAIL("expected ao_failure");
    } catch (const ao_failure& e) {
        CHECK(e.trace().reason == Termination::NonFinite);
        CHECK_FALSE(e.trace().iterations.empty());
    }
    CHECK_THROWS_AS(run_ao(ch, CMatrix::Identity(3, 3), NoiseModel::uniform(1, 0.1, 0.1),
                           PowerBudget::uniform(1.0, {2}, 1.0)),
                    shape_error);
}

TEST_CASE("trace CSV layout") {
    Rng rng(22);
    const ChannelSet ch = oracle::random_channel(rng, 2, {2});
    AoConfig cfg;
    cfg.max_iters = 3;
    const AoResult r = run_ao(ch, CMatrix::Identity(2, 2), NoiseModel::uniform(1, 0.1, 0.1),
                              PowerBudget::uniform(1.0, {2}, 1.0), cfg);
    std::ostringstream os;
    write_trace_csv(os, r.trace);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "iteration,imitation_error,noise_penalty,total,max_violation,surrogate,lambda,projections_active");
    int rows = 0;
    while (std::getline(is, line)) {
        CHECK(std::count(line.begin(), line.end(), ',') == 7);
        ++rows;
    }
    CHECK(rows == static_cast<int>(r.trace.iterations.size()));
}
