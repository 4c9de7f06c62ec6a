#include "airfc/eval_harness.hpp"

#include "airfc/errors.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace airfc {

double imitation_nmse(const CMatrix& realized, const CMatrix& w) {
    if (realized.rows() != w.rows() || realized.cols() != w.cols()) throw shape_error("imitation_nmse: shape mismatch");
    const double denom = w.squaredNorm();
    if (!(denom > 0.0)) throw undefined_metric("imitation_nmse: target W is zero");
    return (realized - w).squaredNorm() / denom;
}

SyntheticTask make_synthetic_task(int n_features, int classes, int samples, double spread, std::uint64_t seed) {
    if (classes < 2) throw std::invalid_argument("make_synthetic_task: need at least two classes");
    if (n_features < classes) throw std::invalid_argument("make_synthetic_task: need N >= C");
    if (!(spread > 0.0)) throw std::invalid_argument("make_synthetic_task: spread must be positive");
    if (samples < 2 * classes) throw std::invalid_argument("make_synthetic_task: need at least 2C samples");

    SyntheticTask task;
    task.classes = classes;
    task.spread = spread;
    task.seed = seed;

    Rng rng(seed);
    task.class_means = complex_gaussian_matrix(rng, n_features, classes);

    const int n_train = samples / 2;
    const int n_test = samples - n_train;
    auto draw = [&](int count, CMatrix& x, std::vector<int>& y) {
        x.resize(n_features, count);
        y.resize(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i) {
            const int c = i % classes;
            y[static_cast<std::size_t>(i)] = c;
            x.col(i) = task.class_means.col(c) + complex_gaussian_vector(rng, n_features, spread * spread);
        }
    };
    draw(n_train, task.train_x, task.train_y);
    draw(n_test, task.test_x, task.test_y);

    // whitening from training statistics only
    const CVector mean = task.train_x.rowwise().mean();
    const CMatrix centered = task.train_x.colwise() - mean;
    CMatrix cov = centered * centered.adjoint() / static_cast<double>(n_train);
    cov = 0.5 * (cov + cov.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(cov);
    RVector ev = eig.eigenvalues();
    const double floor = std::max(ev.maxCoeff(), 0.0) * 1e-12 + std::numeric_limits<double>::min();
    for (Index i = 0; i < ev.size(); ++i) ev(i) = 1.0 / std::sqrt(std::max(ev(i), floor));
    const CMatrix whiten = eig.eigenvectors() * ev.cast<cdouble>().asDiagonal() * eig.eigenvectors().adjoint();

    task.train_x = whiten * centered;
    task.test_x = whiten * (task.test_x.colwise() - mean);
    return task;
}

double realized_phase(const CMatrix& realized, const CMatrix& w) {
    const cdouble t = (w.adjoint() * realized).trace();
    if (t == cdouble(0.0, 0.0)) return 0.0;
    return std::arg(t);
}

int decode_class(const CVector& y, int classes, double phase, TieBreak tie, Rng* rng) {
    if (classes < 1 || y.size() < classes) throw shape_error("decode_class: fewer outputs than classes");
    const cdouble derotate = std::polar(1.0, -phase);
    double best = -std::numeric_limits<double>::infinity();
    int best_class = 0;
    int ties = 0;
    for (int c = 0; c < classes; ++c) {
        const double v = (derotate * y(c)).real();
        if (v > best) {
            best = v;
            best_class = c;
            ties = 1;
        } else if (v == best && tie == TieBreak::SeededUniform && rng) {
            // reservoir choice among equal maxima
            ++ties;
            std::uniform_int_distribution<int> pick(0, ties - 1);
            if (pick(*rng) == 0) best_class = c;
        }
    }
    return best_class;
}

namespace {

std::vector<int> argmax_decisions(const CMatrix& logits, int classes) {
    std::vector<int> out(static_cast<std::size_t>(logits.cols()));
    for (Index i = 0; i < logits.cols(); ++i) out[static_cast<std::size_t>(i)] = decode_class(logits.col(i), classes, 0.0);
    return out;
}

double fraction_correct(const std::vector<int>& predicted, const std::vector<int>& labels) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i];
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace

double digital_accuracy(const DigitalBaseline& baseline, const SyntheticTask& task) {
    const CMatrix logits = (baseline.w * task.test_x).colwise() + baseline.b;
    return fraction_correct(argmax_decisions(logits, baseline.classes), task.test_y);
}

DigitalBaseline train_digital_fc(const SyntheticTask& task, double ridge) {
    if (task.classes < 2 || task.train_x.cols() == 0) throw std::invalid_argument("train_digital_fc: empty task");
    if (!(ridge > 0.0)) throw std::invalid_argument("train_digital_fc: ridge must be positive");
    const Index n = task.features();
    const Index m = task.train_x.cols();

    CMatrix xa(n + 1, m);
    xa.topRows(n) = task.train_x;
    xa.row(n).setOnes();
    CMatrix targets = CMatrix::Zero(task.classes, m);
    for (Index i = 0; i < m; ++i) targets(task.train_y[static_cast<std::size_t>(i)], i) = 1.0;

    DigitalBaseline out;
    out.classes = task.classes;
    out.ridge = ridge;
    const CMatrix gram = xa * xa.adjoint();
    Eigen::LDLT<CMatrix> ldlt;
    for (int attempt = 0; attempt < 20; ++attempt) {
        CMatrix g = gram;
        g.diagonal().array() += out.ridge * static_cast<double>(m);
        ldlt.compute(g);
        if (ldlt.info() == Eigen::Success && ldlt.rcond() > 1e-12) break;
        out.ridge *= 10.0;
        out.ridge_increased = true;
    }
    // Theta (C x (N+1)) = T X^H (X X^H + ridge m I)^{-1}
    const CMatrix theta = ldlt.solve(xa * targets.adjoint()).adjoint();

    out.w = CMatrix::Zero(n, n);
    out.b = CVector::Zero(n);
    out.w.topRows(task.classes) = theta.leftCols(n);
    out.b.head(task.classes) = theta.col(n);
    out.reported_accuracy = digital_accuracy(out, task);
    return out;
}

DigitalBaseline baseline_from_weights(const CMatrix& w, const CVector& b, const SyntheticTask& task) {
    if (w.rows() != w.cols() || b.size() != w.rows()) throw shape_error("baseline_from_weights: need square W, matching b");
    if (w.rows() != task.features()) throw shape_error("baseline_from_weights: W does not match the task dimension");
    DigitalBaseline out;
    out.w = w;
    out.b = b;
    out.classes = task.classes;
    out.reported_accuracy = digital_accuracy(out, task);
    return out;
}

// ---------------------------------------------------------------------------
// OTA accuracy kernels
// ---------------------------------------------------------------------------

namespace {

struct AccuracyKernel {
    const AirFcParams& params;
    const ChannelSet& ch;
    const NoiseModel& noise;
    const DigitalBaseline& baseline;
    const SyntheticTask& task;
    int draws;
    std::uint64_t root;
    double phase;
    TieBreak tie;

    int correct_for_sample(Index i) const {
        int hits = 0;
        const CVector x = task.test_x.col(i);
        const int label = task.test_y[static_cast<std::size_t>(i)];
        const cdouble rotate = std::polar(1.0, -phase);
        for (int d = 0; d < draws; ++d) {
            Rng rng(derive_seed(root, {static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(d)}));
            const CVector logits = rotate * simulate_forward(params, ch, noise, x, rng) + baseline.b;
            hits += decode_class(logits, baseline.classes, 0.0, tie, &rng) == label;
        }
        return hits;
    }
};

AccuracyKernel make_kernel(const AirFcParams& params, const ChannelSet& ch, const NoiseModel& noise,
                           const DigitalBaseline& baseline, const SyntheticTask& task, int n_noise_draws, Rng& rng,
                           TieBreak tie) {
    if (n_noise_draws < 1) throw std::invalid_argument("evaluate_ota_accuracy: need at least one noise draw");
    if (baseline.w.rows() != task.features()) throw shape_error("evaluate_ota_accuracy: baseline/task dimension");
    const CMatrix realized = realized_map(params, ch);
    if (realized.rows() != baseline.w.rows() || realized.cols() != task.features())
        throw shape_error("evaluate_ota_accuracy: realized map does not match the task");
    const std::uint64_t root = rng();
    return {params, ch, noise, baseline, task, n_noise_draws, root, realized_phase(realized, baseline.w), tie};
}

double to_accuracy(long long hits, const SyntheticTask& task, int draws) {
    return static_cast<double>(hits) / (static_cast<double>(task.test_x.cols()) * draws);
}

}  // namespace

double evaluate_ota_accuracy(const AirFcParams& params, const ChannelSet& ch, const NoiseModel& noise,
                             const DigitalBaseline& baseline, const SyntheticTask& task, int n_noise_draws, Rng& rng,
                             TieBreak tie) {
    const AccuracyKernel k = make_kernel(params, ch, noise, baseline, task, n_noise_draws, rng, tie);
    const Index n = task.test_x.cols();
    long long hits = 0;
#pragma omp parallel for reduction(+ : hits) schedule(static)
    for (Index i = 0; i < n; ++i) hits += k.correct_for_sample(i);
    return to_accuracy(hits, task, n_noise_draws);
}

namespace serial {

double evaluate_ota_accuracy(const AirFcParams& params, const ChannelSet& ch, const NoiseModel& noise,
                             const DigitalBaseline& baseline, const SyntheticTask& task, int n_noise_draws, Rng& rng,
                             TieBreak tie) {
    const AccuracyKernel k = make_kernel(params, ch, noise, baseline, task, n_noise_draws, rng, tie);
    long long hits = 0;
    for (Index i = 0; i < task.test_x.cols(); ++i) hits += k.correct_for_sample(i);
    return to_accuracy(hits, task, n_noise_draws);
}

}  // namespace serial

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

SampleStats sample_stats(const std::vector<double>& values) {
    SampleStats s;
    if (values.empty()) return s;
    const double n = static_cast<double>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() < 2) return s;
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
    return s;
}

std::uint64_t trial_seed(std::uint64_t base_seed, int trial) {
    return derive_seed(base_seed, {static_cast<std::uint64_t>(trial)});
}

namespace {

template <typename AccuracyFn>
TrialRecord run_trial_with(const GridPoint& point, int trial, std::uint64_t base_seed, const SweepSetup& setup,
                           const DigitalBaseline& baseline, const SyntheticTask& task, AccuracyFn accuracy_fn) {
    TrialRecord rec;
    rec.trial = trial;
    rec.seed = trial_seed(base_seed, trial);
    try {
        const Topology topo =
            generate_topology(point.d_max_m, point.groups, point.relays_per_group, setup.heights, derive_seed(rec.seed, {1}));
        ChannelSetConfig ccfg = setup.channel;
        ccfg.n_t = setup.antennas;
        ccfg.n_r = setup.antennas;
        ccfg.direct_link = point.direct_link;
        const ChannelSet ch = generate_channel_set(topo, ccfg, derive_seed(rec.seed, {2}));

        const NoiseModel noise = NoiseModel::uniform(ch.num_groups(), setup.sigma_u_sq, setup.sigma_c_sq);
        const PowerBudget budget = PowerBudget::uniform(setup.p_max_w, ch.relays_per_group(), point.p_relay_w);
        const AoResult ao = run_ao(ch, baseline.w, noise, budget, setup.ao);

        const AoIteration& last = ao.trace.iterations.back();
        rec.iterations = ao.trace.iteration_count;
        rec.termination = ao.trace.reason;
        rec.imitation_error = last.objective.imitation_error;
        rec.noise_penalty = last.objective.noise_penalty;
        rec.objective = last.objective.total;
        rec.max_violation = last.max_violation;
        rec.nmse = imitation_nmse(realized_map(ao.params, ch), baseline.w);

        Rng eval_rng(derive_seed(rec.seed, {3}));
        rec.accuracy = accuracy_fn(ao.params, ch, noise, baseline, task, setup.noise_draws, eval_rng, setup.tie);
        rec.ok = true;
    } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
    }
    return rec;
}

using AccuracySignature = double (*)(const AirFcParams&, const ChannelSet&, const NoiseModel&, const DigitalBaseline&,
                                     const SyntheticTask&, int, Rng&, TieBreak);

void check_sweep_args(int trials) {
    if (trials < 1) throw std::invalid_argument("monte_carlo_sweep: trials must be >= 1");
}

}  // namespace

TrialRecord run_trial(const GridPoint& point, int trial, std::uint64_t base_seed, const SweepSetup& setup,
                      const DigitalBaseline& baseline, const SyntheticTask& task) {
    return run_trial_with(point, trial, base_seed, setup, baseline, task,
                          static_cast<AccuracySignature>(&airfc::evaluate_ota_accuracy));
}

SweepResult aggregate(const GridPoint& point, std::vector<TrialRecord> trials) {
    SweepResult r;
    r.point = point;
    r.trials = std::move(trials);
    std::vector<double> nmse, acc, obj;
    for (const auto& t : r.trials) {
        if (!t.ok) continue;
        nmse.push_back(t.nmse);
        acc.push_back(t.accuracy);
        obj.push_back(t.objective);
    }
    r.completed = static_cast<int>(acc.size());
    r.partial = r.completed < static_cast<int>(r.trials.size());
    r.nmse = sample_stats(nmse);
    r.accuracy = sample_stats(acc);
    r.objective = sample_stats(obj);
    return r;
}

std::vector<SweepResult> monte_carlo_sweep(const std::vector<GridPoint>& grid, int trials, std::uint64_t base_seed,
                                           const SweepSetup& setup, const DigitalBaseline& baseline,
                                           const SyntheticTask& task) {
    check_sweep_args(trials);
    const auto jobs = static_cast<long long>(grid.size()) * trials;
    std::vector<TrialRecord> records(static_cast<std::size_t>(jobs));
#pragma omp parallel for schedule(dynamic, 1)
    for (long long j = 0; j < jobs; ++j) {
        const auto& point = grid[static_cast<std::size_t>(j / trials)];
        records[static_cast<std::size_t>(j)] = run_trial(point, static_cast<int>(j % trials), base_seed, setup, baseline, task);
    }
    std::vector<SweepResult> out;
    out.reserve(grid.size());
    for (std::size_t p = 0; p < grid.size(); ++p) {
        const auto first = records.begin() + static_cast<std::ptrdiff_t>(p * static_cast<std::size_t>(trials));
        out.push_back(aggregate(grid[p], std::vector<TrialRecord>(first, first + trials)));
    }
    return out;
}

namespace serial {

std::vector<SweepResult> monte_carlo_sweep(const std::vector<GridPoint>& grid, int trials, std::uint64_t base_seed,
                                           const SweepSetup& setup, const DigitalBaseline& baseline,
                                           const SyntheticTask& task) {
    check_sweep_args(trials);
    std::vector<SweepResult> out;
    for (const auto& point : grid) {
        std::vector<TrialRecord> records;
        for (int t = 0; t < trials; ++t)
            records.push_back(run_trial_with(point, t, base_seed, setup, baseline, task,
                                             static_cast<AccuracySignature>(&serial::evaluate_ota_accuracy)));
        out.push_back(aggregate(point, std::move(records)));
    }
    return out;
}

}  // namespace serial

}  // namespace airfc
