#pragma once

#include "airfc/ao_solver.hpp"
#include "airfc/channel_model.hpp"
#include "airfc/system.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace airfc {

/// ||realized - W||_F^2 / ||W||_F^2. Throws undefined_metric for W = 0.
double imitation_nmse(const CMatrix& realized, const CMatrix& w);

// ---------------------------------------------------------------------------
// Synthetic classification task
// ---------------------------------------------------------------------------

/// Complex Gaussian-mixture data, whitened with the training-set statistics so that the
/// training inputs satisfy (1/n) sum x x^H = I. Samples are stored as columns.
struct SyntheticTask {
    CMatrix train_x;
    std::vector<int> train_y;
    CMatrix test_x;
    std::vector<int> test_y;
    int classes = 0;
    CMatrix class_means;  // N x C, before whitening
    double spread = 0.0;
    std::uint64_t seed = 0;

    Index features() const { return train_x.rows(); }
};

/// `samples` are split evenly into train and test halves; labels cycle through the classes,
/// so both splits are class balanced whenever their size is a multiple of C.
SyntheticTask make_synthetic_task(int n_features, int classes, int samples, double spread, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Digital baseline and decoding
// ---------------------------------------------------------------------------

struct DigitalBaseline {
    CMatrix w;  // N x N; rows >= C are zero for a trained baseline
    CVector b;  // N
    int classes = 0;
    double reported_accuracy = 0.0;
    double ridge = 0.0;
    bool ridge_increased = false;
};

/// Ridge regression of one-hot targets (embedded in the first C output coordinates) on [x; 1].
DigitalBaseline train_digital_fc(const SyntheticTask& task, double ridge = 1e-3);

/// Baseline from externally supplied weights; accuracy is measured on `task`.
DigitalBaseline baseline_from_weights(const CMatrix& w, const CVector& b, const SyntheticTask& task);

enum class TieBreak { LowestIndex, SeededUniform };

/// Global phase of the realized map relative to the target, arg tr(W^H M). Zero when M = W.
double realized_phase(const CMatrix& realized, const CMatrix& w);

/// argmax_c Re(exp(-j phase) y_c) over the first `classes` coordinates.
int decode_class(const CVector& y, int classes, double phase, TieBreak tie = TieBreak::LowestIndex,
                 Rng* rng = nullptr);

/// Noise-free accuracy of W x + b on the test split.
double digital_accuracy(const DigitalBaseline& baseline, const SyntheticTask& task);

/// Over-the-air inference on the test split: logits = exp(-j phi) F2 (H_eff F1 x + n_in) + b,
/// with phi = realized_phase(F2 H_eff F1, W). Noise is redrawn for every sample and draw; each
/// (sample, draw) pair owns an RNG stream derived from one value drawn from `rng`, so the result
/// does not depend on the thread count. OpenMP-parallel over test samples.
double evaluate_ota_accuracy(const AirFcParams& params, const ChannelSet& ch, const NoiseModel& noise,
                             const DigitalBaseline& baseline, const SyntheticTask& task, int n_noise_draws, Rng& rng,
                             TieBreak tie = TieBreak::LowestIndex);

// ---------------------------------------------------------------------------
// Monte-Carlo sweep
// ---------------------------------------------------------------------------

struct GridPoint {
    int groups = 1;
    int relays_per_group = 1;
    double p_relay_w = 1.0;
    double d_max_m = 100.0;
    bool direct_link = false;

    friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

/// Everything held fixed across the grid.
struct SweepSetup {
    int antennas = 8;
    double p_max_w = 8.0;
    double sigma_u_sq = 0.0;
    double sigma_c_sq = 0.0;
    Heights heights;
    ChannelSetConfig channel;  // n_t/n_r/direct_link are overwritten per point
    AoConfig ao;
    int noise_draws = 1;
    TieBreak tie = TieBreak::LowestIndex;
};

struct TrialRecord {
    int trial = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    int iterations = 0;
    Termination termination = Termination::MaxIterations;
    double nmse = 0.0;
    double accuracy = 0.0;
    double imitation_error = 0.0;
    double noise_penalty = 0.0;
    double objective = 0.0;
    double max_violation = 0.0;
};

struct SampleStats {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation (n - 1); zero for a single value
};

SampleStats sample_stats(const std::vector<double>& values);

struct SweepResult {
    GridPoint point;
    std::vector<TrialRecord> trials;
    int completed = 0;
    bool partial = false;
    SampleStats nmse;
    SampleStats accuracy;
    SampleStats objective;
};

/// Seed of trial `trial`; depends on the base seed and trial index only, so a grid point
/// listed twice sees the same realizations.
std::uint64_t trial_seed(std::uint64_t base_seed, int trial);

/// One (topology, channel) realization through run_ao and evaluation. Never throws; failures
/// are reported in the record.
TrialRecord run_trial(const GridPoint& point, int trial, std::uint64_t base_seed, const SweepSetup& setup,
                      const DigitalBaseline& baseline, const SyntheticTask& task);

/// Aggregates trial records in order.
SweepResult aggregate(const GridPoint& point, std::vector<TrialRecord> trials);

/// All (point, trial) jobs run OpenMP-parallel; results are collected in (point, trial) order.
std::vector<SweepResult> monte_carlo_sweep(const std::vector<GridPoint>& grid, int trials, std::uint64_t base_seed,
                                           const SweepSetup& setup, const DigitalBaseline& baseline,
                                           const SyntheticTask& task);

/// Single-threaded reference implementations of the parallel kernels, kept for testing and
/// benchmarking. They must produce bit-identical results.
namespace serial {

double evaluate_ota_accuracy(const AirFcParams& params, const ChannelSet& ch, const NoiseModel& noise,
                             const DigitalBaseline& baseline, const SyntheticTask& task, int n_noise_draws, Rng& rng,
                             TieBreak tie = TieBreak::LowestIndex);

std::vector<SweepResult> monte_carlo_sweep(const std::vector<GridPoint>& grid, int trials, std::uint64_t base_seed,
                                           const SweepSetup& setup, const DigitalBaseline& baseline,
                                           const SyntheticTask& task);

}  // namespace serial

}  // namespace airfc
