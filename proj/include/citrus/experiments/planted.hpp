#pragma once

// Synthetic tasks with a known generator: smooth spatiotemporal series for
// forecasting, a single-block teacher for receptive-field recovery, and a
// full-spectrum teacher for the eigenpair truncation sweep.

#include <cstdint>
#include <vector>

#include "citrus/graphs.hpp"
#include "citrus/training.hpp"

namespace citrus::experiments {

/// Two sinusoids (periods 20 and 7) with random node amplitudes and phases,
/// plus a per-node AR(1) component z_s = persistence * z_{s-1} + N(0,
/// innovation^2), all diffused over the spatial graph with e^{-t L^}.
Matrix planted_series(const FactorGraph& spatial, std::size_t steps, double diffusion,
                      double persistence, double innovation, std::uint64_t seed);

struct RecoveryConfig {
  std::vector<std::size_t> sizes{10, 12};
  std::vector<double> times{0.6, 1.5};
  double edge_probability = 0.4;
  std::size_t channels = 3;
  std::size_t outputs = 2;
  std::size_t train_samples = 48;
  std::size_t val_samples = 16;
  std::size_t test_samples = 16;
  double noise = 0.02;  // standard deviation of train/val target noise
  TrainConfig train{LossKind::mse, 0.02, 0.9, 0.999, 1e-8, 8, 500, 500, 0};
  std::uint64_t seed = 0;
};

struct RecoveryResult {
  std::vector<double> true_times;
  std::vector<double> learned_times;
  double max_time_error = 0;  // max relative error over factors
  double train_mse = 0;
  double test_rnmse = 0;
  std::size_t epochs = 0;
};

/// Teacher and student share one per-factor diffusion block with identity
/// activation on combinatorial Laplacian bases; only the student is trained.
/// Train and validation targets carry N(0, noise^2) observation noise; the
/// test set is scored against the noiseless teacher.
RecoveryResult run_recovery(const RecoveryConfig& cfg);

struct TruncationTask {
  std::vector<SpectralBasis> bases;  // full factor bases
  std::vector<Sample> train, val;
};

/// Inputs X ~ N(0, 1) and targets from a one-block ReLU teacher with a short
/// receptive field, so that high-frequency modes carry signal.
TruncationTask make_truncation_task(const std::vector<std::size_t>& sizes, double edge_probability,
                                    double teacher_time, std::size_t channels,
                                    std::size_t outputs, std::size_t train_samples,
                                    std::size_t val_samples, std::uint64_t seed);

/// Student on K leading eigenpairs of every factor under `policy`.
/// Throws std::invalid_argument when K exceeds a factor size.
CitrusModel make_truncation_student(const TruncationTask& task, std::size_t k,
                                    TruncationPolicy policy, std::size_t channels,
                                    std::size_t outputs, std::uint64_t seed);

}  // namespace citrus::experiments
