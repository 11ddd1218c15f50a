#pragma once

// Losses, reverse-mode gradients through the spectral model, a finite
// difference checker, and an Adam training loop.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "citrus/layer.hpp"

namespace citrus {

enum class LossKind { mae, mse };

const char* to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

/// Mean absolute or mean squared error over all entries.
double loss(const Matrix& pred, const Matrix& target, LossKind kind);
double loss(const DenseTensor& pred, const DenseTensor& target, LossKind kind);

/// One supervised example. An empty row mask scores every output row;
/// otherwise only rows with a nonzero mask entry contribute.
struct Sample {
  DenseTensor input;
  Matrix target;
  std::vector<std::uint8_t> row_mask;
};

/// Named view of one parameter array inside a model.
struct ParameterRef {
  std::string name;
  std::span<double> values;
};

/// Parameters in a fixed order: encoder, then per block (receptive field raw
/// values, mix, mlp layers), then decoder and decoder bias.
std::vector<ParameterRef> parameters(CitrusModel& model);

struct GradientSet {
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;

  static GradientSet zeros_like(const CitrusModel& model);
  GradientSet& operator+=(const GradientSet& other);
  GradientSet& operator*=(double s);
  double max_abs() const;
};

/// Loss (with the row mask applied) and d loss / d output.
double loss_and_gradient(const Matrix& pred, const Sample& sample, LossKind kind, Matrix& grad);

/// Loss of one sample without gradients.
double sample_loss(const CitrusModel& model, const Sample& sample, LossKind kind);

/// Exact gradient of the sample loss with respect to every model parameter.
/// The MAE subgradient at a zero residual is 0. Throws NumericalError naming
/// the parameter when a gradient entry is not finite.
double backward(const CitrusModel& model, const Sample& sample, LossKind kind,
                GradientSet& grads);

/// Max over parameters of |analytic - central difference| /
/// max(1e-8, |central difference|) with step h.
double fd_check(const CitrusModel& model, const Sample& sample, LossKind kind, double h);

struct TrainConfig {
  LossKind loss = LossKind::mse;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 300;
  std::size_t patience = 25;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;

  static AdamState zeros_like(const CitrusModel& model);
};

/// One bias-corrected Adam update of every parameter.
void adam_step(CitrusModel& model, const GradientSet& grads, AdamState& state,
               const TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
};

struct TrainResult {
  CitrusModel model;  // parameters with the best validation loss
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0;
};

/// Mean per-sample loss over a set, summed in index order.
double mean_loss(const CitrusModel& model, const std::vector<Sample>& samples, LossKind kind);

/// Mini-batch Adam with seeded shuffling. Keeps the parameters with the best
/// validation loss and stops once `patience` consecutive epochs fail to
/// improve on it.
TrainResult train(CitrusModel model, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set, const TrainConfig& cfg);

}  // namespace citrus
