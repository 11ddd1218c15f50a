#pragma once

// Series ingestion, sliding windows, chronological splits and per-node
// z-scoring for forecasting.

#include <string>
#include <vector>

#include "citrus/graphs.hpp"
#include "citrus/training.hpp"

namespace citrus::experiments {

/// Dense, header-free, comma-separated numeric file. Throws ParseError with
/// the offending line for ragged rows or non-numeric cells.
Matrix load_csv_matrix(const std::string& path);
Matrix parse_csv_matrix(const std::string& text, const std::string& origin);

struct ForecastDataset {
  Matrix raw;  // nodes x timesteps
  FactorGraph spatial;
  FactorGraph temporal;  // path over the T input steps
  std::size_t history = 0;  // T
  std::size_t horizon = 0;  // H
  std::vector<std::size_t> train, val, test;  // window start columns
  std::vector<double> mean, stddev;           // per node, train columns only

  std::size_t nodes() const { return raw.rows(); }
  std::size_t window_count() const { return train.size() + val.size() + test.size(); }
};

/// Number of windows (x_{s..s+T-1}, y_{s+T..s+T+H-1}) in a series of length
/// `steps`. Throws std::invalid_argument when steps < T + H.
std::size_t window_count(std::size_t steps, std::size_t history, std::size_t horizon);

/// Windows are split in time order: the first train_fraction go to training,
/// the next val_fraction to validation, the rest to test. Normalization
/// statistics use only the columns touched by training windows; a node with
/// zero spread is given unit scale.
ForecastDataset make_forecast_dataset(Matrix raw, FactorGraph spatial, std::size_t history,
                                      std::size_t horizon, double train_fraction,
                                      double val_fraction);

/// Normalized input (nodes x T x 1) and target (nodes x H) of one window.
Sample make_sample(const ForecastDataset& ds, std::size_t start);
std::vector<Sample> make_samples(const ForecastDataset& ds, const std::vector<std::size_t>& starts);

/// Maps a normalized nodes x H prediction back to series units.
Matrix denormalize(const ForecastDataset& ds, const Matrix& normalized);
/// Raw target of one window, nodes x H.
Matrix raw_target(const ForecastDataset& ds, std::size_t start);

}  // namespace citrus::experiments
