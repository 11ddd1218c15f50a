#pragma once

#include <span>
#include <vector>

namespace citrus::experiments {

struct ForecastMetrics {
  double mae = 0;
  double mape = 0;  // percent, over targets with |y| >= mape_floor
  double rmse = 0;
  double rnmse = 0;  // sqrt(sum (y - yhat)^2 / sum y^2)
  std::size_t count = 0;
  std::size_t mape_excluded = 0;
};

inline constexpr double mape_floor = 1e-6;

/// Throws std::invalid_argument on empty or mismatched inputs.
ForecastMetrics forecast_metrics(std::span<const double> truth, std::span<const double> pred);

/// Accumulates entries in order and reports the same metrics.
class MetricAccumulator {
 public:
  void add(std::span<const double> truth, std::span<const double> pred);
  ForecastMetrics result() const;

 private:
  double abs_sum_ = 0, sq_sum_ = 0, truth_sq_ = 0, pct_sum_ = 0;
  std::size_t count_ = 0, pct_count_ = 0;
};

}  // namespace citrus::experiments
