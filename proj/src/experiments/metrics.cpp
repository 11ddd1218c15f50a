#include "citrus/experiments/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace citrus::experiments {

void MetricAccumulator::add(std::span<const double> truth, std::span<const double> pred) {
  if (truth.size() != pred.size())
    throw std::invalid_argument("metrics: truth and prediction sizes differ");
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = truth[i] - pred[i];
    abs_sum_ += std::abs(e);
    sq_sum_ += e * e;
    truth_sq_ += truth[i] * truth[i];
    if (std::abs(truth[i]) >= mape_floor) {
      pct_sum_ += std::abs(e / truth[i]);
      ++pct_count_;
    }
  }
  count_ += truth.size();
}

ForecastMetrics MetricAccumulator::result() const {
  if (count_ == 0) throw std::invalid_argument("metrics: no entries");
  ForecastMetrics m;
  const double n = static_cast<double>(count_);
  m.count = count_;
  m.mae = abs_sum_ / n;
  m.rmse = std::sqrt(sq_sum_ / n);
  m.mape = pct_count_ ? 100.0 * pct_sum_ / double(pct_count_)
                      : std::numeric_limits<double>::quiet_NaN();
  m.mape_excluded = count_ - pct_count_;
  m.rnmse = truth_sq_ > 0 ? std::sqrt(sq_sum_ / truth_sq_)
                          : (sq_sum_ == 0 ? 0.0 : std::numeric_limits<double>::infinity());
  return m;
}

ForecastMetrics forecast_metrics(std::span<const double> truth, std::span<const double> pred) {
  MetricAccumulator acc;
  acc.add(truth, pred);
  return acc.result();
}

}  // namespace citrus::experiments
