#include "citrus/experiments/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "citrus/errors.hpp"
#include "citrus/experiments/config.hpp"

namespace citrus::experiments {

Matrix parse_csv_matrix(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::size_t count = 0;
    std::stringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        values.push_back(parse_real(cell, "cell"));
      } catch (const ParseError&) {
        throw ParseError(origin + ":" + std::to_string(lineno) + ": non-numeric cell '" + cell +
                         "'");
      }
      ++count;
    }
    if (line.back() == ',')
      throw ParseError(origin + ":" + std::to_string(lineno) + ": trailing comma");
    if (rows == 0) cols = count;
    else if (count != cols)
      throw ParseError(origin + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(cols) + " cells, found " + std::to_string(count));
    ++rows;
  }
  if (rows == 0) throw ParseError(origin + ": no data rows");
  return Matrix(rows, cols, std::move(values));
}

Matrix load_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_csv_matrix(buf.str(), path);
}

std::size_t window_count(std::size_t steps, std::size_t history, std::size_t horizon) {
  if (history == 0 || horizon == 0)
    throw std::invalid_argument("window: T and H must be positive");
  if (steps < history + horizon)
    throw std::invalid_argument("window: series of length " + std::to_string(steps) +
                                " is shorter than T + H = " + std::to_string(history + horizon));
  return steps - history - horizon + 1;
}

ForecastDataset make_forecast_dataset(Matrix raw, FactorGraph spatial, std::size_t history,
                                      std::size_t horizon, double train_fraction,
                                      double val_fraction) {
  if (spatial.n != raw.rows())
    throw std::invalid_argument("dataset: spatial graph has " + std::to_string(spatial.n) +
                                " nodes but the series has " + std::to_string(raw.rows()));
  if (!(train_fraction > 0.0) || val_fraction < 0.0 || train_fraction + val_fraction >= 1.0)
    throw std::invalid_argument("dataset: need train > 0, val >= 0 and train + val < 1");
  const std::size_t windows = window_count(raw.cols(), history, horizon);
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * double(windows)));
  const auto n_val = static_cast<std::size_t>(std::floor(val_fraction * double(windows)));
  if (n_train == 0 || n_train + n_val >= windows)
    throw std::invalid_argument("dataset: " + std::to_string(windows) +
                                " windows are too few for a train/val/test split");

  ForecastDataset ds;
  ds.history = history;
  ds.horizon = horizon;
  ds.temporal = path_graph(history);
  for (std::size_t s = 0; s < windows; ++s)
    (s < n_train ? ds.train : s < n_train + n_val ? ds.val : ds.test).push_back(s);

  const std::size_t train_cols = n_train - 1 + history + horizon;
  ds.mean.assign(raw.rows(), 0.0);
  ds.stddev.assign(raw.rows(), 1.0);
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    double m = 0.0;
    for (std::size_t c = 0; c < train_cols; ++c) m += raw(i, c);
    m /= double(train_cols);
    double v = 0.0;
    for (std::size_t c = 0; c < train_cols; ++c) v += (raw(i, c) - m) * (raw(i, c) - m);
    const double sd = std::sqrt(v / double(train_cols));
    ds.mean[i] = m;
    ds.stddev[i] = sd > 0.0 ? sd : 1.0;
  }
  ds.raw = std::move(raw);
  ds.spatial = std::move(spatial);
  return ds;
}

Sample make_sample(const ForecastDataset& ds, std::size_t start) {
  const std::size_t n = ds.nodes();
  if (start + ds.history + ds.horizon > ds.raw.cols())
    throw std::out_of_range("make_sample: window past the end of the series");
  Sample s;
  s.input = DenseTensor({n, ds.history, 1});
  for (std::size_t k = 0; k < ds.history; ++k)
    for (std::size_t i = 0; i < n; ++i)
      s.input[i + n * k] = (ds.raw(i, start + k) - ds.mean[i]) / ds.stddev[i];
  s.target = Matrix(n, ds.horizon);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t h = 0; h < ds.horizon; ++h)
      s.target(i, h) = (ds.raw(i, start + ds.history + h) - ds.mean[i]) / ds.stddev[i];
  return s;
}

std::vector<Sample> make_samples(const ForecastDataset& ds, const std::vector<std::size_t>& starts) {
  std::vector<Sample> out;
  out.reserve(starts.size());
  for (std::size_t s : starts) out.push_back(make_sample(ds, s));
  return out;
}

Matrix denormalize(const ForecastDataset& ds, const Matrix& normalized) {
  Matrix out = normalized;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t h = 0; h < out.cols(); ++h) out(i, h) = out(i, h) * ds.stddev[i] + ds.mean[i];
  return out;
}

Matrix raw_target(const ForecastDataset& ds, std::size_t start) {
  Matrix out(ds.nodes(), ds.horizon);
  for (std::size_t i = 0; i < ds.nodes(); ++i)
    for (std::size_t h = 0; h < ds.horizon; ++h) out(i, h) = ds.raw(i, start + ds.history + h);
  return out;
}

}  // namespace citrus::experiments
