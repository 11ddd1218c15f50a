#include "citrus/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "citrus/errors.hpp"
#include "citrus/random.hpp"

namespace citrus {

const char* to_string(LossKind kind) { return kind == LossKind::mae ? "mae" : "mse"; }

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "mae") return LossKind::mae;
  if (name == "mse") return LossKind::mse;
  throw std::invalid_argument("unknown loss '" + name + "'");
}

namespace {

double loss_span(std::span<const double> pred, std::span<const double> target, LossKind kind) {
  if (pred.size() != target.size()) throw std::invalid_argument("loss: shape mismatch");
  if (pred.empty()) throw std::invalid_argument("loss: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = pred[i] - target[i];
    s += kind == LossKind::mae ? std::abs(r) : r * r;
  }
  return s / static_cast<double>(pred.size());
}

}  // namespace

double loss(const Matrix& pred, const Matrix& target, LossKind kind) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw std::invalid_argument("loss: shape mismatch");
  return loss_span(pred.data(), target.data(), kind);
}

double loss(const DenseTensor& pred, const DenseTensor& target, LossKind kind) {
  if (pred.shape() != target.shape()) throw std::invalid_argument("loss: shape mismatch");
  return loss_span(pred.data(), target.data(), kind);
}

namespace {

// Calls f(name, values) for each parameter array in the canonical order.
template <class Model, class F>
void visit_parameters(Model& model, F&& f) {
  if (!model.encoder.empty()) f(std::string("encoder"), model.encoder.data());
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    auto& blk = model.blocks[b];
    const std::string prefix = "block" + std::to_string(b) + ".";
    f(prefix + "receptive", std::span(blk.receptive.raw));
    f(prefix + "mix", blk.mix.data());
    for (std::size_t h = 0; h < blk.mlp.size(); ++h)
      f(prefix + "mlp" + std::to_string(h), blk.mlp[h].data());
  }
  f(std::string("decoder"), model.decoder.data());
  f(std::string("decoder_bias"), std::span(model.decoder_bias));
}

}  // namespace

std::vector<ParameterRef> parameters(CitrusModel& model) {
  std::vector<ParameterRef> refs;
  visit_parameters(model, [&](std::string name, std::span<double> values) {
    refs.push_back({std::move(name), values});
  });
  return refs;
}

GradientSet GradientSet::zeros_like(const CitrusModel& model) {
  GradientSet g;
  visit_parameters(model, [&](std::string name, std::span<const double> values) {
    g.names.push_back(std::move(name));
    g.values.emplace_back(values.size(), 0.0);
  });
  return g;
}

GradientSet& GradientSet::operator+=(const GradientSet& other) {
  if (values.size() != other.values.size())
    throw std::invalid_argument("GradientSet +=: layout mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].size() != other.values[i].size())
      throw std::invalid_argument("GradientSet +=: layout mismatch at " + names[i]);
    for (std::size_t j = 0; j < values[i].size(); ++j) values[i][j] += other.values[i][j];
  }
  return *this;
}

GradientSet& GradientSet::operator*=(double s) {
  for (auto& v : values)
    for (double& x : v) x *= s;
  return *this;
}

double GradientSet::max_abs() const {
  double m = 0.0;
  for (const auto& v : values)
    for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double loss_and_gradient(const Matrix& pred, const Sample& sample, LossKind kind, Matrix& grad) {
  const Matrix& target = sample.target;
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw std::invalid_argument("loss: prediction is " + std::to_string(pred.rows()) + "x" +
                                std::to_string(pred.cols()) + ", target is " +
                                std::to_string(target.rows()) + "x" +
                                std::to_string(target.cols()));
  const bool masked = !sample.row_mask.empty();
  if (masked && sample.row_mask.size() != pred.rows())
    throw std::invalid_argument("loss: row mask length does not match the output rows");
  std::size_t rows = 0;
  for (std::size_t r = 0; r < pred.rows(); ++r)
    if (!masked || sample.row_mask[r]) ++rows;
  if (rows == 0) throw std::invalid_argument("loss: row mask selects no rows");
  const double n = static_cast<double>(rows * pred.cols());

  grad = Matrix(pred.rows(), pred.cols());
  double total = 0.0;
  for (std::size_t r = 0; r < pred.rows(); ++r) {
    if (masked && !sample.row_mask[r]) continue;
    for (std::size_t c = 0; c < pred.cols(); ++c) {
      const double res = pred(r, c) - target(r, c);
      if (kind == LossKind::mae) {
        total += std::abs(res);
        grad(r, c) = (res > 0 ? 1.0 : (res < 0 ? -1.0 : 0.0)) / n;
      } else {
        total += res * res;
        grad(r, c) = 2.0 * res / n;
      }
    }
  }
  return total / n;
}

double sample_loss(const CitrusModel& model, const Sample& sample, LossKind kind) {
  Matrix grad;
  return loss_and_gradient(model_forward(sample.input, model), sample, kind, grad);
}

namespace {

void add_into(std::vector<double>& dst, const Matrix& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src.data()[i];
}

// Backpropagates d loss / d block output through one block. Accumulates the
// block's parameter gradients and returns d loss / d block input (nodes x F_in).
Matrix block_backward(const CitrusBlock& block, const BlockTrace& trace,
                      const std::vector<SpectralBasis>& bases, const Matrix& grad_out,
                      std::vector<double>& g_raw, std::vector<double>& g_mix,
                      std::vector<std::vector<double>*>& g_mlp) {
  Matrix d_act = grad_out;
  for (std::size_t h = block.mlp.size(); h > 0; --h) {
    const Matrix& pre = trace.pre[h];
    Matrix d_pre = d_act;
    for (std::size_t i = 0; i < d_pre.size(); ++i)
      d_pre.data()[i] *= block.activation.derivative(pre.data()[i]);
    add_into(*g_mlp[h - 1], matmul_tn(trace.post[h - 1], d_pre));
    d_act = matmul_nt(d_pre, block.mlp[h - 1]);
  }
  Matrix d_pre0 = d_act;
  for (std::size_t i = 0; i < d_pre0.size(); ++i)
    d_pre0.data()[i] *= block.activation.derivative(trace.pre[0].data()[i]);
  add_into(g_mix, matmul_tn(trace.filtered, d_pre0));
  const Matrix d_filtered = matmul_nt(d_pre0, block.mix);

  std::vector<std::size_t> graph_shape;
  for (const auto& b : bases) graph_shape.push_back(b.source_n);
  // Adjoint of the inverse transform is the forward transform.
  DenseTensor d_scaled = to_spectral(from_node_matrix(d_filtered, graph_shape), bases);

  const Matrix& response = trace.response;
  const std::size_t f = d_scaled.shape().back();
  const std::size_t rows = d_scaled.size() / f;
  const std::size_t p_count = bases.size();
  const Matrix times = block.receptive.effective();
  Matrix d_times(times.rows(), times.cols());

  std::vector<std::size_t> strides(p_count, 1);
  for (std::size_t p = 1; p < p_count; ++p) strides[p] = strides[p - 1] * bases[p - 1].k;

  auto d_data = d_scaled.data();
  const auto s_data = trace.spectral.data();
  for (std::size_t c = 0; c < f; ++c) {
    const std::size_t rc = response.cols() == 1 ? 0 : c;
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t flat = r + rows * c;
      const double d_resp = d_data[flat] * s_data[flat];
      const double resp = response(r, rc);
      if (d_resp != 0.0) {
        for (std::size_t p = 0; p < p_count; ++p) {
          const double lam = bases[p].eigenvalues[(r / strides[p]) % bases[p].k];
          d_times(p, rc) -= d_resp * lam * resp;
        }
      }
      d_data[flat] *= resp;
    }
  }
  for (std::size_t p = 0; p < times.rows(); ++p)
    for (std::size_t c = 0; c < times.cols(); ++c) {
      const std::size_t idx = block.receptive.raw_index(p, c);
      g_raw[idx] += d_times(p, c) * sigmoid(block.receptive.raw[idx]);
    }

  Matrix d_input = node_matrix(from_spectral(d_scaled, bases));
  if (block.residual) d_input += grad_out;
  return d_input;
}

void check_finite(const GradientSet& grads) {
  for (std::size_t i = 0; i < grads.values.size(); ++i)
    for (std::size_t j = 0; j < grads.values[i].size(); ++j)
      if (!std::isfinite(grads.values[i][j]))
        throw NumericalError("non-finite gradient at " + grads.names[i] + "[" +
                             std::to_string(j) + "]");
}

}  // namespace

double backward(const CitrusModel& model, const Sample& sample, LossKind kind,
                GradientSet& grads) {
  grads = GradientSet::zeros_like(model);
  ModelTrace trace;
  const Matrix pred = model_forward(sample.input, model, &trace);
  Matrix d_out;
  const double value = loss_and_gradient(pred, sample, kind, d_out);
  if (!std::isfinite(value)) throw NumericalError("non-finite loss value");

  std::size_t slot = 0;
  std::vector<double>* g_encoder = model.encoder.empty() ? nullptr : &grads.values[slot++];
  struct BlockSlots {
    std::vector<double>* raw;
    std::vector<double>* mix;
    std::vector<std::vector<double>*> mlp;
  };
  std::vector<BlockSlots> block_slots;
  for (const auto& blk : model.blocks) {
    BlockSlots s;
    s.raw = &grads.values[slot++];
    s.mix = &grads.values[slot++];
    for (std::size_t h = 0; h < blk.mlp.size(); ++h) s.mlp.push_back(&grads.values[slot++]);
    block_slots.push_back(std::move(s));
  }
  std::vector<double>& g_decoder = grads.values[slot++];
  std::vector<double>& g_bias = grads.values[slot++];

  for (std::size_t r = 0; r < d_out.rows(); ++r)
    for (std::size_t c = 0; c < d_out.cols(); ++c) g_bias[c] += d_out(r, c);
  add_into(g_decoder, matmul_tn(trace.readout, d_out));

  const auto shape = model.graph_shape();
  const std::size_t f_enc = trace.encoded.cols();
  const Matrix d_cat = readout_matrix_adjoint(matmul_nt(d_out, model.decoder), shape,
                                              model.readout_modes, model.concat_channels());
  const std::size_t offset = model.concat_encoded ? f_enc : 0;
  Matrix d_encoded(d_cat.rows(), f_enc);
  Matrix d_h(d_cat.rows(), d_cat.cols() - offset);
  for (std::size_t r = 0; r < d_cat.rows(); ++r) {
    for (std::size_t c = 0; c < offset; ++c) d_encoded(r, c) = d_cat(r, c);
    for (std::size_t c = offset; c < d_cat.cols(); ++c) d_h(r, c - offset) = d_cat(r, c);
  }
  if (model.blocks.empty()) {
    if (!model.concat_encoded) d_encoded = d_h;
  } else {
    for (std::size_t b = model.blocks.size(); b-- > 0;)
      d_h = block_backward(model.blocks[b], trace.blocks[b], model.bases, d_h,
                           *block_slots[b].raw, *block_slots[b].mix, block_slots[b].mlp);
    d_encoded += d_h;
  }
  if (g_encoder) add_into(*g_encoder, matmul_tn(trace.input, d_encoded));

  check_finite(grads);
  return value;
}

double fd_check(const CitrusModel& model, const Sample& sample, LossKind kind, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_check: h must be > 0");
  GradientSet analytic;
  backward(model, sample, kind, analytic);
  CitrusModel probe = model;
  auto refs = parameters(probe);
  double worst = 0.0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    for (std::size_t j = 0; j < refs[i].values.size(); ++j) {
      const double saved = refs[i].values[j];
      refs[i].values[j] = saved + h;
      const double up = sample_loss(probe, sample, kind);
      refs[i].values[j] = saved - h;
      const double down = sample_loss(probe, sample, kind);
      refs[i].values[j] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double err = std::abs(analytic.values[i][j] - fd) / std::max(1e-8, std::abs(fd));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
  if (!(cfg.beta1 > 0.0 && cfg.beta1 < 1.0)) throw std::invalid_argument("beta1 must lie in (0, 1)");
  if (!(cfg.beta2 > 0.0 && cfg.beta2 < 1.0)) throw std::invalid_argument("beta2 must lie in (0, 1)");
  if (!(cfg.epsilon > 0.0)) throw std::invalid_argument("adam epsilon must be > 0");
  if (cfg.batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
}

AdamState AdamState::zeros_like(const CitrusModel& model) {
  AdamState s;
  const GradientSet g = GradientSet::zeros_like(model);
  s.m = g.values;
  s.v = g.values;
  return s;
}

void adam_step(CitrusModel& model, const GradientSet& grads, AdamState& state,
               const TrainConfig& cfg) {
  auto refs = parameters(model);
  if (refs.size() != grads.values.size() || state.m.size() != refs.size())
    throw std::invalid_argument("adam_step: parameter layout mismatch");
  check_finite(grads);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto& g = grads.values[i];
    if (g.size() != refs[i].values.size() || m.size() != g.size())
      throw std::invalid_argument("adam_step: shape mismatch at " + refs[i].name);
    for (std::size_t j = 0; j < g.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      refs[i].values[j] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

double mean_loss(const CitrusModel& model, const std::vector<Sample>& samples, LossKind kind) {
  if (samples.empty()) throw std::invalid_argument("mean_loss: empty sample set");
  double total = 0.0;
  for (const auto& s : samples) total += sample_loss(model, s, kind);
  return total / static_cast<double>(samples.size());
}

TrainResult train(CitrusModel model, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set, const TrainConfig& cfg) {
  validate(cfg);
  if (train_set.empty()) throw std::invalid_argument("train: empty training split");
  if (val_set.empty()) throw std::invalid_argument("train: empty validation split");

  TrainResult result;
  result.model = model;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  AdamState state = AdamState::zeros_like(model);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> sample_losses(train_set.size(), 0.0);
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      GradientSet batch = GradientSet::zeros_like(model);
      GradientSet g;
      for (std::size_t i = start; i < end; ++i) {
        sample_losses[order[i]] = backward(model, train_set[order[i]], cfg.loss, g);
        batch += g;
      }
      batch *= 1.0 / static_cast<double>(end - start);
      adam_step(model, batch, state, cfg);
    }
    double train_loss = 0.0;
    for (double l : sample_losses) train_loss += l;
    train_loss /= static_cast<double>(sample_losses.size());
    const double val_loss = mean_loss(model, val_set, cfg.loss);
    result.history.push_back({epoch, train_loss, val_loss});

    if (val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      result.model = model;
      since_best = 0;
    } else if (++since_best > cfg.patience) {
      break;
    }
  }
  return result;
}

}  // namespace citrus
