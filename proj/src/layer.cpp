#include "citrus/layer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "citrus/graphs.hpp"
#include "citrus/random.hpp"

namespace citrus {

double softplus(double x) {
  // log1p(exp(x)) without overflow for large x.
  return x > 30.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw std::invalid_argument("softplus_inverse: argument must be > 0");
  return y > 30.0 ? y + std::log(-std::expm1(-y)) : std::log(std::expm1(y));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

const char* to_string(FieldMode mode) {
  switch (mode) {
    case FieldMode::scalar: return "scalar";
    case FieldMode::per_factor: return "per_factor";
    case FieldMode::per_factor_channel: return "per_factor_channel";
  }
  return "?";
}

FieldMode field_mode_from_string(const std::string& name) {
  if (name == "scalar") return FieldMode::scalar;
  if (name == "per_factor") return FieldMode::per_factor;
  if (name == "per_factor_channel") return FieldMode::per_factor_channel;
  throw std::invalid_argument("unknown receptive field mode '" + name + "'");
}

ReceptiveField ReceptiveField::uniform(FieldMode mode, std::size_t factors, std::size_t channels,
                                       double t) {
  ReceptiveField f;
  f.mode = mode;
  f.factors = factors;
  f.channels = channels;
  std::size_t count = 1;
  if (mode == FieldMode::per_factor) count = factors;
  if (mode == FieldMode::per_factor_channel) count = factors * channels;
  f.raw.assign(count, softplus_inverse(t));
  return f;
}

ReceptiveField ReceptiveField::per_factor(const std::vector<double>& times) {
  ReceptiveField f;
  f.mode = FieldMode::per_factor;
  f.factors = times.size();
  for (double t : times) f.raw.push_back(softplus_inverse(t));
  return f;
}

std::size_t ReceptiveField::raw_index(std::size_t factor, std::size_t channel) const {
  switch (mode) {
    case FieldMode::scalar: return 0;
    case FieldMode::per_factor: return factor;
    case FieldMode::per_factor_channel: return factor * channels + channel;
  }
  return 0;
}

Matrix ReceptiveField::effective() const {
  const std::size_t cols = mode == FieldMode::per_factor_channel ? channels : 1;
  Matrix t(factors, cols);
  for (std::size_t p = 0; p < factors; ++p)
    for (std::size_t c = 0; c < cols; ++c) t(p, c) = softplus(raw.at(raw_index(p, c)));
  return t;
}

double Activation::apply(double x) const {
  switch (kind) {
    case ActivationKind::identity: return x;
    case ActivationKind::relu: return x > 0 ? x : 0.0;
    case ActivationKind::leaky_relu: return x > 0 ? x : slope * x;
  }
  return x;
}

double Activation::derivative(double x) const {
  switch (kind) {
    case ActivationKind::identity: return 1.0;
    case ActivationKind::relu: return x > 0 ? 1.0 : 0.0;
    case ActivationKind::leaky_relu: return x > 0 ? 1.0 : slope;
  }
  return 1.0;
}

std::string to_string(const Activation& a) {
  switch (a.kind) {
    case ActivationKind::identity: return "identity";
    case ActivationKind::relu: return "relu";
    case ActivationKind::leaky_relu: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "leaky_relu:%.17g", a.slope);
      return buf;
    }
  }
  return "?";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return {ActivationKind::identity, 0.0};
  if (name == "relu") return {ActivationKind::relu, 0.0};
  if (name == "leaky_relu") return {ActivationKind::leaky_relu, 0.01};
  if (name.rfind("leaky_relu:", 0) == 0)
    return {ActivationKind::leaky_relu, std::stod(name.substr(11))};
  throw std::invalid_argument("unknown activation '" + name + "'");
}

std::vector<std::size_t> CitrusModel::graph_shape() const {
  std::vector<std::size_t> shape;
  for (const auto& b : bases) shape.push_back(b.source_n);
  return shape;
}

std::size_t CitrusModel::input_channels() const {
  if (!encoder.empty()) return encoder.rows();
  if (!blocks.empty()) return blocks.front().in_channels();
  // Decoder-only model: the decoder sees the raw input channels.
  std::size_t rest = 1;
  for (std::size_t p = readout_modes; p < bases.size(); ++p) rest *= bases[p].source_n;
  return decoder.rows() / rest;
}

std::size_t CitrusModel::encoded_channels() const {
  if (!encoder.empty()) return encoder.cols();
  return input_channels();
}

std::size_t CitrusModel::concat_channels() const {
  const std::size_t last = blocks.empty() ? encoded_channels() : blocks.back().out_channels();
  return concat_encoded ? encoded_channels() + last : last;
}

std::size_t CitrusModel::output_rows() const {
  std::size_t rows = 1;
  for (std::size_t p = 0; p < readout_modes; ++p) rows *= bases.at(p).source_n;
  return rows;
}

namespace {

Matrix glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return random_uniform(fan_in, fan_out, rng, -a, a);
}

}  // namespace

CitrusModel make_model(const ModelSpec& spec, std::vector<SpectralBasis> bases,
                       std::uint64_t seed) {
  if (bases.empty()) throw std::invalid_argument("make_model: no factor bases");
  if (spec.readout_modes > bases.size())
    throw std::invalid_argument("make_model: readout_modes exceeds the number of factors");
  CitrusModel model;
  model.bases = std::move(bases);
  model.seed = seed;
  model.concat_encoded = spec.concat_encoded;
  model.readout_modes = spec.readout_modes;
  Rng rng(seed);

  std::size_t channels = spec.in_channels;
  if (spec.encoder_channels > 0) {
    model.encoder = glorot(spec.in_channels, spec.encoder_channels, rng);
    channels = spec.encoder_channels;
  }
  const std::size_t encoded = channels;
  const std::size_t factors = model.bases.size();
  for (const BlockSpec& bs : spec.blocks) {
    CitrusBlock block;
    block.receptive = ReceptiveField::uniform(bs.field, factors, channels, spec.initial_time);
    block.mix = glorot(channels, bs.mix_channels, rng);
    std::size_t width = bs.mix_channels;
    for (std::size_t w : bs.mlp_widths) {
      block.mlp.push_back(glorot(width, w, rng));
      width = w;
    }
    block.activation = bs.activation;
    block.residual = bs.residual;
    if (block.residual && width != channels)
      throw std::invalid_argument("make_model: residual block must preserve the channel count");
    model.blocks.push_back(std::move(block));
    channels = width;
  }

  const std::size_t cat = spec.concat_encoded && !spec.blocks.empty() ? encoded + channels
                                                                       : channels;
  std::size_t rest = 1;
  for (std::size_t p = spec.readout_modes; p < factors; ++p) rest *= model.bases[p].source_n;
  model.decoder = glorot(rest * cat, spec.horizon, rng);
  model.decoder_bias.assign(spec.horizon, 0.0);
  if (spec.blocks.empty()) model.concat_encoded = false;
  return model;
}

namespace {

void check_graph_modes(const DenseTensor& u, const std::vector<std::size_t>& sizes,
                       const char* what) {
  if (u.order() != sizes.size() + 1)
    throw std::invalid_argument(std::string(what) + ": expected an order-" +
                                std::to_string(sizes.size() + 1) + " tensor");
  for (std::size_t p = 0; p < sizes.size(); ++p)
    if (u.dim(p) != sizes[p])
      throw std::invalid_argument(std::string(what) + ": mode " + std::to_string(p) + " has size " +
                                  std::to_string(u.dim(p)) + ", graph factor has " +
                                  std::to_string(sizes[p]));
}

std::vector<std::size_t> laplacian_sizes(const std::vector<Matrix>& laplacians) {
  std::vector<std::size_t> sizes;
  for (const auto& l : laplacians) {
    if (l.rows() != l.cols()) throw std::invalid_argument("laplacian must be square");
    sizes.push_back(l.rows());
  }
  return sizes;
}

std::vector<std::size_t> basis_sizes(const std::vector<SpectralBasis>& bases) {
  std::vector<std::size_t> sizes;
  for (const auto& b : bases) sizes.push_back(b.source_n);
  return sizes;
}

}  // namespace

DenseTensor core_tensor_forward(const DenseTensor& u, const std::vector<Matrix>& laplacians,
                                double t, const Matrix& w) {
  check_graph_modes(u, laplacian_sizes(laplacians), "core_tensor_forward");
  if (w.rows() != u.shape().back())
    throw std::invalid_argument("core_tensor_forward: W rows must equal the channel count");
  DenseTensor out = u;
  for (std::size_t p = 0; p < laplacians.size(); ++p)
    out = mode_product(out, heat_kernel_dense(laplacians[p], t), p);
  return mode_product(out, w.transpose(), laplacians.size());
}

DenseTensor vectorized_forward(const DenseTensor& u, const std::vector<Matrix>& laplacians,
                               double t, const Matrix& w) {
  const auto sizes = laplacian_sizes(laplacians);
  check_graph_modes(u, sizes, "vectorized_forward");
  if (w.rows() != u.shape().back())
    throw std::invalid_argument("vectorized_forward: W rows must equal the channel count");
  const Matrix kernel = heat_kernel_dense(cartesian_sum(laplacians, /*descending=*/true), t);
  return from_node_matrix(matmul(matmul(kernel, node_matrix(u)), w), sizes);
}

DenseTensor to_spectral(const DenseTensor& u, const std::vector<SpectralBasis>& bases) {
  DenseTensor out = u;
  for (std::size_t p = 0; p < bases.size(); ++p)
    out = mode_product(out, bases[p].eigenvectors.transpose(), p);
  return out;
}

DenseTensor from_spectral(const DenseTensor& u, const std::vector<SpectralBasis>& bases) {
  DenseTensor out = u;
  for (std::size_t p = 0; p < bases.size(); ++p) out = mode_product(out, bases[p].eigenvectors, p);
  return out;
}

namespace {

// Scales the spectral tensor (prod K x F, first index fastest) by the filter
// response; a single response column is shared across channels.
void apply_response(DenseTensor& spec, const Matrix& response) {
  const std::size_t f = spec.shape().back();
  const std::size_t rows = spec.size() / f;
  if (response.rows() != rows || (response.cols() != 1 && response.cols() != f))
    throw std::invalid_argument("spectral filter: response shape does not match the signal");
  auto data = spec.data();
  for (std::size_t c = 0; c < f; ++c) {
    const std::size_t rc = response.cols() == 1 ? 0 : c;
    for (std::size_t r = 0; r < rows; ++r) data[r + rows * c] *= response(r, rc);
  }
}

}  // namespace

DenseTensor spectral_filter(const DenseTensor& u, const std::vector<SpectralBasis>& bases,
                            const Matrix& times) {
  check_graph_modes(u, basis_sizes(bases), "spectral_filter");
  DenseTensor spec = to_spectral(u, bases);
  apply_response(spec, product_filter(bases, times));
  return from_spectral(spec, bases);
}

DenseTensor spectral_forward(const DenseTensor& u, const std::vector<SpectralBasis>& bases,
                             const CitrusBlock& block, BlockTrace* trace) {
  const auto sizes = basis_sizes(bases);
  check_graph_modes(u, sizes, "spectral_forward");
  if (u.shape().back() != block.in_channels())
    throw std::invalid_argument("spectral_forward: input has " + std::to_string(u.shape().back()) +
                                " channels, block expects " + std::to_string(block.in_channels()));
  if (block.receptive.factors != bases.size())
    throw std::invalid_argument("spectral_forward: receptive field factor count mismatch");
  if (block.receptive.mode == FieldMode::per_factor_channel &&
      block.receptive.channels != block.in_channels())
    throw std::invalid_argument("spectral_forward: receptive field channel count mismatch");

  DenseTensor spec = to_spectral(u, bases);
  Matrix response = product_filter(bases, block.receptive.effective());
  if (trace) trace->spectral = spec;
  apply_response(spec, response);
  Matrix filtered = node_matrix(from_spectral(spec, bases));

  Matrix pre = matmul(filtered, block.mix);
  Matrix act = pre;
  for (double& v : act.data()) v = block.activation.apply(v);
  if (trace) {
    trace->input = u;
    trace->response = std::move(response);
    trace->filtered = std::move(filtered);
    trace->pre.assign(1, pre);
    trace->post.assign(1, act);
  }
  for (const Matrix& m : block.mlp) {
    pre = matmul(act, m);
    act = pre;
    for (double& v : act.data()) v = block.activation.apply(v);
    if (trace) {
      trace->pre.push_back(pre);
      trace->post.push_back(act);
    }
  }
  if (block.residual) act += node_matrix(u);
  return from_node_matrix(act, sizes);
}

Matrix readout_matrix(const Matrix& nodes, const std::vector<std::size_t>& graph_shape,
                      std::size_t keep) {
  std::size_t kept = 1;
  for (std::size_t p = 0; p < keep; ++p) kept *= graph_shape[p];
  const std::size_t rest = nodes.rows() / kept;
  const std::size_t f = nodes.cols();
  Matrix out(kept, rest * f);
  for (std::size_t c = 0; c < f; ++c)
    for (std::size_t b = 0; b < rest; ++b)
      for (std::size_t a = 0; a < kept; ++a) out(a, b + rest * c) = nodes(a + kept * b, c);
  return out;
}

Matrix readout_matrix_adjoint(const Matrix& readout, const std::vector<std::size_t>& graph_shape,
                              std::size_t keep, std::size_t channels) {
  std::size_t kept = 1;
  for (std::size_t p = 0; p < keep; ++p) kept *= graph_shape[p];
  const std::size_t total = shape_product(graph_shape);
  const std::size_t rest = total / kept;
  Matrix nodes(total, channels);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t b = 0; b < rest; ++b)
      for (std::size_t a = 0; a < kept; ++a) nodes(a + kept * b, c) = readout(a, b + rest * c);
  return nodes;
}

Matrix model_forward(const DenseTensor& window, const CitrusModel& model, ModelTrace* trace) {
  const auto shape = model.graph_shape();
  check_graph_modes(window, shape, "model_forward");
  if (window.shape().back() != model.input_channels())
    throw std::invalid_argument("model_forward: window has " +
                                std::to_string(window.shape().back()) + " channels, model expects " +
                                std::to_string(model.input_channels()));

  Matrix input = node_matrix(window);
  Matrix encoded = model.encoder.empty() ? input : matmul(input, model.encoder);
  DenseTensor h = from_node_matrix(encoded, shape);
  if (trace) trace->blocks.assign(model.blocks.size(), {});
  for (std::size_t b = 0; b < model.blocks.size(); ++b)
    h = spectral_forward(h, model.bases, model.blocks[b], trace ? &trace->blocks[b] : nullptr);

  Matrix last = node_matrix(h);
  Matrix cat = last;
  if (model.concat_encoded) {
    cat = Matrix(last.rows(), encoded.cols() + last.cols());
    for (std::size_t r = 0; r < last.rows(); ++r) {
      for (std::size_t c = 0; c < encoded.cols(); ++c) cat(r, c) = encoded(r, c);
      for (std::size_t c = 0; c < last.cols(); ++c) cat(r, encoded.cols() + c) = last(r, c);
    }
  }
  Matrix readout = readout_matrix(cat, shape, model.readout_modes);
  if (readout.cols() != model.decoder.rows())
    throw std::invalid_argument("model_forward: decoder expects " +
                                std::to_string(model.decoder.rows()) + " inputs, got " +
                                std::to_string(readout.cols()));
  Matrix out = matmul(readout, model.decoder);
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += model.decoder_bias[c];
  if (trace) {
    trace->input = std::move(input);
    trace->encoded = std::move(encoded);
    trace->readout = std::move(readout);
  }
  return out;
}

namespace {

DenseTensor tpdeg_rhs(const DenseTensor& u, const std::vector<Matrix>& laplacians) {
  DenseTensor acc(u.shape());
  for (std::size_t p = 0; p < laplacians.size(); ++p) acc += mode_product(u, laplacians[p], p);
  acc *= -1.0;
  return acc;
}

DenseTensor axpy(const DenseTensor& x, double a, const DenseTensor& y) {
  DenseTensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += a * y[i];
  return out;
}

}  // namespace

DenseTensor tpdeg_integrate(const DenseTensor& u0, const std::vector<Matrix>& laplacians,
                            double t_end, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("tpdeg_integrate: dt must be > 0");
  if (!(t_end >= 0.0)) throw std::invalid_argument("tpdeg_integrate: t_end must be >= 0");
  const auto sizes = laplacian_sizes(laplacians);
  if (u0.order() != sizes.size() && u0.order() != sizes.size() + 1)
    throw std::invalid_argument("tpdeg_integrate: tensor order must be P or P+1");
  for (std::size_t p = 0; p < sizes.size(); ++p)
    if (u0.dim(p) != sizes[p]) throw std::invalid_argument("tpdeg_integrate: mode size mismatch");
  if (t_end == 0.0) return u0;

  const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
  const double h = t_end / static_cast<double>(steps);
  DenseTensor u = u0;
  for (std::size_t s = 0; s < steps; ++s) {
    const DenseTensor k1 = tpdeg_rhs(u, laplacians);
    const DenseTensor k2 = tpdeg_rhs(axpy(u, h / 2, k1), laplacians);
    const DenseTensor k3 = tpdeg_rhs(axpy(u, h / 2, k2), laplacians);
    const DenseTensor k4 = tpdeg_rhs(axpy(u, h, k3), laplacians);
    for (std::size_t i = 0; i < u.size(); ++i)
      u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return u;
}

}  // namespace citrus
