#pragma once

// The CITRUS layer: heat-kernel diffusion over a Cartesian product graph
// followed by channel mixing, plus the assembled encoder/blocks/decoder model.
//
// Graph signals are order-(P+1) tensors N_0 x ... x N_{P-1} x F with the
// channel mode last. The product-graph transform V = V_{P-1} kron ... kron V_0
// is applied implicitly, one mode product per factor.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "citrus/spectral.hpp"
#include "citrus/tensor.hpp"

namespace citrus {

double softplus(double x);
double softplus_inverse(double y);
double sigmoid(double x);

enum class FieldMode { scalar, per_factor, per_factor_channel };

const char* to_string(FieldMode mode);
FieldMode field_mode_from_string(const std::string& name);

/// Learnable diffusion times. Parameters are unconstrained; the effective
/// time is softplus(raw) > 0. Storage is raw[p * channels + c] for the
/// per-channel mode, raw[p] for per-factor and raw[0] for scalar.
struct ReceptiveField {
  FieldMode mode = FieldMode::scalar;
  std::size_t factors = 1;
  std::size_t channels = 1;
  std::vector<double> raw;

  /// Field whose every effective time equals t.
  static ReceptiveField uniform(FieldMode mode, std::size_t factors, std::size_t channels,
                                double t);
  /// Field with per-factor effective times (mode per_factor).
  static ReceptiveField per_factor(const std::vector<double>& times);

  /// Effective times as a P x C matrix; C = 1 unless mode is per_factor_channel.
  Matrix effective() const;
  std::size_t raw_index(std::size_t factor, std::size_t channel) const;
};

enum class ActivationKind { identity, relu, leaky_relu };

struct Activation {
  ActivationKind kind = ActivationKind::relu;
  double slope = 0.01;  // leaky_relu only

  double apply(double x) const;
  /// Derivative at the pre-activation value (0 at the ReLU kink).
  double derivative(double x) const;
};

std::string to_string(const Activation& a);
Activation activation_from_string(const std::string& name);

/// One block: X -> sigma(... sigma(sigma(V (R (.) V^T X) W) M_1) ... M_H) [+ X].
struct CitrusBlock {
  ReceptiveField receptive;
  Matrix mix;               // F_in x F_mix
  std::vector<Matrix> mlp;  // chained F_mix -> ... -> F_out
  Activation activation;
  bool residual = false;

  std::size_t in_channels() const { return mix.rows(); }
  std::size_t out_channels() const { return mlp.empty() ? mix.cols() : mlp.back().cols(); }
};

/// Encoder, blocks, concatenation and decoder over fixed factor bases.
struct CitrusModel {
  std::vector<SpectralBasis> bases;
  Matrix encoder;  // F_in x F_enc, empty means the input feeds the blocks directly
  std::vector<CitrusBlock> blocks;
  bool concat_encoded = true;     // decoder sees [encoded | block output]
  std::size_t readout_modes = 1;  // leading graph modes kept as output rows
  Matrix decoder;                 // (prod remaining graph dims * F_cat) x H
  std::vector<double> decoder_bias;
  TruncationPolicy policy = TruncationPolicy::smallest;
  std::uint64_t seed = 0;

  std::vector<std::size_t> graph_shape() const;
  std::size_t input_channels() const;
  std::size_t encoded_channels() const;
  std::size_t concat_channels() const;
  std::size_t output_rows() const;
  std::size_t horizon() const { return decoder.cols(); }
};

struct BlockSpec {
  std::size_t mix_channels = 4;
  std::vector<std::size_t> mlp_widths;
  FieldMode field = FieldMode::scalar;
  Activation activation;
  bool residual = false;
};

struct ModelSpec {
  std::size_t in_channels = 1;
  std::size_t encoder_channels = 0;  // 0: no encoder
  std::vector<BlockSpec> blocks;
  bool concat_encoded = true;
  std::size_t readout_modes = 1;
  std::size_t horizon = 1;
  double initial_time = 1.0;
};

/// Glorot-uniform weights, zero decoder bias, receptive fields at initial_time.
CitrusModel make_model(const ModelSpec& spec, std::vector<SpectralBasis> bases,
                       std::uint64_t seed);

// ---------------------------------------------------------------------------
// Reference forms of the core function f(U) = U x_0 e^{-tL_0} ... x_{P-1}
// e^{-tL_{P-1}} x_P W^T.

/// Per-mode dense heat kernels, then channel mixing.
DenseTensor core_tensor_forward(const DenseTensor& u, const std::vector<Matrix>& laplacians,
                                double t, const Matrix& w);

/// Same map through the explicit product Laplacian L_{P-1} (+) ... (+) L_0.
DenseTensor vectorized_forward(const DenseTensor& u, const std::vector<Matrix>& laplacians,
                               double t, const Matrix& w);

// ---------------------------------------------------------------------------
// Spectral implementation.

/// U x_0 V_0^T ... x_{P-1} V_{P-1}^T (graph modes only).
DenseTensor to_spectral(const DenseTensor& u, const std::vector<SpectralBasis>& bases);
/// U x_0 V_0 ... x_{P-1} V_{P-1}.
DenseTensor from_spectral(const DenseTensor& u, const std::vector<SpectralBasis>& bases);

/// Diffusion only: V (R (.) V^T U) with R = product_filter(bases, times).
/// `times` is P x 1 (shared over channels) or P x F.
DenseTensor spectral_filter(const DenseTensor& u, const std::vector<SpectralBasis>& bases,
                            const Matrix& times);

/// Intermediates of one block evaluation, kept for the backward pass.
struct BlockTrace {
  DenseTensor input;
  DenseTensor spectral;     // V^T X
  Matrix response;          // product filter, prod K x C
  Matrix filtered;          // V (R (.) V^T X) as nodes x F_in
  std::vector<Matrix> pre;  // pre-activations; pre[0] = filtered * mix
  std::vector<Matrix> post; // activations
};

DenseTensor spectral_forward(const DenseTensor& u, const std::vector<SpectralBasis>& bases,
                             const CitrusBlock& block, BlockTrace* trace = nullptr);

struct ModelTrace {
  Matrix input;    // nodes x F_in
  Matrix encoded;  // nodes x F_enc
  std::vector<BlockTrace> blocks;
  Matrix readout;  // output rows x decoder inputs
};

/// Forward pass of the assembled model; returns output_rows x horizon.
Matrix model_forward(const DenseTensor& window, const CitrusModel& model,
                     ModelTrace* trace = nullptr);

/// Reshapes nodes x F into (rows of the leading `keep` graph modes) x
/// (remaining graph positions * F); column index = rest + R_rest * f.
Matrix readout_matrix(const Matrix& nodes, const std::vector<std::size_t>& graph_shape,
                      std::size_t keep);
Matrix readout_matrix_adjoint(const Matrix& readout, const std::vector<std::size_t>& graph_shape,
                              std::size_t keep, std::size_t channels);

/// Classic RK4 on dU/dt = -sum_p U x_p L_p. `u0` has order P (or P+1 with an
/// untouched trailing channel mode).
DenseTensor tpdeg_integrate(const DenseTensor& u0, const std::vector<Matrix>& laplacians,
                            double t_end, double dt);

}  // namespace citrus
