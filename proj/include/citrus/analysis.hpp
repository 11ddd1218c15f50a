#pragma once

// Dirichlet energy and over-smoothing bounds on product graphs, stability
// experiments under factor-graph perturbations, and product-mismatch bounds.

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "citrus/graphs.hpp"
#include "citrus/layer.hpp"
#include "citrus/training.hpp"

namespace citrus {

/// (1/P) sum_f sum_p tr(U_f(p)^T L^_p U_f(p)) for U of shape N_0 x ... x N_{P-1} x F.
double tensor_dirichlet_energy(const DenseTensor& u, const std::vector<Matrix>& norm_laps);

/// (1/P) (L^_{P-1} (+) ... (+) L^_0), ordered to match the tensor layout.
Matrix product_normalized_laplacian(const std::vector<Matrix>& norm_laps);

/// Smallest eigenvalue above zero_tol. Throws DegenerateError if none.
double spectral_gap(const Matrix& norm_lap, double zero_tol = 1e-8);

/// Square of the largest singular value of w.
double top_singular_value_squared(const Matrix& w);

/// One layer of the smoothing stack X -> MLP(e^{-L^(t)} X) with
/// e^{-L^(t)} = kron_p e^{-t_p L^_p / P} and
/// MLP(X) = sigma(... sigma(sigma(X) W_1) ... W_H).
struct SmoothingLayer {
  std::vector<double> times;  // per factor
  std::vector<Matrix> weights;
  Activation activation;
};

DenseTensor smoothing_layer_forward(const DenseTensor& x, const std::vector<Matrix>& norm_laps,
                                    const SmoothingLayer& layer);

struct OversmoothingBound {
  std::vector<double> s_layers;  // prod_h s_lh for each layer
  double s = 0;                  // sup_l s_l
  double lambda_tilde = 0;
  double t_tilde = 0;
  std::size_t argmin_factor = 0;
  double rate = 0;         // ln s - (2/P) t~ lambda~
  bool decays = false;     // rate < 0
  std::vector<double> log_bound;             // l * rate, l = 0..L
  std::vector<double> cumulative_log_bound;  // sum_{k<=l} (ln s_k - (2/P) t~_k lambda~)
};

OversmoothingBound oversmoothing_bound(const std::vector<SmoothingLayer>& layers,
                                       const std::vector<double>& gaps);

struct EnergyReport {
  std::vector<double> energies;   // E(X_l), l = 0..L
  std::vector<double> log_ratio;  // ln(E(X_l) / E(X_0))
  OversmoothingBound bound;
  std::vector<double> gaps;
};

/// Runs the stack layer by layer and records energies next to the bound.
/// Throws DegenerateError when E(X_0) = 0.
EnergyReport energy_trajectory(const std::vector<SmoothingLayer>& layers,
                               const std::vector<Matrix>& norm_laps, const DenseTensor& x0,
                               double zero_tol = 1e-8);

struct OversmoothingScenario {
  std::vector<std::size_t> sizes{10, 15};
  std::vector<double> probabilities{0.05, 0.95};
  std::size_t input_channels = 12;
  std::size_t layers = 10;
  double weight_scale = 0.01;
  double time = 1.0;
  Activation activation{ActivationKind::relu, 0.0};
  std::size_t max_attempts = 1000000;
  std::uint64_t seed = 0;
};

struct ScenarioInstance {
  std::vector<FactorGraph> graphs;
  std::vector<Matrix> norm_laps;
  std::vector<SmoothingLayer> layers;
  DenseTensor x0;
};

/// Connected ER factors, X_0 ~ N(0, 1) with F_0 channels, and one weight
/// matrix per layer of size F_{l-1} x F_l with F_l = F_0 - l, drawn from
/// N(0, 1) and multiplied by weight_scale.
ScenarioInstance make_oversmoothing_scenario(const OversmoothingScenario& cfg);

/// Overrides every receptive field of the instance with t.
std::vector<SmoothingLayer> with_time(const std::vector<SmoothingLayer>& layers, double t);

// ---------------------------------------------------------------------------
// Stability under factor-graph perturbations.

struct StabilityConfig {
  std::vector<std::size_t> sizes{20, 30};
  std::vector<double> probabilities{0.1, 0.1};
  std::vector<double> times{2.0, 3.0};
  std::size_t input_channels = 6;
  std::vector<std::size_t> teacher_widths{5, 4, 2};
  std::vector<std::size_t> student_widths{4, 4};
  std::vector<double> snr_grid{std::numeric_limits<double>::infinity(), 20, 10, 0, -10};
  std::size_t realizations = 10;
  double test_fraction = 0.15;
  double val_fraction = 0.15;
  TrainConfig train{LossKind::mse, 0.05, 0.9, 0.999, 1e-8, 1, 300, 50, 0};
  std::uint64_t seed = 0;
};

struct StabilityCell {
  std::vector<double> snr_db;  // per factor
  std::vector<double> test_mse;   // per realization
  std::vector<double> deviation;  // ||phi - phi~|| of the untrained teacher, per realization
  std::vector<std::vector<double>> epsilon;  // [realization][factor]
  double mean_mse = 0;
  double std_mse = 0;
  double mean_deviation = 0;
};

struct StabilityReport {
  std::vector<double> snr_grid;
  std::size_t realizations = 0;
  double clean_baseline_mse = 0;  // mean MSE of the all-infinite cell
  std::vector<StabilityCell> cells;  // row-major over (snr_1, snr_2)

  const StabilityCell& cell(std::size_t i, std::size_t j) const {
    return cells.at(i * snr_grid.size() + j);
  }
};

/// Two-factor SNR grid experiment: a teacher stack produces targets on the
/// clean graphs; a student is trained on the perturbed graphs for every grid
/// cell and realization and scored on held-out product-graph nodes.
StabilityReport stability_run(const StabilityConfig& cfg);

/// Largest number, over grid rows and columns, of adjacent cells whose mean
/// MSE rises although the SNR rises. Expects the grid in descending order.
std::size_t max_trend_violations(const StabilityReport& report);

/// ||phi~(2 eps) - phi|| / ||phi~(eps) - phi|| of the untrained teacher for
/// factor perturbations of spectral norm eps = relative_eps * ||A_p||_2 along
/// a fixed random direction, one value per realization.
std::vector<double> deviation_ratios(const StabilityConfig& cfg, double relative_eps,
                                     std::size_t realizations);

/// Teacher of the stability experiment on the given factor bases.
CitrusModel make_stability_teacher(const StabilityConfig& cfg,
                                   std::vector<SpectralBasis> bases, std::uint64_t seed);

// ---------------------------------------------------------------------------

enum class ProductKind { strong, kronecker };

/// Spectral-norm error of modelling a Strong or Kronecker product graph as a
/// Cartesian one, given the factors' largest adjacency eigenvalues.
double mismatch_bound(ProductKind kind, double lmax1, double lmax2);

Matrix strong_product(const Matrix& a1, const Matrix& a2);
Matrix kronecker_product_graph(const Matrix& a1, const Matrix& a2);

double median(std::vector<double> values);

}  // namespace citrus
