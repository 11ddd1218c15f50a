#pragma once

// Factor graphs, their Laplacians, and Cartesian products built from
// Kronecker sums.

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "citrus/tensor.hpp"

namespace citrus {

/// Undirected weighted graph with its derived Laplacians. Immutable once
/// built; construct through build_graph or one of the generators.
struct FactorGraph {
  std::size_t n = 0;
  Matrix adjacency;
  Matrix laplacian;             // D - A
  Matrix normalized_laplacian;  // I - D^{-1/2} A D^{-1/2}, D^{-1/2} = 0 on isolated nodes
  std::vector<double> degrees;
};

/// Validates the adjacency (square, symmetric within 1e-10, nonnegative,
/// zero diagonal) and derives the Laplacians. Throws ValidationError naming
/// the violated property.
FactorGraph build_graph(const Matrix& adjacency);

bool is_connected(const Matrix& adjacency);

/// Kronecker product chain. descending=false gives M_1 kron ... kron M_P,
/// descending=true gives M_P kron ... kron M_1.
Matrix kron(const Matrix& a, const Matrix& b);
Matrix kron_chain(const std::vector<Matrix>& matrices, bool descending);

/// Kronecker sum chain. descending=true yields L_P (+) ... (+) L_1, which is
/// the ordering that matches the tensor layout (first mode fastest).
Matrix kron_sum(const Matrix& a, const Matrix& b);
Matrix cartesian_sum(const std::vector<Matrix>& matrices, bool descending);

FactorGraph erdos_renyi(std::size_t n, double p, std::uint64_t seed, bool require_connected,
                        std::size_t max_attempts = 1000);
FactorGraph path_graph(std::size_t n);
FactorGraph gaussian_kernel_graph(const Matrix& dist, double sigma, double threshold);

/// The additive error actually applied to a factor adjacency.
struct Perturbation {
  Matrix error;        // symmetric, zero diagonal, post-clamp
  double epsilon = 0;  // spectral norm of `error`
  double pre_clamp_norm = 0;  // Frobenius norm of the noise before clamping
  double snr_db = std::numeric_limits<double>::infinity();
};

/// Adds symmetric Gaussian noise scaled so that ||A||_F^2 / ||E||_F^2 equals
/// 10^(snr_db/10); entries that would turn negative are clamped to 0.
/// snr_db = +inf returns the graph unchanged.
std::pair<FactorGraph, Perturbation> perturb(const FactorGraph& g, double snr_db,
                                             std::uint64_t seed);

/// Unit-Frobenius symmetric zero-diagonal noise direction used by perturb.
Matrix noise_direction(std::size_t n, std::uint64_t seed);

/// Adds `scale * direction` to the adjacency and clamps negative weights.
std::pair<FactorGraph, Perturbation> perturb_along(const FactorGraph& g, const Matrix& direction,
                                                   double scale);

/// Spectral norm of a symmetric matrix (largest |eigenvalue|).
double spectral_norm_symmetric(const Matrix& m);

}  // namespace citrus
