#include "citrus/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "citrus/errors.hpp"
#include "citrus/random.hpp"
#include "citrus/spectral.hpp"

namespace citrus {

namespace {

void validate_adjacency(const Matrix& a) {
  if (a.rows() != a.cols())
    throw ValidationError("adjacency must be square, got " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()));
  if (a.rows() == 0) throw ValidationError("adjacency must have at least one node");
  for (std::size_t i = 0; i < a.rows(); ++i) {
    if (a(i, i) != 0.0)
      throw ValidationError("adjacency has a nonzero diagonal (self-loop) at node " +
                            std::to_string(i));
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (!std::isfinite(a(i, j)))
        throw ValidationError("adjacency has a non-finite entry at (" + std::to_string(i) + ", " +
                              std::to_string(j) + ")");
      if (a(i, j) < 0.0)
        throw ValidationError("adjacency has a negative weight at (" + std::to_string(i) + ", " +
                              std::to_string(j) + ")");
      if (std::abs(a(i, j) - a(j, i)) > 1e-10)
        throw ValidationError("adjacency is not symmetric at (" + std::to_string(i) + ", " +
                              std::to_string(j) + ")");
    }
  }
}

}  // namespace

FactorGraph build_graph(const Matrix& adjacency) {
  validate_adjacency(adjacency);
  FactorGraph g;
  g.n = adjacency.rows();
  g.adjacency = adjacency;
  // Exact symmetry so downstream eigensolvers see a symmetric matrix.
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t j = i + 1; j < g.n; ++j) {
      const double w = 0.5 * (adjacency(i, j) + adjacency(j, i));
      g.adjacency(i, j) = w;
      g.adjacency(j, i) = w;
    }

  g.degrees.assign(g.n, 0.0);
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t j = 0; j < g.n; ++j) g.degrees[i] += g.adjacency(i, j);

  g.laplacian = Matrix(g.n, g.n);
  g.normalized_laplacian = Matrix(g.n, g.n);
  std::vector<double> inv_sqrt(g.n, 0.0);
  for (std::size_t i = 0; i < g.n; ++i)
    if (g.degrees[i] > 0.0) inv_sqrt[i] = 1.0 / std::sqrt(g.degrees[i]);

  for (std::size_t i = 0; i < g.n; ++i) {
    for (std::size_t j = 0; j < g.n; ++j) {
      g.laplacian(i, j) = -g.adjacency(i, j);
      g.normalized_laplacian(i, j) = -inv_sqrt[i] * g.adjacency(i, j) * inv_sqrt[j];
    }
    g.laplacian(i, i) = g.degrees[i];
    // Isolated nodes keep L^_ii = 0 since D^{-1/2} vanishes there.
    g.normalized_laplacian(i, i) = g.degrees[i] > 0.0 ? 1.0 : 0.0;
  }
  return g;
}

bool is_connected(const Matrix& adjacency) {
  const std::size_t n = adjacency.rows();
  if (n == 0) return false;
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  std::size_t count = 1;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (std::size_t v = 0; v < n; ++v) {
      if (!seen[v] && adjacency(u, v) > 0.0) {
        seen[v] = true;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count == n;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double aij = a(i, j);
      if (aij == 0.0) continue;
      for (std::size_t k = 0; k < b.rows(); ++k)
        for (std::size_t l = 0; l < b.cols(); ++l)
          out(i * b.rows() + k, j * b.cols() + l) = aij * b(k, l);
    }
  return out;
}

Matrix kron_chain(const std::vector<Matrix>& matrices, bool descending) {
  if (matrices.empty()) throw std::invalid_argument("kron_chain: empty list");
  if (descending) {
    Matrix acc = matrices.back();
    for (std::size_t i = matrices.size() - 1; i-- > 0;) acc = kron(acc, matrices[i]);
    return acc;
  }
  Matrix acc = matrices.front();
  for (std::size_t i = 1; i < matrices.size(); ++i) acc = kron(acc, matrices[i]);
  return acc;
}

Matrix kron_sum(const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols())
    throw std::invalid_argument("kron_sum: inputs must be square");
  return kron(a, Matrix::identity(b.rows())) + kron(Matrix::identity(a.rows()), b);
}

Matrix cartesian_sum(const std::vector<Matrix>& matrices, bool descending) {
  if (matrices.empty()) throw std::invalid_argument("cartesian_sum: empty list");
  for (const auto& m : matrices)
    if (m.rows() != m.cols()) throw std::invalid_argument("cartesian_sum: inputs must be square");
  if (descending) {
    Matrix acc = matrices.back();
    for (std::size_t i = matrices.size() - 1; i-- > 0;) acc = kron_sum(acc, matrices[i]);
    return acc;
  }
  Matrix acc = matrices.front();
  for (std::size_t i = 1; i < matrices.size(); ++i) acc = kron_sum(acc, matrices[i]);
  return acc;
}

FactorGraph erdos_renyi(std::size_t n, double p, std::uint64_t seed, bool require_connected,
                        std::size_t max_attempts) {
  if (n == 0) throw std::invalid_argument("erdos_renyi: n must be >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("erdos_renyi: p must lie in [0, 1]");
  for (std::size_t attempt = 0; attempt < std::max<std::size_t>(max_attempts, 1); ++attempt) {
    Rng rng(derive_seed(seed, attempt));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (unit(rng) < p) {
          a(i, j) = 1.0;
          a(j, i) = 1.0;
        }
    if (!require_connected || is_connected(a)) return build_graph(a);
  }
  throw GenerationError("erdos_renyi: no connected sample with n=" + std::to_string(n) +
                        ", p=" + std::to_string(p) + " in " + std::to_string(max_attempts) +
                        " attempts");
}

FactorGraph path_graph(std::size_t n) {
  if (n == 0) throw std::invalid_argument("path_graph: n must be >= 1");
  Matrix a(n, n);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    a(i, i + 1) = 1.0;
    a(i + 1, i) = 1.0;
  }
  return build_graph(a);
}

FactorGraph gaussian_kernel_graph(const Matrix& dist, double sigma, double threshold) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_kernel_graph: sigma must be > 0");
  validate_adjacency(dist);
  const std::size_t n = dist.rows();
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double w = std::exp(-(dist(i, j) * dist(i, j)) / (sigma * sigma));
      if (w >= threshold) a(i, j) = w;
    }
  return build_graph(a);
}

Matrix noise_direction(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix e(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = normal(rng);
      e(i, j) = v;
      e(j, i) = v;
    }
  const double norm = frobenius_norm(e);
  if (norm > 0.0) e *= 1.0 / norm;
  return e;
}

std::pair<FactorGraph, Perturbation> perturb_along(const FactorGraph& g, const Matrix& direction,
                                                   double scale) {
  if (direction.rows() != g.n || direction.cols() != g.n)
    throw std::invalid_argument("perturb_along: direction shape mismatch");
  Matrix noisy(g.n, g.n);
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t j = 0; j < g.n; ++j)
      if (i != j) noisy(i, j) = std::max(0.0, g.adjacency(i, j) + scale * direction(i, j));
  Perturbation pert;
  pert.pre_clamp_norm = std::abs(scale) * frobenius_norm(direction);
  pert.error = noisy - g.adjacency;
  pert.epsilon = spectral_norm_symmetric(pert.error);
  return {build_graph(noisy), std::move(pert)};
}

std::pair<FactorGraph, Perturbation> perturb(const FactorGraph& g, double snr_db,
                                             std::uint64_t seed) {
  if (std::isnan(snr_db)) throw std::invalid_argument("perturb: snr_db is NaN");
  if (std::isinf(snr_db) && snr_db > 0) {
    Perturbation none;
    none.error = Matrix(g.n, g.n);
    return {g, std::move(none)};
  }
  const double target = frobenius_norm(g.adjacency) / std::sqrt(std::pow(10.0, snr_db / 10.0));
  auto result = perturb_along(g, noise_direction(g.n, seed), target);
  result.second.snr_db = snr_db;
  return result;
}

double spectral_norm_symmetric(const Matrix& m) {
  if (max_abs(m) == 0.0) return 0.0;
  const SpectralBasis b = eigh(m);
  return std::max(std::abs(b.eigenvalues.front()), std::abs(b.eigenvalues.back()));
}

}  // namespace citrus
