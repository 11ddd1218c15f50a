#pragma once

#include <string>
#include <vector>

#include "citrus/tensor.hpp"

namespace citrus {

/// Eigenpairs of a symmetric matrix, eigenvalues ascending. Column i of
/// `eigenvectors` pairs with eigenvalues[i].
struct SpectralBasis {
  std::vector<double> eigenvalues;
  Matrix eigenvectors;  // source_n x k
  std::size_t source_n = 0;
  std::size_t k = 0;
};

enum class TruncationPolicy { smallest, largest };

const char* to_string(TruncationPolicy policy);
TruncationPolicy truncation_policy_from_string(const std::string& name);

/// Full symmetric eigendecomposition (Householder tridiagonalization followed
/// by implicit QL). Each eigenvector is signed so that its largest-magnitude
/// entry is positive (ties: lowest index). Throws ValidationError on
/// asymmetric input and NumericalError on non-convergence.
SpectralBasis eigh(const Matrix& m);

/// Keeps k pairs: the k smallest eigenvalues, or the k largest in magnitude.
/// The result stays sorted ascending.
SpectralBasis truncate(const SpectralBasis& basis, std::size_t k, TruncationPolicy policy);

/// Filter response of the product graph for each channel:
///   column c = e^{-t(P-1,c) lambda_{P-1}} kron ... kron e^{-t(0,c) lambda_0},
/// so row r = k_0 + K_0 (k_1 + K_1 (...)) matches the tensor layout.
/// `times` is P x C (C = 1 for a single shared response).
Matrix product_filter(const std::vector<SpectralBasis>& bases, const Matrix& times);

/// e^{-tL} through a full eigendecomposition.
Matrix heat_kernel_dense(const Matrix& laplacian, double t);

/// Explained-variance ratios lambda_i^2 / sum_j lambda_j^2, sorted descending.
/// Throws DegenerateError for an all-zero spectrum.
std::vector<double> explained_variance(const SpectralBasis& basis);

/// max_i ||M v_i - lambda_i v_i||_2 / max(1, |lambda_i|).
double eigen_residual(const Matrix& m, const SpectralBasis& basis);

}  // namespace citrus
