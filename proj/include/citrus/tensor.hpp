#pragma once

// Dense matrices and order-D tensors.
//
// Layout conventions (used everywhere in the library):
//   * Matrix is row-major: element (i, j) lives at data[i * cols + j].
//   * DenseTensor stores its first index fastest (column-major / Fortran
//     order): element (i_0, ..., i_{D-1}) lives at
//     data[i_0 + N_0 * (i_1 + N_1 * (i_2 + ...))].
//
// With the tensor layout, vectorize(U x_0 A x_1 B) = (B kron A) vectorize(U),
// i.e. vectorization pairs with the reversed Kronecker chain
// X_{D-1} kron ... kron X_0. Mode indices are 0-based.

#include <cstddef>
#include <span>
#include <vector>

namespace citrus {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const double& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  Matrix transpose() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);

/// Matrix product a * b.
Matrix matmul(const Matrix& a, const Matrix& b);
/// a^T * b without forming the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a * b^T without forming the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
std::vector<double> matvec(const Matrix& a, std::span<const double> x);

double frobenius_norm(const Matrix& a);
double max_abs(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);
/// ||a - b||_F / max(||b||_F, tiny).
double relative_frobenius_error(const Matrix& a, const Matrix& b);
bool is_symmetric(const Matrix& a, double tol);
double trace(const Matrix& a);

class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(std::vector<std::size_t> shape, double fill = 0.0);
  DenseTensor(std::vector<std::size_t> shape, std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t order() const { return shape_.size(); }
  std::size_t dim(std::size_t mode) const { return shape_.at(mode); }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  double& operator[](std::size_t flat) { return data_[flat]; }
  const double& operator[](std::size_t flat) const { return data_[flat]; }

  /// Flat offset of a multi-index; throws on rank or range mismatch.
  std::size_t offset(std::span<const std::size_t> index) const;
  double& at(std::span<const std::size_t> index) { return data_[offset(index)]; }
  double at(std::span<const std::size_t> index) const { return data_[offset(index)]; }

  DenseTensor& operator+=(const DenseTensor& other);
  DenseTensor& operator*=(double s);

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::size_t shape_product(std::span<const std::size_t> shape);

/// Mode-n unfolding: rows = shape[mode], column index of element
/// (i_0..i_{D-1}) is sum_{k != mode} i_k * prod_{m < k, m != mode} shape[m].
Matrix matricize(const DenseTensor& u, std::size_t mode);
DenseTensor dematricize(const Matrix& m, std::size_t mode, std::vector<std::size_t> shape);

/// G = U x_mode X, with X of size (m x shape[mode]).
DenseTensor mode_product(const DenseTensor& u, const Matrix& x, std::size_t mode);

std::vector<double> vectorize(const DenseTensor& u);

/// Views an order-(P+1) tensor as a (prod of the first P dims) x F matrix whose
/// row r is the vectorized graph index; this is [U_(P+1)]^T.
Matrix node_matrix(const DenseTensor& u);
DenseTensor from_node_matrix(const Matrix& m, std::vector<std::size_t> graph_shape);

double frobenius_norm(const DenseTensor& u);
double max_abs_diff(const DenseTensor& a, const DenseTensor& b);
double relative_frobenius_error(const DenseTensor& a, const DenseTensor& b);

}  // namespace citrus
