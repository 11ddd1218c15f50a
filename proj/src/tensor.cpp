#include "citrus/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace citrus {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw std::invalid_argument("Matrix: data length " + std::to_string(data_.size()) +
                                " does not match " + std::to_string(rows) + "x" +
                                std::to_string(cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
  Matrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_)
    throw std::invalid_argument("Matrix +=: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_)
    throw std::invalid_argument("Matrix -=: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: inner dimensions " + std::to_string(a.cols()) +
                                " and " + std::to_string(b.rows()) + " differ");
  Matrix c(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* crow = &c(i, 0);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = &b(k, 0);
      for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("matmul_tn: row counts differ");
  Matrix c(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* brow = &b(k, 0);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      double* crow = &c(i, 0);
      for (std::size_t j = 0; j < n; ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: column counts differ");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = &a(i, 0);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* brow = &b(j, 0);
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += arow[k] * brow[k];
      c(i, j) = s;
    }
  }
  return c;
}

std::vector<double> matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw std::invalid_argument("matvec: dimension mismatch");
  std::vector<double> y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

double relative_frobenius_error(const Matrix& a, const Matrix& b) {
  return frobenius_norm(a - b) / std::max(frobenius_norm(b), std::numeric_limits<double>::min());
}

bool is_symmetric(const Matrix& a, double tol) {
  if (a.rows() != a.cols()) return false;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j)
      if (std::abs(a(i, j) - a(j, i)) > tol) return false;
  return true;
}

double trace(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < std::min(a.rows(), a.cols()); ++i) s += a(i, i);
  return s;
}

std::size_t shape_product(std::span<const std::size_t> shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

namespace {

void check_shape(const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw std::invalid_argument("DenseTensor: order must be at least 1");
  for (std::size_t d : shape)
    if (d == 0) throw std::invalid_argument("DenseTensor: every dimension must be >= 1");
}

// Splits a tensor around `mode` into (left, n, right) extents so that the flat
// offset is a + left * (i + n * b).
struct ModeSplit {
  std::size_t left = 1;
  std::size_t n = 1;
  std::size_t right = 1;
};

ModeSplit split(const std::vector<std::size_t>& shape, std::size_t mode) {
  ModeSplit s;
  for (std::size_t k = 0; k < mode; ++k) s.left *= shape[k];
  s.n = shape[mode];
  for (std::size_t k = mode + 1; k < shape.size(); ++k) s.right *= shape[k];
  return s;
}

void check_mode(const DenseTensor& u, std::size_t mode, const char* what) {
  if (mode >= u.order())
    throw std::invalid_argument(std::string(what) + ": mode " + std::to_string(mode) +
                                " out of range for order-" + std::to_string(u.order()) + " tensor");
}

}  // namespace

DenseTensor::DenseTensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_product(shape_), fill);
}

DenseTensor::DenseTensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != shape_product(shape_))
    throw std::invalid_argument("DenseTensor: data length does not match shape");
}

std::size_t DenseTensor::offset(std::span<const std::size_t> index) const {
  if (index.size() != shape_.size()) throw std::invalid_argument("DenseTensor: index rank mismatch");
  std::size_t off = 0;
  for (std::size_t k = shape_.size(); k-- > 0;) {
    if (index[k] >= shape_[k]) throw std::out_of_range("DenseTensor: index out of range");
    off = off * shape_[k] + index[k];
  }
  return off;
}

DenseTensor& DenseTensor::operator+=(const DenseTensor& other) {
  if (shape_ != other.shape_) throw std::invalid_argument("DenseTensor +=: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

DenseTensor& DenseTensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix matricize(const DenseTensor& u, std::size_t mode) {
  check_mode(u, mode, "matricize");
  const ModeSplit s = split(u.shape(), mode);
  Matrix m(s.n, s.left * s.right);
  const auto src = u.data();
  for (std::size_t b = 0; b < s.right; ++b)
    for (std::size_t i = 0; i < s.n; ++i) {
      const double* in = &src[s.left * (i + s.n * b)];
      double* out = &m(i, s.left * b);
      std::copy(in, in + s.left, out);
    }
  return m;
}

DenseTensor dematricize(const Matrix& m, std::size_t mode, std::vector<std::size_t> shape) {
  DenseTensor u(std::move(shape));
  check_mode(u, mode, "dematricize");
  const ModeSplit s = split(u.shape(), mode);
  if (m.rows() != s.n || m.cols() != s.left * s.right)
    throw std::invalid_argument("dematricize: matrix is " + std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()) + ", shape requires " +
                                std::to_string(s.n) + "x" + std::to_string(s.left * s.right));
  auto dst = u.data();
  for (std::size_t b = 0; b < s.right; ++b)
    for (std::size_t i = 0; i < s.n; ++i) {
      const double* in = &m(i, s.left * b);
      std::copy(in, in + s.left, &dst[s.left * (i + s.n * b)]);
    }
  return u;
}

DenseTensor mode_product(const DenseTensor& u, const Matrix& x, std::size_t mode) {
  check_mode(u, mode, "mode_product");
  if (x.cols() != u.dim(mode))
    throw std::invalid_argument("mode_product: matrix has " + std::to_string(x.cols()) +
                                " columns, mode " + std::to_string(mode) + " has size " +
                                std::to_string(u.dim(mode)));
  const ModeSplit s = split(u.shape(), mode);
  std::vector<std::size_t> out_shape = u.shape();
  out_shape[mode] = x.rows();
  DenseTensor g(out_shape);
  const std::size_t m = x.rows();
  const auto src = u.data();
  auto dst = g.data();
  for (std::size_t b = 0; b < s.right; ++b) {
    for (std::size_t j = 0; j < m; ++j) {
      double* out = &dst[s.left * (j + m * b)];
      for (std::size_t i = 0; i < s.n; ++i) {
        const double xji = x(j, i);
        if (xji == 0.0) continue;
        const double* in = &src[s.left * (i + s.n * b)];
        for (std::size_t a = 0; a < s.left; ++a) out[a] += xji * in[a];
      }
    }
  }
  return g;
}

std::vector<double> vectorize(const DenseTensor& u) {
  return {u.data().begin(), u.data().end()};
}

Matrix node_matrix(const DenseTensor& u) {
  if (u.order() < 2) throw std::invalid_argument("node_matrix: tensor needs a channel mode");
  const std::size_t f = u.shape().back();
  const std::size_t r = u.size() / f;
  Matrix m(r, f);
  const auto src = u.data();
  for (std::size_t c = 0; c < f; ++c)
    for (std::size_t i = 0; i < r; ++i) m(i, c) = src[i + r * c];
  return m;
}

DenseTensor from_node_matrix(const Matrix& m, std::vector<std::size_t> graph_shape) {
  if (shape_product(graph_shape) != m.rows())
    throw std::invalid_argument("from_node_matrix: row count does not match graph shape");
  graph_shape.push_back(m.cols());
  DenseTensor u(std::move(graph_shape));
  auto dst = u.data();
  const std::size_t r = m.rows();
  for (std::size_t c = 0; c < m.cols(); ++c)
    for (std::size_t i = 0; i < r; ++i) dst[i + r * c] = m(i, c);
  return u;
}

double frobenius_norm(const DenseTensor& u) {
  double s = 0.0;
  for (double v : u.data()) s += v * v;
  return std::sqrt(s);
}

double max_abs_diff(const DenseTensor& a, const DenseTensor& b) {
  if (a.shape() != b.shape()) throw std::invalid_argument("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double relative_frobenius_error(const DenseTensor& a, const DenseTensor& b) {
  if (a.shape() != b.shape()) throw std::invalid_argument("relative_frobenius_error: shape mismatch");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), std::numeric_limits<double>::min());
}

}  // namespace citrus
