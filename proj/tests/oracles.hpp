#pragma once

// Independent reference computations for the tests: definition loops and
// Eigen's solvers. Nothing here calls into the library's numerics.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <random>
#include <vector>

#include "citrus/tensor.hpp"

namespace oracle {

inline Eigen::MatrixXd to_eigen(const citrus::Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

inline citrus::Matrix from_eigen(const Eigen::MatrixXd& e) {
  citrus::Matrix m(e.rows(), e.cols());
  for (Eigen::Index i = 0; i < e.rows(); ++i)
    for (Eigen::Index j = 0; j < e.cols(); ++j) m(i, j) = e(i, j);
  return m;
}

inline std::vector<double> eigenvalues(const citrus::Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(m));
  const auto& v = es.eigenvalues();
  return {v.data(), v.data() + v.size()};
}

inline double spectral_norm(const citrus::Matrix& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(m));
  return svd.singularValues()(0);
}

/// e^{-t M} by Pade scaling and squaring.
inline citrus::Matrix expm_neg(const citrus::Matrix& m, double t) {
  Eigen::MatrixXd a = -t * to_eigen(m);
  return from_eigen(a.exp());
}

inline citrus::Matrix kron(const citrus::Matrix& a, const citrus::Matrix& b) {
  citrus::Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      for (std::size_t p = 0; p < b.rows(); ++p)
        for (std::size_t q = 0; q < b.cols(); ++q)
          k(i * b.rows() + p, j * b.cols() + q) = a(i, j) * b(p, q);
  return k;
}

inline citrus::Matrix matmul(const citrus::Matrix& a, const citrus::Matrix& b) {
  citrus::Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

inline citrus::Matrix identity(std::size_t n) {
  citrus::Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

/// L_{P-1} kron I ... + ... built from the two-factor definition, last factor leftmost.
inline citrus::Matrix cartesian_descending(const std::vector<citrus::Matrix>& ls) {
  citrus::Matrix acc = ls[0];
  for (std::size_t p = 1; p < ls.size(); ++p) {
    const citrus::Matrix a = oracle::kron(ls[p], identity(acc.rows()));
    const citrus::Matrix b = oracle::kron(identity(ls[p].rows()), acc);
    acc = a;
    for (std::size_t i = 0; i < acc.size(); ++i) acc.data()[i] += b.data()[i];
  }
  return acc;
}

inline citrus::Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& g) {
  std::normal_distribution<double> n(0.0, 1.0);
  citrus::Matrix m(r, c);
  for (double& v : m.data()) v = n(g);
  return m;
}

inline citrus::DenseTensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& g) {
  citrus::DenseTensor u(std::move(shape));
  std::normal_distribution<double> n(0.0, 1.0);
  for (double& v : u.data()) v = n(g);
  return u;
}

/// Symmetric 0/1 adjacency with each pair present with probability p.
inline citrus::Matrix random_adjacency(std::size_t n, double p, std::mt19937_64& g) {
  std::bernoulli_distribution b(p);
  citrus::Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (b(g)) a(i, j) = a(j, i) = 1.0;
  return a;
}

inline citrus::Matrix laplacian(const citrus::Matrix& a) {
  citrus::Matrix l(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double d = 0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
      d += a(i, j);
      l(i, j) = -a(i, j);
    }
    l(i, i) += d;
  }
  return l;
}

/// Element (i_0, ..., i_{D-1}) of a first-index-fastest tensor.
inline double element(const citrus::DenseTensor& u, const std::vector<std::size_t>& idx) {
  std::size_t off = 0, stride = 1;
  for (std::size_t d = 0; d < idx.size(); ++d) {
    off += idx[d] * stride;
    stride *= u.shape()[d];
  }
  return u.data()[off];
}

/// Enumerates every multi-index of `shape` in linearization order.
template <typename F>
void for_each_index(const std::vector<std::size_t>& shape, F&& f) {
  std::vector<std::size_t> idx(shape.size(), 0);
  std::size_t total = 1;
  for (auto s : shape) total *= s;
  for (std::size_t k = 0; k < total; ++k) {
    f(idx);
    for (std::size_t d = 0; d < idx.size(); ++d) {
      if (++idx[d] < shape[d]) break;
      idx[d] = 0;
    }
  }
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace oracle
