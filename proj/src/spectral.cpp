#include "citrus/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "citrus/errors.hpp"

namespace citrus {

const char* to_string(TruncationPolicy policy) {
  return policy == TruncationPolicy::smallest ? "smallest" : "largest";
}

TruncationPolicy truncation_policy_from_string(const std::string& name) {
  if (name == "smallest") return TruncationPolicy::smallest;
  if (name == "largest") return TruncationPolicy::largest;
  throw std::invalid_argument("unknown truncation policy '" + name + "'");
}

namespace {

// Householder reduction to tridiagonal form. On exit `v` holds the
// accumulated orthogonal transform, `d` the diagonal and `e` the
// subdiagonal (e[0] unused). Adapted from the public-domain JAMA routines.
void tridiagonalize(std::vector<std::vector<double>>& v, std::vector<double>& d,
                    std::vector<double>& e) {
  const int n = static_cast<int>(d.size());
  for (int j = 0; j < n; ++j) d[j] = v[n - 1][j];

  for (int i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (int k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (int j = 0; j < i; ++j) {
        d[j] = v[i - 1][j];
        v[i][j] = 0.0;
        v[j][i] = 0.0;
      }
    } else {
      for (int k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (int j = 0; j < i; ++j) e[j] = 0.0;

      for (int j = 0; j < i; ++j) {
        f = d[j];
        v[j][i] = f;
        g = e[j] + v[j][j] * f;
        for (int k = j + 1; k <= i - 1; ++k) {
          g += v[k][j] * d[k];
          e[k] += v[k][j] * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (int j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (int j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (int j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (int k = j; k <= i - 1; ++k) v[k][j] -= (f * e[k] + g * d[k]);
        d[j] = v[i - 1][j];
        v[i][j] = 0.0;
      }
    }
    d[i] = h;
  }

  for (int i = 0; i < n - 1; ++i) {
    v[n - 1][i] = v[i][i];
    v[i][i] = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (int k = 0; k <= i; ++k) d[k] = v[k][i + 1] / h;
      for (int j = 0; j <= i; ++j) {
        double g = 0.0;
        for (int k = 0; k <= i; ++k) g += v[k][i + 1] * v[k][j];
        for (int k = 0; k <= i; ++k) v[k][j] -= g * d[k];
      }
    }
    for (int k = 0; k <= i; ++k) v[k][i + 1] = 0.0;
  }
  for (int j = 0; j < n; ++j) {
    d[j] = v[n - 1][j];
    v[n - 1][j] = 0.0;
  }
  v[n - 1][n - 1] = 1.0;
  e[0] = 0.0;
}

// Implicit QL iterations on the tridiagonal form.
void tridiagonal_ql(std::vector<std::vector<double>>& v, std::vector<double>& d,
                    std::vector<double>& e) {
  const int n = static_cast<int>(d.size());
  constexpr int kMaxIterations = 60;
  for (int i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  double f = 0.0;
  double tst1 = 0.0;
  const double eps = std::ldexp(1.0, -52);
  for (int l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    int m = l;
    while (m < n) {
      if (std::abs(e[m]) <= eps * tst1) break;
      ++m;
    }
    if (m == n) m = n - 1;

    if (m > l) {
      int iter = 0;
      do {
        if (++iter > kMaxIterations)
          throw NumericalError("eigh: QL iteration did not converge");
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (int i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0;
        double c2 = c;
        double c3 = c;
        const double el1 = e[l + 1];
        double s = 0.0;
        double s2 = 0.0;
        for (int i = m - 1; i >= l; --i) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[i];
          h = c * p;
          r = std::hypot(p, e[i]);
          e[i + 1] = s * r;
          s = e[i] / r;
          c = p / r;
          p = c * d[i] - s * g;
          d[i + 1] = h + s * (c * g + s * d[i]);
          for (int k = 0; k < n; ++k) {
            h = v[k][i + 1];
            v[k][i + 1] = s * v[k][i] + c * h;
            v[k][i] = c * v[k][i] - s * h;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

}  // namespace

SpectralBasis eigh(const Matrix& m) {
  if (m.rows() != m.cols()) throw ValidationError("eigh: matrix is not square");
  if (!is_symmetric(m, 1e-10)) throw ValidationError("eigh: matrix is not symmetric");
  const std::size_t n = m.rows();
  if (n == 0) throw std::invalid_argument("eigh: empty matrix");
  for (double x : m.data())
    if (!std::isfinite(x)) throw NumericalError("eigh: non-finite matrix entry");

  std::vector<std::vector<double>> v(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) v[i][j] = 0.5 * (m(i, j) + m(j, i));
  std::vector<double> d(n), e(n);
  tridiagonalize(v, d, e);
  tridiagonal_ql(v, d, e);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });

  SpectralBasis basis;
  basis.source_n = n;
  basis.k = n;
  basis.eigenvalues.resize(n);
  basis.eigenvectors = Matrix(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t src = order[c];
    basis.eigenvalues[c] = d[src];
    std::size_t pivot = 0;
    for (std::size_t r = 1; r < n; ++r)
      if (std::abs(v[r][src]) > std::abs(v[pivot][src])) pivot = r;
    const double sign = v[pivot][src] < 0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < n; ++r) basis.eigenvectors(r, c) = sign * v[r][src];
  }
  return basis;
}

SpectralBasis truncate(const SpectralBasis& basis, std::size_t k, TruncationPolicy policy) {
  if (k < 1 || k > basis.k)
    throw std::invalid_argument("truncate: k=" + std::to_string(k) + " outside [1, " +
                                std::to_string(basis.k) + "]");
  std::vector<std::size_t> keep(basis.k);
  std::iota(keep.begin(), keep.end(), 0);
  if (policy == TruncationPolicy::largest) {
    std::stable_sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(basis.eigenvalues[a]) > std::abs(basis.eigenvalues[b]);
    });
    keep.resize(k);
    std::sort(keep.begin(), keep.end());
  } else {
    keep.resize(k);
  }

  SpectralBasis out;
  out.source_n = basis.source_n;
  out.k = k;
  out.eigenvectors = Matrix(basis.eigenvectors.rows(), k);
  for (std::size_t c = 0; c < k; ++c) {
    out.eigenvalues.push_back(basis.eigenvalues[keep[c]]);
    for (std::size_t r = 0; r < basis.eigenvectors.rows(); ++r)
      out.eigenvectors(r, c) = basis.eigenvectors(r, keep[c]);
  }
  return out;
}

Matrix product_filter(const std::vector<SpectralBasis>& bases, const Matrix& times) {
  const std::size_t p_count = bases.size();
  if (p_count == 0) throw std::invalid_argument("product_filter: no factor bases");
  if (times.rows() != p_count || times.cols() == 0)
    throw std::invalid_argument("product_filter: times must be " + std::to_string(p_count) +
                                " x C, got " + std::to_string(times.rows()) + "x" +
                                std::to_string(times.cols()));
  std::size_t rows = 1;
  for (const auto& b : bases) rows *= b.k;
  const std::size_t channels = times.cols();
  Matrix out(rows, channels, 1.0);

  // Each factor contributes along its stride in the first-fastest ordering.
  std::size_t stride = 1;
  for (std::size_t p = 0; p < p_count; ++p) {
    const auto& lam = bases[p].eigenvalues;
    const std::size_t kp = bases[p].k;
    for (std::size_t c = 0; c < channels; ++c) {
      std::vector<double> response(kp);
      for (std::size_t i = 0; i < kp; ++i) response[i] = std::exp(-times(p, c) * lam[i]);
      for (std::size_t r = 0; r < rows; ++r) out(r, c) *= response[(r / stride) % kp];
    }
    stride *= kp;
  }
  return out;
}

Matrix heat_kernel_dense(const Matrix& laplacian, double t) {
  const SpectralBasis b = eigh(laplacian);
  const std::size_t n = b.source_n;
  Matrix scaled = b.eigenvectors;
  for (std::size_t c = 0; c < n; ++c) {
    const double w = std::exp(-t * b.eigenvalues[c]);
    for (std::size_t r = 0; r < n; ++r) scaled(r, c) *= w;
  }
  return matmul_nt(scaled, b.eigenvectors);
}

std::vector<double> explained_variance(const SpectralBasis& basis) {
  double total = 0.0;
  for (double l : basis.eigenvalues) total += l * l;
  if (total == 0.0) throw DegenerateError("explained_variance: all eigenvalues are zero");
  std::vector<double> ratio;
  ratio.reserve(basis.k);
  for (double l : basis.eigenvalues) ratio.push_back(l * l / total);
  std::sort(ratio.begin(), ratio.end(), std::greater<>());
  return ratio;
}

double eigen_residual(const Matrix& m, const SpectralBasis& basis) {
  double worst = 0.0;
  for (std::size_t c = 0; c < basis.k; ++c) {
    double norm2 = 0.0;
    for (std::size_t r = 0; r < basis.source_n; ++r) {
      double s = -basis.eigenvalues[c] * basis.eigenvectors(r, c);
      for (std::size_t j = 0; j < basis.source_n; ++j) s += m(r, j) * basis.eigenvectors(j, c);
      norm2 += s * s;
    }
    worst = std::max(worst, std::sqrt(norm2) / std::max(1.0, std::abs(basis.eigenvalues[c])));
  }
  return worst;
}

}  // namespace citrus
