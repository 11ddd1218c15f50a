#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "citrus/errors.hpp"
#include "citrus/graphs.hpp"
#include "oracles.hpp"

using namespace citrus;

namespace {

std::vector<double> sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v;
}

std::vector<double> all_sums(const std::vector<std::vector<double>>& spectra) {
  std::vector<double> acc{0.0};
  for (const auto& s : spectra) {
    std::vector<double> next;
    for (double a : acc)
      for (double b : s) next.push_back(a + b);
    acc = std::move(next);
  }
  return sorted(acc);
}

Matrix single_edge() { return Matrix(2, 2, {0, 1, 1, 0}); }

}  // namespace

TEST_SUITE("graphs") {

TEST_CASE("single edge graph Laplacians") {
  const FactorGraph g = build_graph(single_edge());
  CHECK(g.laplacian == Matrix(2, 2, {1, -1, -1, 1}));
  CHECK(max_abs_diff(g.normalized_laplacian, Matrix(2, 2, {1, -1, -1, 1})) <= 1e-15);
  CHECK(g.degrees == std::vector<double>{1, 1});
}

TEST_CASE("empty graph has zero Laplacians") {
  const FactorGraph g = build_graph(Matrix(3, 3));
  CHECK(max_abs(g.laplacian) == 0.0);
  CHECK(max_abs(g.normalized_laplacian) == 0.0);
}

TEST_CASE("K3 normalized Laplacian spectrum") {
  const FactorGraph g = build_graph(Matrix(3, 3, {0, 1, 1, 1, 0, 1, 1, 1, 0}));
  const auto ev = oracle::eigenvalues(g.normalized_laplacian);
  CHECK(oracle::max_abs_diff(ev, {0.0, 1.5, 1.5}) <= 1e-12);
}

TEST_CASE("build_graph names the violated invariant") {
  auto message = [](const Matrix& a) {
    try {
      build_graph(a);
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message(Matrix(2, 2, {0, 1, 0.5, 0})).find("symmetric") != std::string::npos);
  CHECK(message(Matrix(2, 2, {0, -1, -1, 0})).find("negative") != std::string::npos);
  CHECK(message(Matrix(2, 2, {1, 1, 1, 0})).find("diagonal") != std::string::npos);
  CHECK_THROWS_AS(build_graph(Matrix(2, 3)), ValidationError);
}

TEST_CASE("Laplacian invariants on random graphs") {
  std::mt19937_64 g(11);
  for (int trial = 0; trial < 20; ++trial) {
    const FactorGraph fg = build_graph(oracle::random_adjacency(7, 0.4, g));
    for (std::size_t i = 0; i < fg.n; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < fg.n; ++j) s += fg.laplacian(i, j);
      CHECK(std::abs(s) <= 1e-10);
    }
    for (double ev : oracle::eigenvalues(fg.normalized_laplacian)) {
      CHECK(ev >= -1e-8);
      CHECK(ev <= 2 + 1e-8);
    }
  }
}

TEST_CASE("cartesian_sum of a single factor is the factor") {
  const Matrix l = build_graph(single_edge()).laplacian;
  CHECK(cartesian_sum({l}, true) == l);
  CHECK(cartesian_sum({l}, false) == l);
  CHECK_THROWS_AS(cartesian_sum({}, true), std::invalid_argument);
}

TEST_CASE("two path factors give the 4-cycle") {
  const Matrix l = path_graph(2).laplacian;
  const Matrix c = cartesian_sum({l, l}, true);
  const Matrix ref = oracle::kron(l, oracle::identity(2)) + oracle::kron(oracle::identity(2), l);
  CHECK(c == ref);
  // 4-cycle: every node has degree 2.
  for (std::size_t i = 0; i < 4; ++i) CHECK(c(i, i) == 2.0);
  CHECK(oracle::max_abs_diff(oracle::eigenvalues(c), {0, 2, 2, 4}) <= 1e-12);
}

TEST_CASE("cartesian_sum descending matches the two-factor definition") {
  std::mt19937_64 g(12);
  const Matrix a = oracle::laplacian(oracle::random_adjacency(2, 0.8, g));
  const Matrix b = oracle::laplacian(oracle::random_adjacency(3, 0.8, g));
  const Matrix c = oracle::laplacian(oracle::random_adjacency(2, 0.8, g));
  CHECK(max_abs_diff(cartesian_sum({a, b, c}, true), oracle::cartesian_descending({a, b, c})) <= 1e-14);
  CHECK(max_abs_diff(cartesian_sum({a, b}, false),
                     oracle::kron(a, oracle::identity(3)) + oracle::kron(oracle::identity(2), b)) <= 1e-14);
}

TEST_CASE("eigenvalue addition rule for three factors") {
  std::mt19937_64 g(13);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Matrix> ls;
    std::vector<std::vector<double>> spectra;
    for (std::size_t n : {2, 3, 2}) {
      ls.push_back(oracle::laplacian(oracle::random_adjacency(n, 0.7, g)));
      spectra.push_back(oracle::eigenvalues(ls.back()));
    }
    const Matrix sum = cartesian_sum(ls, true);
    REQUIRE(sum.rows() == 12);
    CHECK(oracle::max_abs_diff(oracle::eigenvalues(sum), all_sums(spectra)) <= 1e-8);
  }
}

TEST_CASE("kron_chain examples") {
  const Matrix m(2, 2, {1, 2, 3, 4});
  CHECK(kron_chain({m}, false) == m);
  CHECK(kron_chain({oracle::identity(2), oracle::identity(3)}, false) == oracle::identity(6));
  const Matrix swap(2, 2, {0, 1, 1, 0});
  CHECK(kron_chain({swap, Matrix(1, 1, {2.0})}, false) == Matrix(2, 2, {0, 2, 2, 0}));
  CHECK_THROWS_AS(kron_chain({}, false), std::invalid_argument);
}

TEST_CASE("kron_chain order matches the definition loop") {
  std::mt19937_64 g(14);
  const Matrix a = oracle::random_matrix(2, 3, g), b = oracle::random_matrix(3, 2, g),
               c = oracle::random_matrix(2, 2, g);
  CHECK(max_abs_diff(kron_chain({a, b, c}, false), oracle::kron(oracle::kron(a, b), c)) <= 1e-15);
  CHECK(max_abs_diff(kron_chain({a, b, c}, true), oracle::kron(oracle::kron(c, b), a)) <= 1e-15);
}

TEST_CASE("erdos_renyi degenerate probabilities") {
  const FactorGraph full = erdos_renyi(5, 1.0, 3, false);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) CHECK(full.adjacency(i, j) == (i == j ? 0.0 : 1.0));
  CHECK(max_abs(erdos_renyi(5, 0.0, 3, false).adjacency) == 0.0);
  CHECK_THROWS_AS(erdos_renyi(5, 1.5, 3, false), std::invalid_argument);
  CHECK_THROWS_AS(erdos_renyi(0, 0.5, 3, false), std::invalid_argument);
}

TEST_CASE("erdos_renyi is deterministic and connected on request") {
  CHECK(erdos_renyi(20, 0.1, 42, true).adjacency == erdos_renyi(20, 0.1, 42, true).adjacency);
  CHECK(is_connected(erdos_renyi(20, 0.1, 42, true).adjacency));
  CHECK_THROWS_AS(erdos_renyi(6, 0.0, 1, true), GenerationError);
}

TEST_CASE("erdos_renyi edge count is binomial") {
  const double n = 20, p = 0.1, pairs = n * (n - 1) / 2;
  const double mean = p * pairs, sd = std::sqrt(pairs * p * (1 - p));
  double total = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Matrix a = erdos_renyi(20, 0.1, seed, false).adjacency;
    double edges = 0;
    for (double v : a.data()) edges += v;
    edges /= 2;
    CHECK(std::abs(edges - mean) <= 4 * sd);
    total += edges;
  }
  // The mean of 100 draws has sd / 10.
  CHECK(std::abs(total / 100 - mean) <= 3 * sd / 10);
}

TEST_CASE("path graph examples") {
  CHECK(path_graph(1).n == 1);
  CHECK(max_abs(path_graph(1).adjacency) == 0.0);
  CHECK(oracle::max_abs_diff(oracle::eigenvalues(path_graph(2).laplacian), {0, 2}) <= 1e-14);
  CHECK(path_graph(4).degrees == std::vector<double>{1, 2, 2, 1});
}

TEST_CASE("gaussian kernel graph") {
  const Matrix dist(3, 3, {0, 1, 2, 1, 0, 3, 2, 3, 0});
  const FactorGraph g = gaussian_kernel_graph(dist, 1.0, 0.01);
  CHECK(g.adjacency(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(g.adjacency(0, 2) == doctest::Approx(std::exp(-4.0)).epsilon(1e-15));
  CHECK(g.adjacency(1, 2) == 0.0);
  CHECK(max_abs(gaussian_kernel_graph(dist, 1.0, 1.0 + 1e-9).adjacency) == 0.0);
  const FactorGraph z = gaussian_kernel_graph(Matrix(2, 2), 1.0, 1.0);
  CHECK(z.adjacency(0, 1) == 1.0);
  CHECK_THROWS_AS(gaussian_kernel_graph(Matrix(2, 2, {0, 1, 2, 0}), 1.0, 0.1), ValidationError);
  CHECK_THROWS_AS(gaussian_kernel_graph(dist, 0.0, 0.1), std::invalid_argument);
}

TEST_CASE("perturb with infinite SNR is the identity") {
  const FactorGraph g = erdos_renyi(10, 0.3, 5, true);
  const auto [h, pert] = perturb(g, std::numeric_limits<double>::infinity(), 1);
  CHECK(h.adjacency == g.adjacency);
  CHECK(pert.epsilon == 0.0);
}

TEST_CASE("perturb is deterministic") {
  const FactorGraph g = erdos_renyi(10, 0.3, 5, true);
  const auto a = perturb(g, 10.0, 9);
  const auto b = perturb(g, 10.0, 9);
  CHECK(a.first.adjacency == b.first.adjacency);
  CHECK(a.second.error == b.second.error);
  CHECK(a.second.epsilon == b.second.epsilon);
}

TEST_CASE("perturb at 0 dB matches the signal norm before clamping") {
  const FactorGraph g = erdos_renyi(20, 0.2, 5, true);
  const auto [h, pert] = perturb(g, 0.0, 3);
  CHECK(std::abs(pert.pre_clamp_norm - frobenius_norm(g.adjacency)) <= 1e-10);
  // The applied error is what separates the two graphs, and epsilon is its norm.
  CHECK(max_abs_diff(h.adjacency - g.adjacency, pert.error) <= 1e-14);
  CHECK(std::abs(pert.epsilon - oracle::spectral_norm(pert.error)) <= 1e-10);
  CHECK(is_symmetric(pert.error, 0.0));
  for (std::size_t i = 0; i < 20; ++i) CHECK(pert.error(i, i) == 0.0);
  for (double v : h.adjacency.data()) CHECK(v >= 0.0);
}

TEST_CASE("product-graph error is the Cartesian sum of factor errors") {
  std::mt19937_64 rng(15);
  for (std::size_t factors : {2, 3}) {
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<Matrix> clean, noisy, errors;
      double eps_sum = 0;
      for (std::size_t p = 0; p < factors; ++p) {
        const std::size_t n = 3 + rng() % 6;
        const FactorGraph g = erdos_renyi(n, 0.5, rng(), true);
        const auto [h, pert] = perturb(g, 5.0, rng());
        clean.push_back(g.adjacency);
        noisy.push_back(h.adjacency);
        errors.push_back(pert.error);
        eps_sum += pert.epsilon;
      }
      const Matrix e = cartesian_sum(noisy, true) - cartesian_sum(clean, true);
      CHECK(max_abs_diff(e, cartesian_sum(errors, true)) <= 1e-12);
      CHECK(oracle::spectral_norm(e) <= eps_sum + 1e-10);
    }
  }
}

TEST_CASE("normalized product Laplacian lies in [0, 2]") {
  std::mt19937_64 rng(16);
  for (std::size_t factors : {2, 3}) {
    std::vector<Matrix> scaled, adj_norm;
    std::size_t total = 1;
    for (std::size_t p = 0; p < factors; ++p) {
      const FactorGraph g = erdos_renyi(3 + rng() % 4, 0.6, rng(), true);
      scaled.push_back(g.normalized_laplacian * (1.0 / static_cast<double>(factors)));
      adj_norm.push_back(oracle::identity(g.n) - g.normalized_laplacian);
      total *= g.n;
    }
    const Matrix a = cartesian_sum(scaled, true);
    const Matrix b = oracle::identity(total) - cartesian_sum(adj_norm, true) * (1.0 / static_cast<double>(factors));
    CHECK(max_abs_diff(a, b) <= 1e-12);
    for (double ev : oracle::eigenvalues(a)) {
      CHECK(ev >= -1e-8);
      CHECK(ev <= 2 + 1e-8);
    }
  }
}

TEST_CASE("spectral_norm_symmetric agrees with an SVD") {
  std::mt19937_64 g(17);
  const Matrix r = oracle::random_matrix(6, 6, g);
  const Matrix s = r + r.transpose();
  CHECK(std::abs(spectral_norm_symmetric(s) - oracle::spectral_norm(s)) <= 1e-10);
}

}  // TEST_SUITE
