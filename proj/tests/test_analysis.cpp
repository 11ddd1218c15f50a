#include <doctest.h>

#include <cmath>
#include <random>

#include "citrus/analysis.hpp"
#include "citrus/errors.hpp"
#include "oracles.hpp"

using namespace citrus;

namespace {

// tr(X^T L X) with the product normalized Laplacian built from the definition.
double dense_energy(const DenseTensor& u, const std::vector<Matrix>& norm_laps) {
  Matrix l = oracle::cartesian_descending(norm_laps);
  l *= 1.0 / static_cast<double>(norm_laps.size());
  const Matrix x = node_matrix(u);
  const Matrix lx = oracle::matmul(l, x);
  double tr = 0;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t c = 0; c < x.cols(); ++c) tr += x(i, c) * lx(i, c);
  return tr;
}

std::vector<Matrix> random_norm_laps(const std::vector<std::size_t>& sizes, std::mt19937_64& g) {
  std::vector<Matrix> out;
  for (std::size_t n : sizes) out.push_back(erdos_renyi(n, 0.5, g(), true).normalized_laplacian);
  return out;
}

SmoothingLayer layer_with_singular_value(double sigma, std::vector<double> times) {
  SmoothingLayer l;
  l.times = std::move(times);
  l.weights.push_back(Matrix::identity(3) * sigma);
  l.activation = {ActivationKind::relu, 0.0};
  return l;
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("energy of zero and of the degree-weighted constant") {
  std::mt19937_64 g(61);
  const std::vector<FactorGraph> graphs{erdos_renyi(4, 0.6, 1, true), erdos_renyi(5, 0.6, 2, true)};
  const std::vector<Matrix> laps{graphs[0].normalized_laplacian, graphs[1].normalized_laplacian};
  CHECK(tensor_dirichlet_energy(DenseTensor({4, 5, 2}), laps) == 0.0);
  DenseTensor u({4, 5, 2});
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t j = 0; j < 5; ++j)
      for (std::size_t i = 0; i < 4; ++i)
        u[i + 4 * j + 20 * c] = (c + 1.0) * std::sqrt(graphs[0].degrees[i] * graphs[1].degrees[j]);
  CHECK(std::abs(tensor_dirichlet_energy(u, laps)) <= 1e-12);
  CHECK_THROWS_AS(tensor_dirichlet_energy(DenseTensor({4, 4, 2}), laps), std::invalid_argument);
}

TEST_CASE("tensor energy equals the dense trace form") {
  std::mt19937_64 g(62);
  for (const auto& sizes : std::vector<std::vector<std::size_t>>{{4, 5}, {3, 4, 3}}) {
    const auto laps = random_norm_laps(sizes, g);
    std::vector<std::size_t> shape = sizes;
    shape.push_back(2);
    const DenseTensor u = oracle::random_tensor(shape, g);
    CHECK(std::abs(tensor_dirichlet_energy(u, laps) - dense_energy(u, laps)) <= 1e-10);
  }
}

TEST_CASE("product normalized Laplacian") {
  const Matrix edge = build_graph(Matrix(2, 2, {0, 1, 1, 0})).normalized_laplacian;
  CHECK(product_normalized_laplacian({edge}) == edge);
  const Matrix two = product_normalized_laplacian({edge, edge});
  CHECK(oracle::max_abs_diff(oracle::eigenvalues(two), {0, 1, 1, 2}) <= 1e-12);

  std::mt19937_64 g(63);
  std::vector<FactorGraph> gs;
  std::vector<Matrix> laps, adj;
  for (std::size_t n : {3, 4, 3}) {
    gs.push_back(erdos_renyi(n, 0.6, g(), true));
    laps.push_back(gs.back().normalized_laplacian);
    adj.push_back(oracle::identity(n) - gs.back().normalized_laplacian);
  }
  const Matrix l = product_normalized_laplacian(laps);
  const Matrix ref = oracle::identity(36) - oracle::cartesian_descending(adj) * (1.0 / 3.0);
  CHECK(max_abs_diff(l, ref) <= 1e-12);
  for (double ev : oracle::eigenvalues(l)) {
    CHECK(ev >= -1e-8);
    CHECK(ev <= 2 + 1e-8);
  }
  CHECK_THROWS_AS(product_normalized_laplacian({}), std::invalid_argument);
}

TEST_CASE("spectral gaps") {
  CHECK(spectral_gap(build_graph(Matrix(2, 2, {0, 1, 1, 0})).normalized_laplacian) == doctest::Approx(2.0));
  CHECK(spectral_gap(build_graph(Matrix(3, 3, {0, 1, 1, 1, 0, 1, 1, 1, 0})).normalized_laplacian) ==
        doctest::Approx(1.5));
  // Two disjoint edges: spectrum {0, 0, 2, 2}.
  Matrix a(4, 4);
  a(0, 1) = a(1, 0) = a(2, 3) = a(3, 2) = 1;
  CHECK(spectral_gap(build_graph(a).normalized_laplacian) == doctest::Approx(2.0));
  CHECK_THROWS_AS(spectral_gap(Matrix(3, 3)), DegenerateError);
}

TEST_CASE("top singular value") {
  std::mt19937_64 g(64);
  const Matrix w = oracle::random_matrix(5, 3, g);
  const double s = oracle::spectral_norm(w);
  CHECK(std::abs(top_singular_value_squared(w) - s * s) <= 1e-10);
}

TEST_CASE("bound slope with orthonormal weights") {
  SmoothingLayer l = layer_with_singular_value(1.0, {1.0, 1.0});
  const OversmoothingBound b = oversmoothing_bound({l, l, l}, {0.5, 0.8});
  CHECK(b.s == doctest::Approx(1.0));
  CHECK(b.rate == doctest::Approx(-0.5));
  CHECK(b.argmin_factor == 0);
  CHECK(b.decays);
  CHECK(b.log_bound == std::vector<double>{0.0, -0.5, -1.0, -1.5});
}

TEST_CASE("published scenario constants fall into the two regimes") {
  const SmoothingLayer decay = layer_with_singular_value(std::sqrt(0.004), {1.0, 1.0});
  const OversmoothingBound a = oversmoothing_bound({decay}, {0.06, 0.5});
  CHECK(a.rate == doctest::Approx(std::log(0.004) - 0.06));
  CHECK(a.decays);
  const SmoothingLayer loose = layer_with_singular_value(std::sqrt(7.691), {1.0, 1.0});
  const OversmoothingBound b = oversmoothing_bound({loose}, {0.07, 0.5});
  CHECK(b.rate == doctest::Approx(std::log(7.691) - 0.07));
  CHECK_FALSE(b.decays);
}

TEST_CASE("identity stack keeps the energy") {
  std::mt19937_64 g(65);
  const auto laps = random_norm_laps({4, 5}, g);
  SmoothingLayer l;
  l.times = {1e-300, 1e-300};
  l.activation = {ActivationKind::identity, 0.0};
  const EnergyReport r = energy_trajectory({l, l, l}, laps, oracle::random_tensor({4, 5, 3}, g));
  for (double v : r.log_ratio) CHECK(std::abs(v) <= 1e-12);
  CHECK_THROWS_AS(energy_trajectory({l}, laps, DenseTensor({4, 5, 3})), DegenerateError);
}

TEST_CASE("a pure heat-kernel layer contracts the energy") {
  std::mt19937_64 g(66);
  for (int trial = 0; trial < 10; ++trial) {
    const auto laps = random_norm_laps({4, 6}, g);
    const DenseTensor x = oracle::random_tensor({4, 6, 2}, g);
    SmoothingLayer l;
    l.times = {0.3 + trial * 0.4, 1.1};
    l.activation = {ActivationKind::identity, 0.0};
    const EnergyReport r = energy_trajectory({l}, laps, x);
    const double bound = std::exp(-2.0 / 2.0 * r.bound.t_tilde * r.bound.lambda_tilde);
    CHECK(r.energies[1] <= bound * r.energies[0] * (1 + 1e-10));
    CHECK(r.energies[1] <= r.energies[0]);
  }
}

TEST_CASE("energy bound holds on random ReLU stacks") {
  std::mt19937_64 g(67);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t factors = 2 + trial % 2;
    std::vector<std::size_t> sizes;
    for (std::size_t p = 0; p < factors; ++p) sizes.push_back(3 + g() % 4);
    const auto laps = random_norm_laps(sizes, g);
    std::vector<std::size_t> shape = sizes;
    shape.push_back(4);
    const DenseTensor x0 = oracle::random_tensor(shape, g);
    std::vector<SmoothingLayer> layers(1 + g() % 6);
    for (auto& l : layers) {
      for (std::size_t p = 0; p < factors; ++p) l.times.push_back(0.2 + 2.0 * (g() % 100) / 100.0);
      l.weights.push_back(oracle::random_matrix(4, 4, g));
      l.activation = trial % 3 == 0 ? Activation{ActivationKind::leaky_relu, 0.2}
                                    : Activation{ActivationKind::relu, 0.0};
    }
    const EnergyReport r = energy_trajectory(layers, laps, x0);
    for (std::size_t l = 0; l < r.energies.size(); ++l)
      CHECK(r.energies[l] <= std::exp(r.bound.log_bound[l]) * r.energies[0] * (1 + 1e-8));
  }
}

TEST_CASE("oversmoothing scenario shape") {
  OversmoothingScenario cfg;
  cfg.sizes = {5, 6};
  cfg.probabilities = {0.5, 0.5};
  cfg.input_channels = 5;
  cfg.layers = 3;
  const ScenarioInstance inst = make_oversmoothing_scenario(cfg);
  CHECK(inst.x0.shape() == std::vector<std::size_t>{5, 6, 5});
  REQUIRE(inst.layers.size() == 3);
  CHECK(inst.layers[2].weights[0].rows() == 3);
  CHECK(inst.layers[2].weights[0].cols() == 2);
  for (const auto& l : with_time(inst.layers, 4.0))
    for (double t : l.times) CHECK(t == 4.0);
  cfg.layers = 5;
  CHECK_THROWS_AS(make_oversmoothing_scenario(cfg), std::invalid_argument);
}

TEST_CASE("mismatch bounds") {
  CHECK(mismatch_bound(ProductKind::strong, 0, 0) == 0.0);
  CHECK(mismatch_bound(ProductKind::kronecker, 0, 0) == 0.0);
  CHECK(mismatch_bound(ProductKind::strong, 2, 3) == 6.0);
  CHECK(mismatch_bound(ProductKind::kronecker, 2, 3) == 11.0);
  CHECK_THROWS_AS(mismatch_bound(ProductKind::strong, -1, 2), std::invalid_argument);

  std::mt19937_64 g(68);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a1 = erdos_renyi(4, 0.6, g(), false).adjacency;
    const Matrix a2 = erdos_renyi(5, 0.6, g(), false).adjacency;
    const double l1 = oracle::spectral_norm(a1), l2 = oracle::spectral_norm(a2);
    const Matrix cart = oracle::kron(a1, oracle::identity(5)) + oracle::kron(oracle::identity(4), a2);
    const Matrix kr = oracle::kron(a1, a2);
    CHECK(max_abs_diff(strong_product(a1, a2), cart + kr) <= 1e-15);
    CHECK(max_abs_diff(kronecker_product_graph(a1, a2), kr) <= 1e-15);
    CHECK(std::abs(oracle::spectral_norm(strong_product(a1, a2) - cart) -
                   mismatch_bound(ProductKind::strong, l1, l2)) <= 1e-8);
    CHECK(oracle::spectral_norm(kronecker_product_graph(a1, a2) - cart) <=
          mismatch_bound(ProductKind::kronecker, l1, l2) + 1e-8);
  }
}

TEST_CASE("median") {
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 2, 3}) == 2.5);
  CHECK_THROWS_AS(median({}), std::invalid_argument);
}

TEST_CASE("clean stability cell has zero deviation and the baseline MSE") {
  StabilityConfig cfg;
  cfg.sizes = {6, 7};
  cfg.probabilities = {0.5, 0.5};
  cfg.teacher_widths = {3, 2};
  cfg.student_widths = {3};
  cfg.input_channels = 3;
  cfg.snr_grid = {std::numeric_limits<double>::infinity()};
  cfg.realizations = 2;
  cfg.train.max_epochs = 5;
  const StabilityReport r = stability_run(cfg);
  REQUIRE(r.cells.size() == 1);
  CHECK(r.cell(0, 0).mean_deviation == 0.0);
  for (const auto& e : r.cell(0, 0).epsilon)
    for (double v : e) CHECK(v == 0.0);
  CHECK(r.clean_baseline_mse == r.cell(0, 0).mean_mse);
  CHECK(r.cell(0, 0).test_mse.size() == 2);
}

TEST_CASE("trend violations count rising MSE along rows and columns") {
  StabilityReport r;
  r.snr_grid = {std::numeric_limits<double>::infinity(), 10, 0};
  r.realizations = 1;
  const double m[3][3] = {{0.1, 0.2, 0.3}, {0.2, 0.25, 0.35}, {0.3, 0.2, 0.4}};
  for (auto& row : m)
    for (double v : row) {
      StabilityCell c;
      c.mean_mse = v;
      r.cells.push_back(c);
    }
  // Column 1 goes 0.2, 0.25, 0.2: the last step improves as SNR falls.
  CHECK(max_trend_violations(r) == 1);
}

TEST_CASE("deviation ratios grow linearly for small perturbations") {
  StabilityConfig cfg;
  cfg.sizes = {8, 9};
  cfg.probabilities = {0.4, 0.4};
  const auto ratios = deviation_ratios(cfg, 0.01, 5);
  REQUIRE(ratios.size() == 5);
  CHECK(median(ratios) <= 2.5);
  CHECK(median(ratios) >= 1.5);
}

}  // TEST_SUITE
