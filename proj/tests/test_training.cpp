#include <doctest.h>

#include <cmath>
#include <random>

#include "citrus/errors.hpp"
#include "citrus/graphs.hpp"
#include "citrus/training.hpp"
#include "oracles.hpp"

using namespace citrus;

namespace {

std::vector<SpectralBasis> small_bases(std::uint64_t seed) {
  return {eigh(erdos_renyi(4, 0.6, seed, true).laplacian), eigh(path_graph(3).laplacian)};
}

Sample random_sample(std::mt19937_64& g, std::size_t rows, std::size_t horizon, std::size_t channels = 1) {
  return {oracle::random_tensor({4, 3, channels}, g), oracle::random_matrix(rows, horizon, g), {}};
}

CitrusModel linear_model(std::uint64_t seed) {
  ModelSpec spec;
  spec.encoder_channels = 2;
  BlockSpec bs;
  bs.mix_channels = 3;
  bs.field = FieldMode::per_factor;
  bs.activation = {ActivationKind::identity, 0.0};
  spec.blocks = {bs};
  spec.horizon = 2;
  return make_model(spec, small_bases(seed), seed);
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("loss examples") {
  std::mt19937_64 g(51);
  const Matrix a = oracle::random_matrix(3, 4, g);
  CHECK(loss(a, a, LossKind::mae) == 0.0);
  CHECK(loss(a, a, LossKind::mse) == 0.0);
  Matrix shifted = a;
  for (double& v : shifted.data()) v += 2.0;
  CHECK(loss(shifted, a, LossKind::mae) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(loss(shifted, a, LossKind::mse) == doctest::Approx(4.0).epsilon(1e-14));
  const Matrix b = oracle::random_matrix(3, 4, g);
  double mae = 0, mse = 0;
  for (std::size_t i = 0; i < 12; ++i) {
    mae += std::abs(a.data()[i] - b.data()[i]);
    mse += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
  }
  CHECK(std::abs(loss(a, b, LossKind::mae) - mae / 12) <= 1e-12);
  CHECK(std::abs(loss(a, b, LossKind::mse) - mse / 12) <= 1e-12);
  CHECK_THROWS_AS(loss(a, Matrix(4, 3), LossKind::mae), std::invalid_argument);
  CHECK(loss_kind_from_string("mae") == LossKind::mae);
  CHECK_THROWS_AS(loss_kind_from_string("huber"), std::invalid_argument);
}

TEST_CASE("zero data gives zero gradients") {
  CitrusModel m = linear_model(1);
  const Sample s{DenseTensor({4, 3, 1}), Matrix(4, 2), {}};
  GradientSet grads = GradientSet::zeros_like(m);
  CHECK(backward(m, s, LossKind::mse, grads) == 0.0);
  CHECK(grads.max_abs() == 0.0);
}

TEST_CASE("decoder-only model has the least-squares gradient") {
  // No blocks and no encoder: prediction = X W + b, with X the readout matrix.
  CitrusModel m;
  m.bases = small_bases(2);
  m.concat_encoded = false;
  m.readout_modes = 1;
  std::mt19937_64 g(52);
  m.decoder = oracle::random_matrix(3, 2, g);
  m.decoder_bias = {0.0, 0.0};
  const Sample s = random_sample(g, 4, 2);
  GradientSet grads = GradientSet::zeros_like(m);
  backward(m, s, LossKind::mse, grads);

  const Matrix x = readout_matrix(node_matrix(s.input), {4, 3}, 1);
  Matrix resid = oracle::matmul(x, m.decoder) - s.target;
  const Matrix expect = oracle::matmul(x.transpose(), resid) * (2.0 / 8.0);
  std::size_t idx = 0;
  for (; idx < grads.names.size(); ++idx)
    if (grads.names[idx] == "decoder") break;
  REQUIRE(idx < grads.names.size());
  CHECK(oracle::max_abs_diff(grads.values[idx], expect.values()) <= 1e-12);
}

TEST_CASE("finite difference check on a linear model") {
  std::mt19937_64 g(53);
  const CitrusModel m = linear_model(3);
  const Sample s = random_sample(g, 4, 2);
  CHECK(fd_check(m, s, LossKind::mse, 1e-5) <= 1e-7);
}

TEST_CASE("finite difference check on a two-block ReLU model") {
  ModelSpec spec;
  spec.encoder_channels = 3;
  BlockSpec bs;
  bs.mix_channels = 3;
  bs.mlp_widths = {3};
  bs.field = FieldMode::per_factor_channel;
  bs.activation = {ActivationKind::relu, 0.0};
  bs.residual = true;
  spec.blocks = {bs, bs};
  spec.horizon = 2;
  const CitrusModel m = make_model(spec, small_bases(4), 4);
  std::mt19937_64 g(54);
  const Sample s = random_sample(g, 4, 2);
  CHECK(fd_check(m, s, LossKind::mse, 1e-5) <= 1e-5);
}

TEST_CASE("finite difference discrepancy shrinks with the step") {
  std::mt19937_64 g(55);
  const CitrusModel m = linear_model(5);
  const Sample s = random_sample(g, 4, 2);
  // Use a loss with curvature so the stencil error is visible.
  const double big = fd_check(m, s, LossKind::mse, 1e-2);
  const double small = fd_check(m, s, LossKind::mse, 5e-3);
  CHECK(big / small >= 3.0);
  CHECK(big / small <= 5.0);
}

TEST_CASE("row mask restricts the loss") {
  std::mt19937_64 g(56);
  const CitrusModel m = linear_model(6);
  Sample s = random_sample(g, 4, 2);
  const Matrix pred = model_forward(s.input, m);
  s.row_mask = {1, 0, 0, 1};
  Matrix grad;
  const double l = loss_and_gradient(pred, s, LossKind::mae, grad);
  double ref = 0;
  for (std::size_t r : {0, 3})
    for (std::size_t c = 0; c < 2; ++c) ref += std::abs(pred(r, c) - s.target(r, c));
  CHECK(l == doctest::Approx(ref / 4));
  for (std::size_t c = 0; c < 2; ++c) CHECK(grad(1, c) == 0.0);
}

TEST_CASE("Adam with a zero gradient keeps parameters") {
  CitrusModel m = linear_model(7);
  const CitrusModel before = m;
  AdamState st = AdamState::zeros_like(m);
  TrainConfig cfg;
  adam_step(m, GradientSet::zeros_like(m), st, cfg);
  CHECK(m.encoder == before.encoder);
  CHECK(m.decoder == before.decoder);
  CHECK(m.blocks[0].receptive.raw == before.blocks[0].receptive.raw);
  // Stored moments decay geometrically under a zero gradient.
  st.m[0][0] = 1.0;
  st.v[0][0] = 1.0;
  adam_step(m, GradientSet::zeros_like(m), st, cfg);
  CHECK(st.m[0][0] == doctest::Approx(0.9));
  CHECK(st.v[0][0] == doctest::Approx(0.999));
}

TEST_CASE("first Adam step moves each coordinate by about lr") {
  CitrusModel m = linear_model(8);
  const CitrusModel before = m;
  GradientSet grads = GradientSet::zeros_like(m);
  for (auto& v : grads.values)
    for (double& x : v) x = 0.5;
  AdamState st = AdamState::zeros_like(m);
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  adam_step(m, grads, st, cfg);
  // Bias-corrected first step: -lr * g / (|g| + eps).
  const double step = 0.01 * 0.5 / (0.5 + 1e-8);
  for (std::size_t i = 0; i < m.decoder.size(); ++i)
    CHECK(before.decoder.data()[i] - m.decoder.data()[i] == doctest::Approx(step).epsilon(1e-10));
  grads.values[0][0] = std::nan("");
  CHECK_THROWS_AS(adam_step(m, grads, st, cfg), NumericalError);
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  cfg.learning_rate = -1;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.beta1 = 1.0;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
}

TEST_CASE("training with zero learning rate freezes the model") {
  std::mt19937_64 g(57);
  const CitrusModel m = linear_model(9);
  std::vector<Sample> train_set, val_set;
  for (int i = 0; i < 6; ++i) train_set.push_back(random_sample(g, 4, 2));
  for (int i = 0; i < 2; ++i) val_set.push_back(random_sample(g, 4, 2));
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.batch_size = 2;
  cfg.max_epochs = 4;
  cfg.patience = 10;
  // A zero learning rate is a frozen optimizer, which validation accepts.
  const TrainResult r = train(m, train_set, val_set, cfg);
  CHECK(r.model.decoder == m.decoder);
  REQUIRE(r.history.size() == 4);
  for (const auto& e : r.history) {
    CHECK(e.train_loss == r.history[0].train_loss);
    CHECK(e.val_loss == r.history[0].val_loss);
  }
}

TEST_CASE("zero patience stops after the first non-improving epoch") {
  std::mt19937_64 g(58);
  const CitrusModel m = linear_model(10);
  std::vector<Sample> train_set, val_set;
  for (int i = 0; i < 6; ++i) train_set.push_back(random_sample(g, 4, 2));
  for (int i = 0; i < 2; ++i) val_set.push_back(random_sample(g, 4, 2));
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.max_epochs = 50;
  cfg.patience = 0;
  const TrainResult r = train(m, train_set, val_set, cfg);
  CHECK(r.history.size() == 2);
  CHECK_THROWS_AS(train(m, {}, val_set, cfg), std::invalid_argument);
}

TEST_CASE("small-step descent is monotone and training is deterministic") {
  std::mt19937_64 g(59);
  const CitrusModel m = linear_model(11);
  const Sample s = random_sample(g, 4, 2);
  CitrusModel cur = m;
  AdamState st = AdamState::zeros_like(cur);
  TrainConfig cfg;
  cfg.learning_rate = 1e-4;
  double prev = sample_loss(cur, s, LossKind::mse);
  for (int step = 0; step < 10; ++step) {
    GradientSet grads = GradientSet::zeros_like(cur);
    backward(cur, s, LossKind::mse, grads);
    adam_step(cur, grads, st, cfg);
    const double l = sample_loss(cur, s, LossKind::mse);
    CHECK(l <= prev);
    prev = l;
  }

  std::vector<Sample> train_set, val_set;
  for (int i = 0; i < 8; ++i) train_set.push_back(random_sample(g, 4, 2));
  for (int i = 0; i < 2; ++i) val_set.push_back(random_sample(g, 4, 2));
  TrainConfig tc;
  tc.batch_size = 3;
  tc.max_epochs = 5;
  tc.seed = 4;
  const TrainResult a = train(m, train_set, val_set, tc);
  const TrainResult b = train(m, train_set, val_set, tc);
  CHECK(a.model.decoder == b.model.decoder);
  CHECK(a.model.blocks[0].receptive.raw == b.model.blocks[0].receptive.raw);
  CHECK(a.history.back().train_loss == b.history.back().train_loss);
}

}  // TEST_SUITE
