#include "citrus/experiments/planted.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "citrus/random.hpp"
#include "citrus/spectral.hpp"

namespace citrus::experiments {

Matrix planted_series(const FactorGraph& spatial, std::size_t steps, double diffusion,
                      double persistence, double innovation, std::uint64_t seed) {
  if (!(std::abs(persistence) < 1.0))
    throw std::invalid_argument("planted_series: persistence must lie in (-1, 1)");
  Rng rng(seed);
  const std::size_t n = spatial.n;
  const double periods[] = {20.0, 7.0};
  Matrix series(n, steps);
  for (double period : periods) {
    const Matrix amp = random_normal(n, 1, rng);
    const Matrix phase = random_uniform(n, 1, rng, 0.0, 2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t s = 0; s < steps; ++s)
        series(i, s) += amp(i, 0) * std::sin(2.0 * std::numbers::pi * double(s) / period +
                                              phase(i, 0));
  }
  const Matrix noise = random_normal(n, steps, rng, innovation);
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      z = persistence * z + noise(i, s);
      series(i, s) += z;
    }
  }
  return matmul(heat_kernel_dense(spatial.normalized_laplacian, diffusion), series);
}

namespace {

ModelSpec one_block_spec(std::size_t channels, std::size_t outputs, std::size_t factors,
                         Activation act) {
  ModelSpec spec;
  spec.in_channels = channels;
  spec.concat_encoded = false;
  spec.readout_modes = factors;
  spec.horizon = outputs;
  BlockSpec b;
  b.mix_channels = outputs;
  b.field = FieldMode::per_factor;
  b.activation = act;
  spec.blocks.push_back(b);
  return spec;
}

std::vector<Sample> draw_samples(const CitrusModel& teacher, std::vector<std::size_t> shape,
                                 std::size_t count, Rng& rng, double noise = 0.0) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < count; ++i) {
    Sample s;
    s.input = random_normal_tensor(shape, rng);
    s.target = model_forward(s.input, teacher);
    if (noise > 0.0) s.target += random_normal(s.target.rows(), s.target.cols(), rng, noise);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

RecoveryResult run_recovery(const RecoveryConfig& cfg) {
  if (cfg.sizes.size() != cfg.times.size())
    throw std::invalid_argument("recovery: sizes and times differ in length");
  std::vector<SpectralBasis> bases;
  for (std::size_t p = 0; p < cfg.sizes.size(); ++p)
    bases.push_back(eigh(erdos_renyi(cfg.sizes[p], cfg.edge_probability,
                                     derive_seed(cfg.seed, 10 + p), true, 100000)
                             .laplacian));
  const Activation identity{ActivationKind::identity, 0.0};
  const ModelSpec spec = one_block_spec(cfg.channels, cfg.outputs, cfg.sizes.size(), identity);
  CitrusModel teacher = make_model(spec, bases, derive_seed(cfg.seed, 1));
  teacher.blocks[0].receptive = ReceptiveField::per_factor(cfg.times);
  Rng mix_rng(derive_seed(cfg.seed, 2));
  teacher.blocks[0].mix = random_normal(cfg.channels, cfg.outputs, mix_rng);
  teacher.decoder = Matrix::identity(cfg.outputs);

  Rng rng(derive_seed(cfg.seed, 3));
  std::vector<std::size_t> shape = cfg.sizes;
  shape.push_back(cfg.channels);
  const auto train_set = draw_samples(teacher, shape, cfg.train_samples, rng, cfg.noise);
  const auto val_set = draw_samples(teacher, shape, cfg.val_samples, rng, cfg.noise);
  const auto test_set = draw_samples(teacher, shape, cfg.test_samples, rng);

  CitrusModel student = make_model(spec, bases, derive_seed(cfg.seed, 4));
  TrainConfig tcfg = cfg.train;
  tcfg.seed = derive_seed(cfg.seed, 5);
  const TrainResult trained = train(student, train_set, val_set, tcfg);

  RecoveryResult r;
  r.true_times = cfg.times;
  const Matrix learned = trained.model.blocks[0].receptive.effective();
  for (std::size_t p = 0; p < cfg.times.size(); ++p) {
    r.learned_times.push_back(learned(p, 0));
    r.max_time_error =
        std::max(r.max_time_error, std::abs(learned(p, 0) - cfg.times[p]) / cfg.times[p]);
  }
  r.train_mse = mean_loss(trained.model, train_set, LossKind::mse);
  double err = 0.0, ref = 0.0;
  for (const auto& s : test_set) {
    const Matrix pred = model_forward(s.input, trained.model);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double d = pred.data()[i] - s.target.data()[i];
      err += d * d;
      ref += s.target.data()[i] * s.target.data()[i];
    }
  }
  r.test_rnmse = std::sqrt(err / ref);
  r.epochs = trained.history.size();
  return r;
}

TruncationTask make_truncation_task(const std::vector<std::size_t>& sizes, double edge_probability,
                                    double teacher_time, std::size_t channels,
                                    std::size_t outputs, std::size_t train_samples,
                                    std::size_t val_samples, std::uint64_t seed) {
  TruncationTask task;
  for (std::size_t p = 0; p < sizes.size(); ++p)
    task.bases.push_back(eigh(
        erdos_renyi(sizes[p], edge_probability, derive_seed(seed, 10 + p), true, 100000)
            .normalized_laplacian));
  const ModelSpec spec =
      one_block_spec(channels, outputs, sizes.size(), {ActivationKind::relu, 0.0});
  CitrusModel teacher = make_model(spec, task.bases, derive_seed(seed, 1));
  teacher.blocks[0].receptive =
      ReceptiveField::per_factor(std::vector<double>(sizes.size(), teacher_time));
  teacher.decoder = Matrix::identity(outputs);
  Rng rng(derive_seed(seed, 2));
  teacher.blocks[0].mix = random_normal(channels, outputs, rng);
  std::vector<std::size_t> shape = sizes;
  shape.push_back(channels);
  task.train = draw_samples(teacher, shape, train_samples, rng);
  task.val = draw_samples(teacher, shape, val_samples, rng);
  return task;
}

CitrusModel make_truncation_student(const TruncationTask& task, std::size_t k,
                                    TruncationPolicy policy, std::size_t channels,
                                    std::size_t outputs, std::uint64_t seed) {
  std::vector<SpectralBasis> bases;
  for (const auto& b : task.bases) {
    if (k == 0 || k > b.source_n)
      throw std::invalid_argument("truncation: K=" + std::to_string(k) +
                                  " is outside [1, " + std::to_string(b.source_n) + "]");
    bases.push_back(truncate(b, k, policy));
  }
  const ModelSpec spec =
      one_block_spec(channels, outputs, task.bases.size(), {ActivationKind::relu, 0.0});
  CitrusModel student = make_model(spec, std::move(bases), seed);
  student.policy = policy;
  return student;
}

}  // namespace citrus::experiments
