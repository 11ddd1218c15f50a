#include "citrus/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "citrus/errors.hpp"
#include "citrus/random.hpp"
#include "citrus/spectral.hpp"

namespace citrus {

double tensor_dirichlet_energy(const DenseTensor& u, const std::vector<Matrix>& norm_laps) {
  const std::size_t p_count = norm_laps.size();
  if (p_count == 0) throw std::invalid_argument("tensor_dirichlet_energy: no factors");
  if (u.order() != p_count + 1)
    throw std::invalid_argument("tensor_dirichlet_energy: expected an order-" +
                                std::to_string(p_count + 1) + " tensor");
  double total = 0.0;
  for (std::size_t p = 0; p < p_count; ++p) {
    if (norm_laps[p].rows() != u.dim(p) || norm_laps[p].cols() != u.dim(p))
      throw std::invalid_argument("tensor_dirichlet_energy: mode " + std::to_string(p) +
                                  " does not match its Laplacian");
    const DenseTensor lu = mode_product(u, norm_laps[p], p);
    for (std::size_t i = 0; i < u.size(); ++i) total += u[i] * lu[i];
  }
  return total / static_cast<double>(p_count);
}

Matrix product_normalized_laplacian(const std::vector<Matrix>& norm_laps) {
  if (norm_laps.empty()) throw std::invalid_argument("product_normalized_laplacian: no factors");
  Matrix sum = cartesian_sum(norm_laps, /*descending=*/true);
  sum *= 1.0 / static_cast<double>(norm_laps.size());
  return sum;
}

double spectral_gap(const Matrix& norm_lap, double zero_tol) {
  const SpectralBasis b = eigh(norm_lap);
  for (double lam : b.eigenvalues)
    if (lam > zero_tol) return lam;
  throw DegenerateError("spectral_gap: no eigenvalue above " + std::to_string(zero_tol));
}

double top_singular_value_squared(const Matrix& w) {
  if (w.empty()) return 0.0;
  // Eigenvalues of the smaller Gram matrix.
  const Matrix gram = w.rows() < w.cols() ? matmul_nt(w, w) : matmul_tn(w, w);
  return std::max(0.0, eigh(gram).eigenvalues.back());
}

DenseTensor smoothing_layer_forward(const DenseTensor& x, const std::vector<Matrix>& norm_laps,
                                    const SmoothingLayer& layer) {
  const std::size_t p_count = norm_laps.size();
  if (layer.times.size() != p_count)
    throw std::invalid_argument("smoothing layer: need one receptive field per factor");
  DenseTensor h = x;
  for (std::size_t p = 0; p < p_count; ++p)
    h = mode_product(h, heat_kernel_dense(norm_laps[p], layer.times[p] / double(p_count)), p);

  std::vector<std::size_t> graph_shape(x.shape().begin(), x.shape().end() - 1);
  Matrix act = node_matrix(h);
  for (double& v : act.data()) v = layer.activation.apply(v);
  for (const Matrix& w : layer.weights) {
    act = matmul(act, w);
    for (double& v : act.data()) v = layer.activation.apply(v);
  }
  return from_node_matrix(act, graph_shape);
}

OversmoothingBound oversmoothing_bound(const std::vector<SmoothingLayer>& layers,
                                       const std::vector<double>& gaps) {
  OversmoothingBound out;
  const std::size_t p_count = gaps.size();
  if (p_count == 0) throw std::invalid_argument("oversmoothing_bound: no factor gaps");
  const double p = static_cast<double>(p_count);
  double min_product = std::numeric_limits<double>::infinity();
  std::vector<double> layer_products;
  for (const auto& layer : layers) {
    if (layer.times.size() != p_count)
      throw std::invalid_argument("oversmoothing_bound: receptive field count mismatch");
    double s_l = 1.0;
    for (const auto& w : layer.weights) s_l *= top_singular_value_squared(w);
    out.s_layers.push_back(s_l);
    double layer_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < p_count; ++i) {
      const double prod = layer.times[i] * gaps[i];
      if (prod < layer_min) layer_min = prod;
      if (prod < min_product) {
        min_product = prod;
        out.argmin_factor = i;
        out.t_tilde = layer.times[i];
        out.lambda_tilde = gaps[i];
      }
    }
    layer_products.push_back(layer_min);
  }
  out.s = out.s_layers.empty() ? 1.0
                               : *std::max_element(out.s_layers.begin(), out.s_layers.end());
  if (layers.empty()) {
    out.t_tilde = 0.0;
    min_product = 0.0;
    out.lambda_tilde = *std::min_element(gaps.begin(), gaps.end());
  }
  out.rate = std::log(out.s) - 2.0 / p * min_product;
  out.decays = out.rate < 0.0;
  out.log_bound.push_back(0.0);
  out.cumulative_log_bound.push_back(0.0);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    out.log_bound.push_back(static_cast<double>(l + 1) * out.rate);
    out.cumulative_log_bound.push_back(out.cumulative_log_bound.back() +
                                       std::log(out.s_layers[l]) - 2.0 / p * layer_products[l]);
  }
  return out;
}

EnergyReport energy_trajectory(const std::vector<SmoothingLayer>& layers,
                               const std::vector<Matrix>& norm_laps, const DenseTensor& x0,
                               double zero_tol) {
  EnergyReport report;
  for (const auto& l : norm_laps) report.gaps.push_back(spectral_gap(l, zero_tol));
  report.bound = oversmoothing_bound(layers, report.gaps);
  const double e0 = tensor_dirichlet_energy(x0, norm_laps);
  if (!(e0 > 0.0)) throw DegenerateError("energy_trajectory: initial energy is zero");
  report.energies.push_back(e0);
  report.log_ratio.push_back(0.0);
  DenseTensor x = x0;
  for (const auto& layer : layers) {
    x = smoothing_layer_forward(x, norm_laps, layer);
    const double e = tensor_dirichlet_energy(x, norm_laps);
    report.energies.push_back(e);
    report.log_ratio.push_back(std::log(std::max(e, 0.0) / e0));
  }
  return report;
}

ScenarioInstance make_oversmoothing_scenario(const OversmoothingScenario& cfg) {
  if (cfg.sizes.size() != cfg.probabilities.size())
    throw std::invalid_argument("oversmoothing scenario: sizes and probabilities differ in length");
  if (cfg.layers >= cfg.input_channels)
    throw std::invalid_argument("oversmoothing scenario: need input_channels > layers");
  ScenarioInstance inst;
  for (std::size_t p = 0; p < cfg.sizes.size(); ++p) {
    inst.graphs.push_back(erdos_renyi(cfg.sizes[p], cfg.probabilities[p],
                                      derive_seed(cfg.seed, 100 + p), true, cfg.max_attempts));
    inst.norm_laps.push_back(inst.graphs.back().normalized_laplacian);
  }
  Rng rng(derive_seed(cfg.seed, 7));
  std::vector<std::size_t> shape = cfg.sizes;
  shape.push_back(cfg.input_channels);
  inst.x0 = random_normal_tensor(shape, rng);
  std::size_t width = cfg.input_channels;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    SmoothingLayer layer;
    layer.times.assign(cfg.sizes.size(), cfg.time);
    layer.activation = cfg.activation;
    layer.weights.push_back(random_normal(width, width - 1, rng) * cfg.weight_scale);
    inst.layers.push_back(std::move(layer));
    --width;
  }
  return inst;
}

std::vector<SmoothingLayer> with_time(const std::vector<SmoothingLayer>& layers, double t) {
  std::vector<SmoothingLayer> out = layers;
  for (auto& l : out) std::fill(l.times.begin(), l.times.end(), t);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<SpectralBasis> normalized_bases(const std::vector<FactorGraph>& graphs) {
  std::vector<SpectralBasis> bases;
  for (const auto& g : graphs) bases.push_back(eigh(g.normalized_laplacian));
  return bases;
}

std::vector<FactorGraph> stability_graphs(const StabilityConfig& cfg, std::uint64_t seed) {
  if (cfg.sizes.size() != cfg.probabilities.size() || cfg.sizes.size() != cfg.times.size())
    throw std::invalid_argument("stability: sizes, probabilities and times differ in length");
  std::vector<FactorGraph> graphs;
  for (std::size_t p = 0; p < cfg.sizes.size(); ++p)
    graphs.push_back(
        erdos_renyi(cfg.sizes[p], cfg.probabilities[p], derive_seed(seed, 10 + p), true, 100000));
  return graphs;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / double(v.size() - 1));
}

}  // namespace

CitrusModel make_stability_teacher(const StabilityConfig& cfg, std::vector<SpectralBasis> bases,
                                   std::uint64_t seed) {
  ModelSpec spec;
  spec.in_channels = cfg.input_channels;
  spec.concat_encoded = false;
  spec.readout_modes = bases.size();
  spec.horizon = cfg.teacher_widths.back();
  for (std::size_t i = 0; i < cfg.teacher_widths.size(); ++i) {
    BlockSpec b;
    b.mix_channels = cfg.teacher_widths[i];
    b.field = FieldMode::per_factor;
    const bool last = i + 1 == cfg.teacher_widths.size();
    b.activation = last ? Activation{ActivationKind::identity, 0.0}
                        : Activation{ActivationKind::relu, 0.0};
    spec.blocks.push_back(b);
  }
  CitrusModel teacher = make_model(spec, std::move(bases), seed);
  for (auto& blk : teacher.blocks) blk.receptive = ReceptiveField::per_factor(cfg.times);
  teacher.decoder = Matrix::identity(spec.horizon);
  return teacher;
}

StabilityReport stability_run(const StabilityConfig& cfg) {
  if (cfg.realizations == 0) throw std::invalid_argument("stability: realizations must be >= 1");
  if (cfg.sizes.size() != 2) throw std::invalid_argument("stability: the SNR grid needs two factors");
  if (cfg.snr_grid.empty()) throw std::invalid_argument("stability: empty SNR grid");
  const std::size_t g = cfg.snr_grid.size();

  StabilityReport report;
  report.snr_grid = cfg.snr_grid;
  report.realizations = cfg.realizations;
  report.cells.resize(g * g);
  for (std::size_t i = 0; i < g; ++i)
    for (std::size_t j = 0; j < g; ++j)
      report.cells[i * g + j].snr_db = {cfg.snr_grid[i], cfg.snr_grid[j]};

  std::vector<std::size_t> shape = cfg.sizes;
  shape.push_back(cfg.input_channels);
  const std::size_t nodes = cfg.sizes[0] * cfg.sizes[1];

  for (std::size_t r = 0; r < cfg.realizations; ++r) {
    const std::uint64_t rseed = derive_seed(cfg.seed, r);
    const auto graphs = stability_graphs(cfg, rseed);
    CitrusModel teacher =
        make_stability_teacher(cfg, normalized_bases(graphs), derive_seed(rseed, 1));
    Rng rng(derive_seed(rseed, 2));
    const DenseTensor x0 = random_normal_tensor(shape, rng);
    // Unit mean-square targets so cell MSEs are comparable across realizations.
    const double rms = frobenius_norm(model_forward(x0, teacher)) /
                       std::sqrt(double(nodes * teacher.horizon()));
    if (!(rms > 0.0)) throw DegenerateError("stability: teacher output is identically zero");
    teacher.decoder *= 1.0 / rms;
    const Matrix target = model_forward(x0, teacher);

    // Node split: test first, then validation out of the remainder.
    std::vector<std::size_t> perm(nodes);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::round(cfg.test_fraction * double(nodes)));
    const auto n_val =
        static_cast<std::size_t>(std::round(cfg.val_fraction * double(nodes - n_test)));
    std::vector<std::uint8_t> train_mask(nodes, 0), val_mask(nodes, 0), test_mask(nodes, 0);
    for (std::size_t k = 0; k < nodes; ++k) {
      if (k < n_test) test_mask[perm[k]] = 1;
      else if (k < n_test + n_val) val_mask[perm[k]] = 1;
      else train_mask[perm[k]] = 1;
    }
    const std::vector<Sample> train_set{{x0, target, train_mask}};
    const std::vector<Sample> val_set{{x0, target, val_mask}};
    const Sample test_sample{x0, target, test_mask};

    // One noise direction per factor; each SNR level rescales it.
    std::vector<Matrix> directions;
    for (std::size_t p = 0; p < 2; ++p)
      directions.push_back(noise_direction(graphs[p].n, derive_seed(rseed, 20 + p)));
    std::vector<std::vector<std::pair<FactorGraph, Perturbation>>> perturbed(2);
    for (std::size_t p = 0; p < 2; ++p)
      for (double snr : cfg.snr_grid) {
        if (std::isinf(snr) && snr > 0) {
          Perturbation none;
          none.error = Matrix(graphs[p].n, graphs[p].n);
          perturbed[p].emplace_back(graphs[p], none);
        } else {
          const double scale =
              frobenius_norm(graphs[p].adjacency) / std::sqrt(std::pow(10.0, snr / 10.0));
          auto pg = perturb_along(graphs[p], directions[p], scale);
          pg.second.snr_db = snr;
          perturbed[p].push_back(std::move(pg));
        }
      }
    std::vector<std::vector<SpectralBasis>> noisy_bases(2);
    for (std::size_t p = 0; p < 2; ++p)
      for (const auto& pg : perturbed[p]) noisy_bases[p].push_back(eigh(pg.first.normalized_laplacian));

    ModelSpec student_spec;
    student_spec.in_channels = cfg.input_channels;
    student_spec.concat_encoded = false;
    student_spec.readout_modes = 2;
    student_spec.horizon = cfg.teacher_widths.back();
    for (std::size_t w : cfg.student_widths) {
      BlockSpec b;
      b.mix_channels = w;
      b.field = FieldMode::per_factor;
      b.activation = {ActivationKind::relu, 0.0};
      student_spec.blocks.push_back(b);
    }

    for (std::size_t i = 0; i < g; ++i)
      for (std::size_t j = 0; j < g; ++j) {
        std::vector<SpectralBasis> bases{noisy_bases[0][i], noisy_bases[1][j]};
        CitrusModel student = make_model(student_spec, bases, derive_seed(rseed, 3));
        TrainConfig tcfg = cfg.train;
        tcfg.seed = derive_seed(rseed, 4);
        const TrainResult trained = train(student, train_set, val_set, tcfg);
        StabilityCell& cell = report.cells[i * g + j];
        cell.test_mse.push_back(sample_loss(trained.model, test_sample, LossKind::mse));

        CitrusModel shifted = teacher;
        shifted.bases = bases;
        cell.deviation.push_back(frobenius_norm(model_forward(x0, shifted) - target));
        cell.epsilon.push_back({perturbed[0][i].second.epsilon, perturbed[1][j].second.epsilon});
      }
  }
  for (auto& cell : report.cells) {
    cell.mean_mse = mean_of(cell.test_mse);
    cell.std_mse = sample_std(cell.test_mse);
    cell.mean_deviation = mean_of(cell.deviation);
  }
  for (std::size_t i = 0; i < g; ++i)
    if (std::isinf(cfg.snr_grid[i]) && cfg.snr_grid[i] > 0)
      report.clean_baseline_mse = report.cell(i, i).mean_mse;
  return report;
}

std::size_t max_trend_violations(const StabilityReport& report) {
  const std::size_t g = report.snr_grid.size();
  for (std::size_t i = 1; i < g; ++i)
    if (!(report.snr_grid[i] < report.snr_grid[i - 1]))
      throw std::invalid_argument("max_trend_violations: SNR grid must be strictly decreasing");
  std::size_t worst = 0;
  for (std::size_t line = 0; line < g; ++line) {
    std::size_t row = 0, col = 0;
    for (std::size_t k = 1; k < g; ++k) {
      if (report.cell(line, k - 1).mean_mse > report.cell(line, k).mean_mse) ++row;
      if (report.cell(k - 1, line).mean_mse > report.cell(k, line).mean_mse) ++col;
    }
    worst = std::max({worst, row, col});
  }
  return worst;
}

std::vector<double> deviation_ratios(const StabilityConfig& cfg, double relative_eps,
                                     std::size_t realizations) {
  std::vector<double> ratios;
  std::vector<std::size_t> shape = cfg.sizes;
  shape.push_back(cfg.input_channels);
  for (std::size_t r = 0; r < realizations; ++r) {
    const std::uint64_t rseed = derive_seed(cfg.seed ^ 0x5eed5eedULL, r);
    const auto graphs = stability_graphs(cfg, rseed);
    const CitrusModel teacher =
        make_stability_teacher(cfg, normalized_bases(graphs), derive_seed(rseed, 1));
    Rng rng(derive_seed(rseed, 2));
    const DenseTensor x0 = random_normal_tensor(shape, rng);
    const Matrix clean = model_forward(x0, teacher);

    double deviation[2] = {0.0, 0.0};
    for (int level = 0; level < 2; ++level) {
      std::vector<SpectralBasis> bases;
      for (std::size_t p = 0; p < graphs.size(); ++p) {
        Matrix dir = noise_direction(graphs[p].n, derive_seed(rseed, 20 + p));
        dir *= 1.0 / spectral_norm_symmetric(dir);
        const double eps = relative_eps * spectral_norm_symmetric(graphs[p].adjacency);
        const auto pg = perturb_along(graphs[p], dir, eps * (level + 1));
        bases.push_back(eigh(pg.first.normalized_laplacian));
      }
      CitrusModel shifted = teacher;
      shifted.bases = std::move(bases);
      deviation[level] = frobenius_norm(model_forward(x0, shifted) - clean);
    }
    ratios.push_back(deviation[1] / deviation[0]);
  }
  return ratios;
}

// ---------------------------------------------------------------------------

double mismatch_bound(ProductKind kind, double lmax1, double lmax2) {
  if (lmax1 < 0.0 || lmax2 < 0.0)
    throw std::invalid_argument("mismatch_bound: spectral radii must be nonnegative");
  if (kind == ProductKind::strong) return lmax1 * lmax2;
  return lmax1 + lmax2 + lmax1 * lmax2;
}

Matrix strong_product(const Matrix& a1, const Matrix& a2) {
  return kron(a1, a2) + kron_sum(a1, a2);
}

Matrix kronecker_product_graph(const Matrix& a1, const Matrix& a2) { return kron(a1, a2); }

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median: empty input");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace citrus
