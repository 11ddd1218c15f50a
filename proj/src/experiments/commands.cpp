#include "citrus/experiments/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "citrus/analysis.hpp"
#include "citrus/checkpoint.hpp"
#include "citrus/errors.hpp"
#include "citrus/experiments/dataset.hpp"
#include "citrus/experiments/metrics.hpp"
#include "citrus/experiments/output.hpp"
#include "citrus/experiments/planted.hpp"
#include "citrus/random.hpp"
#include "citrus/spectral.hpp"

namespace citrus::experiments {

namespace {

using nlohmann::json;

struct Checks {
  json list = json::array();
  std::vector<std::string> failed;

  void add(const std::string& name, bool passed, double value, double limit) {
    list.push_back({{"name", name}, {"passed", passed}, {"value", json_real(value)},
                    {"limit", json_real(limit)}});
    if (!passed) failed.push_back(name);
  }
};

CommandResult finish(const std::string& command, const Config& cfg, json summary, Checks checks,
                     std::vector<std::pair<std::string, std::string>> files) {
  CommandResult r;
  r.failed_checks = checks.failed;
  r.exit_code = checks.failed.empty() ? exit_pass : exit_assertion;
  r.report = {{"command", command},
              {"config", cfg.echo()},
              {"seed", cfg.str("seed")},
              {"status", r.exit_code == exit_pass ? "pass" : "fail"},
              {"checks", checks.list},
              {"summary", std::move(summary)}};
  r.files = std::move(files);
  return r;
}

std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// ---------------------------------------------------------------------------
// kernel-check

const std::map<std::string, std::string> kernel_defaults = {
    {"seed", "1"},
    {"instances", "50"},
    {"factor_counts", "2,3"},
    {"max_nodes", "8"},
    {"edge_probability", "0.5"},
    {"times", "0.1,1,5"},
    {"kron_order", "descending"},
    {"separability_tol", "1e-9"},
    {"equivalence_instances", "20"},
    {"equivalence_tol", "1e-9"},
    {"channels", "3"},
    {"out_channels", "2"},
    {"rk4_instances", "6"},
    {"rk4_max_nodes", "6"},
    {"rk4_dt", "1e-3"},
    {"rk4_t_end", "1"},
    {"rk4_tol", "1e-8"},
    {"rk4_order_dt", "0.02"},
    {"order_ratio_min", "14"},
    {"order_ratio_max", "18"},
};

std::vector<Matrix> random_laplacians(std::size_t factors, std::size_t max_nodes, double p,
                                      Rng& rng) {
  std::vector<Matrix> out;
  for (std::size_t f = 0; f < factors; ++f)
    out.push_back(erdos_renyi(uniform_index(rng, 2, max_nodes), p, rng(), false).laplacian);
  return out;
}

CommandResult kernel_check(const Config& cfg) {
  const std::string order = cfg.str("kron_order");
  if (order != "descending" && order != "ascending")
    throw ParseError("kron_order: expected descending or ascending, got '" + order + "'");
  const auto factor_counts = cfg.sizes("factor_counts");
  const auto times = cfg.reals("times");
  const std::size_t max_nodes = cfg.size("max_nodes");
  if (factor_counts.empty() || times.empty()) throw ParseError("factor_counts and times must be non-empty");
  for (std::size_t p : factor_counts)
    if (p == 0) throw ParseError("factor_counts: entries must be >= 1");
  if (max_nodes < 2) throw ParseError("max_nodes must be >= 2");
  const double edge_p = cfg.real("edge_probability");
  Rng rng(cfg.u64("seed"));

  CsvTable sep({"instance", "factors", "sizes", "t", "max_error"});
  double sep_max = 0.0;
  const std::size_t instances = cfg.size("instances");
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t factors = factor_counts[i % factor_counts.size()];
    const double t = times[(i / factor_counts.size()) % times.size()];
    const auto laps = random_laplacians(factors, max_nodes, edge_p, rng);
    std::vector<Matrix> kernels;
    std::string sizes;
    for (const auto& l : laps) {
      kernels.push_back(heat_kernel_dense(l, t));
      sizes += (sizes.empty() ? "" : "x") + std::to_string(l.rows());
    }
    const Matrix joint = heat_kernel_dense(cartesian_sum(laps, /*descending=*/true), t);
    const double err = max_abs_diff(joint, kron_chain(kernels, order == "descending"));
    sep_max = std::max(sep_max, err);
    sep.row({cell(i), cell(factors), sizes, cell(t), cell(err)});
  }

  CsvTable eq({"instance", "factors", "tensor_vs_vectorized", "tensor_vs_spectral"});
  double eq_max = 0.0;
  const std::size_t channels = cfg.size("channels"), out_channels = cfg.size("out_channels");
  for (std::size_t i = 0; i < cfg.size("equivalence_instances"); ++i) {
    const std::size_t factors = factor_counts[i % factor_counts.size()];
    const auto laps = random_laplacians(factors, max_nodes, edge_p, rng);
    const double t = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
    std::vector<std::size_t> shape;
    std::vector<SpectralBasis> bases;
    for (const auto& l : laps) {
      shape.push_back(l.rows());
      bases.push_back(eigh(l));
    }
    shape.push_back(channels);
    const DenseTensor u = random_normal_tensor(shape, rng);
    const Matrix w = random_normal(channels, out_channels, rng);
    const DenseTensor a = core_tensor_forward(u, laps, t, w);
    const DenseTensor b = vectorized_forward(u, laps, t, w);
    CitrusBlock block;
    block.receptive = ReceptiveField::uniform(FieldMode::scalar, factors, channels, t);
    block.mix = w;
    block.activation = {ActivationKind::identity, 0.0};
    const DenseTensor c = spectral_forward(u, bases, block);
    const double e1 = relative_frobenius_error(b, a), e2 = relative_frobenius_error(c, a);
    eq_max = std::max({eq_max, e1, e2});
    eq.row({cell(i), cell(factors), cell(e1), cell(e2)});
  }

  CsvTable rk({"instance", "factors", "error_dt", "error_order_dt", "error_order_dt_half",
               "order_ratio"});
  const double dt = cfg.real("rk4_dt"), t_end = cfg.real("rk4_t_end");
  const double order_dt = cfg.real("rk4_order_dt");
  double rk_max = 0.0, ratio_min = INFINITY, ratio_max = 0.0;
  for (std::size_t i = 0; i < cfg.size("rk4_instances"); ++i) {
    const std::size_t factors = factor_counts[i % factor_counts.size()];
    const auto laps = random_laplacians(factors, cfg.size("rk4_max_nodes"), edge_p, rng);
    std::vector<std::size_t> shape;
    for (const auto& l : laps) shape.push_back(l.rows());
    const DenseTensor u0 = random_normal_tensor(shape, rng);
    DenseTensor exact = u0;
    for (std::size_t p = 0; p < laps.size(); ++p)
      exact = mode_product(exact, heat_kernel_dense(laps[p], t_end), p);
    const double e = max_abs_diff(tpdeg_integrate(u0, laps, t_end, dt), exact);
    const double e1 = max_abs_diff(tpdeg_integrate(u0, laps, t_end, order_dt), exact);
    const double e2 = max_abs_diff(tpdeg_integrate(u0, laps, t_end, order_dt / 2), exact);
    const double ratio = e1 / e2;
    rk_max = std::max(rk_max, e);
    ratio_min = std::min(ratio_min, ratio);
    ratio_max = std::max(ratio_max, ratio);
    rk.row({cell(i), cell(factors), cell(e), cell(e1), cell(e2), cell(ratio)});
  }

  Checks checks;
  checks.add("separability", sep_max <= cfg.real("separability_tol"), sep_max,
             cfg.real("separability_tol"));
  checks.add("forward_equivalence", eq_max <= cfg.real("equivalence_tol"), eq_max,
             cfg.real("equivalence_tol"));
  checks.add("rk4_accuracy", rk_max <= cfg.real("rk4_tol"), rk_max, cfg.real("rk4_tol"));
  checks.add("rk4_order_ratio_min", ratio_min >= cfg.real("order_ratio_min"), ratio_min,
             cfg.real("order_ratio_min"));
  checks.add("rk4_order_ratio_max", ratio_max <= cfg.real("order_ratio_max"), ratio_max,
             cfg.real("order_ratio_max"));
  json summary = {{"separability_max_error", json_real(sep_max)},
                  {"equivalence_max_relative_error", json_real(eq_max)},
                  {"rk4_max_error", json_real(rk_max)},
                  {"rk4_order_ratio_min", json_real(ratio_min)},
                  {"rk4_order_ratio_max", json_real(ratio_max)}};
  return finish("kernel-check", cfg, summary, checks,
                {{"separability.csv", sep.str()},
                 {"equivalence.csv", eq.str()},
                 {"rk4.csv", rk.str()}});
}

// ---------------------------------------------------------------------------
// stability

const std::map<std::string, std::string> stability_defaults = {
    {"seed", "0"},
    {"sizes", "20,30"},
    {"probabilities", "0.1,0.1"},
    {"times", "2,3"},
    {"input_channels", "6"},
    {"teacher_widths", "5,4,2"},
    {"student_widths", "4,4"},
    {"snr_grid", "inf,20,10,0,-10"},
    {"realizations", "10"},
    {"test_fraction", "0.15"},
    {"val_fraction", "0.15"},
    {"learning_rate", "0.05"},
    {"epochs", "300"},
    {"patience", "50"},
    {"max_trend_violations", "1"},
    {"deviation_eps", "0.02"},
    {"deviation_realizations", "20"},
    {"max_deviation_ratio", "2.5"},
};

CommandResult stability(const Config& cfg) {
  StabilityConfig sc;
  sc.seed = cfg.u64("seed");
  sc.sizes = cfg.sizes("sizes");
  sc.probabilities = cfg.reals("probabilities");
  sc.times = cfg.reals("times");
  sc.input_channels = cfg.size("input_channels");
  sc.teacher_widths = cfg.sizes("teacher_widths");
  sc.student_widths = cfg.sizes("student_widths");
  sc.snr_grid = cfg.reals("snr_grid");
  sc.realizations = cfg.size("realizations");
  sc.test_fraction = cfg.real("test_fraction");
  sc.val_fraction = cfg.real("val_fraction");
  sc.train.learning_rate = cfg.real("learning_rate");
  sc.train.max_epochs = cfg.size("epochs");
  sc.train.patience = cfg.size("patience");
  if (sc.teacher_widths.empty() || sc.student_widths.empty())
    throw ParseError("teacher_widths and student_widths must be non-empty");
  for (std::size_t i = 1; i < sc.snr_grid.size(); ++i)
    if (!(sc.snr_grid[i] < sc.snr_grid[i - 1]))
      throw ParseError("snr_grid must be strictly decreasing");

  const StabilityReport rep = stability_run(sc);
  CsvTable grid({"snr1_db", "snr2_db", "mean_mse", "std_mse", "mean_deviation", "mean_eps1",
                 "mean_eps2"});
  for (const auto& c : rep.cells) {
    double e1 = 0, e2 = 0;
    for (const auto& e : c.epsilon) {
      e1 += e[0];
      e2 += e[1];
    }
    const double r = double(c.epsilon.size());
    grid.row({format_real(c.snr_db[0]), format_real(c.snr_db[1]), cell(c.mean_mse),
              cell(c.std_mse), cell(c.mean_deviation), cell(e1 / r), cell(e2 / r)});
  }
  CsvTable per({"snr1_db", "snr2_db", "realization", "test_mse", "deviation", "eps1", "eps2"});
  for (const auto& c : rep.cells)
    for (std::size_t k = 0; k < c.test_mse.size(); ++k)
      per.row({format_real(c.snr_db[0]), format_real(c.snr_db[1]), cell(k), cell(c.test_mse[k]),
               cell(c.deviation[k]), cell(c.epsilon[k][0]), cell(c.epsilon[k][1])});

  const auto ratios =
      deviation_ratios(sc, cfg.real("deviation_eps"), cfg.size("deviation_realizations"));
  CsvTable dev({"realization", "ratio"});
  for (std::size_t k = 0; k < ratios.size(); ++k) dev.row({cell(k), cell(ratios[k])});

  Checks checks;
  const std::size_t violations = max_trend_violations(rep);
  checks.add("snr_trend", violations <= cfg.size("max_trend_violations"), double(violations),
             double(cfg.size("max_trend_violations")));
  double clean_dev = 0.0;
  for (std::size_t i = 0; i < sc.snr_grid.size(); ++i)
    if (std::isinf(sc.snr_grid[i]) && sc.snr_grid[i] > 0) clean_dev = rep.cell(i, i).mean_deviation;
  checks.add("clean_deviation_zero", clean_dev == 0.0, clean_dev, 0.0);
  double med = 0.0;
  if (!ratios.empty()) {
    med = median(ratios);
    checks.add("deviation_ratio_median", med <= cfg.real("max_deviation_ratio"), med,
               cfg.real("max_deviation_ratio"));
  }
  json summary = {{"clean_baseline_mse", json_real(rep.clean_baseline_mse)},
                  {"max_trend_violations", violations},
                  {"deviation_ratio_median", json_real(med)},
                  {"realization_seeds", json::array()}};
  for (std::size_t r = 0; r < sc.realizations; ++r)
    summary["realization_seeds"].push_back(derive_seed(sc.seed, r));
  return finish("stability", cfg, summary, checks,
                {{"stability.csv", grid.str()},
                 {"stability_realizations.csv", per.str()},
                 {"deviation_ratios.csv", dev.str()}});
}

// ---------------------------------------------------------------------------
// oversmoothing

const std::map<std::string, std::string> oversmoothing_defaults = {
    {"seed", "0"},
    {"sizes", "10,15"},
    {"decay_probabilities", "0.05,0.95"},
    {"decay_weight_scale", "0.01"},
    {"loose_probabilities", "0.1,0.1"},
    {"loose_weight_scale", "0.4"},
    {"input_channels", "12"},
    {"layers", "10"},
    {"time", "1"},
    {"activation", "relu"},
    {"sweep_times", "0.1,1,5,10,20"},
    {"max_attempts", "1000000"},
    {"bound_tolerance", "1e-8"},
};

json bound_json(const OversmoothingBound& b) {
  return {{"s", json_real(b.s)},
          {"lambda_tilde", json_real(b.lambda_tilde)},
          {"t_tilde", json_real(b.t_tilde)},
          {"argmin_factor", b.argmin_factor},
          {"rate", json_real(b.rate)},
          {"decays", b.decays}};
}

CsvTable energy_table(const EnergyReport& r) {
  CsvTable t({"layer", "energy", "log_ratio", "bound", "s_layer"});
  for (std::size_t l = 0; l < r.energies.size(); ++l)
    t.row({cell(l), cell(r.energies[l]), cell(r.log_ratio[l]), cell(r.bound.log_bound[l]),
           l == 0 ? std::string("") : cell(r.bound.s_layers[l - 1])});
  return t;
}

CommandResult oversmoothing(const Config& cfg) {
  OversmoothingScenario base;
  base.seed = cfg.u64("seed");
  base.sizes = cfg.sizes("sizes");
  base.input_channels = cfg.size("input_channels");
  base.layers = cfg.size("layers");
  base.time = cfg.real("time");
  base.max_attempts = cfg.size("max_attempts");
  try {
    base.activation = activation_from_string(cfg.str("activation"));
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("activation: ") + e.what());
  }
  const double tol = std::log1p(cfg.real("bound_tolerance"));

  OversmoothingScenario decay = base, loose = base;
  decay.probabilities = cfg.reals("decay_probabilities");
  decay.weight_scale = cfg.real("decay_weight_scale");
  loose.probabilities = cfg.reals("loose_probabilities");
  loose.weight_scale = cfg.real("loose_weight_scale");

  const ScenarioInstance di = make_oversmoothing_scenario(decay);
  const EnergyReport dr = energy_trajectory(di.layers, di.norm_laps, di.x0);
  const ScenarioInstance li = make_oversmoothing_scenario(loose);
  const EnergyReport lr = energy_trajectory(li.layers, li.norm_laps, li.x0);

  Checks checks;
  double worst = -INFINITY;
  bool monotone = true;
  for (std::size_t l = 1; l < dr.log_ratio.size(); ++l) {
    worst = std::max(worst, dr.log_ratio[l] - dr.bound.log_bound[l]);
    if (!(dr.energies[l] < dr.energies[l - 1])) monotone = false;
  }
  checks.add("decay_below_bound", worst <= tol, worst, tol);
  checks.add("decay_monotone", monotone, monotone ? 1.0 : 0.0, 1.0);
  double loose_worst = -INFINITY;
  for (std::size_t l = 1; l < lr.log_ratio.size(); ++l)
    loose_worst = std::max(loose_worst, lr.log_ratio[l] - lr.bound.log_bound[l]);
  checks.add("loose_below_bound", loose_worst <= tol, loose_worst, tol);

  // Receptive-field sweep on the loose scenario, where the critical time is positive.
  const double p_count = double(base.sizes.size());
  const double critical = p_count * std::log(lr.bound.s) / (2.0 * lr.bound.lambda_tilde);
  CsvTable sweep({"time", "above_critical", "layer", "log_ratio", "bound"});
  json sweep_summary = json::array();
  for (double t : cfg.reals("sweep_times")) {
    const EnergyReport r = energy_trajectory(with_time(li.layers, t), li.norm_laps, li.x0);
    for (std::size_t l = 0; l < r.log_ratio.size(); ++l)
      sweep.row({cell(t), t > critical ? "1" : "0", cell(l), cell(r.log_ratio[l]),
                 cell(r.bound.log_bound[l])});
    sweep_summary.push_back({{"time", json_real(t)},
                             {"above_critical", t > critical},
                             {"final_log_ratio", json_real(r.log_ratio.back())},
                             {"rate", json_real(r.bound.rate)}});
  }

  json summary = {{"decay", bound_json(dr.bound)},
                  {"loose", bound_json(lr.bound)},
                  {"critical_time", json_real(critical)},
                  {"sweep", sweep_summary}};
  summary["decay"]["gaps"] = dr.gaps;
  summary["loose"]["gaps"] = lr.gaps;
  return finish("oversmoothing", cfg, summary, checks,
                {{"oversmoothing_decay.csv", energy_table(dr).str()},
                 {"oversmoothing_loose.csv", energy_table(lr).str()},
                 {"oversmoothing_sweep.csv", sweep.str()}});
}

// ---------------------------------------------------------------------------
// truncation

const std::map<std::string, std::string> truncation_defaults = {
    {"seed", "0"},
    {"sizes", "24,24"},
    {"edge_probability", "0.3"},
    {"teacher_time", "0.3"},
    {"channels", "3"},
    {"outputs", "2"},
    {"train_samples", "24"},
    {"val_samples", "8"},
    {"k_grid", "3,6,12,24"},
    {"policies", "smallest,largest"},
    {"seeds", "5"},
    {"epochs", "60"},
    {"learning_rate", "0.02"},
    {"batch_size", "8"},
};

struct TruncationRun {
  double val_mae = 0;
  double seconds_per_epoch = 0;
  std::size_t spectral_cost = 0;  // multiply-adds of one forward spectral transform pair
};

CommandResult truncation(const Config& cfg) {
  const auto sizes = cfg.sizes("sizes");
  auto k_grid = cfg.sizes("k_grid");
  std::vector<TruncationPolicy> policies;
  for (const auto& name : split_list(cfg.str("policies"))) {
    try {
      policies.push_back(truncation_policy_from_string(name));
    } catch (const std::invalid_argument& e) {
      throw ParseError(std::string("policies: ") + e.what());
    }
  }
  if (k_grid.empty() || policies.empty()) throw ParseError("k_grid and policies must be non-empty");
  std::sort(k_grid.begin(), k_grid.end());
  const std::size_t channels = cfg.size("channels"), outputs = cfg.size("outputs");
  const std::size_t seeds = cfg.size("seeds");
  if (seeds == 0) throw ParseError("seeds must be >= 1");
  const std::size_t n_full = *std::min_element(sizes.begin(), sizes.end());

  TrainConfig tc;
  tc.loss = LossKind::mae;
  tc.learning_rate = cfg.real("learning_rate");
  tc.batch_size = cfg.size("batch_size");
  tc.max_epochs = cfg.size("epochs");
  tc.patience = tc.max_epochs;

  CsvTable runs({"policy", "k", "seed", "val_mae", "spectral_cost"});
  CsvTable med_table({"policy", "k", "median_val_mae"});
  std::ostringstream timing;
  timing << "policy,k,seed,seconds_per_epoch\n";
  std::map<std::string, std::vector<double>> medians;
  std::vector<double> full_model_mae, full_k_mae;

  for (std::size_t s = 0; s < seeds; ++s) {
    const std::uint64_t seed = derive_seed(cfg.u64("seed"), s);
    const TruncationTask task = make_truncation_task(
        sizes, cfg.real("edge_probability"), cfg.real("teacher_time"), channels, outputs,
        cfg.size("train_samples"), cfg.size("val_samples"), seed);
    tc.seed = derive_seed(seed, 7);
    if (s == 0) {
      // Reference: the untruncated bases.
      CitrusModel full = make_truncation_student(task, n_full, TruncationPolicy::smallest,
                                                 channels, outputs, derive_seed(seed, 9));
      full.bases = task.bases;
      full_model_mae.push_back(train(full, task.train, task.val, tc).best_val_loss);
    }
    for (auto policy : policies)
      for (std::size_t k : k_grid) {
        CitrusModel student =
            make_truncation_student(task, k, policy, channels, outputs, derive_seed(seed, 9));
        const auto t0 = std::chrono::steady_clock::now();
        const TrainResult r = train(student, task.train, task.val, tc);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::size_t cost, rest = channels;
        for (std::size_t n : sizes) rest *= n;
        cost = 2 * k * rest * sizes.size();
        runs.row({to_string(policy), cell(k), cell(s), cell(r.best_val_loss), cell(cost)});
        timing << to_string(policy) << ',' << k << ',' << s << ','
               << format_real(secs / double(std::max<std::size_t>(1, r.history.size()))) << '\n';
        medians[std::string(to_string(policy)) + ":" + std::to_string(k)].push_back(r.best_val_loss);
        if (s == 0 && policy == TruncationPolicy::smallest && k == n_full)
          full_k_mae.push_back(r.best_val_loss);
      }
  }

  Checks checks;
  json summary = {{"median_val_mae", json::object()}};
  for (auto policy : policies) {
    double prev = INFINITY;
    std::size_t violations = 0;
    for (std::size_t k : k_grid) {
      const double m = median(medians[std::string(to_string(policy)) + ":" + std::to_string(k)]);
      med_table.row({to_string(policy), cell(k), cell(m)});
      summary["median_val_mae"][to_string(policy)][std::to_string(k)] = json_real(m);
      if (m > prev) ++violations;
      prev = m;
    }
    if (policy == TruncationPolicy::smallest)
      checks.add("mae_non_increasing_in_k", violations == 0, double(violations), 0.0);
  }
  if (!full_k_mae.empty()) {
    const double diff = std::abs(full_k_mae[0] - full_model_mae[0]);
    checks.add("full_k_matches_full_model", diff == 0.0, diff, 0.0);
    summary["full_model_val_mae"] = json_real(full_model_mae[0]);
  }

  CsvTable ev({"factor", "index", "explained_variance", "cumulative"});
  {
    const TruncationTask task = make_truncation_task(
        sizes, cfg.real("edge_probability"), cfg.real("teacher_time"), channels, outputs, 1, 1,
        derive_seed(cfg.u64("seed"), 0));
    for (std::size_t p = 0; p < task.bases.size(); ++p) {
      const auto ratios = explained_variance(task.bases[p]);
      double cum = 0.0;
      for (std::size_t i = 0; i < ratios.size(); ++i) {
        cum += ratios[i];
        ev.row({cell(p), cell(i + 1), cell(ratios[i]), cell(cum)});
      }
    }
  }
  CommandResult out = finish("truncation", cfg, summary, checks,
                             {{"truncation.csv", runs.str()},
                              {"truncation_median.csv", med_table.str()},
                              {"explained_variance.csv", ev.str()}});
  out.timing_log = timing.str();
  return out;
}

// ---------------------------------------------------------------------------
// forecast

const std::map<std::string, std::string> forecast_defaults = {
    {"seed", "0"},
    {"series", ""},
    {"adjacency", ""},
    {"distances", ""},
    {"sigma", "1"},
    {"threshold", "0.1"},
    {"synthetic", "planted"},
    {"nodes", "12"},
    {"steps", "400"},
    {"edge_probability", "0.3"},
    {"diffusion", "1"},
    {"persistence", "0.9"},
    {"innovation", "0.03"},
    {"level", "0"},
    {"history", "12"},
    {"horizon", "3"},
    {"train_fraction", "0.7"},
    {"val_fraction", "0.15"},
    {"encoder_channels", "8"},
    {"blocks", "2"},
    {"mix_channels", "8"},
    {"field", "per_factor"},
    {"activation", "relu"},
    {"k_spatial", "0"},
    {"k_temporal", "0"},
    {"policy", "smallest"},
    {"loss", "mae"},
    {"learning_rate", "0.01"},
    {"batch_size", "16"},
    {"epochs", "300"},
    {"patience", "30"},
    {"checkpoint", "true"},
};

template <typename F>
auto parse_enum(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw ParseError(key + ": " + e.what());
  }
}

CommandResult forecast(const Config& cfg) {
  const std::uint64_t seed = cfg.u64("seed");
  Matrix raw;
  FactorGraph spatial;
  const std::string series_path = cfg.str("series");
  if (!series_path.empty()) {
    raw = load_csv_matrix(series_path);
    if (!cfg.str("adjacency").empty()) {
      spatial = build_graph(load_csv_matrix(cfg.str("adjacency")));
    } else if (!cfg.str("distances").empty()) {
      spatial = gaussian_kernel_graph(load_csv_matrix(cfg.str("distances")), cfg.real("sigma"),
                                      cfg.real("threshold"));
    } else {
      throw ParseError("forecast: a series file needs an adjacency or distances file");
    }
  } else {
    const std::string kind = cfg.str("synthetic");
    spatial = erdos_renyi(cfg.size("nodes"), cfg.real("edge_probability"), derive_seed(seed, 1),
                          true, 100000);
    if (kind == "planted") {
      raw = planted_series(spatial, cfg.size("steps"), cfg.real("diffusion"),
                           cfg.real("persistence"), cfg.real("innovation"), derive_seed(seed, 2));
    } else if (kind == "constant") {
      raw = Matrix(cfg.size("nodes"), cfg.size("steps"), cfg.real("level"));
    } else {
      throw ParseError("synthetic: expected planted or constant, got '" + kind + "'");
    }
  }

  const ForecastDataset ds =
      make_forecast_dataset(raw, spatial, cfg.size("history"), cfg.size("horizon"),
                            cfg.real("train_fraction"), cfg.real("val_fraction"));
  const auto policy =
      parse_enum("policy", [&] { return truncation_policy_from_string(cfg.str("policy")); });
  const auto field = parse_enum("field", [&] { return field_mode_from_string(cfg.str("field")); });
  const auto act = parse_enum("activation", [&] { return activation_from_string(cfg.str("activation")); });
  const auto loss_kind = parse_enum("loss", [&] { return loss_kind_from_string(cfg.str("loss")); });

  std::vector<SpectralBasis> bases{eigh(ds.spatial.normalized_laplacian),
                                   eigh(ds.temporal.normalized_laplacian)};
  const std::size_t ks[2] = {cfg.size("k_spatial"), cfg.size("k_temporal")};
  for (std::size_t p = 0; p < 2; ++p)
    if (ks[p] != 0) bases[p] = truncate(bases[p], ks[p], policy);

  ModelSpec spec;
  spec.in_channels = 1;
  spec.encoder_channels = cfg.size("encoder_channels");
  spec.concat_encoded = spec.encoder_channels > 0;
  spec.readout_modes = 1;
  spec.horizon = ds.horizon;
  for (std::size_t b = 0; b < cfg.size("blocks"); ++b) {
    BlockSpec bs;
    bs.mix_channels = cfg.size("mix_channels");
    bs.field = field;
    bs.activation = act;
    spec.blocks.push_back(bs);
  }
  CitrusModel model = make_model(spec, bases, derive_seed(seed, 3));
  model.policy = policy;

  TrainConfig tc;
  tc.loss = loss_kind;
  tc.learning_rate = cfg.real("learning_rate");
  tc.batch_size = cfg.size("batch_size");
  tc.max_epochs = cfg.size("epochs");
  tc.patience = cfg.size("patience");
  tc.seed = derive_seed(seed, 4);
  const TrainResult trained =
      train(model, make_samples(ds, ds.train), make_samples(ds, ds.val), tc);

  std::vector<MetricAccumulator> per_h(ds.horizon);
  MetricAccumulator overall;
  for (std::size_t start : ds.test) {
    const Matrix pred = denormalize(ds, model_forward(make_sample(ds, start).input, trained.model));
    const Matrix truth = raw_target(ds, start);
    overall.add(truth.data(), pred.data());
    for (std::size_t h = 0; h < ds.horizon; ++h) {
      std::vector<double> y, yh;
      for (std::size_t i = 0; i < ds.nodes(); ++i) {
        y.push_back(truth(i, h));
        yh.push_back(pred(i, h));
      }
      per_h[h].add(y, yh);
    }
  }
  CsvTable metrics({"horizon", "mae", "mape", "rmse", "rnmse", "count", "mape_excluded"});
  auto add_row = [&](const std::string& label, const ForecastMetrics& m) {
    metrics.row({label, cell(m.mae), cell(m.mape), cell(m.rmse), cell(m.rnmse), cell(m.count),
                 cell(m.mape_excluded)});
  };
  for (std::size_t h = 0; h < ds.horizon; ++h) add_row(std::to_string(h + 1), per_h[h].result());
  const ForecastMetrics all = overall.result();
  add_row("all", all);

  CsvTable history({"epoch", "train_loss", "val_loss"});
  for (const auto& e : trained.history)
    history.row({cell(e.epoch), cell(e.train_loss), cell(e.val_loss)});

  double scale = 0.0;
  for (double v : ds.raw.data()) scale = std::max(scale, std::abs(v));
  Checks checks;
  const bool finite = std::isfinite(all.mae) && std::isfinite(all.rmse);
  checks.add("finite_metrics", finite, finite ? 1.0 : 0.0, 1.0);
  json summary = {{"test", {{"mae", json_real(all.mae)},
                            {"mape", json_real(all.mape)},
                            {"rmse", json_real(all.rmse)},
                            {"rnmse", json_real(all.rnmse)},
                            {"mape_excluded", all.mape_excluded}}},
                  {"series_scale", json_real(scale)},
                  {"windows", {{"train", ds.train.size()}, {"val", ds.val.size()}, {"test", ds.test.size()}}},
                  {"best_epoch", trained.best_epoch},
                  {"epochs_run", trained.history.size()},
                  {"learned_times", json::array()}};
  for (const auto& b : trained.model.blocks) {
    const Matrix t = b.receptive.effective();
    summary["learned_times"].push_back(std::vector<double>(t.data().begin(), t.data().end()));
  }
  std::vector<std::pair<std::string, std::string>> files{{"metrics.csv", metrics.str()},
                                                         {"history.csv", history.str()}};
  if (cfg.flag("checkpoint")) files.emplace_back("model.ckpt", serialize_model(trained.model));
  return finish("forecast", cfg, summary, checks, std::move(files));
}

struct CommandEntry {
  const std::map<std::string, std::string>* defaults;
  std::function<CommandResult(const Config&)> run;
};

const std::map<std::string, CommandEntry>& registry() {
  static const std::map<std::string, CommandEntry> r = {
      {"kernel-check", {&kernel_defaults, kernel_check}},
      {"stability", {&stability_defaults, stability}},
      {"oversmoothing", {&oversmoothing_defaults, oversmoothing}},
      {"truncation", {&truncation_defaults, truncation}},
      {"forecast", {&forecast_defaults, forecast}},
  };
  return r;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"kernel-check", "stability", "oversmoothing",
                                                 "truncation", "forecast"};
  return names;
}

Config default_config(const std::string& command) {
  auto it = registry().find(command);
  if (it == registry().end()) throw ParseError("unknown command '" + command + "'");
  return Config(*it->second.defaults);
}

CommandResult run_command(const std::string& command, const Config& cfg) {
  auto it = registry().find(command);
  if (it == registry().end()) throw ParseError("unknown command '" + command + "'");
  return it->second.run(cfg);
}

void write_outputs(const CommandResult& result, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  for (const auto& [name, content] : result.files) write_file_atomic((dir / name).string(), content);
  if (!result.timing_log.empty())
    write_file_atomic((dir / "timing.log").string(), result.timing_log);
  write_file_atomic((dir / "report.json").string(), result.report.dump(2) + "\n");
}

}  // namespace citrus::experiments
