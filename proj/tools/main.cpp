// xorlab command line: train single runs, sweep heatmap grids, verify the
// comparison-sequence and concentration machinery, export datasets.
#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <xorlab/decomposition.hpp>
#include <xorlab/eval.hpp>
#include <xorlab/experiments.hpp>
#include <xorlab/theory.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

using namespace xorlab;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

// flat key = value config file; '#' starts a comment
std::map<std::string, std::string> read_kv_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (!key.empty()) kv[key] = val;
  }
  return kv;
}

double kv_num(const std::map<std::string, std::string>& kv, const std::string& key, double dflt) {
  auto it = kv.find(key);
  return it == kv.end() ? dflt : std::stod(it->second);
}

std::vector<double> parse_range(const std::string& s, bool round_ints) {
  // "lo:hi:count", log-spaced
  std::vector<double> out;
  const auto c1 = s.find(':');
  const auto c2 = s.find(':', c1 + 1);
  if (c1 == std::string::npos || c2 == std::string::npos)
    throw std::runtime_error("range must be lo:hi:count, got " + s);
  const double lo = std::stod(s.substr(0, c1));
  const double hi = std::stod(s.substr(c1 + 1, c2 - c1 - 1));
  const int count = std::stoi(s.substr(c2 + 1));
  for (int k = 0; k < count; ++k) {
    double v = count == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(k) / (count - 1));
    if (round_ints) v = std::round(v);
    out.push_back(v);
  }
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int cmd_train(const std::string& config_path, std::uint64_t seed_override, bool has_seed,
              const std::string& out_dir) {
  const auto kv = read_kv_config(config_path);
  // presets fill in regime-specific defaults; explicit keys always win
  std::string preset = "custom";
  if (auto it = kv.find("preset"); it != kv.end()) preset = it->second;
  const int n = static_cast<int>(kv_num(kv, "n", 80));
  const int d = static_cast<int>(kv_num(kv, "d", 200));
  const int m = static_cast<int>(kv_num(kv, "m", 40));
  const double sigma_p = kv_num(kv, "sigma_p", 1.0);
  const double flip_p = kv_num(kv, "flip_p", 0.1);
  const double cos_theta = kv_num(kv, "cos_theta", preset == "classic_xor" ? 0.3 : 0.8);
  const double mu_norm = kv_num(kv, "mu_norm", 2.0);
  const double sigma_0 =
      kv_num(kv, "sigma_0", preset == "small_angle" ? n * m / (sigma_p * d) : 0.01);
  const double eta = kv_num(kv, "eta", 1e-3);
  // classic_xor studies the per-step bounds at the literal mean-loss rate
  const bool sum_loss = kv_num(kv, "sum_loss", preset == "classic_xor" ? 0.0 : 1.0) != 0.0;
  const int epochs = static_cast<int>(kv_num(kv, "epochs", 200));
  const int record_every = static_cast<int>(kv_num(kv, "record_every", 10));
  const int n_test = static_cast<int>(kv_num(kv, "n_test", 1000));
  const bool early_stop = kv_num(kv, "early_stop", 0.0) != 0.0;
  const double target_eps = kv_num(kv, "target_eps", 1e-2);
  std::uint64_t seed = static_cast<std::uint64_t>(kv_num(kv, "seed", 1));
  if (has_seed) seed = seed_override;

  fs::create_directories(out_dir);
  Rng rng(seed);
  Rng data_rng = rng.split(1);
  Rng init_rng = rng.split(2);
  Rng test_rng = rng.split(3);
  const XorBasis basis = build_basis(d, mu_norm, cos_theta, data_rng);
  const Dataset ds = sample_dataset(basis, {n, sigma_p, flip_p, seed}, data_rng);
  CnnWeights w = init_weights(m, d, sigma_0, init_rng);
  DecompTracker tracker(basis, ds, w);

  TrainConfig tc;
  tc.eta = sum_loss ? eta * n : eta;
  tc.epochs = epochs;
  tc.record_every = record_every;
  tc.early_stop = early_stop;
  tc.target_eps = target_eps;

  std::ofstream trace_csv(out_dir + "/trace.csv");
  trace_csv << "step,loss,min_margin,lossderiv_ratio\n";
  trace_csv.precision(12);
  int last_written = -1;
  const StepHook trace_hook = [&](const StepInfo& info) {
    if (!info.recorded || info.t == last_written) return;
    last_written = info.t;
    trace_csv << info.t << ',' << info.batch.loss << ',' << info.batch.margins.minCoeff() << ','
              << info.batch.lossderiv.minCoeff() / info.batch.lossderiv.maxCoeff() << '\n';
    save_checkpoint(info.weights, static_cast<std::uint64_t>(info.t),
                    out_dir + "/checkpoint_" + std::to_string(info.t) + ".bin");
  };
  const TrainTrace trace = train(ds, std::move(w), tc, {tracker.hook(), trace_hook});
  trace_csv.close();
  save_checkpoint(trace.weights_final, static_cast<std::uint64_t>(trace.steps_run),
                  out_dir + "/checkpoint_final.bin");
  tracker.write_csv(out_dir + "/decomp.csv");

  const ErrorEstimate err =
      test_error_mc(trace.weights_final, basis, sigma_p, flip_p, n_test, test_rng);
  const MonotonicityReport mono = tracker.activation_monotonicity();
  const SignPersistenceReport sign = tracker.sign_persistence();
  json manifest{{"format", "xorlab-run-manifest"},
                {"version", 1},
                {"code_version", "xorlab 0.1.0"},
                {"preset", preset},
                {"seed", seed},
                {"n", n},
                {"d", d},
                {"m", m},
                {"sigma_p", sigma_p},
                {"flip_p", flip_p},
                {"cos_theta", cos_theta},
                {"mu_norm", mu_norm},
                {"sigma_0", sigma_0},
                {"eta", eta},
                {"sum_loss", sum_loss},
                {"trainer_eta", tc.eta},
                {"epochs", epochs},
                {"record_every", record_every},
                {"early_stop", early_stop},
                {"target_eps", target_eps},
                {"steps_run", trace.steps_run},
                {"final_loss", trace.last().loss},
                {"test_accuracy", err.accuracy()},
                {"test_stderr", err.stderr_},
                {"bayes_accuracy", 1.0 - bayes_rate(flip_p)},
                {"activation_containment", mono.contained},
                {"sign_flips", sign.flips}};
  std::ofstream(out_dir + "/manifest.json") << manifest.dump(2) << '\n';
  std::cout << "run complete: final loss " << trace.last().loss << ", test accuracy "
            << err.accuracy() << "\nartifacts in " << out_dir << std::endl;
  return 0;
}

int cmd_heatmap_run(GridMode mode, int fixed_d, int fixed_n, const std::string& n_range,
                    const std::string& d_range, const std::string& ratio_range, int repeats,
                    std::uint64_t seed, int epochs, const std::string& out_dir, bool converge) {
  GridSpec spec;
  spec.mode = mode;
  spec.fixed_d = fixed_d;
  spec.fixed_n = fixed_n;
  spec.axis1 = mode == GridMode::fix_n_vary_d ? parse_range(d_range, true)
                                              : parse_range(n_range, true);
  spec.axis2 = parse_range(ratio_range, false);
  spec.repeats = repeats;
  spec.base_seed = seed;
  spec.epochs = epochs;
  spec.converge = converge;
  fs::create_directories(out_dir);
  const GridResult grid = run_grid(spec);
  emit_csv(grid, out_dir + "/grid.csv");
  emit_svg(grid, out_dir + "/grid.svg");
  write_manifest(spec, out_dir + "/manifest.json");
  int failed = 0;
  for (const auto& c : grid.cells)
    if (c.failed) {
      ++failed;
      std::cerr << "cell failed: " << c.error << std::endl;
    }
  std::cout << "grid complete: " << grid.cells.size() - failed << "/" << grid.cells.size()
            << " cells, artifacts in " << out_dir << std::endl;
  return failed == 0 ? 0 : 2;
}

int cmd_heatmap_truncate(const std::string& in_csv, double threshold, const std::string& out_svg) {
  const GridResult grid = parse_csv(in_csv);
  emit_svg(grid, out_svg, threshold);
  const BoundaryFit fit = fit_boundary_slope(grid, threshold);
  if (fit.ok)
    std::cout << "boundary slope in (log axis2, log axis1): " << fit.slope << " from "
              << fit.n_points << " crossings" << std::endl;
  else
    std::cout << "no usable boundary crossing found" << std::endl;
  std::cout << "wrote " << out_svg << std::endl;
  return 0;
}

json check(const std::string& name, double observed, double threshold, bool pass) {
  return json{{"check", name}, {"observed", observed}, {"threshold", threshold}, {"pass", pass}};
}

int cmd_lemmas(const std::string& suite, const std::string& config_path,
               const std::string& report_path) {
  std::map<std::string, std::string> kv;
  if (!config_path.empty()) kv = read_kv_config(config_path);
  const double delta = kv_num(kv, "delta", 0.05);
  json checks = json::array();

  if (suite == "sandwich" || suite == "all") {
    long violations = 0;
    double worst_upper = 0.0;
    for (double b : {0.0, 0.5, 1.0, 2.0})
      for (double c : {0.1, 0.5, 1.0})
        for (double a0 : {-1.0, 0.0, 1.0}) {
          const SandwichReport rep = sandwich_check({b, c, a0}, 10000);
          violations += rep.violations;
          worst_upper = std::max(worst_upper, rep.max_upper_slack);
        }
    checks.push_back(check("sandwich_grid_violations", static_cast<double>(violations), 0, violations == 0));
  }
  if (suite == "virtual" || suite == "all") {
    const int n = static_cast<int>(kv_num(kv, "n", 20));
    const int m = static_cast<int>(kv_num(kv, "m", 10));
    const double eta = kv_num(kv, "eta", 0.02);
    std::vector<double> divs;
    for (int d : {500, 2000, 8000}) {
      Rng rng(cell_seed(static_cast<std::uint64_t>(kv_num(kv, "seed", 7)), 5, d, 0));
      Rng data_rng = rng.split(1), init_rng = rng.split(2);
      const XorBasis basis = build_basis(d, 2.0, 0.8, data_rng);
      const Dataset ds = sample_dataset(basis, {n, 1.0, 0.1, rng.key()}, data_rng);
      CnnWeights w = init_weights(m, d, n * m / static_cast<double>(d), init_rng);
      const VirtualState vs = make_virtual_state(ds, w, eta);
      std::vector<Vector> actual;
      TrainConfig tc;
      tc.eta = eta;
      tc.epochs = 400;
      tc.record_every = 1;
      const StepHook capture = [&](const StepInfo& info) { actual.push_back(info.batch.lossderiv); };
      train(ds, std::move(w), tc, {capture});
      divs.push_back(virtual_vs_actual(vs, actual).max_abs_diff);
    }
    checks.push_back(check("virtual_divergence_decreasing", divs.back(), divs.front(),
                           divs[0] > divs[1] && divs[1] > divs[2]));
  }
  if (suite == "concentration" || suite == "all") {
    const int n = static_cast<int>(kv_num(kv, "n", 400));
    const int d = static_cast<int>(kv_num(kv, "d", 1000));
    const int m = static_cast<int>(kv_num(kv, "m", 40));
    int failures = 0;
    for (int trial = 0; trial < 20; ++trial) {
      Rng rng(1000 + trial);
      Rng data_rng = rng.split(1), init_rng = rng.split(2);
      const XorBasis basis = build_basis(d, 2.0, 0.8, data_rng);
      const Dataset ds = sample_dataset(basis, {n, 1.0, 0.1, rng.key()}, data_rng);
      const CnnWeights w = init_weights(m, d, 0.01, init_rng);
      bool ok = true;
      const double band = std::sqrt(m * std::log(2.0 * n / delta) / 2.0);
      for (int i = 0; i < n; ++i) {
        const auto xi = ds.noise_patch(i);
        const double sq = xi.squaredNorm();
        if (sq < d / 2.0 || sq > 1.5 * d) ok = false;
        const Matrix& wm = ds.y[i] > 0 ? w.w_pos : w.w_neg;
        int cnt = 0;
        for (int r = 0; r < m; ++r) cnt += wm.row(r).dot(xi) > 0;
        if (std::abs(cnt - m / 2.0) > band) ok = false;
      }
      failures += !ok;
    }
    checks.push_back(check("concentration_20_trials_failures", failures, 1, failures <= 1));
  }
  if (suite == "ratios" || suite == "all") {
    const int n = static_cast<int>(kv_num(kv, "n", 400));
    Rng rng(11);
    Rng data_rng = rng.split(1), init_rng = rng.split(2);
    const XorBasis basis = build_basis(600, 2.0, 0.8, data_rng);
    const Dataset ds = sample_dataset(basis, {n, 1.0, 0.1, 11}, data_rng);
    CnnWeights w = init_weights(10, 600, 0.05, init_rng);
    std::vector<int> splus, sminus;
    for (int i = 0; i < n; ++i) {
      if (ds.tag[i] == SignalTag::plus_u && ds.y[i] == 1) splus.push_back(i);
      if (ds.tag[i] == SignalTag::plus_v && ds.y[i] == -1) sminus.push_back(i);
    }
    double worst = 0.0;
    TrainConfig tc;
    tc.eta = 0.05;
    tc.epochs = 60;
    tc.record_every = 1;
    const StepHook monitor = [&](const StepInfo& info) {
      worst = std::max(worst,
                       sum_ratio_monitor(info.batch.lossderiv, splus, sminus, 10, delta).statistic);
    };
    train(ds, std::move(w), tc, {monitor});
    const double c0 = (1 - 0.1) / 4.0;
    const double bound =
        4.0 * c0 * (1.0 / std::sqrt(2.0)) / (c0 * c0) * std::sqrt(std::log(8.0 * n / delta) / n);
    checks.push_back(check("sum_ratio_worst_statistic", worst, bound, worst <= bound));
  }
  if (suite == "growth" || suite == "all") {
    Rng rng(13);
    Rng data_rng = rng.split(1), init_rng = rng.split(2);
    const int n = 20, d = 50, m = 5;
    const double mu_norm = std::pow(4.0 * d / n, 0.25), eta = 0.05;
    const XorBasis basis = build_basis(d, mu_norm, 0.3, data_rng);
    const Dataset ds = sample_dataset(basis, {n, 1.0, 0.1, 13}, data_rng);
    CnnWeights w = init_weights(m, d, 0.01, init_rng);
    std::vector<int> steps;
    std::vector<double> mean_u;
    std::vector<Vector> cross_u;
    Vector sign0;
    TrainConfig tc;
    tc.eta = eta;
    tc.epochs = 6000;
    tc.record_every = 20;
    const StepHook capture = [&](const StepInfo& info) {
      if (!info.recorded) return;
      const Vector pu = info.weights.w_pos * basis.u;
      if (steps.empty()) sign0 = pu.array().sign();
      double su = 0.0;
      int cnt = 0;
      for (int r = 0; r < m; ++r)
        if (sign0(r) > 0) { su += pu(r); ++cnt; }
      steps.push_back(info.t);
      mean_u.push_back(cnt ? su / cnt : 0.0);
      cross_u.push_back(info.weights.w_neg * basis.u);
    };
    train(ds, std::move(w), tc, {capture});
    const GrowthFit fit = growth_fit(steps, mean_u, eta, 1.0, d, n, m,
                                     n * mu_norm * mu_norm / d,
                                     static_cast<int>(n * m / (eta * d)));
    checks.push_back(check("growth_log_fit_r2", fit.r2, 0.9, !fit.degenerate && fit.r2 >= 0.9));
    checks.push_back(check("growth_slope_ratio", fit.slope_ratio, 10.0,
                           fit.slope_ratio >= 0.1 && fit.slope_ratio <= 10.0));
    const CrossSignalBound cb =
        check_cross_signal_bound(cross_u, m, 0.01, mu_norm, eta, delta);
    checks.push_back(check("cross_signal_band_excess", cb.worst_excess, 0.0, cb.ok));
  }

  bool all_pass = true;
  for (const auto& c : checks) all_pass = all_pass && c.at("pass").get<bool>();
  json report{{"suite", suite}, {"delta", delta}, {"checks", checks}, {"pass", all_pass}};
  if (!report_path.empty()) {
    std::ofstream(report_path) << report.dump(2) << '\n';
    std::cout << "wrote " << report_path << std::endl;
  }
  std::cout << report.dump(2) << std::endl;
  return all_pass ? 0 : 2;
}

int cmd_sample(const std::string& config_path, const std::string& out_path) {
  const auto kv = read_kv_config(config_path);
  Rng rng(static_cast<std::uint64_t>(kv_num(kv, "seed", 1)));
  Rng data_rng = rng.split(1);
  const XorBasis basis =
      build_basis(static_cast<int>(kv_num(kv, "d", 200)), kv_num(kv, "mu_norm", 2.0),
                  kv_num(kv, "cos_theta", 0.8), data_rng);
  const Dataset ds = sample_dataset(
      basis,
      {static_cast<int>(kv_num(kv, "n", 80)), kv_num(kv, "sigma_p", 1.0),
       kv_num(kv, "flip_p", 0.1), static_cast<std::uint64_t>(kv_num(kv, "seed", 1))},
      data_rng);
  write_dataset_jsonl(ds, basis, out_path);
  std::cout << "wrote " << ds.n() << " points to " << out_path << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xorlab: two-patch XOR data, two-layer ReLU CNN training dynamics, "
               "and phase-transition sweeps"};
  app.require_subcommand(1);

  // train
  std::string train_config, train_out = "run_out";
  std::uint64_t train_seed = 0;
  bool train_has_seed = false;
  auto* train_cmd = app.add_subcommand("train", "train one run from a config file");
  train_cmd->add_option("--config", train_config, "flat key=value config")->required();
  auto* seed_opt = train_cmd->add_option("--seed", train_seed, "override the config seed");
  train_cmd->add_option("--out", train_out, "output directory");

  // heatmap
  std::string hm_mode = "fix_d_vary_n", n_range = "4:598:16", d_range = "10:406:16",
              ratio_range = "0.1:10:16", hm_out = "grid_out", hm_in_csv, trunc_out = "trunc.svg";
  int hm_d = 200, hm_n = 80, hm_repeats = 1, hm_epochs = 200;
  std::uint64_t hm_seed = 7;
  double truncate_at = 0.0;
  bool hm_converge = false;
  auto* hm_cmd = app.add_subcommand("heatmap", "run a sweep grid, or truncate an existing one");
  hm_cmd->add_option("--mode", hm_mode, "fix_d_vary_n | fix_n_vary_d");
  hm_cmd->add_option("--d", hm_d, "fixed dimension (fix_d_vary_n)");
  hm_cmd->add_option("--n", hm_n, "fixed sample count (fix_n_vary_d)");
  hm_cmd->add_option("--n-range", n_range, "lo:hi:count, log-spaced");
  hm_cmd->add_option("--d-range", d_range, "lo:hi:count, log-spaced");
  hm_cmd->add_option("--ratio-range", ratio_range, "axis2 range lo:hi:count");
  hm_cmd->add_option("--repeats", hm_repeats, "per-cell repeats");
  hm_cmd->add_option("--epochs", hm_epochs, "training epochs per cell");
  hm_cmd->add_option("--seed", hm_seed, "base seed");
  hm_cmd->add_option("--out", hm_out, "output directory (run) or svg path (truncate)");
  hm_cmd->add_option("--truncate", truncate_at, "threshold: truncate --in grid instead of running");
  hm_cmd->add_option("--in", hm_in_csv, "existing grid.csv for --truncate");
  hm_cmd->add_flag("--converge", hm_converge, "early-stop cells at the loss target");

  // lemmas
  std::string lemmas_suite = "all", lemmas_config, lemmas_report;
  auto* lm_cmd = app.add_subcommand("lemmas", "run a lemma verification suite");
  lm_cmd->add_option("--suite", lemmas_suite, "sandwich|virtual|concentration|ratios|growth|all");
  lm_cmd->add_option("--config", lemmas_config, "flat key=value config");
  lm_cmd->add_option("--report", lemmas_report, "json report path");

  // verify
  auto* vf_cmd = app.add_subcommand("verify", "run the full invariant and lemma suite");
  bool verify_all = false;
  vf_cmd->add_flag("--all", verify_all, "run every suite");

  // sample
  std::string sample_config, sample_out = "dataset.jsonl";
  auto* sm_cmd = app.add_subcommand("sample", "export a dataset as json-lines");
  sm_cmd->add_option("--config", sample_config, "flat key=value config")->required();
  sm_cmd->add_option("--out", sample_out, "output path");

  CLI11_PARSE(app, argc, argv);
  train_has_seed = seed_opt->count() > 0;

  try {
    if (*train_cmd) return cmd_train(train_config, train_seed, train_has_seed, train_out);
    if (*hm_cmd) {
      if (truncate_at > 0.0) {
        if (hm_in_csv.empty()) throw std::runtime_error("--truncate needs --in grid.csv");
        return cmd_heatmap_truncate(hm_in_csv, truncate_at, hm_out);
      }
      return cmd_heatmap_run(grid_mode_from_name(hm_mode), hm_d, hm_n, n_range, d_range,
                             ratio_range, hm_repeats, hm_seed, hm_epochs, hm_out, hm_converge);
    }
    if (*lm_cmd) return cmd_lemmas(lemmas_suite, lemmas_config, lemmas_report);
    if (*vf_cmd) return cmd_lemmas("all", "", "");
    if (*sm_cmd) return cmd_sample(sample_config, sample_out);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << std::endl;
    return 1;
  }
  return 0;
}
