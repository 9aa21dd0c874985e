#include "xorlab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace xorlab {

void gd_step(CnnWeights& w, const Dataset& ds, double eta, int step_index) {
  if (!(eta >= 0.0)) throw std::invalid_argument("gd_step: eta must be >= 0");
  if (eta == 0.0) return;
  const CnnGradient g = full_gradient(w, ds);
  if (!g.g_pos.allFinite() || !g.g_neg.allFinite())
    throw std::runtime_error("gd_step: non-finite gradient at step " + std::to_string(step_index));
  w.w_pos -= eta * g.g_pos;
  w.w_neg -= eta * g.g_neg;
}

namespace {

RecordedStep make_record(int t, const BatchForward& bf) {
  RecordedStep r;
  r.t = t;
  r.loss = bf.loss;
  Vector sorted = bf.margins;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  r.min_margin = sorted(0);
  r.max_margin = sorted(sorted.size() - 1);
  r.median_margin = sorted(sorted.size() / 2);
  // l' values are negative; the extreme ratio is min/max
  r.lossderiv_ratio = bf.lossderiv.minCoeff() / bf.lossderiv.maxCoeff();
  r.lossderiv = bf.lossderiv;
  return r;
}

}  // namespace

TrainTrace train(const Dataset& ds, CnnWeights weights, const TrainConfig& cfg,
                 const std::vector<StepHook>& hooks) {
  if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (!(cfg.eta > 0.0)) throw std::invalid_argument("train: eta must be positive");
  if (cfg.record_every < 1) throw std::invalid_argument("train: record_every must be >= 1");

  TrainTrace trace;
  int t = 0;
  for (; t < cfg.epochs; ++t) {
    const BatchForward bf = forward_batch(weights, ds);
    const bool recorded = (t % cfg.record_every == 0);
    if (recorded) {
      trace.records.push_back(make_record(t, bf));
      if (cfg.keep_snapshots) trace.snapshots.emplace_back(t, weights);
    }
    for (const auto& h : hooks) h(StepInfo{t, recorded, false, weights, bf, cfg.eta});
    if (cfg.early_stop && bf.loss <= cfg.target_eps) {
      trace.early_stopped = true;
      break;
    }
    const CnnGradient g = gradient_from_forward(weights, ds, bf);
    if (!g.g_pos.allFinite() || !g.g_neg.allFinite())
      throw std::runtime_error("train: non-finite gradient at step " + std::to_string(t));
    weights.w_pos -= cfg.eta * g.g_pos;
    weights.w_neg -= cfg.eta * g.g_neg;
  }
  // final state (either the early-stop iterate or the one after the last update)
  const BatchForward bf = forward_batch(weights, ds);
  if (trace.records.empty() || trace.records.back().t != t)
    trace.records.push_back(make_record(t, bf));
  if (cfg.keep_snapshots &&
      (trace.snapshots.empty() || trace.snapshots.back().first != t))
    trace.snapshots.emplace_back(t, weights);
  for (const auto& h : hooks) h(StepInfo{t, true, true, weights, bf, cfg.eta});
  trace.steps_run = t;
  trace.weights_final = std::move(weights);
  return trace;
}

namespace {

RegimeClause clause(std::string name, double observed, double bound, bool le) {
  // le: observed <= bound, otherwise observed >= bound
  return {std::move(name), observed, bound, le ? observed <= bound : observed >= bound};
}

}  // namespace

RegimeReport classify_regime(int n, int d, int m, double mu_norm, double sigma_p, double p,
                             double eta, double sigma_0, double cos_theta, double eps,
                             double delta) {
  if (n < 1 || d < 2 || m < 1) throw std::invalid_argument("classify_regime: bad sizes");
  if (!(mu_norm > 0 && sigma_p > 0 && eta > 0 && sigma_0 > 0 && eps > 0))
    throw std::invalid_argument("classify_regime: parameters must be positive");
  if (!(p >= 0 && p < 0.5)) throw std::invalid_argument("classify_regime: p must lie in [0, 0.5)");
  if (!(cos_theta >= 0 && cos_theta < 1))
    throw std::invalid_argument("classify_regime: cos_theta must lie in [0, 1)");
  if (!(delta > 0 && delta < 1)) throw std::invalid_argument("classify_regime: delta in (0,1)");

  const double mu2 = mu_norm * mu_norm;
  const double mu4 = mu2 * mu2;
  const double sp2 = sigma_p * sigma_p;
  const double sp4 = sp2 * sp2;
  const double dn = static_cast<double>(d);

  RegimeReport rep;
  // classic regime condition set, all constants and polylogs set to 1
  rep.classic_clauses.push_back(clause(
      "d >= max(n^2, n |mu|^2 / sigma_p^2)", dn,
      std::max(static_cast<double>(n) * n, n * mu2 / sp2), false));
  rep.classic_clauses.push_back(clause("m >= log(n/delta)", m, std::log(n / delta), false));
  rep.classic_clauses.push_back(clause("n >= log(m/delta)", n, std::log(m / delta), false));
  rep.classic_clauses.push_back(clause(
      "sigma_0 <= min(sqrt(n)/(sigma_p d), n |mu| / (sigma_p^2 d))", sigma_0,
      std::min(std::sqrt(static_cast<double>(n)) / (sigma_p * dn), n * mu_norm / (sp2 * dn)),
      true));
  rep.classic_clauses.push_back(clause("p <= 1", p, 1.0, true));
  rep.classic_clauses.push_back(clause(
      "eta <= 1 / max(sigma_p^2 d^{3/2} / (n^2 sqrt(m)), sigma_p^2 d / (n m))", eta,
      1.0 / std::max(sp2 * std::pow(dn, 1.5) / (static_cast<double>(n) * n * std::sqrt(m)),
                     sp2 * dn / (static_cast<double>(n) * m)),
      true));
  rep.classic_clauses.push_back(clause("cos(theta) < 1/2", cos_theta, 0.5, true));

  // asymptotically challenging regime condition set
  rep.challenging_clauses.push_back(clause(
      "d >= n^3 m^3 |mu|^2 / sigma_p^2", dn,
      std::pow(static_cast<double>(n), 3) * std::pow(static_cast<double>(m), 3) * mu2 / sp2,
      false));
  rep.challenging_clauses.push_back(
      clause("m >= log(n d)", m, std::log(static_cast<double>(n) * d), false));
  rep.challenging_clauses.push_back(
      clause("n >= log(m d)", n, std::log(static_cast<double>(m) * d), false));
  rep.challenging_clauses.push_back(
      clause("|mu| (1 - cos) >= sigma_p m", mu_norm * (1.0 - cos_theta), sigma_p * m, false));
  rep.challenging_clauses.push_back(clause("p <= 1", p, 1.0, true));
  rep.challenging_clauses.push_back(clause(
      "eta <= 1 / max(sigma_p^2 d^{3/2} / (n^2 m), sigma_p^2 d / n)", eta,
      1.0 / std::max(sp2 * std::pow(dn, 1.5) / (static_cast<double>(n) * n * m), sp2 * dn / n),
      true));
  rep.challenging_clauses.push_back(
      clause("1 - cos(theta) >= 1/sqrt(n)", 1.0 - cos_theta,
             1.0 / std::sqrt(static_cast<double>(n)), false));

  rep.benign_value_classic = n * mu4 / (sp4 * dn);
  rep.benign_value_challenging =
      mu4 * (1.0 - cos_theta) * (1.0 - cos_theta) / (static_cast<double>(m) * m * sp4 * dn);
  rep.benign_side_classic = rep.benign_value_classic >= 1.0;
  rep.benign_side_challenging = rep.benign_value_challenging >= 1.0;
  return rep;
}

}  // namespace xorlab
