#include "xorlab/theory.hpp"

#include <cmath>
#include <stdexcept>

namespace xorlab {

double iterate_discrete(const ComparisonSeq& seq, long t) {
  if (t < 0) throw std::invalid_argument("iterate_discrete: t must be >= 0");
  double a = seq.a0;
  for (long k = 0; k < t; ++k) a += seq.c / (1.0 + seq.b * std::exp(a));
  return a;
}

double solve_continuous(const ComparisonSeq& seq, double t) {
  if (t < 0) throw std::invalid_argument("solve_continuous: t must be >= 0");
  if (seq.b == 0.0) return seq.a0 + seq.c * t;
  const double target = seq.c * t + seq.a0 + seq.b * std::exp(seq.a0);
  double lo = seq.a0, hi = seq.a0 + seq.c * t;
  auto g = [&](double x) { return x + seq.b * std::exp(x) - target; };
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double gx = g(x);
    // g' >= 1, so |x - root| <= |g(x)|; the target-relative floor absorbs
    // evaluation noise when the target is large
    if (std::abs(gx) <= std::max(1e-12, 4e-16 * std::abs(target))) return x;
    if (gx > 0.0) hi = x; else lo = x;
    if (hi - lo <= 1e-13 * (1.0 + std::abs(hi))) return 0.5 * (lo + hi);
    // Newton crawls when the exponential dominates; force a bisection
    // step every other iteration so the bracket provably halves
    double next;
    if (it % 2 == 1) {
      next = 0.5 * (lo + hi);
    } else {
      const double gp = 1.0 + seq.b * std::exp(x);
      next = x - gx / gp;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - x) <= 1e-15 * (1.0 + std::abs(x))) return next;
    }
    x = next;
  }
  throw std::runtime_error("solve_continuous: no convergence");
}

SandwichReport sandwich_check(const ComparisonSeq& seq, long t_max, double tol) {
  SandwichReport rep;
  const double head = seq.c / (1.0 + seq.b * std::exp(seq.a0));
  double a = seq.a0;
  for (long t = 0; t <= t_max; ++t) {
    const double x = solve_continuous(seq, static_cast<double>(t));
    const double lower_slack = x - a;
    const double upper_slack = a - x - head;
    rep.max_lower_slack = std::max(rep.max_lower_slack, lower_slack);
    rep.max_upper_slack = std::max(rep.max_upper_slack, upper_slack);
    if (lower_slack > tol || upper_slack > tol) ++rep.violations;
    a += seq.c / (1.0 + seq.b * std::exp(a));
  }
  return rep;
}

ComparisonPreset classic_preset(double eta, double sigma_p, int d, int n, int m, double kappa) {
  ComparisonPreset p;
  const double sp2d = sigma_p * sigma_p * d;
  p.upper = {std::exp(-kappa), 2.0 * eta * sp2d / (n * m), 0.0};
  p.lower = {std::exp(kappa), eta * sp2d / (3.0 * n * m), 0.0};
  return p;
}

ComparisonPreset small_angle_preset(double eta, double sigma_p, int d, int n, int m, double kappa,
                                    double delta) {
  ComparisonPreset p;
  const double sp2d = sigma_p * sigma_p * d;
  const double width = std::sqrt(2.0 * std::log(6.0 * n / delta) / m);
  const double dim = 2.0 * std::sqrt(std::log(4.0 * n / delta) / d);
  const double base = eta * sp2d / (2.0 * n * m);
  p.upper = {std::exp(-kappa), base * (1.0 + width) * (1.0 + dim), 0.0};
  p.lower = {std::exp(kappa), base * (1.0 - width) * (1.0 - dim), 0.0};
  return p;
}

VirtualState make_virtual_state(const Dataset& ds, const CnnWeights& init, double eta) {
  const int n = ds.n();
  VirtualState s;
  s.A = Vector::Zero(n);
  s.ell_tilde = Vector::Constant(n, -0.5);
  s.drivers.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto xi = ds.noise_patch(i);
    const Matrix& w = ds.y[i] > 0 ? init.w_pos : init.w_neg;
    int s0 = 0;
    const Vector acts = w * xi.transpose();
    for (int r = 0; r < init.m; ++r)
      if (acts(r) > 0.0) ++s0;
    s.drivers(i) =
        eta / (static_cast<double>(n) * init.m * init.m) * s0 * xi.squaredNorm();
  }
  return s;
}

void virtual_step(VirtualState& s) {
  for (Eigen::Index i = 0; i < s.A.size(); ++i) {
    s.A(i) -= s.drivers(i) * s.ell_tilde(i);
    s.ell_tilde(i) = -1.0 / (1.0 + std::exp(s.A(i)));
  }
  ++s.t;
}

DivergenceStats virtual_vs_actual(const VirtualState& initial, const std::vector<Vector>& actual) {
  if (actual.empty()) throw std::invalid_argument("virtual_vs_actual: empty history");
  VirtualState s = initial;
  DivergenceStats out;
  for (const Vector& lp : actual) {
    if (lp.size() != s.A.size())
      throw std::invalid_argument("virtual_vs_actual: misaligned sample counts");
    for (Eigen::Index i = 0; i < lp.size(); ++i) {
      out.max_abs_diff = std::max(out.max_abs_diff, std::abs(s.ell_tilde(i) - lp(i)));
      const double r1 = lp(i) / s.ell_tilde(i);
      const double r2 = s.ell_tilde(i) / lp(i);
      out.max_ratio_minus_1 = std::max({out.max_ratio_minus_1, r1 - 1.0, r2 - 1.0});
    }
    virtual_step(s);
  }
  return out;
}

double kappa(int n, double d, int m, double delta, double sigma_0, double sigma_p, double snr,
             double t_star, KappaRegime regime) {
  if (n < 1 || d < 1 || m < 1) throw std::invalid_argument("kappa: bad sizes");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("kappa: delta in (0,1)");
  if (!(t_star > 1.0)) throw std::invalid_argument("kappa: t_star must exceed 1");
  if (sigma_0 < 0.0 || sigma_p <= 0.0 || snr < 0.0)
    throw std::invalid_argument("kappa: negative scale parameter");
  const double logt = std::log(t_star);
  const double t1 = 56.0 * std::sqrt(std::log(4.0 * n * static_cast<double>(n) / delta) / d) * n * logt;
  const double t2 = 10.0 * std::sqrt(std::log(12.0 * m * static_cast<double>(n) / delta)) *
                    sigma_0 * sigma_p * std::sqrt(d);
  const double coef = regime == KappaRegime::classic ? 64.0 : 16.0;
  const double t3 = coef * n * snr * snr * logt;
  return t1 + t2 + t3;
}

double gap_bound(int n, int m, double delta) {
  if (n < 1 || m < 1) throw std::invalid_argument("gap_bound: bad sizes");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("gap_bound: delta in (0,1)");
  return 20.0 * std::sqrt(std::log(2.0 * n / delta) / m) * std::sqrt(std::log(4.0 / delta));
}

SumRatioStat sum_ratio_monitor(const Vector& lossderivs, const std::vector<int>& s_plus,
                               const std::vector<int>& s_minus, int m, double delta) {
  if (s_minus.empty()) throw std::invalid_argument("sum_ratio_monitor: empty S-");
  for (int i : s_plus)
    for (int k : s_minus)
      if (i == k) throw std::invalid_argument("sum_ratio_monitor: S+ and S- intersect");
  double sp = 0.0, sm = 0.0;
  for (int i : s_plus) sp += lossderivs(i);
  for (int i : s_minus) sm += lossderivs(i);
  SumRatioStat st;
  st.ratio = sp / sm;
  st.count_ratio = static_cast<double>(s_plus.size()) / s_minus.size();
  st.statistic = std::abs(st.ratio - st.count_ratio);
  const double gap = gap_bound(static_cast<int>(lossderivs.size()), m, delta);
  const double szp = static_cast<double>(s_plus.size());
  const double szm = static_cast<double>(s_minus.size());
  st.gap_rhs = 2.0 * gap * (szm * std::sqrt(szp) + szm * std::sqrt(szp)) / (szm * szm);
  return st;
}

CrossSignalBound check_cross_signal_bound(const std::vector<Vector>& projections, int m,
                                          double sigma_0, double mu_norm, double eta,
                                          double delta) {
  CrossSignalBound out;
  out.band = 2.0 * std::sqrt(std::log(12.0 * m / delta)) * sigma_0 * mu_norm +
             eta * mu_norm * mu_norm / m;
  out.worst_excess = -out.band;
  for (const Vector& p : projections) {
    const double excess = p.cwiseAbs().maxCoeff() - out.band;
    out.worst_excess = std::max(out.worst_excess, excess);
  }
  out.ok = out.worst_excess <= 0.0;
  return out;
}

GrowthFit growth_fit(const std::vector<int>& steps, const std::vector<double>& values,
                     double eta, double sigma_p, int d, int n, int m, double predicted_scale,
                     int burn_in) {
  if (steps.size() != values.size() || steps.size() < 10)
    throw std::invalid_argument("growth_fit: need >= 10 recorded steps");
  std::vector<double> xs, ys;
  const double rate = eta * sigma_p * sigma_p * d / (12.0 * n * m);
  for (std::size_t k = 0; k < steps.size(); ++k) {
    if (steps[k] < burn_in || steps[k] < 1) continue;
    xs.push_back(std::log(rate * (steps[k] - 1) + 2.0 / 3.0));
    ys.push_back(values[k]);
  }
  GrowthFit fit;
  if (xs.size() < 3) { fit.degenerate = true; return fit; }
  const std::size_t nn = xs.size();
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < nn; ++k) { mx += xs[k]; my += ys[k]; }
  mx /= nn; my /= nn;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < nn; ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  if (syy < 1e-24 || sxx < 1e-24) { fit.degenerate = true; return fit; }
  fit.slope = sxy / sxx;
  fit.r2 = (sxy * sxy) / (sxx * syy);
  fit.slope_ratio = predicted_scale != 0.0 ? fit.slope / predicted_scale : 0.0;
  return fit;
}

}  // namespace xorlab
