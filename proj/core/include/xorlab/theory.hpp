#pragma once

#include <vector>

#include "xorlab/cnn_model.hpp"

namespace xorlab {

// Scalar dynamical system a_{t+1} = a_t + c / (1 + b e^{a_t}) and its
// continuous envelope x_t solving x + b e^x = c t + a0 + b e^{a0}.
struct ComparisonSeq {
  double b = 0.0;   // >= 0
  double c = 0.0;   // in [0, 1]
  double a0 = 0.0;
};

double iterate_discrete(const ComparisonSeq& seq, long t);

// Root of the strictly increasing map g(x) = x + b e^x on [a0, a0 + c t],
// bisection-safeguarded Newton to 1e-12 absolute.
double solve_continuous(const ComparisonSeq& seq, double t);

struct SandwichReport {
  long violations = 0;
  double max_lower_slack = 0.0;  // max over t of x_t - a_t (should be <= 0)
  double max_upper_slack = 0.0;  // max over t of a_t - x_t - c/(1 + b e^{a0})
};

// Checks x_t <= a_t <= c/(1+b e^{a0}) + x_t at every integer t <= t_max.
SandwichReport sandwich_check(const ComparisonSeq& seq, long t_max, double tol = 1e-9);

// Comparison constants used as presets: classic regime from the scale
// analysis, small-angle from the per-sample activation counts.
struct ComparisonPreset {
  ComparisonSeq upper;  // (b_bar = e^-kappa, c_bar)
  ComparisonSeq lower;  // (b_under = e^kappa, c_under)
};
ComparisonPreset classic_preset(double eta, double sigma_p, int d, int n, int m, double kappa);
ComparisonPreset small_angle_preset(double eta, double sigma_p, int d, int n, int m, double kappa,
                                    double delta);

// Per-sample surrogate dynamics driven only by the initial activation
// counts and noise norms; the A_i evolve independently of each other.
struct VirtualState {
  int t = 0;
  Vector A;          // nonnegative, nondecreasing; A_i^(0) = 0
  Vector ell_tilde;  // -1/(1+exp(A_i)), in (-1, 0)
  Vector drivers;    // eta/(n m^2) |S_i^(0)| |xi_i|^2
};

VirtualState make_virtual_state(const Dataset& ds, const CnnWeights& init, double eta);
void virtual_step(VirtualState& s);

struct DivergenceStats {
  double max_abs_diff = 0.0;       // max_{t,i} |l~'_i - l'_i|
  double max_ratio_minus_1 = 0.0;  // max over both ratio directions
};

// Compares the virtual surrogate against recorded actual loss
// derivatives; `actual[k]` must hold the per-sample l' at recorded step k
// with consecutive records one step apart.
DivergenceStats virtual_vs_actual(const VirtualState& initial,
                                  const std::vector<Vector>& actual);

enum class KappaRegime { classic, small_angle };

// kappa = 56 sqrt(log(4n^2/delta)/d) n log(T*) + 10 sqrt(log(12mn/delta)) s0 sp sqrt(d)
//         + {64 | 16} n SNR^2 log(T*), coefficient by regime. d is real so the
//         formula can be probed at scales far beyond addressable memory.
double kappa(int n, double d, int m, double delta, double sigma_0, double sigma_p, double snr,
             double t_star, KappaRegime regime);

// Gap = 20 sqrt(log(2n/delta)/m) sqrt(log(4/delta))
double gap_bound(int n, int m, double delta);

struct SumRatioStat {
  double statistic = 0.0;    // | sum_{S+} l' / sum_{S-} l'  -  |S+|/|S-| |
  double ratio = 0.0;        // sum_{S+} l' / sum_{S-} l'
  double count_ratio = 0.0;  // |S+| / |S-|
  double gap_rhs = 0.0;      // 2 Gap (|S-|sqrt|S+| + |S-|sqrt|S+|) / |S-|^2
};

SumRatioStat sum_ratio_monitor(const Vector& lossderivs, const std::vector<int>& s_plus,
                               const std::vector<int>& s_minus, int m, double delta);

struct GrowthFit {
  bool degenerate = false;  // regressand did not move
  double r2 = 0.0;
  double slope = 0.0;
  double slope_ratio = 0.0;  // fitted slope / predicted coefficient scale
};

struct CrossSignalBound {
  bool ok = true;
  double worst_excess = 0.0;  // max over (r, t) of |projection| minus the band
  double band = 0.0;          // 2 sqrt(log(12 m / delta)) sigma_0 |mu| + eta |mu|^2 / m
};

// Regresses a recorded quantity against log(eta sigma_p^2 d (t-1)/(12 n m) + 2/3)
// for recorded steps t >= burn_in and reports the fit against the
// predicted coefficient scale.
GrowthFit growth_fit(const std::vector<int>& steps, const std::vector<double>& values,
                     double eta, double sigma_p, int d, int n, int m, double predicted_scale,
                     int burn_in);

// Explicit off-signal projection bound, checked against recorded values of
// |<w_{-1,r}, u>| (and symmetrically |<w_{+1,r}, v>|): every recorded value
// must stay within 2 sqrt(log(12 m / delta)) sigma_0 |mu| + eta |mu|^2 / m.
CrossSignalBound check_cross_signal_bound(const std::vector<Vector>& projections, int m,
                                          double sigma_0, double mu_norm, double eta,
                                          double delta);

struct RegimeParams {
  double kappa = 0.0;
  double gap = 0.0;
  double snr = 0.0;
  double delta = 0.0;
  double t_star = 0.0;
};

}  // namespace xorlab
