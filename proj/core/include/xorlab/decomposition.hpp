#pragma once

#include <array>
#include <string>
#include <vector>

#include "xorlab/trainer.hpp"

namespace xorlab {

// Coefficients of the noise decomposition
//   <w_{j,r}^(t), xi_i> = <w_{j,r}^(0), xi_i> + sum_{i'} rho_{j,r,i'} <xi_{i'}, xi_i> / |xi_{i'}|^2
// split into the nonnegative (same-class) and nonpositive (cross-class) parts.
// rho_bar is supported on y_i = j, rho_under on y_i = -j.
struct CoefficientTable {
  int t = 0;
  Matrix rho_bar_pos, rho_bar_neg;      // m x n, >= 0
  Matrix rho_under_pos, rho_under_neg;  // m x n, <= 0

  const Matrix& rho_bar(int j) const { return j > 0 ? rho_bar_pos : rho_bar_neg; }
  const Matrix& rho_under(int j) const { return j > 0 ? rho_under_pos : rho_under_neg; }
};

struct SignalProjections {
  int t = 0;
  Vector pos_u, pos_v;  // <w_{+1,r}, u>, <w_{+1,r}, v> over r
  Vector neg_u, neg_v;
};

using BoolGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// S_i = { r : <w_{y_i,r}, xi_i> > 0 } stored as an n x m grid;
// S_{j,r} and the S_{mu,y} partition are derived views of the same data.
struct ActivationSets {
  int t = 0;
  BoolGrid own_noise_active;  // (i, r) -> r in S_i
};

struct ReconstructionReport {
  double max_rel_error = 0.0;
  int argmax_j = 0, argmax_r = 0, argmax_i = 0;
};

struct AuditReport {
  int t = 0;                    // step whose update was audited (t -> t+1)
  double max_abs_discrepancy = 0.0;
};

struct MonotonicityReport {
  bool contained = true;   // S^(0) subset of S^(t) at every recorded step
  bool equal = true;       // S^(0) == S^(t) at every recorded step
  int first_containment_violation = -1;  // recorded step index, -1 if none
  long containment_violations = 0;       // dropped memberships, summed
};

struct SignPersistenceReport {
  long flips = 0;           // sign changes of <w_{+1,r},u> / <w_{-1,r},v> vs t=0
  long shrinks = 0;         // |projection| decreased between recorded steps
  bool cross_signal_ok = true;  // |<w_{+1,r},v>| <= |<w^0_{+1,r},v>| + eta |mu|^2 / m
};

// Runs alongside training via the StepHook interface: coefficient
// updates every step, heavier verification at recorded steps.
class DecompTracker {
 public:
  DecompTracker(const XorBasis& basis, const Dataset& ds, const CnnWeights& init);

  StepHook hook();

  void on_step(const StepInfo& info);

  const CoefficientTable& table() const { return table_; }

  // Right side of the decomposition identity for one coefficient triple.
  double reconstruct_inner_product(int j, int r, int i) const;

  // Identity residual over all (j, r, i) against the live weights,
  // normalized by |w_{j,r}| |xi_i|.
  ReconstructionReport check_reconstruction(const CnnWeights& live) const;

  SignalProjections projections(const CnnWeights& w) const;

  // audits and recorded histories
  const std::vector<ReconstructionReport>& reconstruction_history() const { return recon_; }
  const std::vector<AuditReport>& audit_history() const { return audits_; }
  const std::vector<ActivationSets>& activation_history() const { return acts_; }
  const std::vector<SignalProjections>& projection_history() const { return projs_; }

  MonotonicityReport activation_monotonicity() const;
  SignPersistenceReport sign_persistence() const;

  void write_csv(const std::string& path) const;

 private:
  void update_coefficients(const StepInfo& info);
  AuditReport audit_against(const SignalProjections& now) const;

  const XorBasis& basis_;
  const Dataset& ds_;
  int m_ = 0;
  Matrix xi_;              // n x d noise patches
  Matrix gram_;            // n x n <xi_i, xi_j>
  Vector xi_sq_;           // |xi_i|^2
  Matrix init_ip_pos_, init_ip_neg_;  // m x n <w^0_{j,r}, xi_i>
  SignalProjections init_projs_;
  CoefficientTable table_;

  // cached state of the step whose update we will audit next
  struct PendingAudit {
    int t = 0;
    bool valid = false;
    Vector lossderiv;
    BoolGrid sig_active_pos, sig_active_neg;  // (i, r): <w_{j,r}, mu_i> > 0
    SignalProjections projs;
    double eta = 0.0;
  } pending_;

  std::vector<ReconstructionReport> recon_;
  std::vector<AuditReport> audits_;
  std::vector<ActivationSets> acts_;
  std::vector<SignalProjections> projs_;
  struct CsvRow {
    int t;
    double max_recon_err, mean_rho_bar, min_rho_under;
    long sign_violations;
  };
  std::vector<CsvRow> csv_;
};

// Containment / equality over an externally assembled history.
MonotonicityReport activation_monotonicity(const std::vector<ActivationSets>& history);

}  // namespace xorlab
