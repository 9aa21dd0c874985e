#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "xorlab/cnn_model.hpp"

namespace xorlab {

enum class TrainPreset { classic_xor, small_angle, custom };

// eta is the learning rate for the mean objective L = (1/n) sum_i l_i.
// The heatmap protocol scales its configured rate by n before filling
// this in (see experiments.hpp).
struct TrainConfig {
  double eta = 1e-3;
  int epochs = 200;
  double target_eps = 1e-2;
  bool early_stop = false;
  int record_every = 10;
  bool keep_snapshots = false;
  TrainPreset preset = TrainPreset::custom;
};

// State handed to hooks each step, before the weight update is applied.
// `weights` is the iterate at step t and `batch` was evaluated on it.
// After the last update (or on early stop) hooks fire once more with
// `final` set; no further update follows that call.
struct StepInfo {
  int t = 0;
  bool recorded = false;
  bool final = false;
  const CnnWeights& weights;
  const BatchForward& batch;
  double eta = 0.0;
};

using StepHook = std::function<void(const StepInfo&)>;

struct RecordedStep {
  int t = 0;
  double loss = 0.0;
  double min_margin = 0.0, median_margin = 0.0, max_margin = 0.0;
  double lossderiv_ratio = 1.0;  // max_{i,k} l'_i / l'_k >= 1
  Vector lossderiv;
};

struct TrainTrace {
  std::vector<RecordedStep> records;
  std::vector<std::pair<int, CnnWeights>> snapshots;
  CnnWeights weights_final;
  int steps_run = 0;
  bool early_stopped = false;

  const RecordedStep& last() const { return records.back(); }
};

// One exact full-batch step on the mean loss. Throws on non-finite
// gradient entries, carrying the offending step index in the message.
void gd_step(CnnWeights& w, const Dataset& ds, double eta, int step_index = 0);

TrainTrace train(const Dataset& ds, CnnWeights weights, const TrainConfig& cfg,
                 const std::vector<StepHook>& hooks = {});

struct RegimeClause {
  std::string name;
  double observed = 0.0;
  double bound = 0.0;
  bool satisfied = false;
};

struct RegimeReport {
  std::vector<RegimeClause> classic_clauses;      // Condition for cos(theta) < 1/2
  std::vector<RegimeClause> challenging_clauses;  // small-angle condition set
  double benign_value_classic = 0.0;       // n |mu|^4 / (sigma_p^4 d)
  double benign_value_challenging = 0.0;   // |mu|^4 (1-cos)^2 / (m^2 sigma_p^4 d)
  bool benign_side_classic = false;        // value >= 1 with all constants set to 1
  bool benign_side_challenging = false;
};

// Evaluates both condition sets with every hidden constant / polylog
// factor set to 1 and reports the phase classifier values.
RegimeReport classify_regime(int n, int d, int m, double mu_norm, double sigma_p, double p,
                             double eta, double sigma_0, double cos_theta, double eps,
                             double delta);

}  // namespace xorlab
