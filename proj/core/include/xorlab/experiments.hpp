#pragma once

#include <optional>
#include <string>
#include <vector>

#include "xorlab/eval.hpp"
#include "xorlab/trainer.hpp"

namespace xorlab {

enum class GridMode { fix_d_vary_n, fix_n_vary_d, custom };

const char* grid_mode_name(GridMode m);
GridMode grid_mode_from_name(const std::string& s);

// Sweep specification for the phase-transition heatmaps. axis1 is the
// vertical axis (n, or d in fix_n_vary_d mode); axis2 encodes
// sigma_p^4 d / |mu|^4 (fix_d_vary_n) or n |mu|^4 / sigma_p^4 (fix_n_vary_d).
//
// eta is the per-sample rate of the reference protocol: each cell trains
// with a mean-loss step of eta * n, i.e. gradient descent on the summed
// per-sample losses. See docs/formats.md.
struct GridSpec {
  GridMode mode = GridMode::fix_d_vary_n;
  std::vector<double> axis1;
  std::vector<double> axis2;
  int fixed_d = 200;
  int fixed_n = 80;
  double sigma_p = 1.0;
  double flip_p = 0.1;
  double cos_theta = 0.8;
  int m = 40;
  double sigma_0 = 0.01;
  double eta = 1e-3;
  int epochs = 200;
  int n_test = 1000;
  std::uint64_t base_seed = 7;
  int repeats = 1;
  bool converge = false;  // early-stop at target_eps instead of fixed epochs
  double target_eps = 1e-2;

  void validate() const;
};

struct CellResult {
  int i = 0, j = 0;
  double axis1 = 0.0, axis2 = 0.0;
  double mu_norm = 0.0;
  double test_accuracy = 0.0;  // mean over repeats
  double stderr_ = 0.0;
  double train_loss_final = 0.0;
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;
  bool failed = false;
  std::string error;
};

double derive_mu_norm(GridMode mode, double axis2, int d, int n, double sigma_p);

std::uint64_t cell_seed(std::uint64_t base_seed, int i, int j, int repeat);

CellResult run_cell(const GridSpec& spec, int i, int j);

struct GridResult {
  GridSpec spec;
  std::vector<CellResult> cells;  // row-major over (i, j)

  const CellResult& at(int i, int j) const;
};

// Cells are independent work items; results are identical for any worker
// count. workers <= 0 reads XORLAB_WORKERS, defaulting to the hardware count.
GridResult run_grid(const GridSpec& spec, int workers = 0);

std::vector<std::vector<int>> truncate_heatmap(const GridResult& grid, double threshold);

void emit_csv(const GridResult& grid, const std::string& path);
GridResult parse_csv(const std::string& path);

void emit_svg(const GridResult& grid, const std::string& path,
              std::optional<double> truncate_threshold = std::nullopt);

void write_manifest(const GridSpec& spec, const std::string& path);
GridSpec read_manifest(const std::string& path);

// trend statistics used by the acceptance suite and the CLI reports
double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct BoundaryFit {
  bool ok = false;
  double slope = 0.0;
  int n_points = 0;
};

// Boundary of the `threshold`-truncated grid: per-column and per-row
// threshold crossings of the accuracy field, slope by Theil-Sen over the
// crossing points in (log axis2, log axis1).
BoundaryFit fit_boundary_slope(const GridResult& grid, double threshold);

}  // namespace xorlab
