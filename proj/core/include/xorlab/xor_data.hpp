#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "xorlab/rng.hpp"

namespace xorlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class SignalTag { plus_u, minus_u, plus_v, minus_v };

const char* tag_name(SignalTag t);
SignalTag tag_from_name(const std::string& s);

// Clean label carried by a tag: +1 for +-u, -1 for +-v.
inline int tag_clean_label(SignalTag t) {
  return (t == SignalTag::plus_u || t == SignalTag::minus_u) ? +1 : -1;
}

// Orthogonal signal pair (a, b) with u = a + b, v = a - b.
// Norms solve  |a|^2 + |b|^2 = mu_norm^2  and  |a|^2 - |b|^2 = mu_norm^2 cos_theta,
// so |u| = |v| = mu_norm and <u,v>/|u||v| = cos_theta.
struct XorBasis {
  int d = 0;
  Vector a, b, u, v;
  double mu_norm = 0.0;
  double cos_theta = 0.0;

  const Vector& signal(SignalTag t) const;
  Vector signal_value(SignalTag t) const;
};

struct DataConfig {
  int n = 0;
  double sigma_p = 1.0;
  double flip_p = 0.0;
  std::uint64_t seed = 0;
};

struct DataPoint {
  Vector patch1, patch2;
  int y = 0;        // observed label
  int y_clean = 0;  // label before flipping
  SignalTag tag = SignalTag::plus_u;
  int slot = 1;  // which patch carries the signal (1 or 2)
  Vector xi;     // the noise patch

  const Vector& signal_patch() const { return slot == 1 ? patch1 : patch2; }
  const Vector& noise_patch() const { return slot == 1 ? patch2 : patch1; }
};

// n labeled two-patch points, stored packed for fast batch math.
// patch1/patch2 rows are the raw inputs; tag/slot/y_clean bookkeeping keeps
// the signal/noise split explicit so instrumentation never re-infers it.
struct Dataset {
  DataConfig cfg;
  Matrix patch1, patch2;  // n x d
  std::vector<int> y, y_clean, slot;
  std::vector<SignalTag> tag;

  int n() const { return static_cast<int>(y.size()); }
  int d() const { return static_cast<int>(patch1.cols()); }

  Eigen::Ref<const Eigen::RowVectorXd> signal_patch(int i) const {
    return slot[i] == 1 ? patch1.row(i) : patch2.row(i);
  }
  Eigen::Ref<const Eigen::RowVectorXd> noise_patch(int i) const {
    return slot[i] == 1 ? patch2.row(i) : patch1.row(i);
  }
  DataPoint point(int i) const;
};

// Directions are two Gram-Schmidt-orthonormalized standard Gaussian draws;
// pass pin_axes = true to use e1, e2 instead (reproducible unit tests).
XorBasis build_basis(int d, double mu_norm, double cos_theta, Rng& rng,
                     bool pin_axes = false);

// Uniform over {(+u,+1), (-u,+1), (+v,-1), (-v,-1)}.
std::pair<SignalTag, int> sample_signal_pair(const XorBasis& basis, Rng& rng);

// Isotropic N(0, sigma_p^2 I) projected off span{a, b}; exactly the
// covariance sigma_p^2 (I - aa^T/|a|^2 - bb^T/|b|^2).
Vector sample_noise(const XorBasis& basis, double sigma_p, Rng& rng);

DataPoint sample_point(const XorBasis& basis, double sigma_p, double flip_p, Rng& rng);

Dataset sample_dataset(const XorBasis& basis, const DataConfig& cfg, Rng& rng);
inline Dataset sample_dataset(const XorBasis& basis, const DataConfig& cfg) {
  Rng rng(cfg.seed);
  return sample_dataset(basis, cfg, rng);
}

// JSON-lines export/import; layout documented in docs/formats.md.
void write_dataset_jsonl(const Dataset& ds, const XorBasis& basis, const std::string& path);
std::pair<Dataset, XorBasis> read_dataset_jsonl(const std::string& path);

}  // namespace xorlab
