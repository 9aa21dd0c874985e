#pragma once

#include "xorlab/cnn_model.hpp"

namespace xorlab {

struct ErrorEstimate {
  double error_rate = 0.0;
  int n_test = 0;
  double stderr_ = 0.0;  // sqrt(p(1-p)/n_test)
  std::uint64_t seed = 0;

  double accuracy() const { return 1.0 - error_rate; }
};

// Monte-Carlo estimate of P(y f(W,x) < 0) on fresh draws from the same
// distribution; ties f = 0 count as errors.
ErrorEstimate test_error_mc(const CnnWeights& w, const XorBasis& basis, double sigma_p,
                            double flip_p, int n_test, Rng& rng);

// Same estimator for an arbitrary decision value g(x1, x2).
template <typename F>
ErrorEstimate test_error_mc_fn(F&& decision, const XorBasis& basis, double sigma_p, double flip_p,
                               int n_test, Rng& rng) {
  if (n_test < 1) throw std::invalid_argument("test_error_mc: n_test must be >= 1");
  int errors = 0;
  for (int k = 0; k < n_test; ++k) {
    const DataPoint p = sample_point(basis, sigma_p, flip_p, rng);
    const double f = decision(p.patch1, p.patch2);
    if (p.y * f <= 0.0) ++errors;
  }
  ErrorEstimate e;
  e.n_test = n_test;
  e.error_rate = static_cast<double>(errors) / n_test;
  e.stderr_ = std::sqrt(e.error_rate * (1.0 - e.error_rate) / n_test);
  e.seed = rng.key();
  return e;
}

// Bayes error of the data model: the flip probability.
double bayes_rate(double flip_p);

// Logistic regression on the concatenated 2d input trained by full-batch
// gradient descent; provably stuck at chance on this distribution.
ErrorEstimate linear_baseline(const Dataset& ds, const XorBasis& basis, double sigma_p,
                              double flip_p, int n_test, int iters, Rng& rng, double eta = 0.1);

}  // namespace xorlab
