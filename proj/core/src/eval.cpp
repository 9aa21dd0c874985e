#include "xorlab/eval.hpp"

namespace xorlab {

ErrorEstimate test_error_mc(const CnnWeights& w, const XorBasis& basis, double sigma_p,
                            double flip_p, int n_test, Rng& rng) {
  if (n_test < 1) throw std::invalid_argument("test_error_mc: n_test must be >= 1");
  // sample in blocks and evaluate batched
  const int block = 512;
  int errors = 0;
  Matrix x1(block, basis.d), x2(block, basis.d);
  std::vector<int> ys(block);
  int done = 0;
  std::uint64_t seed = rng.key();
  while (done < n_test) {
    const int take = std::min(block, n_test - done);
    for (int k = 0; k < take; ++k) {
      const DataPoint p = sample_point(basis, sigma_p, flip_p, rng);
      x1.row(k) = p.patch1.transpose();
      x2.row(k) = p.patch2.transpose();
      ys[k] = p.y;
    }
    const Vector f = forward_values(w, x1.topRows(take), x2.topRows(take));
    for (int k = 0; k < take; ++k)
      if (ys[k] * f(k) <= 0.0) ++errors;
    done += take;
  }
  ErrorEstimate e;
  e.n_test = n_test;
  e.error_rate = static_cast<double>(errors) / n_test;
  e.stderr_ = std::sqrt(e.error_rate * (1.0 - e.error_rate) / n_test);
  e.seed = seed;
  return e;
}

double bayes_rate(double flip_p) {
  if (!(flip_p >= 0.0 && flip_p < 0.5))
    throw std::invalid_argument("bayes_rate: flip_p must lie in [0, 0.5)");
  return flip_p;
}

ErrorEstimate linear_baseline(const Dataset& ds, const XorBasis& basis, double sigma_p,
                              double flip_p, int n_test, int iters, Rng& rng, double eta) {
  if (iters < 1) throw std::invalid_argument("linear_baseline: iters must be >= 1");
  const int n = ds.n(), d = ds.d();
  // concatenated design matrix (n x 2d)
  Matrix x(n, 2 * d);
  x.leftCols(d) = ds.patch1;
  x.rightCols(d) = ds.patch2;
  Vector theta = Vector::Zero(2 * d);
  for (int it = 0; it < iters; ++it) {
    const Vector z = x * theta;
    Vector coef(n);
    for (int i = 0; i < n; ++i) coef(i) = loss_derivative(ds.y[i] * z(i)) * ds.y[i];
    theta -= (eta / n) * (x.transpose() * coef);
  }
  auto decision = [&](const Vector& p1, const Vector& p2) {
    return theta.head(d).dot(p1) + theta.tail(d).dot(p2);
  };
  return test_error_mc_fn(decision, basis, sigma_p, flip_p, n_test, rng);
}

}  // namespace xorlab
