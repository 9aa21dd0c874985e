#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <xorlab/xor_data.hpp>

#include <cstdio>
#include <map>

using namespace xorlab;

TEST_CASE("basis norms solve the two defining equations") {
  Rng rng(1);
  const XorBasis basis = build_basis(200, 2.0, 0.8, rng);
  CHECK(basis.a.squaredNorm() == doctest::Approx(3.6).epsilon(1e-12));
  CHECK(basis.b.squaredNorm() == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(std::abs(basis.a.dot(basis.b)) <= 1e-10 * basis.a.norm() * basis.b.norm());
  CHECK(basis.u.norm() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(basis.v.norm() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("d=2 orthogonal case recovers the classic model") {
  Rng rng(2);
  const XorBasis basis = build_basis(2, std::sqrt(2.0), 0.0, rng);
  CHECK(basis.a.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(basis.b.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(basis.u.dot(basis.v)) < 1e-12);
}

TEST_CASE("u-v angle comes out as requested") {
  Rng rng(3);
  const XorBasis basis = build_basis(50, 1.0, 0.5, rng);
  // <a+b, a-b> = |a|^2 - |b|^2, computed from the constructed vectors
  const double ip = (basis.a + basis.b).dot(basis.a - basis.b);
  CHECK(ip / (basis.mu_norm * basis.mu_norm) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(basis.u.dot(basis.v) / (basis.u.norm() * basis.v.norm()) ==
        doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("basis argument validation") {
  Rng rng(4);
  CHECK_THROWS_AS(build_basis(1, 1.0, 0.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(build_basis(10, 1.0, 1.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(build_basis(10, 1.0, -0.1, rng), std::invalid_argument);
}

TEST_CASE("signal pair is uniform over the four tuples") {
  Rng rng(5);
  const XorBasis basis = build_basis(8, 1.0, 0.3, rng);
  std::map<SignalTag, int> counts;
  for (int k = 0; k < 40000; ++k) {
    auto [tag, y] = sample_signal_pair(basis, rng);
    counts[tag]++;
    CHECK(y == tag_clean_label(tag));
    if (tag == SignalTag::plus_u || tag == SignalTag::minus_u) CHECK(y == 1);
    else CHECK(y == -1);
  }
  for (auto& [tag, c] : counts)
    CHECK(std::abs(c / 40000.0 - 0.25) < 0.01);
}

TEST_CASE("noise is orthogonal to both basis vectors") {
  Rng rng(6);
  const XorBasis basis = build_basis(64, 3.0, 0.7, rng);
  for (int k = 0; k < 50; ++k) {
    const Vector xi = sample_noise(basis, 1.3, rng);
    const double tol = 1e-10 * xi.norm() * std::max(basis.a.norm(), basis.b.norm());
    CHECK(std::abs(xi.dot(basis.a)) <= tol);
    CHECK(std::abs(xi.dot(basis.b)) <= tol);
  }
}

TEST_CASE("noise norm matches the projected covariance trace") {
  // E |xi|^2 = (d-2) sigma_p^2 for the rank-(d-2) projection
  Rng rng(7);
  const int d = 400;
  const XorBasis basis = build_basis(d, 1.0, 0.2, rng);
  double sum = 0.0, sumsq = 0.0;
  const int trials = 2000;
  for (int k = 0; k < trials; ++k) {
    const double s = sample_noise(basis, 1.0, rng).squaredNorm();
    sum += s;
    sumsq += s * s;
  }
  const double mean = sum / trials;
  const double stderr_ = std::sqrt((sumsq / trials - mean * mean) / trials);
  CHECK(std::abs(mean - (d - 2)) < 3.0 * stderr_);
}

TEST_CASE("noise norm band at large d") {
  Rng rng(8);
  const int d = 1000;
  const XorBasis basis = build_basis(d, 1.0, 0.0, rng);
  for (int k = 0; k < 1000; ++k) {
    const double s = sample_noise(basis, 1.0, rng).squaredNorm();
    CHECK(s >= d / 2.0);
    CHECK(s <= 3.0 * d / 2.0);
  }
}

TEST_CASE("flip_p = 0 keeps every label clean") {
  Rng rng(9);
  const XorBasis basis = build_basis(16, 1.0, 0.4, rng);
  const Dataset ds = sample_dataset(basis, {200, 1.0, 0.0, 42});
  for (int i = 0; i < ds.n(); ++i) CHECK(ds.y[i] == ds.y_clean[i]);
}

TEST_CASE("flip fraction concentrates at flip_p") {
  Rng rng(10);
  const XorBasis basis = build_basis(16, 1.0, 0.4, rng);
  const Dataset ds = sample_dataset(basis, {10000, 1.0, 0.1, 43});
  int flips = 0;
  for (int i = 0; i < ds.n(); ++i) flips += ds.y[i] != ds.y_clean[i];
  CHECK(std::abs(flips / 10000.0 - 0.1) < 0.01);
}

TEST_CASE("same seed gives identical datasets") {
  Rng rng(11);
  const XorBasis basis = build_basis(24, 2.0, 0.6, rng);
  const Dataset a = sample_dataset(basis, {50, 1.0, 0.2, 77});
  const Dataset b = sample_dataset(basis, {50, 1.0, 0.2, 77});
  CHECK(a.patch1 == b.patch1);
  CHECK(a.patch2 == b.patch2);
  CHECK(a.y == b.y);
  CHECK(a.slot == b.slot);
}

TEST_CASE("exactly one patch is the tagged signal, the other is xi") {
  Rng rng(12);
  const XorBasis basis = build_basis(32, 1.5, 0.5, rng);
  const Dataset ds = sample_dataset(basis, {100, 1.0, 0.1, 3});
  for (int i = 0; i < ds.n(); ++i) {
    const Vector mu = basis.signal_value(ds.tag[i]);
    CHECK((ds.signal_patch(i).transpose() - mu).norm() == 0.0);
    const auto xi = ds.noise_patch(i);
    const double tol = 1e-10 * xi.norm() * std::max(basis.a.norm(), basis.b.norm());
    CHECK(std::abs(xi.dot(basis.a)) <= tol);
    CHECK(std::abs(xi.dot(basis.b)) <= tol);
    CHECK(ds.y_clean[i] == tag_clean_label(ds.tag[i]));
  }
}

TEST_CASE("distributional sign symmetry: sign(<w,x>) y is centered") {
  // testable face of (x, y) =d (-x, y) on the concatenated input
  Rng rng(13);
  const int d = 20;
  const XorBasis basis = build_basis(d, 2.0, 0.8, rng);
  const int nsamp = 20000;
  Rng dir_rng = rng.split(99);
  for (int w = 0; w < 10; ++w) {
    Vector dir(2 * d);
    for (int k = 0; k < 2 * d; ++k) dir(k) = dir_rng.normal();
    Rng srng = rng.split(w);
    double acc = 0.0;
    for (int k = 0; k < nsamp; ++k) {
      const DataPoint p = sample_point(basis, 1.0, 0.1, srng);
      const double ip = dir.head(d).dot(p.patch1) + dir.tail(d).dot(p.patch2);
      acc += (ip > 0 ? 1.0 : -1.0) * p.y;
    }
    const double mean = acc / nsamp;
    CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(nsamp)));
  }
}

TEST_CASE("per-class balance of +u vs -u among clean positives") {
  Rng rng(14);
  const XorBasis basis = build_basis(12, 1.0, 0.3, rng);
  const Dataset ds = sample_dataset(basis, {40000, 1.0, 0.1, 5});
  int pos = 0, plus_u = 0;
  for (int i = 0; i < ds.n(); ++i) {
    if (ds.y_clean[i] == 1) {
      ++pos;
      plus_u += ds.tag[i] == SignalTag::plus_u;
    }
  }
  const double frac = static_cast<double>(plus_u) / pos;
  CHECK(std::abs(frac - 0.5) < 3.0 * 0.5 / std::sqrt(static_cast<double>(pos)));
}

TEST_CASE("clean-consistent cell sizes concentrate") {
  // |S_{mu,y}| within sqrt(n log(8n/delta)/2) of n(1-p)/4, 20 trials, <= 1 failure
  const int n = 4000;
  const double p = 0.1, delta = 0.05;
  const double band = std::sqrt(n * std::log(8.0 * n / delta) / 2.0);
  int failures = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(1000 + trial);
    const XorBasis basis = build_basis(10, 1.0, 0.3, rng);
    const Dataset ds = sample_dataset(basis, {n, 1.0, p, 9000 + static_cast<std::uint64_t>(trial)});
    std::map<std::pair<int, int>, int> cells;  // (tag, y) -> count
    for (int i = 0; i < n; ++i) cells[{static_cast<int>(ds.tag[i]), ds.y[i]}]++;
    bool ok = true;
    for (auto& [key, cnt] : cells) {
      const auto [tag, y] = key;
      const bool clean_consistent = (tag_clean_label(static_cast<SignalTag>(tag)) == y);
      if (clean_consistent && std::abs(cnt - n * (1 - p) / 4.0) > band) ok = false;
    }
    failures += !ok;
  }
  CHECK(failures <= 1);
}

TEST_CASE("jsonl round trip") {
  Rng rng(15);
  const XorBasis basis = build_basis(6, 1.0, 0.25, rng);
  const Dataset ds = sample_dataset(basis, {8, 2.0, 0.2, 31});
  const std::string path = "test_dataset_roundtrip.jsonl";
  write_dataset_jsonl(ds, basis, path);
  auto [ds2, basis2] = read_dataset_jsonl(path);
  CHECK(ds2.n() == ds.n());
  CHECK((ds2.patch1 - ds.patch1).norm() == 0.0);
  CHECK((ds2.patch2 - ds.patch2).norm() == 0.0);
  CHECK(ds2.y == ds.y);
  CHECK(ds2.y_clean == ds.y_clean);
  CHECK(ds2.slot == ds.slot);
  CHECK((basis2.u - basis.u).norm() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("rng streams are independent and reproducible") {
  Rng a(123);
  Rng b(123);
  for (int k = 0; k < 100; ++k) CHECK(a.next_u64() == b.next_u64());
  Rng c = a.split(1), d = a.split(2);
  CHECK(c.next_u64() != d.next_u64());
  // splitting does not disturb the parent
  Rng e(7);
  (void)e.split(5);
  Rng f(7);
  for (int k = 0; k < 10; ++k) CHECK(e.next_u64() == f.next_u64());
}
