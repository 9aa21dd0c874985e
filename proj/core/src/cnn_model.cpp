#include "xorlab/cnn_model.hpp"

#include <cstring>
#include <fstream>

namespace xorlab {

CnnWeights init_weights(int m, int d, double sigma_0, Rng& rng) {
  if (m < 1) throw std::invalid_argument("init_weights: m must be >= 1");
  if (d < 2) throw std::invalid_argument("init_weights: d must be >= 2");
  if (!(sigma_0 > 0.0)) throw std::invalid_argument("init_weights: sigma_0 must be positive");
  CnnWeights w;
  w.m = m;
  w.sigma_0 = sigma_0;
  w.w_pos.resize(m, d);
  w.w_neg.resize(m, d);
  for (int r = 0; r < m; ++r)
    for (int k = 0; k < d; ++k) w.w_pos(r, k) = sigma_0 * rng.normal();
  for (int r = 0; r < m; ++r)
    for (int k = 0; k < d; ++k) w.w_neg(r, k) = sigma_0 * rng.normal();
  return w;
}

ForwardTrace forward(const CnnWeights& w, const Vector& patch1, const Vector& patch2) {
  if (patch1.size() != w.d() || patch2.size() != w.d())
    throw std::invalid_argument("forward: patch dimension mismatch");
  ForwardTrace t;
  t.acts_pos.resize(w.m, 2);
  t.acts_neg.resize(w.m, 2);
  t.acts_pos.col(0) = w.w_pos * patch1;
  t.acts_pos.col(1) = w.w_pos * patch2;
  t.acts_neg.col(0) = w.w_neg * patch1;
  t.acts_neg.col(1) = w.w_neg * patch2;
  t.active_pos = t.acts_pos.array() > 0.0;
  t.active_neg = t.acts_neg.array() > 0.0;
  const double fp = t.acts_pos.array().max(0.0).sum();
  const double fn = t.acts_neg.array().max(0.0).sum();
  t.f_value = (fp - fn) / static_cast<double>(w.m);
  return t;
}

Vector forward_values(const CnnWeights& w, const Matrix& x1, const Matrix& x2) {
  const Matrix ap1 = x1 * w.w_pos.transpose();
  const Matrix ap2 = x2 * w.w_pos.transpose();
  const Matrix an1 = x1 * w.w_neg.transpose();
  const Matrix an2 = x2 * w.w_neg.transpose();
  Vector f = (ap1.array().max(0.0).rowwise().sum() + ap2.array().max(0.0).rowwise().sum() -
              an1.array().max(0.0).rowwise().sum() - an2.array().max(0.0).rowwise().sum())
                 .matrix() /
             static_cast<double>(w.m);
  return f;
}

double logistic_loss(double z) {
  if (z >= 0.0) return std::log1p(std::exp(-z));
  return -z + std::log1p(std::exp(z));
}

double loss_derivative(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return -e / (1.0 + e);
  }
  return -1.0 / (1.0 + std::exp(z));
}

BatchForward forward_batch(const CnnWeights& w, const Dataset& ds) {
  if (ds.d() != w.d()) throw std::invalid_argument("forward_batch: dimension mismatch");
  BatchForward bf;
  bf.acts_pos1 = ds.patch1 * w.w_pos.transpose();
  bf.acts_pos2 = ds.patch2 * w.w_pos.transpose();
  bf.acts_neg1 = ds.patch1 * w.w_neg.transpose();
  bf.acts_neg2 = ds.patch2 * w.w_neg.transpose();
  const int n = ds.n();
  bf.f.resize(n);
  bf.margins.resize(n);
  bf.lossderiv.resize(n);
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double fp = bf.acts_pos1.row(i).array().max(0.0).sum() +
                      bf.acts_pos2.row(i).array().max(0.0).sum();
    const double fn = bf.acts_neg1.row(i).array().max(0.0).sum() +
                      bf.acts_neg2.row(i).array().max(0.0).sum();
    bf.f(i) = (fp - fn) / static_cast<double>(w.m);
    bf.margins(i) = ds.y[i] * bf.f(i);
    bf.lossderiv(i) = loss_derivative(bf.margins(i));
    loss += logistic_loss(bf.margins(i));
  }
  bf.loss = loss / n;
  return bf;
}

CnnGradient gradient_from_forward(const CnnWeights& w, const Dataset& ds, const BatchForward& bf) {
  const int n = ds.n();
  const double scale = 1.0 / (static_cast<double>(n) * w.m);
  // row i of cpos1 is l'_i * y_i * 1{<w_{+1,r}, patch1_i> > 0} over r
  Matrix cpos1(n, w.m), cpos2(n, w.m), cneg1(n, w.m), cneg2(n, w.m);
  for (int i = 0; i < n; ++i) {
    const double c = bf.lossderiv(i) * ds.y[i];
    cpos1.row(i) = (bf.acts_pos1.row(i).array() > 0.0).cast<double>() * c;
    cpos2.row(i) = (bf.acts_pos2.row(i).array() > 0.0).cast<double>() * c;
    cneg1.row(i) = (bf.acts_neg1.row(i).array() > 0.0).cast<double>() * (-c);
    cneg2.row(i) = (bf.acts_neg2.row(i).array() > 0.0).cast<double>() * (-c);
  }
  CnnGradient g;
  g.g_pos = scale * (cpos1.transpose() * ds.patch1 + cpos2.transpose() * ds.patch2);
  g.g_neg = scale * (cneg1.transpose() * ds.patch1 + cneg2.transpose() * ds.patch2);
  return g;
}

CnnGradient full_gradient(const CnnWeights& w, const Dataset& ds) {
  if (ds.n() < 1) throw std::invalid_argument("full_gradient: empty dataset");
  const BatchForward bf = forward_batch(w, ds);
  return gradient_from_forward(w, ds, bf);
}

double training_loss(const CnnWeights& w, const Dataset& ds) {
  return forward_batch(w, ds).loss;
}

namespace {
constexpr std::uint32_t kCheckpointMagic = 0x584c5731;  // "XLW1"

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void get(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
}
}  // namespace

void save_checkpoint(const CnnWeights& w, std::uint64_t step, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  put(out, kCheckpointMagic);
  put(out, static_cast<std::uint64_t>(w.m));
  put(out, static_cast<std::uint64_t>(w.d()));
  put(out, w.sigma_0);
  put(out, step);
  out.write(reinterpret_cast<const char*>(w.w_pos.data()),
            static_cast<std::streamsize>(sizeof(double) * w.w_pos.size()));
  out.write(reinterpret_cast<const char*>(w.w_neg.data()),
            static_cast<std::streamsize>(sizeof(double) * w.w_neg.size()));
}

std::pair<CnnWeights, std::uint64_t> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::uint32_t magic = 0;
  get(in, magic);
  if (magic != kCheckpointMagic) throw std::runtime_error("not a checkpoint file: " + path);
  std::uint64_t m = 0, d = 0, step = 0;
  double sigma_0 = 0.0;
  get(in, m);
  get(in, d);
  get(in, sigma_0);
  get(in, step);
  CnnWeights w;
  w.m = static_cast<int>(m);
  w.sigma_0 = sigma_0;
  w.w_pos.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  w.w_neg.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  in.read(reinterpret_cast<char*>(w.w_pos.data()),
          static_cast<std::streamsize>(sizeof(double) * w.w_pos.size()));
  in.read(reinterpret_cast<char*>(w.w_neg.data()),
          static_cast<std::streamsize>(sizeof(double) * w.w_neg.size()));
  if (!in) throw std::runtime_error("truncated checkpoint file: " + path);
  return {std::move(w), step};
}

}  // namespace xorlab
