#include "xorlab/xor_data.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

namespace xorlab {

using json = nlohmann::json;

const char* tag_name(SignalTag t) {
  switch (t) {
    case SignalTag::plus_u: return "+u";
    case SignalTag::minus_u: return "-u";
    case SignalTag::plus_v: return "+v";
    case SignalTag::minus_v: return "-v";
  }
  return "?";
}

SignalTag tag_from_name(const std::string& s) {
  if (s == "+u") return SignalTag::plus_u;
  if (s == "-u") return SignalTag::minus_u;
  if (s == "+v") return SignalTag::plus_v;
  if (s == "-v") return SignalTag::minus_v;
  throw std::invalid_argument("unknown signal tag: " + s);
}

const Vector& XorBasis::signal(SignalTag t) const {
  return (t == SignalTag::plus_u || t == SignalTag::minus_u) ? u : v;
}

Vector XorBasis::signal_value(SignalTag t) const {
  switch (t) {
    case SignalTag::plus_u: return u;
    case SignalTag::minus_u: return -u;
    case SignalTag::plus_v: return v;
    case SignalTag::minus_v: return -v;
  }
  return u;
}

XorBasis build_basis(int d, double mu_norm, double cos_theta, Rng& rng, bool pin_axes) {
  if (d < 2) throw std::invalid_argument("build_basis: d must be >= 2");
  if (!(cos_theta >= 0.0 && cos_theta < 1.0))
    throw std::invalid_argument("build_basis: cos_theta must lie in [0, 1)");
  if (!(mu_norm > 0.0)) throw std::invalid_argument("build_basis: mu_norm must be positive");

  Vector da(d), db(d);
  if (pin_axes) {
    da.setZero(); db.setZero();
    da(0) = 1.0; db(1) = 1.0;
  } else {
    auto draw = [&](Vector& out) {
      for (int k = 0; k < d; ++k) out(k) = rng.normal();
    };
    draw(da);
    double na = da.norm();
    int attempts = 0;
    while (na == 0.0 && ++attempts < 16) { draw(da); na = da.norm(); }
    da /= na;
    for (attempts = 0; attempts < 16; ++attempts) {
      draw(db);
      db -= da * da.dot(db);
      const double nb = db.norm();
      if (nb > 1e-12) { db /= nb; break; }
    }
    if (attempts == 16) throw std::runtime_error("build_basis: degenerate Gram-Schmidt");
  }

  XorBasis basis;
  basis.d = d;
  basis.mu_norm = mu_norm;
  basis.cos_theta = cos_theta;
  basis.a = da * std::sqrt(mu_norm * mu_norm * (1.0 + cos_theta) / 2.0);
  basis.b = db * std::sqrt(mu_norm * mu_norm * (1.0 - cos_theta) / 2.0);
  basis.u = basis.a + basis.b;
  basis.v = basis.a - basis.b;
  return basis;
}

std::pair<SignalTag, int> sample_signal_pair(const XorBasis&, Rng& rng) {
  const SignalTag t = static_cast<SignalTag>(rng.below(4));
  return {t, tag_clean_label(t)};
}

Vector sample_noise(const XorBasis& basis, double sigma_p, Rng& rng) {
  Vector z(basis.d);
  for (int k = 0; k < basis.d; ++k) z(k) = sigma_p * rng.normal();
  z -= basis.a * (z.dot(basis.a) / basis.a.squaredNorm());
  z -= basis.b * (z.dot(basis.b) / basis.b.squaredNorm());
  return z;
}

DataPoint sample_point(const XorBasis& basis, double sigma_p, double flip_p, Rng& rng) {
  DataPoint p;
  auto [tag, y_clean] = sample_signal_pair(basis, rng);
  p.tag = tag;
  p.y_clean = y_clean;
  p.xi = sample_noise(basis, sigma_p, rng);
  p.slot = rng.below(2) == 0 ? 1 : 2;
  const Vector mu = basis.signal_value(tag);
  if (p.slot == 1) { p.patch1 = mu; p.patch2 = p.xi; }
  else             { p.patch1 = p.xi; p.patch2 = mu; }
  p.y = (rng.uniform() < flip_p) ? -y_clean : y_clean;
  return p;
}

Dataset sample_dataset(const XorBasis& basis, const DataConfig& cfg, Rng& rng) {
  if (cfg.n < 1) throw std::invalid_argument("sample_dataset: n must be >= 1");
  if (!(cfg.sigma_p > 0.0)) throw std::invalid_argument("sample_dataset: sigma_p must be positive");
  if (!(cfg.flip_p >= 0.0 && cfg.flip_p < 0.5))
    throw std::invalid_argument("sample_dataset: flip_p must lie in [0, 0.5)");

  Dataset ds;
  ds.cfg = cfg;
  ds.patch1.resize(cfg.n, basis.d);
  ds.patch2.resize(cfg.n, basis.d);
  ds.y.resize(cfg.n);
  ds.y_clean.resize(cfg.n);
  ds.slot.resize(cfg.n);
  ds.tag.resize(cfg.n);
  for (int i = 0; i < cfg.n; ++i) {
    DataPoint p = sample_point(basis, cfg.sigma_p, cfg.flip_p, rng);
    ds.patch1.row(i) = p.patch1.transpose();
    ds.patch2.row(i) = p.patch2.transpose();
    ds.y[i] = p.y;
    ds.y_clean[i] = p.y_clean;
    ds.slot[i] = p.slot;
    ds.tag[i] = p.tag;
  }
  return ds;
}

DataPoint Dataset::point(int i) const {
  DataPoint p;
  p.patch1 = patch1.row(i).transpose();
  p.patch2 = patch2.row(i).transpose();
  p.y = y[i];
  p.y_clean = y_clean[i];
  p.tag = tag[i];
  p.slot = slot[i];
  p.xi = noise_patch(i).transpose();
  return p;
}

namespace {

json vec_to_json(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  json arr = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) arr.push_back(v(k));
  return arr;
}

Vector vec_from_json(const json& arr) {
  Vector v(arr.size());
  for (std::size_t k = 0; k < arr.size(); ++k) v(static_cast<Eigen::Index>(k)) = arr[k].get<double>();
  return v;
}

}  // namespace

void write_dataset_jsonl(const Dataset& ds, const XorBasis& basis, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  json header{{"format", "xorlab-dataset"},
              {"version", 1},
              {"d", basis.d},
              {"n", ds.n()},
              {"sigma_p", ds.cfg.sigma_p},
              {"flip_p", ds.cfg.flip_p},
              {"cos_theta", basis.cos_theta},
              {"mu_norm", basis.mu_norm},
              {"seed", ds.cfg.seed},
              {"a", vec_to_json(basis.a.transpose())},
              {"b", vec_to_json(basis.b.transpose())}};
  out << header.dump() << '\n';
  for (int i = 0; i < ds.n(); ++i) {
    json rec{{"patch1", vec_to_json(ds.patch1.row(i))},
             {"patch2", vec_to_json(ds.patch2.row(i))},
             {"y", ds.y[i]},
             {"y_clean", ds.y_clean[i]},
             {"tag", tag_name(ds.tag[i])},
             {"slot", ds.slot[i]}};
    out << rec.dump() << '\n';
  }
}

std::pair<Dataset, XorBasis> read_dataset_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset file: " + path);
  json header = json::parse(line);
  if (header.at("format") != "xorlab-dataset")
    throw std::runtime_error("not a xorlab dataset file: " + path);

  XorBasis basis;
  basis.d = header.at("d").get<int>();
  basis.mu_norm = header.at("mu_norm").get<double>();
  basis.cos_theta = header.at("cos_theta").get<double>();
  basis.a = vec_from_json(header.at("a"));
  basis.b = vec_from_json(header.at("b"));
  basis.u = basis.a + basis.b;
  basis.v = basis.a - basis.b;

  Dataset ds;
  ds.cfg.n = header.at("n").get<int>();
  ds.cfg.sigma_p = header.at("sigma_p").get<double>();
  ds.cfg.flip_p = header.at("flip_p").get<double>();
  ds.cfg.seed = header.at("seed").get<std::uint64_t>();
  ds.patch1.resize(ds.cfg.n, basis.d);
  ds.patch2.resize(ds.cfg.n, basis.d);
  ds.y.resize(ds.cfg.n);
  ds.y_clean.resize(ds.cfg.n);
  ds.slot.resize(ds.cfg.n);
  ds.tag.resize(ds.cfg.n);
  for (int i = 0; i < ds.cfg.n; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error("truncated dataset file: " + path);
    json rec = json::parse(line);
    ds.patch1.row(i) = vec_from_json(rec.at("patch1")).transpose();
    ds.patch2.row(i) = vec_from_json(rec.at("patch2")).transpose();
    ds.y[i] = rec.at("y").get<int>();
    ds.y_clean[i] = rec.at("y_clean").get<int>();
    ds.tag[i] = tag_from_name(rec.at("tag").get<std::string>());
    ds.slot[i] = rec.at("slot").get<int>();
  }
  return {std::move(ds), std::move(basis)};
}

}  // namespace xorlab
