#include "xorlab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

namespace xorlab {

using json = nlohmann::json;

const char* grid_mode_name(GridMode m) {
  switch (m) {
    case GridMode::fix_d_vary_n: return "fix_d_vary_n";
    case GridMode::fix_n_vary_d: return "fix_n_vary_d";
    case GridMode::custom: return "custom";
  }
  return "?";
}

GridMode grid_mode_from_name(const std::string& s) {
  if (s == "fix_d_vary_n") return GridMode::fix_d_vary_n;
  if (s == "fix_n_vary_d") return GridMode::fix_n_vary_d;
  if (s == "custom") return GridMode::custom;
  throw std::invalid_argument("unknown grid mode: " + s);
}

void GridSpec::validate() const {
  if (axis1.empty() || axis2.empty()) throw std::invalid_argument("grid: empty axis");
  for (std::size_t k = 1; k < axis1.size(); ++k)
    if (axis1[k] <= axis1[k - 1]) throw std::invalid_argument("grid: axis1 not increasing");
  for (std::size_t k = 1; k < axis2.size(); ++k)
    if (axis2[k] <= axis2[k - 1]) throw std::invalid_argument("grid: axis2 not increasing");
  if (repeats < 1) throw std::invalid_argument("grid: repeats must be >= 1");
}

double derive_mu_norm(GridMode mode, double axis2, int d, int n, double sigma_p) {
  if (!(axis2 > 0.0)) throw std::invalid_argument("derive_mu_norm: axis2 must be positive");
  const double sp4 = std::pow(sigma_p, 4);
  if (mode == GridMode::fix_d_vary_n) return std::pow(sp4 * d / axis2, 0.25);
  if (mode == GridMode::fix_n_vary_d) return std::pow(axis2 * sp4 / n, 0.25);
  throw std::invalid_argument("derive_mu_norm: custom mode has no derivation");
}

std::uint64_t cell_seed(std::uint64_t base_seed, int i, int j, int repeat) {
  std::uint64_t s = Rng::mix(base_seed, 0x9d1c9e3fULL);
  s = Rng::mix(s, static_cast<std::uint64_t>(i));
  s = Rng::mix(s, static_cast<std::uint64_t>(j));
  s = Rng::mix(s, static_cast<std::uint64_t>(repeat));
  return s;
}

CellResult run_cell(const GridSpec& spec, int i, int j) {
  CellResult cell;
  cell.i = i;
  cell.j = j;
  cell.axis1 = spec.axis1[static_cast<std::size_t>(i)];
  cell.axis2 = spec.axis2[static_cast<std::size_t>(j)];
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const int n = spec.mode == GridMode::fix_n_vary_d ? spec.fixed_n
                                                      : static_cast<int>(std::lround(cell.axis1));
    const int d = spec.mode == GridMode::fix_n_vary_d ? static_cast<int>(std::lround(cell.axis1))
                                                      : spec.fixed_d;
    cell.mu_norm = derive_mu_norm(spec.mode, cell.axis2, d, n, spec.sigma_p);
    double acc = 0.0, loss = 0.0;
    for (int rep = 0; rep < spec.repeats; ++rep) {
      const std::uint64_t seed = cell_seed(spec.base_seed, i, j, rep);
      if (rep == 0) cell.seed = seed;
      Rng rng(seed);
      Rng data_rng = rng.split(1);
      Rng init_rng = rng.split(2);
      Rng test_rng = rng.split(3);  // test stream disjoint from training
      const XorBasis basis = build_basis(d, cell.mu_norm, spec.cos_theta, data_rng);
      const Dataset ds = sample_dataset(basis, {n, spec.sigma_p, spec.flip_p, seed}, data_rng);
      CnnWeights w = init_weights(spec.m, d, spec.sigma_0, init_rng);
      TrainConfig tc;
      tc.eta = spec.eta * n;  // summed-loss convention of the reference protocol
      tc.epochs = spec.epochs;
      tc.early_stop = spec.converge;
      tc.target_eps = spec.target_eps;
      tc.record_every = std::max(1, spec.epochs / 20);
      const TrainTrace trace = train(ds, std::move(w), tc);
      const ErrorEstimate err =
          test_error_mc(trace.weights_final, basis, spec.sigma_p, spec.flip_p, spec.n_test,
                        test_rng);
      acc += err.accuracy();
      loss += trace.last().loss;
    }
    cell.test_accuracy = acc / spec.repeats;
    cell.stderr_ = std::sqrt(cell.test_accuracy * (1.0 - cell.test_accuracy) /
                             (static_cast<double>(spec.n_test) * spec.repeats));
    cell.train_loss_final = loss / spec.repeats;
  } catch (const std::exception& ex) {
    cell.failed = true;
    cell.error = std::string("cell (") + std::to_string(i) + "," + std::to_string(j) +
                 "): " + ex.what();
  }
  cell.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return cell;
}

const CellResult& GridResult::at(int i, int j) const {
  return cells[static_cast<std::size_t>(i) * spec.axis2.size() + static_cast<std::size_t>(j)];
}

GridResult run_grid(const GridSpec& spec, int workers) {
  spec.validate();
  if (workers <= 0) {
    if (const char* env = std::getenv("XORLAB_WORKERS")) workers = std::atoi(env);
    if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers <= 0) workers = 1;
  }
  GridResult out;
  out.spec = spec;
  const int rows = static_cast<int>(spec.axis1.size());
  const int cols = static_cast<int>(spec.axis2.size());
  out.cells.resize(static_cast<std::size_t>(rows) * cols);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int k = next.fetch_add(1);
      if (k >= rows * cols) return;
      out.cells[static_cast<std::size_t>(k)] = run_cell(spec, k / cols, k % cols);
    }
  };
  std::vector<std::thread> pool;
  const int nw = std::min(workers, rows * cols);
  pool.reserve(static_cast<std::size_t>(nw));
  for (int w = 0; w < nw; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return out;
}

std::vector<std::vector<int>> truncate_heatmap(const GridResult& grid, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("truncate_heatmap: threshold must lie in (0, 1)");
  const int rows = static_cast<int>(grid.spec.axis1.size());
  const int cols = static_cast<int>(grid.spec.axis2.size());
  std::vector<std::vector<int>> bin(static_cast<std::size_t>(rows),
                                    std::vector<int>(static_cast<std::size_t>(cols), 0));
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      bin[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          grid.at(i, j).test_accuracy >= threshold ? 1 : 0;
  return bin;
}

void emit_csv(const GridResult& grid, const std::string& path) {
  if (grid.cells.empty()) throw std::invalid_argument("emit_csv: empty grid");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.precision(17);
  out << "mode,i,j,axis1,axis2,mu_norm,accuracy,stderr,train_loss_final,seed\n";
  for (const auto& c : grid.cells) {
    out << grid_mode_name(grid.spec.mode) << ',' << c.i << ',' << c.j << ',' << c.axis1 << ','
        << c.axis2 << ',' << c.mu_norm << ',' << c.test_accuracy << ',' << c.stderr_ << ','
        << c.train_loss_final << ',' << c.seed << '\n';
  }
}

GridResult parse_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty csv: " + path);
  GridResult grid;
  std::vector<double> ax1, ax2;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    CellResult c;
    std::getline(ss, field, ',');
    grid.spec.mode = grid_mode_from_name(field);
    auto next_d = [&]() { std::getline(ss, field, ','); return std::stod(field); };
    c.i = static_cast<int>(next_d());
    c.j = static_cast<int>(next_d());
    c.axis1 = next_d();
    c.axis2 = next_d();
    c.mu_norm = next_d();
    c.test_accuracy = next_d();
    c.stderr_ = next_d();
    c.train_loss_final = next_d();
    std::getline(ss, field, ',');
    c.seed = std::stoull(field);
    ax1.push_back(c.axis1);
    ax2.push_back(c.axis2);
    grid.cells.push_back(c);
  }
  std::sort(ax1.begin(), ax1.end());
  ax1.erase(std::unique(ax1.begin(), ax1.end()), ax1.end());
  std::sort(ax2.begin(), ax2.end());
  ax2.erase(std::unique(ax2.begin(), ax2.end()), ax2.end());
  grid.spec.axis1 = ax1;
  grid.spec.axis2 = ax2;
  std::sort(grid.cells.begin(), grid.cells.end(), [&](const CellResult& a, const CellResult& b) {
    return std::pair(a.i, a.j) < std::pair(b.i, b.j);
  });
  return grid;
}

namespace {

// blue-high / yellow-low, matching the reference figures
std::string heat_color(double v) {
  v = std::clamp(v, 0.0, 1.0);
  const int r = static_cast<int>(255 * (1.0 - v) + 31 * v);
  const int g = static_cast<int>(224 * (1.0 - v) + 119 * v);
  const int b = static_cast<int>(80 * (1.0 - v) + 180 * v);
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

void emit_svg(const GridResult& grid, const std::string& path,
              std::optional<double> truncate_threshold) {
  if (grid.cells.empty()) throw std::invalid_argument("emit_svg: empty grid");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  const int rows = static_cast<int>(grid.spec.axis1.size());
  const int cols = static_cast<int>(grid.spec.axis2.size());
  const int cw = 42, ch = 30, mx = 90, my = 40;
  const int width = mx + cols * cw + 20, height = my + rows * ch + 60;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\">\n";
  out << "  <rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const auto& c = grid.at(i, j);
      double v = c.test_accuracy;
      if (truncate_threshold) v = v >= *truncate_threshold ? 1.0 : 0.0;
      // row 0 (smallest axis1) at the bottom
      const int x = mx + j * cw;
      const int y = my + (rows - 1 - i) * ch;
      out << "  <rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cw << "\" height=\"" << ch
          << "\" fill=\"" << heat_color(v) << "\">"
          << "<title>axis1=" << c.axis1 << " axis2=" << c.axis2 << " acc=" << c.test_accuracy
          << "</title></rect>\n";
    }
  }
  out.precision(3);
  for (int i = 0; i < rows; ++i) {
    out << "  <text x=\"" << mx - 8 << "\" y=\"" << my + (rows - 1 - i) * ch + ch / 2 + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << grid.spec.axis1[static_cast<std::size_t>(i)]
        << "</text>\n";
  }
  for (int j = 0; j < cols; ++j) {
    out << "  <text x=\"" << mx + j * cw + cw / 2 << "\" y=\"" << my + rows * ch + 16
        << "\" text-anchor=\"middle\" font-size=\"11\">" << grid.spec.axis2[static_cast<std::size_t>(j)]
        << "</text>\n";
  }
  const char* xlabel = grid.spec.mode == GridMode::fix_n_vary_d
                           ? "n |mu|^4 / sigma_p^4"
                           : "sigma_p^4 d / |mu|^4";
  const char* ylabel = grid.spec.mode == GridMode::fix_n_vary_d ? "d" : "n";
  out << "  <text x=\"" << mx + cols * cw / 2 << "\" y=\"" << my + rows * ch + 40
      << "\" text-anchor=\"middle\" font-size=\"13\">" << xlabel << "</text>\n";
  out << "  <text x=\"" << 20 << "\" y=\"" << my + rows * ch / 2
      << "\" font-size=\"13\">" << ylabel << "</text>\n";
  out << "</svg>\n";
}

void write_manifest(const GridSpec& spec, const std::string& path) {
  json j{{"format", "xorlab-grid-manifest"},
         {"version", 1},
         {"code_version", "xorlab 0.1.0"},
         {"mode", grid_mode_name(spec.mode)},
         {"axis1", spec.axis1},
         {"axis2", spec.axis2},
         {"fixed_d", spec.fixed_d},
         {"fixed_n", spec.fixed_n},
         {"sigma_p", spec.sigma_p},
         {"flip_p", spec.flip_p},
         {"cos_theta", spec.cos_theta},
         {"m", spec.m},
         {"sigma_0", spec.sigma_0},
         {"eta", spec.eta},
         {"epochs", spec.epochs},
         {"n_test", spec.n_test},
         {"base_seed", spec.base_seed},
         {"repeats", spec.repeats},
         {"converge", spec.converge},
         {"target_eps", spec.target_eps}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
}

GridSpec read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  json j;
  in >> j;
  if (j.at("format") != "xorlab-grid-manifest")
    throw std::runtime_error("not a grid manifest: " + path);
  GridSpec spec;
  spec.mode = grid_mode_from_name(j.at("mode").get<std::string>());
  spec.axis1 = j.at("axis1").get<std::vector<double>>();
  spec.axis2 = j.at("axis2").get<std::vector<double>>();
  spec.fixed_d = j.at("fixed_d").get<int>();
  spec.fixed_n = j.at("fixed_n").get<int>();
  spec.sigma_p = j.at("sigma_p").get<double>();
  spec.flip_p = j.at("flip_p").get<double>();
  spec.cos_theta = j.at("cos_theta").get<double>();
  spec.m = j.at("m").get<int>();
  spec.sigma_0 = j.at("sigma_0").get<double>();
  spec.eta = j.at("eta").get<double>();
  spec.epochs = j.at("epochs").get<int>();
  spec.n_test = j.at("n_test").get<int>();
  spec.base_seed = j.at("base_seed").get<std::uint64_t>();
  spec.repeats = j.at("repeats").get<int>();
  spec.converge = j.at("converge").get<bool>();
  spec.target_eps = j.at("target_eps").get<double>();
  return spec;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("spearman: need two equal-length series");
  auto ranks = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t k = 0; k < n; ++k) idx[k] = k;
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> r(n);
    std::size_t k = 0;
    while (k < n) {
      std::size_t e = k;
      while (e + 1 < n && v[idx[e + 1]] == v[idx[k]]) ++e;
      const double avg = 0.5 * (k + e) + 1.0;  // average rank for ties
      for (std::size_t q = k; q <= e; ++q) r[idx[q]] = avg;
      k = e + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) { ma += ra[k]; mb += rb[k]; }
  ma /= n; mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    sab += (ra[k] - ma) * (rb[k] - mb);
    saa += (ra[k] - ma) * (ra[k] - ma);
    sbb += (rb[k] - mb) * (rb[k] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

BoundaryFit fit_boundary_slope(const GridResult& grid, double threshold) {
  const int rows = static_cast<int>(grid.spec.axis1.size());
  const int cols = static_cast<int>(grid.spec.axis2.size());
  std::vector<std::pair<double, double>> pts;  // (log axis2, log axis1)
  auto lerp_log = [](double lo, double hi, double t) {
    return std::log(lo) + t * (std::log(hi) - std::log(lo));
  };
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i + 1 < rows; ++i) {
      const double a = grid.at(i, j).test_accuracy, b = grid.at(i + 1, j).test_accuracy;
      if ((a - threshold) * (b - threshold) < 0.0) {
        const double t = (threshold - a) / (b - a);
        pts.emplace_back(std::log(grid.spec.axis2[static_cast<std::size_t>(j)]),
                         lerp_log(grid.spec.axis1[static_cast<std::size_t>(i)],
                                  grid.spec.axis1[static_cast<std::size_t>(i + 1)], t));
        break;
      }
    }
  }
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j + 1 < cols; ++j) {
      const double a = grid.at(i, j).test_accuracy, b = grid.at(i, j + 1).test_accuracy;
      if ((a - threshold) * (b - threshold) < 0.0) {
        const double t = (threshold - a) / (b - a);
        pts.emplace_back(lerp_log(grid.spec.axis2[static_cast<std::size_t>(j)],
                                  grid.spec.axis2[static_cast<std::size_t>(j + 1)], t),
                         std::log(grid.spec.axis1[static_cast<std::size_t>(i)]));
        break;
      }
    }
  }
  BoundaryFit fit;
  fit.n_points = static_cast<int>(pts.size());
  if (pts.size() < 3) return fit;
  std::vector<double> slopes;
  for (std::size_t x = 0; x < pts.size(); ++x)
    for (std::size_t y = x + 1; y < pts.size(); ++y) {
      const double dx = pts[y].first - pts[x].first;
      if (std::abs(dx) > 1e-9) slopes.push_back((pts[y].second - pts[x].second) / dx);
    }
  if (slopes.empty()) return fit;
  std::sort(slopes.begin(), slopes.end());
  fit.slope = slopes[slopes.size() / 2];
  if (slopes.size() % 2 == 0)
    fit.slope = 0.5 * (fit.slope + slopes[slopes.size() / 2 - 1]);
  fit.ok = true;
  return fit;
}

}  // namespace xorlab
