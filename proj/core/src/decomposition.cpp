#include "xorlab/decomposition.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace xorlab {

DecompTracker::DecompTracker(const XorBasis& basis, const Dataset& ds, const CnnWeights& init)
    : basis_(basis), ds_(ds), m_(init.m) {
  const int n = ds.n();
  xi_.resize(n, ds.d());
  for (int i = 0; i < n; ++i) xi_.row(i) = ds.noise_patch(i);
  gram_ = xi_ * xi_.transpose();
  xi_sq_ = gram_.diagonal();
  init_ip_pos_ = init.w_pos * xi_.transpose();
  init_ip_neg_ = init.w_neg * xi_.transpose();
  table_.t = 0;
  table_.rho_bar_pos = Matrix::Zero(m_, n);
  table_.rho_bar_neg = Matrix::Zero(m_, n);
  table_.rho_under_pos = Matrix::Zero(m_, n);
  table_.rho_under_neg = Matrix::Zero(m_, n);
  init_projs_ = projections(init);
}

StepHook DecompTracker::hook() {
  return [this](const StepInfo& info) { on_step(info); };
}

SignalProjections DecompTracker::projections(const CnnWeights& w) const {
  SignalProjections p;
  p.pos_u = w.w_pos * basis_.u;
  p.pos_v = w.w_pos * basis_.v;
  p.neg_u = w.w_neg * basis_.u;
  p.neg_v = w.w_neg * basis_.v;
  return p;
}

void DecompTracker::on_step(const StepInfo& info) {
  if (info.t != table_.t)
    throw std::runtime_error("DecompTracker: step mismatch between table and trainer");

  const int n = ds_.n();
  SignalProjections now = projections(info.weights);
  now.t = info.t;

  if (pending_.valid && info.t == pending_.t + 1) {
    AuditReport a = audit_against(now);
    audits_.push_back(a);
  }

  const bool already_seen = !acts_.empty() && acts_.back().t == info.t;
  if (info.recorded && !already_seen) {
    ReconstructionReport rec = check_reconstruction(info.weights);
    recon_.push_back(rec);
    projs_.push_back(now);

    ActivationSets sets;
    sets.t = info.t;
    sets.own_noise_active.resize(n, m_);
    for (int i = 0; i < n; ++i) {
      const bool noise_in_1 = ds_.slot[i] == 2;
      const auto& acts1 = ds_.y[i] > 0 ? info.batch.acts_pos1 : info.batch.acts_neg1;
      const auto& acts2 = ds_.y[i] > 0 ? info.batch.acts_pos2 : info.batch.acts_neg2;
      sets.own_noise_active.row(i) =
          (noise_in_1 ? acts1.row(i).array() : acts2.row(i).array()) > 0.0;
    }
    acts_.push_back(std::move(sets));

    // csv row
    CsvRow row;
    row.t = info.t;
    row.max_recon_err = rec.max_rel_error;
    double sum = 0.0;
    long cnt = 0;
    for (const Matrix* rb : {&table_.rho_bar_pos, &table_.rho_bar_neg}) {
      sum += rb->sum();
      cnt += (rb->array() > 0.0).count();
    }
    row.mean_rho_bar = cnt ? sum / cnt : 0.0;
    row.min_rho_under = std::min(table_.rho_under_pos.minCoeff(), table_.rho_under_neg.minCoeff());
    row.sign_violations = sign_persistence().flips;
    csv_.push_back(row);
  }

  if (info.final) return;  // no update follows the final notification

  // stash what the audit of this step's update will need
  pending_.t = info.t;
  pending_.valid = true;
  pending_.lossderiv = info.batch.lossderiv;
  pending_.eta = info.eta;
  pending_.projs = now;
  pending_.sig_active_pos.resize(n, m_);
  pending_.sig_active_neg.resize(n, m_);
  for (int i = 0; i < n; ++i) {
    const bool sig_in_1 = ds_.slot[i] == 1;
    pending_.sig_active_pos.row(i) =
        (sig_in_1 ? info.batch.acts_pos1.row(i).array() : info.batch.acts_pos2.row(i).array()) >
        0.0;
    pending_.sig_active_neg.row(i) =
        (sig_in_1 ? info.batch.acts_neg1.row(i).array() : info.batch.acts_neg2.row(i).array()) >
        0.0;
  }

  update_coefficients(info);
}

void DecompTracker::update_coefficients(const StepInfo& info) {
  const int n = ds_.n();
  const double scale = info.eta / (static_cast<double>(n) * m_);
  for (int i = 0; i < n; ++i) {
    const bool noise_in_1 = ds_.slot[i] == 2;
    const double bump = scale * (-info.batch.lossderiv(i)) * xi_sq_(i);
    const auto& acts_pos = noise_in_1 ? info.batch.acts_pos1 : info.batch.acts_pos2;
    const auto& acts_neg = noise_in_1 ? info.batch.acts_neg1 : info.batch.acts_neg2;
    if (ds_.y[i] > 0) {
      for (int r = 0; r < m_; ++r) {
        if (acts_pos(i, r) > 0.0) table_.rho_bar_pos(r, i) += bump;
        if (acts_neg(i, r) > 0.0) table_.rho_under_neg(r, i) -= bump;
      }
    } else {
      for (int r = 0; r < m_; ++r) {
        if (acts_neg(i, r) > 0.0) table_.rho_bar_neg(r, i) += bump;
        if (acts_pos(i, r) > 0.0) table_.rho_under_pos(r, i) -= bump;
      }
    }
  }
  ++table_.t;
}

double DecompTracker::reconstruct_inner_product(int j, int r, int i) const {
  if (r < 0 || r >= m_ || i < 0 || i >= ds_.n())
    throw std::out_of_range("reconstruct_inner_product: index out of range");
  const Matrix& rb = table_.rho_bar(j);
  const Matrix& ru = table_.rho_under(j);
  const Matrix& init = j > 0 ? init_ip_pos_ : init_ip_neg_;
  double acc = init(r, i);
  for (int k = 0; k < ds_.n(); ++k)
    acc += (rb(r, k) + ru(r, k)) * gram_(k, i) / xi_sq_(k);
  return acc;
}

ReconstructionReport DecompTracker::check_reconstruction(const CnnWeights& live) const {
  ReconstructionReport rep;
  const Vector inv_sq = xi_sq_.cwiseInverse();
  const Vector xi_norm = xi_sq_.cwiseSqrt();
  for (int j : {+1, -1}) {
    const Matrix& w = j > 0 ? live.w_pos : live.w_neg;
    const Matrix& init = j > 0 ? init_ip_pos_ : init_ip_neg_;
    const Matrix rho = table_.rho_bar(j) + table_.rho_under(j);
    const Matrix recon = init + (rho * inv_sq.asDiagonal()) * gram_;
    const Matrix actual = w * xi_.transpose();
    for (int r = 0; r < m_; ++r) {
      const double wn = w.row(r).norm();
      for (int i = 0; i < ds_.n(); ++i) {
        const double denom = std::max(wn * xi_norm(i), 1e-300);
        const double rel = std::abs(recon(r, i) - actual(r, i)) / denom;
        if (rel > rep.max_rel_error) {
          rep.max_rel_error = rel;
          rep.argmax_j = j;
          rep.argmax_r = r;
          rep.argmax_i = i;
        }
      }
    }
  }
  return rep;
}

AuditReport DecompTracker::audit_against(const SignalProjections& now) const {
  // Recompute the projection change over the audited step from the
  // S_{mu,y} cells, the signal-patch indicators, and l' -- independently
  // of the dense gradient path.
  AuditReport rep;
  rep.t = pending_.t;
  const int n = ds_.n();
  const double mu2 = basis_.mu_norm * basis_.mu_norm;
  const double cos = basis_.cos_theta;
  const double base = pending_.eta / (static_cast<double>(n) * m_);

  for (int j : {+1, -1}) {
    const BoolGrid& act = j > 0 ? pending_.sig_active_pos : pending_.sig_active_neg;
    const Vector& prev_u = j > 0 ? pending_.projs.pos_u : pending_.projs.neg_u;
    const Vector& prev_v = j > 0 ? pending_.projs.pos_v : pending_.projs.neg_v;
    const Vector& now_u = j > 0 ? now.pos_u : now.neg_u;
    const Vector& now_v = j > 0 ? now.pos_v : now.neg_v;
    for (int r = 0; r < m_; ++r) {
      double s_main_u = 0.0, s_opp_u = 0.0, s_main_v = 0.0, s_opp_v = 0.0;
      for (int i = 0; i < n; ++i) {
        if (!act(i, r)) continue;
        const double lp = pending_.lossderiv(i);
        const bool is_u = tag_clean_label(ds_.tag[i]) > 0;
        const bool plus = ds_.tag[i] == SignalTag::plus_u || ds_.tag[i] == SignalTag::plus_v;
        const bool label_pos = ds_.y[i] > 0;
        if (is_u) {
          // S_{+u,+1} u S_{-u,-1} drive u; S_{-u,+1} u S_{+u,-1} oppose
          if (plus == label_pos) s_main_u += lp; else s_opp_u += lp;
        } else {
          // S_{+v,-1} u S_{-v,+1} add cos-theta coupling; the others subtract
          if (plus != label_pos) s_main_v += lp; else s_opp_v += lp;
        }
      }
      const double dj = static_cast<double>(j);
      const double pred_u = -base * dj * mu2 * (s_main_u - s_opp_u) +
                            base * dj * mu2 * cos * (s_main_v - s_opp_v);
      const double pred_v = -base * dj * mu2 * cos * (s_main_u - s_opp_u) +
                            base * dj * mu2 * (s_main_v - s_opp_v);
      rep.max_abs_discrepancy =
          std::max(rep.max_abs_discrepancy,
                   std::abs(now_u(r) - prev_u(r) - pred_u));
      rep.max_abs_discrepancy =
          std::max(rep.max_abs_discrepancy,
                   std::abs(now_v(r) - prev_v(r) - pred_v));
    }
  }
  return rep;
}

MonotonicityReport activation_monotonicity(const std::vector<ActivationSets>& history) {
  MonotonicityReport rep;
  if (history.size() < 2) return rep;
  const auto& first = history.front().own_noise_active;
  for (std::size_t k = 1; k < history.size(); ++k) {
    const auto& cur = history[k].own_noise_active;
    const long dropped = (first && !cur).count();
    if (dropped > 0) {
      rep.contained = false;
      rep.containment_violations += dropped;
      if (rep.first_containment_violation < 0)
        rep.first_containment_violation = history[k].t;
    }
    if ((first != cur).any()) rep.equal = false;
  }
  return rep;
}

MonotonicityReport DecompTracker::activation_monotonicity() const {
  return xorlab::activation_monotonicity(acts_);
}

SignPersistenceReport DecompTracker::sign_persistence() const {
  SignPersistenceReport rep;
  if (projs_.empty()) return rep;
  for (int r = 0; r < m_; ++r) {
    double prev_pos = std::abs(init_projs_.pos_u(r));
    double prev_neg = std::abs(init_projs_.neg_v(r));
    for (const auto& p : projs_) {
      if (std::signbit(p.pos_u(r)) != std::signbit(init_projs_.pos_u(r))) ++rep.flips;
      if (std::signbit(p.neg_v(r)) != std::signbit(init_projs_.neg_v(r))) ++rep.flips;
      if (std::abs(p.pos_u(r)) < prev_pos - 1e-12) ++rep.shrinks;
      if (std::abs(p.neg_v(r)) < prev_neg - 1e-12) ++rep.shrinks;
      prev_pos = std::abs(p.pos_u(r));
      prev_neg = std::abs(p.neg_v(r));
    }
  }
  // cross-signal band uses the eta of the audited run when available
  if (pending_.valid) {
    const double mu2 = basis_.mu_norm * basis_.mu_norm;
    const double slack = pending_.eta * mu2 / m_;
    for (int r = 0; r < m_ && rep.cross_signal_ok; ++r) {
      for (const auto& p : projs_) {
        if (std::abs(p.pos_v(r)) > std::abs(init_projs_.pos_v(r)) + slack + 1e-12 ||
            std::abs(p.neg_u(r)) > std::abs(init_projs_.neg_u(r)) + slack + 1e-12) {
          rep.cross_signal_ok = false;
          break;
        }
      }
    }
  }
  return rep;
}

void DecompTracker::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "t,max_reconstruction_error,mean_rho_bar_active,min_rho_under,sign_persistence_violations\n";
  for (const auto& row : csv_) {
    out << row.t << ',' << row.max_recon_err << ',' << row.mean_rho_bar << ','
        << row.min_rho_under << ',' << row.sign_violations << '\n';
  }
}

}  // namespace xorlab
