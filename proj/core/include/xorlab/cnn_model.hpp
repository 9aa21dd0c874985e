#pragma once

#include <Eigen/Dense>
#include <string>

#include "xorlab/xor_data.hpp"

namespace xorlab {

// Two-layer ReLU CNN with fixed second layer:
//   f(W, x) = F_{+1} - F_{-1},  F_j = (1/m) sum_{r,p} relu(<w_{j,r}, x^(p)>).
struct CnnWeights {
  int m = 0;
  double sigma_0 = 0.0;
  Matrix w_pos;  // m x d, rows are w_{+1,r}
  Matrix w_neg;  // m x d, rows are w_{-1,r}

  int d() const { return static_cast<int>(w_pos.cols()); }
};

struct CnnGradient {
  Matrix g_pos, g_neg;
};

// Activations of one input under every filter. f_value is recomputable
// from the activation values; active_* use the strict > 0 convention.
struct ForwardTrace {
  double f_value = 0.0;
  Matrix acts_pos;  // m x 2, column p-1 holds <w_{+1,r}, x^(p)>
  Matrix acts_neg;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> active_pos, active_neg;
};

// Batched activations for a whole dataset; the trainer's workhorse.
struct BatchForward {
  Matrix acts_pos1, acts_pos2;  // n x m: <w_{+1,r}, patch1/2_i>
  Matrix acts_neg1, acts_neg2;
  Vector f;        // n
  Vector margins;  // y_i * f_i
  Vector lossderiv;  // l'(y_i f_i), each in (-1, 0)
  double loss = 0.0;  // (1/n) sum l(y_i f_i)
};

CnnWeights init_weights(int m, int d, double sigma_0, Rng& rng);

ForwardTrace forward(const CnnWeights& w, const Vector& patch1, const Vector& patch2);
inline ForwardTrace forward(const CnnWeights& w, const DataPoint& p) {
  return forward(w, p.patch1, p.patch2);
}

BatchForward forward_batch(const CnnWeights& w, const Dataset& ds);

// Raw network output for a batch of two-patch inputs (rows of x1/x2).
Vector forward_values(const CnnWeights& w, const Matrix& x1, const Matrix& x2);

// Numerically stable log(1 + exp(-z)).
double logistic_loss(double z);

// l'(z) = -1/(1 + exp(z)), always in (-1, 0).
double loss_derivative(double z);

// dL/dw_{j,r} = (1/(nm)) sum_i l'_i (j y_i) sum_p 1{<w_{j,r}, x_i^(p)> > 0} x_i^(p)
// for the mean loss L = (1/n) sum_i l(y_i f(W, x_i)).
CnnGradient full_gradient(const CnnWeights& w, const Dataset& ds);
CnnGradient gradient_from_forward(const CnnWeights& w, const Dataset& ds, const BatchForward& bf);

double training_loss(const CnnWeights& w, const Dataset& ds);

// Binary checkpoint; layout documented in docs/formats.md.
void save_checkpoint(const CnnWeights& w, std::uint64_t step, const std::string& path);
std::pair<CnnWeights, std::uint64_t> load_checkpoint(const std::string& path);

}  // namespace xorlab
