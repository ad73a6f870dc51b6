#ifndef GLSMUL_EVAL_HPP_
#define GLSMUL_EVAL_HPP_

#include "glsmul/numerics.hpp"

#include <span>

namespace glsmul {

/// Fraction of positions where preds and labels agree.
double accuracy(std::span<const int> preds, std::span<const int> labels);

struct Discriminability {
  double j_b = 0.0;    // between-class scatter
  double j_w = 0.0;    // within-class scatter
  double ratio = 0.0;  // j_b / j_w
};

/// j_b = (1/c) sum_k |mean_k - mean|^2 over the c classes present,
/// j_w = (1/n) sum_i |z_i - mean_{y_i}|^2.
Discriminability discriminability(const Matrix& z, std::span<const int> labels);

/// D(i, j) = |proto^s_i - proto^t_j|^2 where prototypes are class means of
/// rows scaled to unit norm. Entries for a class missing from its domain are
/// NaN.
Matrix prototype_distance_matrix(const Matrix& zs, std::span<const int> ys, const Matrix& zt,
                                 std::span<const int> yt, int num_classes);

struct PriorError {
  double linf = 0.0;
  double l1 = 0.0;
};

PriorError prior_error(const Vector& p_hat, const Vector& p_true);

struct MetricsReport {
  double accuracy = 0.0;
  double j_b = 0.0;
  double j_w = 0.0;
  double discriminability = 0.0;
  double prior_error_linf = 0.0;
  double prior_error_l1 = 0.0;
  Matrix d_st;
};

}  // namespace glsmul

#endif  // GLSMUL_EVAL_HPP_
