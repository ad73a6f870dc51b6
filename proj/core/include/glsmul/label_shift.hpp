#ifndef GLSMUL_LABEL_SHIFT_HPP_
#define GLSMUL_LABEL_SHIFT_HPP_

#include "glsmul/numerics.hpp"

#include <span>

namespace glsmul {

/// Black-box shift estimate. `w` holds w_j = p^t_j / p^s_j and satisfies
/// w >= 0, w.p_s = 1; p_t = w o p_s.
struct ShiftEstimate {
  Vector w;
  Vector p_s;
  Vector p_t;
  Matrix confusion;   // joint frequencies C_ij = P_s(Yhat = i, Y = j)
  Vector q_t;         // target prediction frequencies
  double residual = 0.0;  // |q_t - C w|^2 at the returned w
  int iterations = 0;
};

struct PlugInEstimates {
  Vector p_s;
  Vector q_t;
  Matrix confusion;
};

/// Frequencies of source labels, target predictions, and joint
/// (source prediction, source label) pairs.
PlugInEstimates plug_in_estimates(std::span<const int> source_predictions,
                                  std::span<const int> source_labels,
                                  std::span<const int> target_predictions, int num_classes);

struct BbseOptions {
  double tolerance = 1e-10;
  int max_iterations = 100000;
};

/// Raised when projected gradient descent stalls and the active-set solve
/// cannot certify optimality. Carries the best iterate found.
class BbseNonConvergence : public Error {
 public:
  BbseNonConvergence(const std::string& what, ShiftEstimate best)
      : Error(what), best_(std::move(best)) {}
  const ShiftEstimate& best() const { return best_; }

 private:
  ShiftEstimate best_;
};

/// Solves  min |q_t - C w|^2  s.t.  w >= 0, w.p_s = 1  by projected gradient
/// descent (step 1 / |C^T C|_2, exact projection onto the feasible set),
/// followed by an equality-constrained solve on the detected support that is
/// kept only when it satisfies the KKT conditions. Classes with p_s = 0 are
/// fixed at w = 0.
ShiftEstimate bbse_solve(const Vector& q_t, const Matrix& confusion, const Vector& p_s,
                         const BbseOptions& options = {});

/// Plug-in estimates followed by bbse_solve.
ShiftEstimate estimate_shift(std::span<const int> source_predictions,
                             std::span<const int> source_labels,
                             std::span<const int> target_predictions, int num_classes,
                             const BbseOptions& options = {});

/// Euclidean projection of v onto {w >= 0, p.w = 1} for p > 0.
Vector project_onto_weighted_simplex(const Vector& v, const Vector& p);

/// sum_i |p_i - q_i|, in [0, 2] for simplex vectors.
double l1_label_distance(const Vector& p, const Vector& q);

}  // namespace glsmul

#endif  // GLSMUL_LABEL_SHIFT_HPP_
