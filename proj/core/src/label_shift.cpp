#include "glsmul/label_shift.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace glsmul {

namespace {

void count_into(Vector& freq, std::span<const int> values, int num_classes, const char* what) {
  for (int v : values) {
    if (v < 0 || v >= num_classes) {
      throw Error(std::string("plug_in_estimates: ") + what + " out of range");
    }
    freq(v) += 1.0;
  }
  freq /= static_cast<double>(values.size());
}

double residual_of(const Matrix& c, const Vector& q, const Vector& w) {
  return (q - c * w).squaredNorm();
}

// KKT check for min 1/2|Cw - q|^2 s.t. w >= 0, p.w = 1:
//   grad_j + mu p_j = 0 where w_j > 0, and >= 0 where w_j = 0.
bool satisfies_kkt(const Matrix& c, const Vector& q, const Vector& p, const Vector& w,
                   double tol) {
  if ((w.array() < 0.0).any()) return false;
  if (std::abs(w.dot(p) - 1.0) > 1e-9) return false;
  const Vector grad = c.transpose() * (c * w - q);
  double mu_sum = 0.0;
  int active = 0;
  for (Index j = 0; j < w.size(); ++j) {
    if (w(j) > 0.0) {
      mu_sum += -grad(j) / p(j);
      ++active;
    }
  }
  if (active == 0) return false;
  const double mu = mu_sum / active;
  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  for (Index j = 0; j < w.size(); ++j) {
    const double r = grad(j) + mu * p(j);
    if (w(j) > 0.0 ? std::abs(r) > tol * scale : r < -tol * scale) return false;
  }
  return true;
}

// Equality-constrained least squares restricted to `support`.
bool solve_on_support(const Matrix& c, const Vector& q, const Vector& p,
                      const std::vector<Index>& support, Vector& w_out) {
  const auto k = static_cast<Index>(support.size());
  if (k == 0) return false;
  Matrix kkt = Matrix::Zero(k + 1, k + 1);
  Vector rhs(k + 1);
  Matrix ca(c.rows(), k);
  for (Index a = 0; a < k; ++a) ca.col(a) = c.col(support[static_cast<std::size_t>(a)]);
  kkt.topLeftCorner(k, k) = ca.transpose() * ca;
  for (Index a = 0; a < k; ++a) {
    kkt(a, k) = p(support[static_cast<std::size_t>(a)]);
    kkt(k, a) = kkt(a, k);
  }
  rhs.head(k) = ca.transpose() * q;
  rhs(k) = 1.0;
  Eigen::FullPivLU<Matrix> lu(kkt);
  if (!lu.isInvertible()) return false;
  const Vector sol = lu.solve(rhs);
  if (!sol.allFinite()) return false;
  w_out = Vector::Zero(c.cols());
  for (Index a = 0; a < k; ++a) {
    if (sol(a) < 0.0) return false;
    w_out(support[static_cast<std::size_t>(a)]) = sol(a);
  }
  return true;
}

}  // namespace

PlugInEstimates plug_in_estimates(std::span<const int> source_predictions,
                                  std::span<const int> source_labels,
                                  std::span<const int> target_predictions, int num_classes) {
  if (source_predictions.empty() || target_predictions.empty()) {
    throw Error("plug_in_estimates: empty inputs");
  }
  if (source_predictions.size() != source_labels.size()) {
    throw Error("plug_in_estimates: source prediction/label length mismatch");
  }
  PlugInEstimates out;
  out.p_s = Vector::Zero(num_classes);
  out.q_t = Vector::Zero(num_classes);
  out.confusion = Matrix::Zero(num_classes, num_classes);
  count_into(out.p_s, source_labels, num_classes, "source label");
  count_into(out.q_t, target_predictions, num_classes, "target prediction");
  for (std::size_t i = 0; i < source_labels.size(); ++i) {
    const int pred = source_predictions[i];
    if (pred < 0 || pred >= num_classes) throw Error("plug_in_estimates: source prediction out of range");
    out.confusion(pred, source_labels[i]) += 1.0;
  }
  out.confusion /= static_cast<double>(source_labels.size());
  return out;
}

Vector project_onto_weighted_simplex(const Vector& v, const Vector& p) {
  if (v.size() != p.size() || v.size() == 0) throw Error("projection: size mismatch");
  if ((p.array() <= 0.0).any()) throw Error("projection: weights must be positive");
  // w_j = max(0, v_j - theta p_j); coordinate j is active iff theta < v_j / p_j.
  const Index n = v.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return v(a) / p(a) > v(b) / p(b);
  });
  double s1 = 0.0;
  double s2 = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Index j = order[k];
    s1 += p(j) * v(j);
    s2 += p(j) * p(j);
    theta = (s1 - 1.0) / s2;
    const bool last = (k + 1 == order.size());
    const double next = last ? -INFINITY : v(order[k + 1]) / p(order[k + 1]);
    if (theta >= next) break;
  }
  Vector w = (v - theta * p).cwiseMax(0.0);
  const double mass = w.dot(p);
  if (mass > 0.0) w /= mass;
  return w;
}

ShiftEstimate bbse_solve(const Vector& q_t, const Matrix& confusion, const Vector& p_s,
                         const BbseOptions& options) {
  const Index c = p_s.size();
  if (q_t.size() != c || confusion.rows() != c || confusion.cols() != c) {
    throw Error("bbse_solve: shape mismatch");
  }
  require_finite(confusion, "bbse_solve");
  if ((p_s.array() < 0.0).any()) throw Error("bbse_solve: negative source prior");

  std::vector<Index> active;
  for (Index j = 0; j < c; ++j) {
    if (p_s(j) > 0.0) active.push_back(j);
  }
  if (active.empty()) throw Error("bbse_solve: source prior has no mass");
  const auto k = static_cast<Index>(active.size());

  Matrix ca(c, k);
  Vector pa(k);
  for (Index a = 0; a < k; ++a) {
    ca.col(a) = confusion.col(active[static_cast<std::size_t>(a)]);
    pa(a) = p_s(active[static_cast<std::size_t>(a)]);
  }

  const Matrix ctc = ca.transpose() * ca;
  const double lipschitz = sym_eig_truncated(ctc, 1).values(0);
  const Vector ctq = ca.transpose() * q_t;

  Vector w = project_onto_weighted_simplex(Vector::Ones(k), pa);
  bool converged = false;
  int it = 0;
  if (lipschitz <= 0.0) {
    converged = true;  // C = 0: every feasible point is optimal.
  } else {
    const double step = 1.0 / lipschitz;
    for (it = 1; it <= options.max_iterations; ++it) {
      const Vector grad = ctc * w - ctq;
      const Vector next = project_onto_weighted_simplex(w - step * grad, pa);
      const double change = (next - w).cwiseAbs().maxCoeff();
      w = next;
      if (change < options.tolerance) {
        converged = true;
        break;
      }
    }
  }

  // Polish: exact solve on the support found by the iterations.
  std::vector<Index> support;
  for (Index a = 0; a < k; ++a) {
    if (w(a) > 1e-12) support.push_back(a);
  }
  Vector polished;
  if (solve_on_support(ca, q_t, pa, support, polished) &&
      residual_of(ca, q_t, polished) <= residual_of(ca, q_t, w) + 1e-15 &&
      satisfies_kkt(ca, q_t, pa, polished, 1e-9)) {
    w = polished;
    converged = true;
  }

  ShiftEstimate est;
  est.p_s = p_s;
  est.q_t = q_t;
  est.confusion = confusion;
  est.w = Vector::Zero(c);
  for (Index a = 0; a < k; ++a) est.w(active[static_cast<std::size_t>(a)]) = w(a);
  est.w /= est.w.dot(p_s);
  est.p_t = est.w.cwiseProduct(p_s);
  est.residual = residual_of(confusion, q_t, est.w);
  est.iterations = it;
  if (!converged) {
    throw BbseNonConvergence("bbse_solve: no convergence after " +
                                 std::to_string(options.max_iterations) +
                                 " iterations (residual " + std::to_string(est.residual) + ")",
                             est);
  }
  return est;
}

ShiftEstimate estimate_shift(std::span<const int> source_predictions,
                             std::span<const int> source_labels,
                             std::span<const int> target_predictions, int num_classes,
                             const BbseOptions& options) {
  const PlugInEstimates plug =
      plug_in_estimates(source_predictions, source_labels, target_predictions, num_classes);
  return bbse_solve(plug.q_t, plug.confusion, plug.p_s, options);
}

double l1_label_distance(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) throw Error("l1_label_distance: length mismatch");
  return (p - q).cwiseAbs().sum();
}

}  // namespace glsmul
