#include "glsmul/objectives.hpp"

#include "glsmul/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace glsmul {

namespace {

struct Selection {
  std::vector<Index> rows;
  std::vector<int> labels;
};

Selection select_labeled(std::span<const int> labels, Index expected_rows, int num_classes) {
  if (static_cast<Index>(labels.size()) != expected_rows) {
    throw Error("target label vector does not match target rows");
  }
  Selection sel;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kUnlabeled) continue;
    if (labels[i] < 0 || labels[i] >= num_classes) throw Error("pseudo-label out of range");
    sel.rows.push_back(static_cast<Index>(i));
    sel.labels.push_back(labels[i]);
  }
  return sel;
}

Matrix gather_rows(const Matrix& m, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = m.row(rows[r]);
  return out;
}

void scatter_add_rows(Matrix& dst, const Matrix& src, const std::vector<Index>& rows) {
  for (std::size_t r = 0; r < rows.size(); ++r) dst.row(rows[r]) += src.row(static_cast<Index>(r));
}

void check_source(const Matrix& z, std::span<const int> labels, int num_classes) {
  if (static_cast<Index>(labels.size()) != z.rows()) {
    throw Error("source label vector does not match source rows");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw Error("source label out of range");
  }
}

std::vector<int> present_classes(std::span<const int> labels, int num_classes) {
  std::vector<char> seen(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) {
    if (y >= 0) seen[static_cast<std::size_t>(y)] = 1;
  }
  std::vector<int> out;
  for (int k = 0; k < num_classes; ++k) {
    if (seen[static_cast<std::size_t>(k)]) out.push_back(k);
  }
  return out;
}

}  // namespace

ClassWeights ClassWeights::uniform(int num_classes) {
  ClassWeights w;
  w.importance = Vector::Ones(num_classes);
  w.target_prior = Vector::Constant(num_classes, 1.0 / num_classes);
  return w;
}

void ClassWeights::validate() const {
  if (importance.size() != target_prior.size()) throw Error("ClassWeights: size mismatch");
  if ((importance.array() < 0.0).any()) throw Error("ClassWeights: negative importance weight");
  if ((target_prior.array() < 0.0).any() || std::abs(target_prior.sum() - 1.0) > 1e-10) {
    throw Error("ClassWeights: target prior is not a simplex vector");
  }
}

LossBundle loss_du(const Matrix& source_z, std::span<const int> source_labels,
                   const Matrix& target_z, std::span<const int> target_labels,
                   const DiscrepancyConfig& config) {
  check_source(source_z, source_labels, config.num_classes);
  if (present_classes(source_labels, config.num_classes).size() < 2) {
    throw Error("degenerate DU: fewer than two classes in the source");
  }
  const Selection sel = select_labeled(target_labels, target_z.rows(), config.num_classes);

  const Index ns = source_z.rows();
  const Index nsel = static_cast<Index>(sel.rows.size());
  Matrix z(ns + nsel, source_z.cols());
  z.topRows(ns) = source_z;
  if (nsel > 0) z.bottomRows(nsel) = gather_rows(target_z, sel.rows);
  std::vector<int> labels(source_labels.begin(), source_labels.end());
  labels.insert(labels.end(), sel.labels.begin(), sel.labels.end());

  const CmeOperator op = fit_cme(z, labels, config.num_classes, config.feature_kernel,
                                 config.label_kernel, config.epsilon);
  const std::vector<int> conditions = op.classes_present();
  const double q = static_cast<double>(conditions.size());
  const Matrix a = embedding_coefficients(op, conditions);
  const Matrix k = gram(op.features, op.features, config.feature_kernel);
  const Matrix g = a.transpose() * k * a;

  // sum_{i != j} (a_i - a_j)^T K (a_i - a_j) = 2q tr(G) - 2 1^T G 1.
  LossBundle out;
  double value = 0.0;
  for (Index i = 0; i < g.rows(); ++i) {
    for (Index j = 0; j < g.cols(); ++j) {
      if (i != j) value += clamp_mcmd_squared(g(i, i) + g(j, j) - 2.0 * g(i, j));
    }
  }
  out.value = value;

  const Vector a_sum = a.rowwise().sum();
  const Matrix upstream = 2.0 * q * (a * a.transpose()) - 2.0 * (a_sum * a_sum.transpose());
  const GramGradient gg = gram_backprop(op.features, op.features, config.feature_kernel, upstream);
  const Matrix grad = gg.grad_a + gg.grad_b;

  out.grad_source = grad.topRows(ns);
  out.grad_target = Matrix::Zero(target_z.rows(), target_z.cols());
  if (nsel > 0) scatter_add_rows(out.grad_target, grad.bottomRows(nsel), sel.rows);
  return out;
}

LossBundle loss_tu(const Matrix& source_z, std::span<const int> source_labels,
                   const Matrix& target_z, std::span<const int> target_labels,
                   const Vector& target_prior, const DiscrepancyConfig& config) {
  check_source(source_z, source_labels, config.num_classes);
  if (target_prior.size() != config.num_classes || (target_prior.array() < 0.0).any() ||
      std::abs(target_prior.sum() - 1.0) > 1e-10) {
    throw Error("loss_tu: target prior is not a simplex vector");
  }
  const Selection sel = select_labeled(target_labels, target_z.rows(), config.num_classes);

  const std::vector<int> in_source = present_classes(source_labels, config.num_classes);
  const std::vector<int> in_target = present_classes(sel.labels, config.num_classes);
  LossBundle out;
  std::vector<int> used;
  for (int k = 0; k < config.num_classes; ++k) {
    if (target_prior(k) <= 0.0) continue;
    const bool s = std::binary_search(in_source.begin(), in_source.end(), k);
    const bool t = std::binary_search(in_target.begin(), in_target.end(), k);
    if (s && t) {
      used.push_back(k);
    } else {
      out.skipped_classes.push_back(k);
    }
  }
  if (used.empty()) {
    throw Error("degenerate TU: no class with positive prior is represented in both domains");
  }

  const Matrix zt = gather_rows(target_z, sel.rows);
  const CmeOperator op_s = fit_cme(source_z, source_labels, config.num_classes,
                                   config.feature_kernel, config.label_kernel, config.epsilon);
  const CmeOperator op_t = fit_cme(zt, sel.labels, config.num_classes, config.feature_kernel,
                                   config.label_kernel, config.epsilon);
  const Matrix a_s = embedding_coefficients(op_s, used);
  const Matrix a_t = embedding_coefficients(op_t, used);
  const KernelSpec& kz = config.feature_kernel;
  const Matrix k_ss = gram(op_s.features, op_s.features, kz);
  const Matrix k_tt = gram(op_t.features, op_t.features, kz);
  const Matrix k_st = gram(op_s.features, op_t.features, kz);

  Vector weight(static_cast<Index>(used.size()));
  for (std::size_t i = 0; i < used.size(); ++i) weight(static_cast<Index>(i)) = target_prior(used[i]);

  double value = 0.0;
  for (Index i = 0; i < weight.size(); ++i) {
    const double ss = a_s.col(i).dot(k_ss * a_s.col(i));
    const double tt = a_t.col(i).dot(k_tt * a_t.col(i));
    const double st = a_s.col(i).dot(k_st * a_t.col(i));
    value += weight(i) * clamp_mcmd_squared(ss + tt - 2.0 * st);
  }
  out.value = value;

  const auto p = weight.asDiagonal();
  const Matrix w_ss = a_s * p * a_s.transpose();
  const Matrix w_tt = a_t * p * a_t.transpose();
  const Matrix w_st = -2.0 * (a_s * p * a_t.transpose());
  const GramGradient g_ss = gram_backprop(op_s.features, op_s.features, kz, w_ss);
  const GramGradient g_tt = gram_backprop(op_t.features, op_t.features, kz, w_tt);
  const GramGradient g_st = gram_backprop(op_s.features, op_t.features, kz, w_st);

  out.grad_source = g_ss.grad_a + g_ss.grad_b + g_st.grad_a;
  out.grad_target = Matrix::Zero(target_z.rows(), target_z.cols());
  scatter_add_rows(out.grad_target, g_tt.grad_a + g_tt.grad_b + g_st.grad_b, sel.rows);
  return out;
}

LossBundle loss_e(const Matrix& logits, std::span<const int> labels,
                  const ClassWeights& weights) {
  const Index n = logits.rows();
  const Index c = logits.cols();
  if (static_cast<Index>(labels.size()) != n) throw Error("loss_e: label count mismatch");
  if (weights.importance.size() != c) throw Error("loss_e: weight vector length mismatch");
  if (n == 0) throw Error("loss_e: empty batch");
  require_finite(logits, "loss_e");

  LossBundle out;
  Matrix grad(n, c);
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= c) throw Error("loss_e: label out of range");
    const double top = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - top).exp().matrix();
    const double z = e.sum();
    const double lse = top + std::log(z);
    const double w = weights.importance(y);
    total += w * (lse - logits(i, y));
    grad.row(i) = (w * inv_n / z) * e;
    grad(i, y) -= w * inv_n;
  }
  out.value = total * inv_n;
  out.grad_logits = std::move(grad);
  return out;
}

MulLoss loss_mul(const MulInputs& in, double lambda_tu, double lambda_du) {
  MulLoss out;
  LossBundle e = loss_e(in.source_logits, in.source_labels, in.weights);
  out.j_e = e.value;
  out.total.value = e.value;
  out.total.grad_logits = std::move(e.grad_logits);
  out.total.grad_source = Matrix::Zero(in.source_z.rows(), in.source_z.cols());
  out.total.grad_target = Matrix::Zero(in.target_z.rows(), in.target_z.cols());

  if (lambda_tu != 0.0) {
    LossBundle tu = loss_tu(in.source_z, in.source_labels, in.target_z, in.target_tu_labels,
                            in.weights.target_prior, in.config);
    out.j_tu = tu.value;
    out.total.value += lambda_tu * tu.value;
    out.total.grad_source += lambda_tu * tu.grad_source;
    out.total.grad_target += lambda_tu * tu.grad_target;
    out.total.skipped_classes = std::move(tu.skipped_classes);
  }
  if (lambda_du != 0.0) {
    const LossBundle du = loss_du(in.source_z, in.source_labels, in.target_z,
                                  in.target_du_labels, in.config);
    out.j_du = du.value;
    out.total.value -= lambda_du * du.value;
    out.total.grad_source -= lambda_du * du.grad_source;
    out.total.grad_target -= lambda_du * du.grad_target;
  }
  return out;
}

}  // namespace glsmul
