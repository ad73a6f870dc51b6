#include "glsmul/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace glsmul {

namespace {

int class_count(std::span<const int> labels) {
  int c = 0;
  for (int y : labels) {
    if (y < 0) throw Error("eval: negative label");
    c = std::max(c, y + 1);
  }
  return c;
}

// Class means of the rows; counts returned alongside.
Matrix class_means(const Matrix& z, std::span<const int> labels, int c, std::vector<Index>& counts) {
  Matrix means = Matrix::Zero(c, z.cols());
  counts.assign(static_cast<std::size_t>(c), 0);
  for (Index i = 0; i < z.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= c) throw Error("eval: label out of range");
    means.row(y) += z.row(i);
    ++counts[static_cast<std::size_t>(y)];
  }
  for (int k = 0; k < c; ++k) {
    if (counts[static_cast<std::size_t>(k)] > 0) {
      means.row(k) /= static_cast<double>(counts[static_cast<std::size_t>(k)]);
    }
  }
  return means;
}

Matrix unit_rows(const Matrix& z) {
  Matrix out = z;
  for (Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (norm > 0.0) out.row(i) /= norm;
  }
  return out;
}

}  // namespace

double accuracy(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) throw Error("accuracy: length mismatch");
  if (preds.empty()) throw Error("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

Discriminability discriminability(const Matrix& z, std::span<const int> labels) {
  if (static_cast<Index>(labels.size()) != z.rows()) throw Error("discriminability: length mismatch");
  const int c = class_count(labels);
  std::vector<Index> counts;
  const Matrix means = class_means(z, labels, c, counts);
  int present = 0;
  for (Index n_k : counts) present += n_k > 0;
  if (present < 2) throw Error("discriminability: need at least two classes");
  const Eigen::RowVectorXd grand = z.colwise().mean();

  Discriminability out;
  for (int k = 0; k < c; ++k) {
    if (counts[static_cast<std::size_t>(k)] > 0) out.j_b += (means.row(k) - grand).squaredNorm();
  }
  out.j_b /= present;
  for (Index i = 0; i < z.rows(); ++i) {
    out.j_w += (z.row(i) - means.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
  }
  out.j_w /= static_cast<double>(z.rows());
  if (!(out.j_w > 0.0)) throw Error("discriminability: within-class scatter is zero");
  out.ratio = out.j_b / out.j_w;
  return out;
}

Matrix prototype_distance_matrix(const Matrix& zs, std::span<const int> ys, const Matrix& zt,
                                 std::span<const int> yt, int num_classes) {
  if (static_cast<Index>(ys.size()) != zs.rows() || static_cast<Index>(yt.size()) != zt.rows()) {
    throw Error("prototype_distance_matrix: length mismatch");
  }
  if (zs.cols() != zt.cols()) throw Error("prototype_distance_matrix: dimension mismatch");
  std::vector<Index> ns;
  std::vector<Index> nt;
  const Matrix ps = class_means(unit_rows(zs), ys, num_classes, ns);
  const Matrix pt = class_means(unit_rows(zt), yt, num_classes, nt);
  Matrix d(num_classes, num_classes);
  for (int i = 0; i < num_classes; ++i) {
    for (int j = 0; j < num_classes; ++j) {
      d(i, j) = (ns[static_cast<std::size_t>(i)] == 0 || nt[static_cast<std::size_t>(j)] == 0)
                    ? std::numeric_limits<double>::quiet_NaN()
                    : (ps.row(i) - pt.row(j)).squaredNorm();
    }
  }
  return d;
}

PriorError prior_error(const Vector& p_hat, const Vector& p_true) {
  if (p_hat.size() != p_true.size()) throw Error("prior_error: length mismatch");
  const Vector diff = (p_hat - p_true).cwiseAbs();
  return {diff.size() ? diff.maxCoeff() : 0.0, diff.sum()};
}

}  // namespace glsmul
