#include "glsmul/embedding.hpp"

#include "glsmul/random.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace glsmul {

namespace {

void check_label(const CmeOperator& op, int y) {
  if (y < 0 || y >= op.num_classes) {
    throw Error("invalid label " + std::to_string(y) + " for " +
                std::to_string(op.num_classes) + " classes");
  }
}

void check_compatible(const CmeOperator& s, const CmeOperator& t) {
  if (!(s.feature_kernel == t.feature_kernel) || !(s.label_kernel == t.label_kernel)) {
    throw Error("kernel-spec mismatch between operators");
  }
  if (s.num_classes != t.num_classes) {
    throw Error("class-count mismatch between operators");
  }
  if (s.features.cols() != t.features.cols()) {
    throw Error("feature dimension mismatch between operators");
  }
}

// Matrix whose columns are L_y for each query.
Matrix label_columns(const CmeOperator& op, std::span<const int> queries) {
  Matrix cols(op.size(), static_cast<Index>(queries.size()));
  for (std::size_t q = 0; q < queries.size(); ++q) {
    check_label(op, queries[q]);
    cols.col(static_cast<Index>(q)) = op.label_column(queries[q]);
  }
  return cols;
}

Matrix dense_inverse(const CmeOperator& op) {
  const Index n = op.size();
  return solve_spd(op.regularized_label_gram(), Matrix::Identity(n, n));
}

}  // namespace

Vector CmeOperator::label_column(int y) const {
  Vector col(size());
  for (Index i = 0; i < size(); ++i) col(i) = class_gram(labels[static_cast<std::size_t>(i)], y);
  return col;
}

Matrix CmeOperator::label_gram() const {
  const Index n = size();
  Matrix l(n, n);
  for (Index j = 0; j < n; ++j) {
    const int yj = labels[static_cast<std::size_t>(j)];
    for (Index i = 0; i < n; ++i) l(i, j) = class_gram(labels[static_cast<std::size_t>(i)], yj);
  }
  return l;
}

Matrix CmeOperator::regularized_label_gram() const {
  Matrix l = label_gram();
  l.diagonal().array() += regularization_shift();
  return l;
}

std::vector<int> CmeOperator::classes_present() const {
  std::vector<char> seen(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) seen[static_cast<std::size_t>(y)] = 1;
  std::vector<int> out;
  for (int k = 0; k < num_classes; ++k) {
    if (seen[static_cast<std::size_t>(k)]) out.push_back(k);
  }
  return out;
}

CmeOperator fit_cme(const FeatureSet& data, const KernelSpec& feature_kernel,
                    const KernelSpec& label_kernel, double epsilon) {
  data.validate();
  if (!data.fully_labeled()) throw Error("fit_cme: unlabeled samples");
  return fit_cme(data.features, *data.labels, data.num_classes, feature_kernel,
                 label_kernel, epsilon);
}

CmeOperator fit_cme(const Matrix& features, std::span<const int> labels, int num_classes,
                    const KernelSpec& feature_kernel, const KernelSpec& label_kernel,
                    double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error("fit_cme: epsilon must be > 0");
  feature_kernel.validate();
  label_kernel.validate();
  if (static_cast<Index>(labels.size()) != features.rows()) {
    throw Error("fit_cme: label count does not match row count");
  }
  if (features.rows() == 0) throw Error("fit_cme: empty sample");
  require_finite(features, "fit_cme");

  CmeOperator op;
  op.features = features;
  op.labels.assign(labels.begin(), labels.end());
  op.num_classes = num_classes;
  op.feature_kernel = feature_kernel;
  op.label_kernel = label_kernel;
  op.epsilon = epsilon;
  for (int y : op.labels) {
    if (y == kUnlabeled) throw Error("fit_cme: unlabeled samples");
    check_label(op, y);
  }

  const Matrix basis = one_hot_basis(num_classes);
  op.class_gram = gram(basis, basis, label_kernel);

  const std::vector<int> present = op.classes_present();
  const Index c = static_cast<Index>(present.size());
  std::vector<Index> slot(static_cast<std::size_t>(num_classes), -1);
  for (Index k = 0; k < c; ++k) slot[static_cast<std::size_t>(present[static_cast<std::size_t>(k)])] = k;

  Vector counts = Vector::Zero(c);
  for (int y : op.labels) counts(slot[static_cast<std::size_t>(y)]) += 1.0;
  const Vector root = counts.cwiseSqrt();

  Matrix compressed(c, c);
  for (Index a = 0; a < c; ++a) {
    for (Index b = 0; b < c; ++b) {
      compressed(a, b) = root(a) * op.class_gram(present[static_cast<std::size_t>(a)],
                                                 present[static_cast<std::size_t>(b)]) * root(b);
    }
  }
  const EigPair small = sym_eig_truncated(compressed, c);

  // U = Q V with Q_ik = [y_i == k] / sqrt(N_k).
  const Index n = features.rows();
  op.label_factor.vectors.resize(n, c);
  for (Index i = 0; i < n; ++i) {
    const Index k = slot[static_cast<std::size_t>(op.labels[static_cast<std::size_t>(i)])];
    op.label_factor.vectors.row(i) = small.vectors.row(k) / root(k);
  }
  // The label kernel is PSD, so negative eigenvalues are round-off.
  op.label_factor.values = small.values.cwiseMax(0.0);
  return op;
}

Vector apply_regularized_label_inverse(const CmeOperator& op, const Vector& v) {
  if (v.size() != op.size()) throw Error("apply_regularized_label_inverse: length mismatch");
  return apply_regularized_label_inverse(op, Matrix(v)).col(0);
}

Matrix apply_regularized_label_inverse(const CmeOperator& op, const Matrix& v) {
  if (v.rows() != op.size()) throw Error("apply_regularized_label_inverse: length mismatch");
  const double shift = op.regularization_shift();
  const Vector scaled = op.label_factor.values / shift;
  const Vector damp = scaled.cwiseQuotient((scaled.array() + 1.0).matrix());
  const Matrix& u = op.label_factor.vectors;
  Matrix out = v - u * (damp.asDiagonal() * (u.transpose() * v));
  return out / shift;
}

Matrix embedding_coefficients(const CmeOperator& op, std::span<const int> queries,
                              InversePath path) {
  const Matrix cols = label_columns(op, queries);
  if (path == InversePath::naive) {
    return solve_spd(op.regularized_label_gram(), cols);
  }
  return apply_regularized_label_inverse(op, cols);
}

double clamp_mcmd_squared(double value) {
  if (value >= 0.0) return value;
  if (value > -1e-10) return 0.0;
  throw Error("negative MCMD^2 (" + std::to_string(value) + "): broken inputs");
}

Matrix conditional_matrix(const CmeOperator& source, const CmeOperator& target) {
  check_compatible(source, target);
  const Matrix inv_s = dense_inverse(source);
  const Matrix inv_t = (&source == &target) ? inv_s : dense_inverse(target);
  const Matrix k = (&source == &target)
                       ? gram(source.features, source.features, source.feature_kernel)
                       : gram(source.features, target.features, source.feature_kernel);
  return inv_s * k * inv_t;
}

Matrix conditional_block_matrix(const CmeOperator& source, const CmeOperator& target) {
  const Index ns = source.size();
  const Index nt = target.size();
  Matrix block(ns + nt, ns + nt);
  block.topLeftCorner(ns, ns) = conditional_matrix(source, source);
  block.bottomRightCorner(nt, nt) = conditional_matrix(target, target);
  block.topRightCorner(ns, nt) = conditional_matrix(source, target);
  block.bottomLeftCorner(nt, ns) = block.topRightCorner(ns, nt).transpose();
  return block;
}

namespace {

// u^T K(a, b) v, computed over row blocks of a so the full Gram is never held.
Matrix gram_bilinear(const Matrix& a, const Matrix& u, const Matrix& b, const Matrix& v,
                     const KernelSpec& spec) {
  constexpr Index kBlock = 256;
  Matrix out = Matrix::Zero(u.cols(), v.cols());
  for (Index start = 0; start < a.rows(); start += kBlock) {
    const Index len = std::min(kBlock, a.rows() - start);
    const Matrix kv = gram(a.middleRows(start, len), b, spec) * v;
    out.noalias() += u.middleRows(start, len).transpose() * kv;
  }
  return out;
}

}  // namespace

Matrix mcmd_squared_cross_matrix(const CmeOperator& source, const CmeOperator& target,
                                 std::span<const int> qs, std::span<const int> qt,
                                 InversePath path) {
  check_compatible(source, target);
  const auto rows = static_cast<Index>(qs.size());
  const auto cols = static_cast<Index>(qt.size());
  Matrix g_ss, g_tt, g_st;

  if (path == InversePath::naive) {
    const Matrix ls = label_columns(source, qs);
    const Matrix lt = label_columns(target, qt);
    g_ss = ls.transpose() * conditional_matrix(source, source) * ls;
    g_tt = lt.transpose() * conditional_matrix(target, target) * lt;
    g_st = ls.transpose() * conditional_matrix(source, target) * lt;
  } else {
    const Matrix as = embedding_coefficients(source, qs);
    const Matrix at = embedding_coefficients(target, qt);
    const KernelSpec& kz = source.feature_kernel;
    g_ss = gram_bilinear(source.features, as, source.features, as, kz);
    g_tt = gram_bilinear(target.features, at, target.features, at, kz);
    g_st = gram_bilinear(source.features, as, target.features, at, kz);
  }

  Matrix out(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      out(i, j) = clamp_mcmd_squared(g_ss(i, i) + g_tt(j, j) - 2.0 * g_st(i, j));
    }
  }
  return out;
}

double mcmd_squared_cross(const CmeOperator& source, const CmeOperator& target, int yi,
                          int yj, InversePath path) {
  const int qs[] = {yi};
  const int qt[] = {yj};
  return mcmd_squared_cross_matrix(source, target, qs, qt, path)(0, 0);
}

double mcmd_squared_within(const CmeOperator& op, int yi, int yj, InversePath path) {
  check_label(op, yi);
  check_label(op, yj);
  if (yi == yj) return 0.0;
  const Vector diff = op.label_column(yi) - op.label_column(yj);
  if (path == InversePath::naive) {
    return clamp_mcmd_squared(diff.dot(conditional_matrix(op, op) * diff));
  }
  const Vector b = apply_regularized_label_inverse(op, diff);
  const Matrix k = gram(op.features, op.features, op.feature_kernel);
  return clamp_mcmd_squared(b.dot(k * b));
}

RffProjection rff_build(Index input_dim, Index rank, double sigma, std::uint64_t seed) {
  if (!(sigma > 0.0)) throw Error("rff_build: sigma must be > 0");
  if (rank < 1) throw Error("rff_build: rank must be >= 1");
  if (input_dim < 1) throw Error("rff_build: input dimension must be >= 1");
  RffProjection proj;
  proj.seed = seed;
  proj.bandwidth = sigma;
  proj.frequencies.resize(rank, input_dim);
  CounterRng rng(seed, "rff.frequencies");
  for (Index i = 0; i < rank; ++i) {
    for (Index j = 0; j < input_dim; ++j) proj.frequencies(i, j) = rng.normal() / sigma;
  }
  return proj;
}

Matrix rff_features(const RffProjection& proj, const Matrix& a) {
  if (a.cols() != proj.input_dim()) throw Error("rff_features: dimension mismatch");
  const Index r = proj.rank();
  const Matrix phase = proj.frequencies * a.transpose();  // r x n
  const double scale = 1.0 / std::sqrt(static_cast<double>(r));
  Matrix s(2 * r, a.rows());
  s.topRows(r) = scale * phase.array().cos().matrix();
  s.bottomRows(r) = scale * phase.array().sin().matrix();
  return s;
}

Matrix mcmd_squared_cross_matrix_rff(const CmeOperator& source, const CmeOperator& target,
                                     std::span<const int> qs, std::span<const int> qt,
                                     const RffProjection& proj) {
  check_compatible(source, target);
  if (source.feature_kernel.family != KernelFamily::gaussian ||
      source.feature_kernel.bandwidth != proj.bandwidth) {
    throw Error("rff path requires a gaussian feature kernel with matching bandwidth");
  }
  // Approximate embeddings mu = S a live in R^{2r}.
  const Matrix mu_s = rff_features(proj, source.features) * embedding_coefficients(source, qs);
  const Matrix mu_t = rff_features(proj, target.features) * embedding_coefficients(target, qt);
  Matrix out(mu_s.cols(), mu_t.cols());
  for (Index j = 0; j < mu_t.cols(); ++j) {
    for (Index i = 0; i < mu_s.cols(); ++i) out(i, j) = (mu_s.col(i) - mu_t.col(j)).squaredNorm();
  }
  return out;
}

}  // namespace glsmul
