#include "glsmul/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace glsmul {

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::gaussian:
      return "gaussian";
    case KernelFamily::laplacian:
      return "laplacian";
    case KernelFamily::linear:
      return "linear";
  }
  return "unknown";
}

KernelFamily parse_kernel_family(const std::string& name) {
  if (name == "gaussian") return KernelFamily::gaussian;
  if (name == "laplacian") return KernelFamily::laplacian;
  if (name == "linear") return KernelFamily::linear;
  throw Error("unknown kernel family '" + name + "'");
}

void KernelSpec::validate() const {
  if (family != KernelFamily::linear && !(bandwidth > 0.0 && std::isfinite(bandwidth))) {
    throw Error("kernel bandwidth must be positive");
  }
}

bool FeatureSet::fully_labeled() const {
  if (!labels) return false;
  return std::none_of(labels->begin(), labels->end(),
                      [](int y) { return y == kUnlabeled; });
}

void FeatureSet::validate() const {
  if (features.hasNaN()) throw Error("FeatureSet: NaN features");
  if (!labels) return;
  if (static_cast<Index>(labels->size()) != features.rows()) {
    throw Error("FeatureSet: label count does not match row count");
  }
  for (int y : *labels) {
    if (y < kUnlabeled || y >= num_classes) {
      throw Error("FeatureSet: label " + std::to_string(y) + " outside [-1, " +
                  std::to_string(num_classes) + ")");
    }
  }
}

namespace {

// Squared Euclidean distances via |a|^2 + |b|^2 - 2 a.b, clamped at zero.
// For a == b the result is mirrored so it is exactly symmetric with a zero
// diagonal.
Matrix squared_distances(const Matrix& a, const Matrix& b) {
  const bool same = (&a == &b);
  const Vector na = a.rowwise().squaredNorm();
  const Vector nb = same ? na : Vector(b.rowwise().squaredNorm());
  Matrix d = -2.0 * (a * b.transpose());
  d.colwise() += na;
  d.rowwise() += nb.transpose();
  d = d.cwiseMax(0.0);
  if (same) {
    for (Index j = 0; j < d.cols(); ++j) {
      d(j, j) = 0.0;
      for (Index i = j + 1; i < d.rows(); ++i) d(j, i) = d(i, j);
    }
  }
  return d;
}

void check_dims(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw Error("gram: dimension mismatch (" + std::to_string(a.cols()) + " vs " +
                std::to_string(b.cols()) + ")");
  }
}

}  // namespace

Matrix gram(const Matrix& a, const Matrix& b, const KernelSpec& spec) {
  spec.validate();
  check_dims(a, b);
  switch (spec.family) {
    case KernelFamily::gaussian: {
      const double scale = -0.5 / (spec.bandwidth * spec.bandwidth);
      return (squared_distances(a, b) * scale).array().exp().matrix();
    }
    case KernelFamily::laplacian: {
      Matrix k(a.rows(), b.rows());
      const double inv = 1.0 / spec.bandwidth;
      for (Index j = 0; j < b.rows(); ++j) {
        for (Index i = 0; i < a.rows(); ++i) {
          k(i, j) = std::exp(-(a.row(i) - b.row(j)).lpNorm<1>() * inv);
        }
      }
      return k;
    }
    case KernelFamily::linear:
      return a * b.transpose();
  }
  throw Error("gram: unknown kernel family");
}

double median_bandwidth(const Matrix& a) {
  const Index n = a.rows();
  if (n < 2) throw Error("median_bandwidth: need at least 2 samples");
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      dist.push_back((a.row(i) - a.row(j)).norm());
    }
  }
  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  double median = dist[mid];
  if (dist.size() % 2 == 0) {
    const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (lower + median);
  }
  if (!(median > 0.0)) {
    // Happens when more than half of the pairs coincide.
    throw Error("median_bandwidth: degenerate bandwidth");
  }
  return median;
}

GramGradient gram_backprop(const Matrix& a, const Matrix& b,
                           const KernelSpec& spec, const Matrix& upstream) {
  spec.validate();
  check_dims(a, b);
  if (upstream.rows() != a.rows() || upstream.cols() != b.rows()) {
    throw Error("gram_backprop: upstream shape mismatch");
  }
  GramGradient g;
  switch (spec.family) {
    case KernelFamily::gaussian: {
      // d/da_i sum_j P_ij = -(1/s^2) sum_j P_ij (a_i - b_j), P = U o K.
      const double inv_s2 = 1.0 / (spec.bandwidth * spec.bandwidth);
      const Matrix p = upstream.cwiseProduct(gram(a, b, spec));
      const Vector row_sums = p.rowwise().sum();
      const Vector col_sums = p.colwise().sum().transpose();
      g.grad_a = inv_s2 * (p * b - row_sums.asDiagonal() * a);
      g.grad_b = inv_s2 * (p.transpose() * a - col_sums.asDiagonal() * b);
      return g;
    }
    case KernelFamily::laplacian: {
      const double inv = 1.0 / spec.bandwidth;
      g.grad_a = Matrix::Zero(a.rows(), a.cols());
      g.grad_b = Matrix::Zero(b.rows(), b.cols());
      for (Index j = 0; j < b.rows(); ++j) {
        for (Index i = 0; i < a.rows(); ++i) {
          const Eigen::RowVectorXd diff = a.row(i) - b.row(j);
          const double p = upstream(i, j) * std::exp(-diff.lpNorm<1>() * inv) * inv;
          if (p == 0.0) continue;
          const Eigen::RowVectorXd sign = diff.unaryExpr(
              [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
          g.grad_a.row(i) -= p * sign;
          g.grad_b.row(j) += p * sign;
        }
      }
      return g;
    }
    case KernelFamily::linear:
      g.grad_a = upstream * b;
      g.grad_b = upstream.transpose() * a;
      return g;
  }
  throw Error("gram_backprop: unknown kernel family");
}

Matrix one_hot_basis(int num_classes) {
  return Matrix::Identity(num_classes, num_classes);
}

}  // namespace glsmul
