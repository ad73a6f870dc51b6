#ifndef GLSMUL_KERNELS_HPP_
#define GLSMUL_KERNELS_HPP_

#include "glsmul/numerics.hpp"

#include <optional>
#include <string>
#include <vector>

namespace glsmul {

enum class KernelFamily { gaussian, laplacian, linear };

std::string to_string(KernelFamily family);
KernelFamily parse_kernel_family(const std::string& name);

/// gaussian:  exp(-|a-b|_2^2 / (2 sigma^2))
/// laplacian: exp(-|a-b|_1 / sigma)
/// linear:    <a, b>            (bandwidth ignored)
struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  double bandwidth = 1.0;

  static KernelSpec gaussian(double sigma) { return {KernelFamily::gaussian, sigma}; }
  static KernelSpec laplacian(double sigma) { return {KernelFamily::laplacian, sigma}; }
  static KernelSpec linear() { return {KernelFamily::linear, 1.0}; }

  void validate() const;
  bool operator==(const KernelSpec&) const = default;
};

inline constexpr int kUnlabeled = -1;

/// A domain sample: n rows of d features, optionally labeled. A label of -1
/// marks an unlabeled row.
struct FeatureSet {
  Matrix features;
  std::optional<std::vector<int>> labels;
  int num_classes = 0;

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }
  bool fully_labeled() const;

  /// Throws on NaN features, label count mismatch, or labels outside [-1, c).
  void validate() const;
};

/// K_ij = k(a_i, b_j) over the rows of a and b.
Matrix gram(const Matrix& a, const Matrix& b, const KernelSpec& spec);

/// Median of the n(n-1)/2 pairwise Euclidean distances between rows.
double median_bandwidth(const Matrix& a);

struct GramGradient {
  Matrix grad_a;
  Matrix grad_b;
};

/// Reverse mode of gram(): gradients of sum_ij upstream_ij * K_ij with
/// respect to the rows of a and of b. When a and b are the same matrix the
/// total gradient is grad_a + grad_b. The laplacian derivative at zero
/// coordinate difference is taken as 0.
GramGradient gram_backprop(const Matrix& a, const Matrix& b,
                           const KernelSpec& spec, const Matrix& upstream);

/// Rows e_0, ..., e_{c-1}: the one-hot label encoding.
Matrix one_hot_basis(int num_classes);

}  // namespace glsmul

#endif  // GLSMUL_KERNELS_HPP_
