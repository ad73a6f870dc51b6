#ifndef GLSMUL_EMBEDDING_HPP_
#define GLSMUL_EMBEDDING_HPP_

#include "glsmul/kernels.hpp"
#include "glsmul/numerics.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace glsmul {

/// Empirical uncentered conditional embedding C = Phi Lreg^{-1} Psi^T with
/// Lreg = eps * n * I + L, held in factored form.
///
/// The label Gram L is never stored densely. Since labels are discrete,
/// L = E G E^T where E is the n x c' class indicator of the c' classes present
/// and G the c' x c' label-kernel matrix between one-hot codes. The rank-c'
/// factor L = U diag(D) U^T is obtained from the eigendecomposition of the
/// c' x c' matrix N^{1/2} G N^{1/2} (N = class counts), so fitting costs
/// O(n c' + c'^3).
struct CmeOperator {
  Matrix features;              // n x d
  std::vector<int> labels;      // n entries in [0, num_classes)
  int num_classes = 0;
  KernelSpec feature_kernel;
  KernelSpec label_kernel;
  double epsilon = 1e-3;
  Matrix class_gram;            // num_classes x num_classes, k_Y(e_i, e_j)
  EigPair label_factor;         // U is n x c', D has c' nonnegative entries

  Index size() const { return features.rows(); }
  double regularization_shift() const { return epsilon * static_cast<double>(size()); }

  /// L_y: entry i is k_Y(y_i, y).
  Vector label_column(int y) const;
  /// Dense n x n label Gram. Quadratic memory; used by the naive path.
  Matrix label_gram() const;
  /// Dense eps*n*I + L.
  Matrix regularized_label_gram() const;
  std::vector<int> classes_present() const;
};

CmeOperator fit_cme(const FeatureSet& data, const KernelSpec& feature_kernel,
                    const KernelSpec& label_kernel, double epsilon);

CmeOperator fit_cme(const Matrix& features, std::span<const int> labels, int num_classes,
                    const KernelSpec& feature_kernel, const KernelSpec& label_kernel,
                    double epsilon);

/// Lreg^{-1} v by the Woodbury identity,
///   Lreg^{-1} = (eps n)^{-1} [I - U Dbar (Dbar + I)^{-1} U^T],  Dbar = D / (eps n),
/// in O(n c') per column.
Vector apply_regularized_label_inverse(const CmeOperator& op, const Vector& v);
Matrix apply_regularized_label_inverse(const CmeOperator& op, const Matrix& v);

/// Woodbury is the production path. Naive forms Lreg densely and inverts it
/// (cubic); it exists as a test oracle and for benchmarking.
enum class InversePath { woodbury, naive };

/// Columns a_y = Lreg^{-1} L_y, one per queried label, so that the empirical
/// conditional mean embedding is mu_{Z|y} = Phi a_y.
Matrix embedding_coefficients(const CmeOperator& op, std::span<const int> queries,
                              InversePath path = InversePath::woodbury);

/// Squared MCMD between P^s_{Z|yi} and P^t_{Z|yj}:
///   a_s^T K^ss a_s + a_t^T K^tt a_t - 2 a_s^T K^st a_t.
double mcmd_squared_cross(const CmeOperator& source, const CmeOperator& target, int yi,
                          int yj, InversePath path = InversePath::woodbury);

/// Squared MCMD between two conditions of one domain:
///   (L_yi - L_yj)^T Lreg^{-1} K Lreg^{-1} (L_yi - L_yj).
double mcmd_squared_within(const CmeOperator& op, int yi, int yj,
                           InversePath path = InversePath::woodbury);

/// Entry (i, j) is mcmd_squared_cross(source, target, qs[i], qt[j]).
/// The naive path builds M^{st} = Lreg_s^{-1} K^{st} Lreg_t^{-1} explicitly.
Matrix mcmd_squared_cross_matrix(const CmeOperator& source, const CmeOperator& target,
                                 std::span<const int> qs, std::span<const int> qt,
                                 InversePath path = InversePath::woodbury);

/// Conditional matrix M^{st}_R = Lreg_s^{-1} K^{st} Lreg_t^{-1}, dense.
Matrix conditional_matrix(const CmeOperator& source, const CmeOperator& target);

/// 2x2 block conditional matrix [[M^ss, M^st], [M^ts, M^tt]].
Matrix conditional_block_matrix(const CmeOperator& source, const CmeOperator& target);

/// Maps small negative round-off (> -1e-10) to zero; throws on anything lower.
double clamp_mcmd_squared(double value);

/// Random Fourier features for the gaussian kernel. Frequencies are drawn
/// from N(0, sigma^{-2} I). Each frequency w contributes the pair
/// (cos(w.z), sin(w.z)) / sqrt(r), so the feature map has 2r rows and
/// s(z).s(z) = 1 exactly.
struct RffProjection {
  Matrix frequencies;  // r x d
  std::uint64_t seed = 0;
  double bandwidth = 1.0;

  Index rank() const { return frequencies.rows(); }
  Index input_dim() const { return frequencies.cols(); }
};

RffProjection rff_build(Index input_dim, Index rank, double sigma, std::uint64_t seed);

/// S with one column per row of `a`: a (2r) x n matrix, K ~= S^T S.
Matrix rff_features(const RffProjection& proj, const Matrix& a);

/// Cross MCMD^2 matrix with K^{st} replaced by S_s^T S_t. Linear in n for
/// fixed r.
Matrix mcmd_squared_cross_matrix_rff(const CmeOperator& source, const CmeOperator& target,
                                     std::span<const int> qs, std::span<const int> qt,
                                     const RffProjection& proj);

}  // namespace glsmul

#endif  // GLSMUL_EMBEDDING_HPP_
