#ifndef GLSMUL_OBJECTIVES_HPP_
#define GLSMUL_OBJECTIVES_HPP_

#include "glsmul/kernels.hpp"
#include "glsmul/numerics.hpp"

#include <optional>
#include <span>
#include <vector>

namespace glsmul {

/// A loss value with its gradients. An empty (0 x 0) feature gradient means
/// the loss does not depend on that input.
struct LossBundle {
  double value = 0.0;
  Matrix grad_source;   // n_s x d
  Matrix grad_target;   // n_t x d
  std::optional<Matrix> grad_logits;  // n_s x c
  /// Classes with positive target prior that were left out of the transfer
  /// term because one of the domains had no sample of them.
  std::vector<int> skipped_classes;
};

/// Label-shift correction weights: w(y) = p^t_y / p^s_y per class and the
/// target prior itself.
struct ClassWeights {
  Vector importance;
  Vector target_prior;

  static ClassWeights uniform(int num_classes);
  void validate() const;
};

/// Kernels and regularization shared by the discrepancy terms.
struct DiscrepancyConfig {
  KernelSpec feature_kernel = KernelSpec::gaussian(1.0);
  KernelSpec label_kernel = KernelSpec::gaussian(1.0);
  double epsilon = 1e-3;
  int num_classes = 0;
};

/// Decision-uncertainty term: sum over ordered pairs of distinct conditions
/// of the within-domain MCMD^2. Target rows with a label other than -1 in
/// `target_labels` are appended to the source sample with those labels held
/// constant. Gradients flow through the feature kernel only; the
/// regularized label inverse is a function of the labels and carries none.
LossBundle loss_du(const Matrix& source_z, std::span<const int> source_labels,
                   const Matrix& target_z, std::span<const int> target_labels,
                   const DiscrepancyConfig& config);

/// Transfer-uncertainty term: sum_k p_t[k] * MCMD^2(P^s_{Z|k}, P^t_{Z|k}),
/// with the target conditional estimated from the rows of target_z whose
/// pseudo-label is not -1.
LossBundle loss_tu(const Matrix& source_z, std::span<const int> source_labels,
                   const Matrix& target_z, std::span<const int> target_labels,
                   const Vector& target_prior, const DiscrepancyConfig& config);

/// Importance-weighted softmax cross-entropy, averaged over samples.
LossBundle loss_e(const Matrix& logits, std::span<const int> labels,
                  const ClassWeights& weights);

struct MulInputs {
  const Matrix& source_z;
  std::span<const int> source_labels;
  const Matrix& source_logits;
  const Matrix& target_z;
  std::span<const int> target_tu_labels;
  std::span<const int> target_du_labels;
  const ClassWeights& weights;
  const DiscrepancyConfig& config;
};

/// J_E + lambda_tu * J_TU - lambda_du * J_DU. A term with a zero coefficient
/// is not evaluated.
struct MulLoss {
  LossBundle total;
  double j_e = 0.0;
  double j_tu = 0.0;
  double j_du = 0.0;
};

MulLoss loss_mul(const MulInputs& inputs, double lambda_tu, double lambda_du);

}  // namespace glsmul

#endif  // GLSMUL_OBJECTIVES_HPP_
