#ifndef GLSMUL_MODEL_HPP_
#define GLSMUL_MODEL_HPP_

#include "glsmul/kernels.hpp"
#include "glsmul/label_shift.hpp"
#include "glsmul/numerics.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace glsmul {

enum class Activation : std::uint32_t { identity = 0, tanh = 1 };

/// y = act(x W^T + b) applied row-wise; weight is out x in.
struct AffineLayer {
  Matrix weight;
  Vector bias;
  Activation activation = Activation::identity;

  Index in_dim() const { return weight.cols(); }
  Index out_dim() const { return weight.rows(); }
};

struct Architecture {
  Index input_dim = 0;
  std::vector<Index> hidden = {256};
  Index embedding_dim = 64;
  int num_classes = 0;
};

/// Transformation G (affine layers, tanh between them, linear output) and
/// classifier F (one affine layer producing logits). Gradients use the same
/// type.
struct MulParams {
  std::vector<AffineLayer> transform;
  AffineLayer classifier;

  /// Weights and biases uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  static MulParams initialize(const Architecture& arch, std::uint64_t seed);

  Index input_dim() const;
  Index embedding_dim() const;
  int num_classes() const;
  Index parameter_count() const;

  /// All weights then biases, layer by layer, classifier last.
  Vector flatten() const;
  void assign(const Vector& flat);
  /// Zero-valued copy with the same shapes.
  MulParams zeros_like() const;

  /// Throws if shapes do not chain or a parameter is non-finite.
  void validate() const;
};

struct ForwardPass {
  std::vector<Matrix> activations;  // activations[0] = X, activations[l+1] = layer l output
  Matrix z;
  Matrix logits;
};

ForwardPass forward(const MulParams& params, const Matrix& x);

/// Parameter gradients for upstream gradients on Z and (optionally) logits.
MulParams backward(const MulParams& params, const ForwardPass& pass, const Matrix& grad_z,
                   const Matrix* grad_logits);

Matrix softmax_rows(const Matrix& logits);

/// Row-wise argmax, ties to the lowest index.
std::vector<int> argmax_rows(const Matrix& logits);

struct PseudoLabels {
  std::vector<Index> indices;
  std::vector<int> labels;

  /// Length-n vector with the selected labels and -1 elsewhere.
  std::vector<int> dense(Index n) const;
};

/// Rows whose maximum softmax probability is strictly above tau, labeled by
/// argmax.
PseudoLabels pseudo_label(const Matrix& logits, double tau);

enum class TuTargets { all, confident };

struct TrainConfig {
  double lambda_tu = 1.0;
  double lambda_du = 0.01;
  double epsilon = 1e-3;
  /// When set, epsilon = m^{-alpha} with m = max(n_s, n_t).
  std::optional<double> epsilon_exponent;
  double tau = 0.8;
  double learning_rate = 0.5;
  int pretrain_epochs = 200;
  int adapt_epochs = 50;
  std::uint64_t seed = 0;
  KernelFamily feature_kernel = KernelFamily::gaussian;
  /// Fixed feature-kernel bandwidth; median heuristic on pooled Z when unset.
  std::optional<double> feature_bandwidth;
  KernelSpec label_kernel = KernelSpec::gaussian(1.0);
  std::vector<Index> hidden = {256};
  Index embedding_dim = 64;
  int max_halvings = 20;
  /// Pseudo-labeled target rows join J_DU once J_DU changed by less than
  /// stability_tolerance (relative) over stability_window epochs.
  int stability_window = 5;
  double stability_tolerance = 0.01;
  /// Target rows used to estimate the target conditionals in J_TU: every row
  /// labeled by argmax, or only rows above tau.
  TuTargets tu_targets = TuTargets::all;

  void validate() const;
};

enum class Stage { pretrain, adapt };

struct EpochRecord {
  int epoch = 0;  // 1-based, counted across both stages
  Stage stage = Stage::pretrain;
  double j_e = 0.0;
  double j_tu = 0.0;
  double j_du = 0.0;
  double acc_s = 0.0;
  double acc_t = 0.0;  // NaN without oracle labels
  int n_pseudo = 0;
  double step = 0.0;   // accepted step size, 0 when every halving was rejected
  double bandwidth = 0.0;
  Vector w;
  Vector p_t;
};

struct TrainTrace {
  std::vector<EpochRecord> epochs;
};

/// Evaluation-only view of the target: the training loops use it to fill
/// acc_t in the trace and never read it otherwise.
struct TargetMonitor {
  const Matrix& features;
  std::span<const int> oracle_labels;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, TrainTrace partial)
      : Error(what), partial_(std::move(partial)) {}
  const TrainTrace& partial_trace() const { return partial_; }

 private:
  TrainTrace partial_;
};

struct PretrainResult {
  MulParams params;
  TrainTrace trace;
};

/// Full-batch gradient descent on the unweighted cross-entropy of the source.
PretrainResult pretrain(const MulParams& params, const FeatureSet& source,
                        const TrainConfig& config,
                        const std::optional<TargetMonitor>& monitor = std::nullopt,
                        int first_epoch = 1);

struct AdaptResult {
  MulParams params;
  std::vector<ShiftEstimate> shifts;  // estimate used in each epoch
  ShiftEstimate final_shift;          // estimate from the final parameters
  TrainTrace trace;
};

/// Adaptation stage: per epoch, re-estimate importance weights and target
/// prior by BBSE on hard predictions, select pseudo-labels, then take one
/// line-searched gradient step on J_MUL with those quantities held fixed.
/// `target` must carry no labels.
AdaptResult adapt(const MulParams& params, const FeatureSet& source, const FeatureSet& target,
                  const TrainConfig& config,
                  const std::optional<TargetMonitor>& monitor = std::nullopt,
                  int first_epoch = 1);

/// Binary checkpoint: magic "GLSMULCK", format version, layer count, then
/// per layer (out, in, activation) and little-endian IEEE-754 weights
/// (row-major) and biases. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const MulParams& params);
MulParams load_checkpoint(const std::string& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace glsmul

#endif  // GLSMUL_MODEL_HPP_
