#ifndef GLSMUL_DATAGEN_HPP_
#define GLSMUL_DATAGEN_HPP_

#include "glsmul/kernels.hpp"
#include "glsmul/numerics.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace glsmul {

struct ClassConditional {
  Vector mean;
  Matrix covariance;
};

/// Gaussian class-conditionals and class priors for both domains.
struct GlsScenario {
  std::string name;
  std::vector<ClassConditional> source;
  std::vector<ClassConditional> target;
  Vector source_prior;
  Vector target_prior;
  Index n_source = 0;
  Index n_target = 0;
  std::uint64_t seed = 0;

  int num_classes() const { return static_cast<int>(source.size()); }
  Index dim() const { return source.empty() ? 0 : source.front().mean.size(); }

  /// Throws on inconsistent class counts or dimensions, priors off the
  /// simplex, or covariances that are not SPD.
  void validate() const;
};

/// Named scenarios: "null", "g1", "g2".
GlsScenario named_scenario(const std::string& name, std::uint64_t seed);
std::vector<std::string> scenario_names();

struct GlsSample {
  FeatureSet source;  // labeled
  FeatureSet target;  // unlabeled; the labels live in target_oracle only
  std::vector<int> target_oracle;
  Vector source_prior_empirical;
  Vector target_prior_empirical;
  /// Per-class target mean minus source mean.
  Matrix mean_shift;
};

/// Labels drawn i.i.d. from the priors, features from the class conditionals
/// (Cholesky factor times standard normals). Deterministic given the seed.
GlsSample synth_gls(const GlsScenario& scenario);

/// Reads the feature CSV format: header f0,...,f{d-1},label, then one row per
/// sample. A label of -1 marks an unlabeled row; a file whose labels are all
/// -1 yields a FeatureSet without labels. num_classes is 1 + the largest label
/// unless `num_classes` is positive.
FeatureSet load_features(const std::string& path, int num_classes = 0);

/// Writes the same format with %.17g values, so load(save(x)) is bit-exact.
/// Rows of `labels_override` (when non-null) replace the set's own labels.
void save_features(const std::string& path, const FeatureSet& set,
                   const std::vector<int>* labels_override = nullptr);

}  // namespace glsmul

#endif  // GLSMUL_DATAGEN_HPP_
