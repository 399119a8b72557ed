#pragma once

// Comparison methods: SMOTE rebalancing to target priors, per-region
// z-transformation, the pipelines built from them, and guess-major-class.

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "cropshift/classify.hpp"
#include "cropshift/priors.hpp"

namespace cropshift {

inline constexpr int kDefaultSmoteK = 5;

/// Largest-remainder apportionment of `total` by `priors`; remainder ties go
/// to the lowest class index.
std::vector<std::size_t> target_counts(const Eigen::VectorXd& priors, std::size_t total);

/// Where a resampled row came from. Retained originals have
/// `neighbor == -1` and `u == 0`; synthetic rows are
/// source + u · (neighbor − source).
struct SmoteOrigin {
  Eigen::Index source = -1;
  Eigen::Index neighbor = -1;
  double u = 0.0;

  bool synthetic() const { return neighbor >= 0; }
};

struct SmoteResult {
  Dataset data;
  std::vector<SmoteOrigin> origins;  // one per output row
  std::vector<std::size_t> targets;  // per class
};

/// Rebalances `train` to `target_priors` keeping its size: surplus classes are
/// undersampled without replacement, deficit classes are topped up with
/// SMOTE interpolants between a member and one of its k nearest same-class
/// neighbors. Throws SmoteInfeasible when a class with positive target prior
/// has at most k members.
SmoteResult smote_resample(const Dataset& train, const ClassPriors& target_priors, int k,
                           std::uint64_t seed);

struct ZTransform {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;           // population convention (divide by N)
  std::vector<bool> degenerate;     // zero-variance features map to 0

  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// Inverse on non-degenerate features; degenerate ones return the mean.
  Eigen::VectorXd invert(const Eigen::Ref<const Eigen::VectorXd>& z) const;
  Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& rows) const;
};

ZTransform ztransform_fit(const Eigen::MatrixXd& rows);
inline ZTransform ztransform_fit(const Dataset& data) { return ztransform_fit(data.features); }
inline Eigen::VectorXd ztransform_apply(const ZTransform& zt, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return zt.apply(x);
}

/// Index of the largest prior (lowest index on ties).
int major_class_classify(const Eigen::VectorXd& test_priors);
std::string major_class_classify(const ClassPriors& test_priors, const std::vector<std::string>& class_list);

struct PipelineInput {
  const Dataset& train;
  const Dataset& test;           // labels unused
  const ClassPriors& test_priors;
  ClassifierConfig classifier;
  int smote_k = kDefaultSmoteK;
  std::uint64_t seed = 0;
};

/// Rebalance with SMOTE, fit, predict by plain argmax.
std::vector<int> pipeline_smote_psa(const PipelineInput& in);
/// z-transform train and test independently, fit, reweight posteriors.
std::vector<int> pipeline_zt_fpsa(const PipelineInput& in);
/// Rebalance, z-transform both sets independently, fit, plain argmax.
std::vector<int> pipeline_zt_smote_fpsa(const PipelineInput& in);

}  // namespace cropshift
