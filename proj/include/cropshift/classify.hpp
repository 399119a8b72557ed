#pragma once

// Base classifiers with per-class posterior outputs: linear discriminant
// analysis (Gaussian mixture with pooled covariance) and a random forest
// whose posteriors are tree-vote proportions.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cropshift/priors.hpp"

namespace cropshift {

inline constexpr int kUnlabeled = -1;

/// Posterior scores aligned with a class list.
using PosteriorVector = Eigen::VectorXd;

struct Dataset {
  Eigen::MatrixXd features;              // N x d
  std::vector<int> labels;               // index into class_list, or kUnlabeled
  std::vector<std::string> regions;      // N
  std::vector<std::string> class_list;
  std::vector<std::string> group_ids;    // empty, or N
  std::vector<std::string> pixel_ids;    // empty, or N

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
  int num_classes() const { return static_cast<int>(class_list.size()); }

  /// Checks shapes, label range and finiteness; throws InvalidParams.
  void validate() const;
  bool fully_labeled() const;
  /// Labeled points per class.
  std::vector<std::size_t> class_counts() const;
  Dataset subset(std::span<const Eigen::Index> rows) const;
  /// Mean over all rows, labeled or not.
  Eigen::VectorXd feature_mean() const;
};

/// Row-wise concatenation; class lists must match.
Dataset concatenate(const std::vector<const Dataset*>& parts);

/// Empirical class frequencies of the labeled points.
ClassPriors empirical_priors(const Dataset& data, const std::string& region_id = {});

/// Argmax with ties resolved to the lowest index.
int argmax_index(const Eigen::Ref<const Eigen::VectorXd>& scores);

/// Index of the predicted class for a posterior vector.
inline int predict_label(const PosteriorVector& p) { return argmax_index(p); }

/// Name of the predicted class.
std::string predict_label(const PosteriorVector& p, const std::vector<std::string>& class_list);

// ---------------------------------------------------------------------------
// LDA

inline constexpr double kDefaultRidge = 1e-6;

class LdaModel {
 public:
  /// Builds a model from explicit parameters (means K x d, covariance d x d,
  /// priors length K). Used for fitting and for injecting known parameters.
  static LdaModel from_parameters(std::vector<std::string> class_list, Eigen::MatrixXd means,
                                  Eigen::MatrixXd covariance, Eigen::VectorXd priors);

  const std::vector<std::string>& class_list() const { return class_list_; }
  const Eigen::MatrixXd& class_means() const { return means_; }
  const Eigen::MatrixXd& covariance() const { return covariance_; }
  const Eigen::VectorXd& train_priors() const { return priors_; }
  Eigen::Index dim() const { return means_.cols(); }

  /// ln prior_k - ½ (x - μ_k)ᵀ Σ⁻¹ (x - μ_k) for every class.
  Eigen::VectorXd log_scores(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  PosteriorVector posteriors(const Eigen::Ref<const Eigen::VectorXd>& x) const;

 private:
  std::vector<std::string> class_list_;
  Eigen::MatrixXd means_;
  Eigen::MatrixXd covariance_;
  Eigen::VectorXd priors_;
  Eigen::VectorXd log_priors_;
  Eigen::LLT<Eigen::MatrixXd> factor_;
  Eigen::MatrixXd whitened_means_;  // L⁻¹ μ_k as columns
};

/// Class means, pooled within-class covariance / (N - K) plus
/// ridge · mean(diag) · I, and empirical priors.
LdaModel lda_fit(const Dataset& data, double ridge = kDefaultRidge);

PosteriorVector lda_posteriors(const LdaModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

// ---------------------------------------------------------------------------
// Random forest

struct ForestParams {
  int n_trees = 100;
  int features_per_split = 0;  // 0 means ceil(sqrt(d))
  int min_leaf = 1;
  int max_depth = 0;           // 0 means unlimited
  std::uint64_t seed = 0;
};

struct TreeNode {
  int feature = -1;  // -1 for a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int majority = 0;
  std::vector<int> counts;  // leaves only
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const TreeNode& leaf_for(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  int vote(const Eigen::Ref<const Eigen::VectorXd>& x) const { return leaf_for(x).majority; }
};

struct ForestModel {
  ForestParams params;
  std::vector<std::string> class_list;
  Eigen::Index n_features = 0;
  Eigen::VectorXd train_priors;
  std::vector<DecisionTree> trees;

  PosteriorVector posteriors(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

/// Bagged CART trees with Gini splits and per-node feature subsampling.
/// Tree t draws from an RNG stream derived from (seed, t), so `workers`
/// changes wall-clock time only.
ForestModel rf_fit(const Dataset& data, const ForestParams& params, int workers = 1);

PosteriorVector rf_posteriors(const ForestModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

// ---------------------------------------------------------------------------
// Uniform handle over the two base classifiers

enum class ClassifierKind { Lda, RandomForest };

struct ClassifierConfig {
  ClassifierKind kind = ClassifierKind::Lda;
  double ridge = kDefaultRidge;
  ForestParams forest;
  int workers = 1;
};

class TrainedClassifier {
 public:
  explicit TrainedClassifier(LdaModel model) : model_(std::move(model)) {}
  explicit TrainedClassifier(ForestModel model) : model_(std::move(model)) {}

  const std::vector<std::string>& class_list() const;
  const Eigen::VectorXd& train_priors() const;
  Eigen::Index dim() const;
  PosteriorVector posteriors(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  int predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return argmax_index(posteriors(x));
  }

  const std::variant<LdaModel, ForestModel>& model() const { return model_; }

 private:
  std::variant<LdaModel, ForestModel> model_;
};

TrainedClassifier fit_classifier(const Dataset& data, const ClassifierConfig& config);

/// Fits on the classes that actually occur in `data` and widens the
/// posteriors back to the full class list (absent classes score 0).
/// Used inside cross-validation folds where a rare class may be missing.
class PartialClassifier {
 public:
  PartialClassifier(const Dataset& data, const ClassifierConfig& config);
  PosteriorVector posteriors(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  int predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return argmax_index(posteriors(x));
  }

 private:
  std::vector<int> present_;  // local index -> full index
  int num_classes_ = 0;
  std::optional<TrainedClassifier> inner_;  // absent when one class is present
};

}  // namespace cropshift
