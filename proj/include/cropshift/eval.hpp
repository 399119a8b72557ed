#pragma once

// Confusion matrices and accuracy metrics, the train-on-one / test-on-rest
// transfer harness, group-aware cross-validated oracle accuracy, and the
// Shannon entropy of a class distribution.

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cropshift/baselines.hpp"
#include "cropshift/classify.hpp"
#include "cropshift/priors.hpp"

namespace cropshift {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::vector<std::string> class_list;
  CountMatrix counts;

  explicit ConfusionMatrix(std::vector<std::string> classes = {});
  std::int64_t total() const { return counts.sum(); }
  std::int64_t trace() const { return counts.trace(); }
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix& other) const;
};

ConfusionMatrix confusion(const std::vector<std::string>& true_labels,
                          const std::vector<std::string>& predicted_labels,
                          const std::vector<std::string>& class_list);

/// Index-based variant; entries equal to kUnlabeled in `true_labels` are skipped.
ConfusionMatrix confusion(const std::vector<int>& true_labels, const std::vector<int>& predicted_labels,
                          const std::vector<std::string>& class_list);

/// Ratios that are 0/0 are empty optionals. F1 is 2·TP / (row + column),
/// which equals the harmonic mean of producer's and user's accuracy when
/// both exist; an undefined F1 adds 0 to the macro average.
struct MetricsReport {
  double overall_accuracy = 0.0;
  std::vector<std::optional<double>> producers_accuracy;  // recall
  std::vector<std::optional<double>> users_accuracy;      // precision
  std::vector<std::optional<double>> f1;
  double macro_f1 = 0.0;
};

MetricsReport metrics(const ConfusionMatrix& cm);

/// −Σ π ln π in nats, with 0 ln 0 = 0.
double shannon_entropy(const Eigen::VectorXd& proportions);
double shannon_entropy(const ClassPriors& priors);

// ---------------------------------------------------------------------------
// Transfer experiments

enum class Method { Gmc, Uat, Psa, Fsa, Fpsa, SmotePsa, ZtFpsa, ZtSmoteFpsa };

inline constexpr Method kAllMethods[] = {Method::Gmc,  Method::Uat,      Method::Psa,
                                         Method::Fsa,  Method::Fpsa,     Method::SmotePsa,
                                         Method::ZtFpsa, Method::ZtSmoteFpsa};

std::string_view to_string(Method method);
/// Accepts the lower-case tags ("gmc", "uat", ..., "zt-smote-fpsa").
Method parse_method(std::string_view tag);
bool uses_priors(Method method);

struct ExperimentConfig {
  ClassifierConfig classifier;
  int smote_k = kDefaultSmoteK;
  int workers = 1;  // concurrent target regions; never changes results
};

struct ExperimentResult {
  std::string train_region;
  Method method = Method::Uat;
  std::uint64_t seed = 0;
  std::map<std::string, ConfusionMatrix> per_region;
  std::map<std::string, std::vector<int>> predictions;  // every row, in dataset order
  std::map<std::string, MetricsReport> region_metrics;  // regions with labeled points
  ConfusionMatrix aggregate;
  MetricsReport aggregate_metrics;
};

/// Trains on `train_region` and evaluates on every other region. Corrections
/// (priors, shifts, SMOTE, z-statistics) are recomputed per target region;
/// the base classifier is fitted once unless the method refits per target.
ExperimentResult run_transfer_experiment(const std::map<std::string, Dataset>& regions,
                                         const std::string& train_region, Method method,
                                         const std::map<std::string, ClassPriors>& priors,
                                         const ExperimentConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Oracle cross-validation

struct CvResult {
  std::int64_t correct = 0;
  std::int64_t total = 0;
  double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

/// Fold index per row (-1 for unlabeled rows). Groups (group_ids, or single
/// rows when absent) are shuffled by `seed` and dealt round-robin.
std::vector<int> assign_folds(const Dataset& data, int folds, std::uint64_t seed);

/// Pooled k-fold accuracy of the configured classifier within one dataset.
CvResult oracle_cv(const Dataset& data, int folds, std::uint64_t seed, const ClassifierConfig& config);

/// oracle_cv for every region; region r uses a stream derived from (seed, r).
std::map<std::string, CvResult> oracle_cv_by_region(const std::map<std::string, Dataset>& regions,
                                                    int folds, std::uint64_t seed,
                                                    const ClassifierConfig& config);

/// Size-weighted mean CV accuracy over every region except `train_region`.
double oracle_aggregate(const std::map<std::string, CvResult>& by_region, const std::string& train_region);

}  // namespace cropshift
