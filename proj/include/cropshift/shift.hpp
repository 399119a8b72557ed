#pragma once

// Prior shift adjustment (posterior reweighting by test/train class
// prevalence), feature shift adjustment under the additive region + class
// mean model, their composition, and aggregate-area to prior conversion.

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "cropshift/classify.hpp"
#include "cropshift/priors.hpp"

namespace cropshift {

/// Per-class mean feature vectors estimated on the training region.
struct ClassMeans {
  std::vector<std::string> class_list;
  Eigen::MatrixXd means;  // K x d
};

/// Estimated additive offset of one region relative to the training region.
struct RegionalShift {
  std::string region_id;
  Eigen::VectorXd offset;
};

/// normalize(p_k · test_k / train_k). Vectors are aligned by index.
/// Throws ClassMismatch on length disagreement, ZeroTrainPrior when a
/// training prior is not strictly positive, AllZeroScores when every
/// reweighted score vanishes.
PosteriorVector psa_reweight(const PosteriorVector& p, const Eigen::VectorXd& train_priors,
                             const Eigen::VectorXd& test_priors);

/// Same, with named priors aligned to `class_list`.
PosteriorVector psa_reweight(const PosteriorVector& p, const std::vector<std::string>& class_list,
                             const ClassPriors& train_priors, const ClassPriors& test_priors);

ClassMeans estimate_class_means(const Dataset& train);

/// offset = X̄_r − Σ_k p_{r,k} b̂_k.
RegionalShift estimate_regional_shift(const Eigen::VectorXd& test_feature_mean,
                                      const ClassPriors& test_priors, const ClassMeans& means);

Eigen::VectorXd fsa_transform(const Eigen::Ref<const Eigen::VectorXd>& x, const RegionalShift& shift);

/// Label index of predict(psa_reweight(posteriors(x − offset))).
int fpsa_classify(const TrainedClassifier& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                  const RegionalShift& shift, const Eigen::VectorXd& train_priors,
                  const Eigen::VectorXd& test_priors);

/// Field counts area_k / mean_field_area_k, normalized. Classes with zero
/// area may omit their mean field area.
ClassPriors aggregate_to_priors(const std::string& region_id,
                                const std::map<std::string, double>& areas,
                                const std::map<std::string, double>& mean_field_areas);

/// Counts (or pixel areas) normalized directly.
ClassPriors counts_to_priors(const std::string& region_id, const std::map<std::string, double>& counts);

}  // namespace cropshift
