#include "cropshift/shift.hpp"

#include <cmath>

#include "cropshift/error.hpp"

namespace cropshift {

PosteriorVector psa_reweight(const PosteriorVector& p, const Eigen::VectorXd& train_priors,
                             const Eigen::VectorXd& test_priors) {
  if (p.size() != train_priors.size() || p.size() != test_priors.size() || p.size() == 0) {
    throw Error(ErrorCode::ClassMismatch, "posterior and prior vectors have different lengths");
  }
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (!(train_priors(k) > 0.0)) {
      throw Error(ErrorCode::ZeroTrainPrior,
                  "class " + std::to_string(k) + " has no training prevalence");
    }
  }
  Eigen::VectorXd scores = p.cwiseProduct(test_priors).cwiseQuotient(train_priors);
  const double total = scores.sum();
  if (!(total > 0.0)) throw Error(ErrorCode::AllZeroScores, "every reweighted posterior is zero");
  return scores / total;
}

PosteriorVector psa_reweight(const PosteriorVector& p, const std::vector<std::string>& class_list,
                             const ClassPriors& train_priors, const ClassPriors& test_priors) {
  // A test class the training set never saw is the zero-prior case.
  for (const auto& name : test_priors.classes) {
    bool in_train = false;
    for (const auto& t : train_priors.classes) in_train = in_train || t == name;
    if (!in_train && test_priors.at(name) > 0.0) {
      throw Error(ErrorCode::ZeroTrainPrior, "class '" + name + "' is absent from training");
    }
  }
  const Eigen::VectorXd train = train_priors.aligned(class_list);
  return psa_reweight(p, train, test_priors.aligned(class_list));
}

ClassMeans estimate_class_means(const Dataset& train) {
  const auto k = train.num_classes();
  const auto counts = train.class_counts();
  ClassMeans out{train.class_list, Eigen::MatrixXd::Zero(k, train.dim())};
  for (int c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) {
      throw Error(ErrorCode::EmptyClass,
                  "class '" + train.class_list[static_cast<std::size_t>(c)] + "' has no training samples");
    }
  }
  for (Eigen::Index i = 0; i < train.size(); ++i) {
    const int label = train.labels[static_cast<std::size_t>(i)];
    if (label == kUnlabeled) throw Error(ErrorCode::UnlabeledData, "class means need labels");
    out.means.row(label) += train.features.row(i);
  }
  for (int c = 0; c < k; ++c) out.means.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
  return out;
}

RegionalShift estimate_regional_shift(const Eigen::VectorXd& test_feature_mean,
                                      const ClassPriors& test_priors, const ClassMeans& means) {
  const Eigen::VectorXd p = test_priors.aligned(means.class_list);
  if (test_feature_mean.size() != means.means.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "test feature mean has the wrong dimension");
  }
  return {test_priors.region_id, test_feature_mean - means.means.transpose() * p};
}

Eigen::VectorXd fsa_transform(const Eigen::Ref<const Eigen::VectorXd>& x, const RegionalShift& shift) {
  if (x.size() != shift.offset.size()) {
    throw Error(ErrorCode::DimensionMismatch, "feature vector and shift have different lengths");
  }
  return x - shift.offset;
}

int fpsa_classify(const TrainedClassifier& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                  const RegionalShift& shift, const Eigen::VectorXd& train_priors,
                  const Eigen::VectorXd& test_priors) {
  return predict_label(psa_reweight(model.posteriors(fsa_transform(x, shift)), train_priors, test_priors));
}

ClassPriors counts_to_priors(const std::string& region_id, const std::map<std::string, double>& counts) {
  ClassPriors out{region_id, {}, {}};
  double total = 0.0;
  for (const auto& [name, count] : counts) {
    if (!std::isfinite(count) || count < 0.0) {
      throw Error(ErrorCode::InvalidPriors, "class '" + name + "' has a negative or non-finite count");
    }
    total += count;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::AllZeroAreas, "region '" + region_id + "' has no positive class");
  for (const auto& [name, count] : counts) {
    out.classes.push_back(name);
    out.proportions.push_back(count / total);
  }
  return out;
}

ClassPriors aggregate_to_priors(const std::string& region_id,
                                const std::map<std::string, double>& areas,
                                const std::map<std::string, double>& mean_field_areas) {
  std::map<std::string, double> counts;
  for (const auto& [name, area] : areas) {
    if (!std::isfinite(area) || area < 0.0) {
      throw Error(ErrorCode::InvalidPriors, "class '" + name + "' has a negative or non-finite area");
    }
    if (area == 0.0) {
      counts[name] = 0.0;
      continue;
    }
    auto it = mean_field_areas.find(name);
    if (it == mean_field_areas.end() || !(it->second > 0.0) || !std::isfinite(it->second)) {
      throw Error(ErrorCode::ZeroMeanFieldArea, "class '" + name + "' needs a positive mean field area");
    }
    counts[name] = area / it->second;
  }
  return counts_to_priors(region_id, counts);
}

}  // namespace cropshift
