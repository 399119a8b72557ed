#include "cropshift/eval.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "cropshift/error.hpp"
#include "cropshift/rng.hpp"
#include "cropshift/shift.hpp"

namespace cropshift {

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> classes)
    : class_list(std::move(classes)),
      counts(CountMatrix::Zero(static_cast<Eigen::Index>(class_list.size()),
                               static_cast<Eigen::Index>(class_list.size()))) {}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.class_list != class_list) throw Error(ErrorCode::ClassMismatch, "confusion matrices differ in classes");
  counts += other.counts;
  return *this;
}

bool ConfusionMatrix::operator==(const ConfusionMatrix& other) const {
  return class_list == other.class_list && counts == other.counts;
}

ConfusionMatrix confusion(const std::vector<int>& true_labels, const std::vector<int>& predicted_labels,
                          const std::vector<std::string>& class_list) {
  if (true_labels.size() != predicted_labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "true and predicted label counts differ");
  }
  ConfusionMatrix cm(class_list);
  const int k = static_cast<int>(class_list.size());
  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    const int t = true_labels[i];
    const int p = predicted_labels[i];
    if (t == kUnlabeled) continue;
    if (t < 0 || t >= k || p < 0 || p >= k) throw Error(ErrorCode::UnknownLabel, "label index out of range");
    ++cm.counts(t, p);
  }
  return cm;
}

ConfusionMatrix confusion(const std::vector<std::string>& true_labels,
                          const std::vector<std::string>& predicted_labels,
                          const std::vector<std::string>& class_list) {
  if (true_labels.size() != predicted_labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "true and predicted label counts differ");
  }
  auto index_of = [&](const std::string& name) {
    auto it = std::find(class_list.begin(), class_list.end(), name);
    if (it == class_list.end()) throw Error(ErrorCode::UnknownLabel, "unknown label '" + name + "'");
    return static_cast<int>(it - class_list.begin());
  };
  ConfusionMatrix cm(class_list);
  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    ++cm.counts(index_of(true_labels[i]), index_of(predicted_labels[i]));
  }
  return cm;
}

MetricsReport metrics(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total <= 0) throw Error(ErrorCode::EmptyMatrix, "confusion matrix has no entries");
  MetricsReport report;
  report.overall_accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
  const Eigen::Index k = cm.counts.rows();
  double f1_sum = 0.0;
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto tp = static_cast<double>(cm.counts(c, c));
    const auto row = static_cast<double>(cm.counts.row(c).sum());
    const auto col = static_cast<double>(cm.counts.col(c).sum());
    report.producers_accuracy.push_back(row > 0 ? std::optional(tp / row) : std::nullopt);
    report.users_accuracy.push_back(col > 0 ? std::optional(tp / col) : std::nullopt);
    report.f1.push_back(row + col > 0 ? std::optional(2.0 * tp / (row + col)) : std::nullopt);
    f1_sum += report.f1.back().value_or(0.0);
  }
  report.macro_f1 = k > 0 ? f1_sum / static_cast<double>(k) : 0.0;
  return report;
}

double shannon_entropy(const Eigen::VectorXd& proportions) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < proportions.size(); ++i) {
    const double p = proportions(i);
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double shannon_entropy(const ClassPriors& priors) {
  priors.validate();
  return shannon_entropy(Eigen::Map<const Eigen::VectorXd>(priors.proportions.data(),
                                                           static_cast<Eigen::Index>(priors.proportions.size())));
}

// ---------------------------------------------------------------------------

std::string_view to_string(Method method) {
  switch (method) {
    case Method::Gmc: return "gmc";
    case Method::Uat: return "uat";
    case Method::Psa: return "psa";
    case Method::Fsa: return "fsa";
    case Method::Fpsa: return "fpsa";
    case Method::SmotePsa: return "smote-psa";
    case Method::ZtFpsa: return "zt-fpsa";
    case Method::ZtSmoteFpsa: return "zt-smote-fpsa";
  }
  return "unknown";
}

Method parse_method(std::string_view tag) {
  for (Method m : kAllMethods) {
    if (to_string(m) == tag) return m;
  }
  throw Error(ErrorCode::InvalidParams, "unknown method '" + std::string(tag) + "'");
}

bool uses_priors(Method method) { return method != Method::Uat; }

namespace {

/// Runs job(i) for i in [0, n) on up to `workers` threads; the first
/// exception (by index) is rethrown.
template <typename Job>
void run_indexed(std::size_t n, int workers, Job&& job) {
  std::vector<std::exception_ptr> errors(n);
  auto worker = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < n; i += stride) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto w = static_cast<std::size_t>(std::clamp<std::int64_t>(workers, 1, std::max<std::int64_t>(1, static_cast<std::int64_t>(n))));
  if (w <= 1) {
    worker(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < w; ++t) pool.emplace_back(worker, t, w);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<int> predict_all(const TrainedClassifier& model, const Dataset& test) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(test.size()));
  for (Eigen::Index i = 0; i < test.size(); ++i) out.push_back(model.predict(test.features.row(i).transpose()));
  return out;
}

}  // namespace

ExperimentResult run_transfer_experiment(const std::map<std::string, Dataset>& regions,
                                         const std::string& train_region, Method method,
                                         const std::map<std::string, ClassPriors>& priors,
                                         const ExperimentConfig& config, std::uint64_t seed) {
  auto train_it = regions.find(train_region);
  if (train_it == regions.end()) {
    throw Error(ErrorCode::UnknownRegion, "training region '" + train_region + "' not found");
  }
  const Dataset& train = train_it->second;
  train.validate();
  const auto& class_list = train.class_list;
  if (!train.fully_labeled()) {
    throw Error(ErrorCode::UnlabeledData, "training region '" + train_region + "' has unlabeled points");
  }
  const auto counts = train.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) {
      throw Error(ErrorCode::TrainRegionMissingClass,
                  "training region '" + train_region + "' has no samples of class '" + class_list[c] + "'");
    }
  }

  std::vector<std::string> targets;
  for (const auto& [id, data] : regions) {
    if (id == train_region) continue;
    if (data.class_list != class_list) {
      throw Error(ErrorCode::ClassMismatch, "region '" + id + "' uses a different class list");
    }
    if (data.dim() != train.dim()) {
      throw Error(ErrorCode::DimensionMismatch, "region '" + id + "' has a different feature dimension");
    }
    if (uses_priors(method) && !priors.contains(id)) {
      throw Error(ErrorCode::MissingPriors, "no class priors for region '" + id + "'");
    }
    targets.push_back(id);
  }

  ClassifierConfig classifier = config.classifier;
  classifier.forest.seed = seed;

  std::optional<TrainedClassifier> base;
  std::optional<ClassMeans> means;
  if (method == Method::Uat || method == Method::Psa || method == Method::Fsa || method == Method::Fpsa) {
    base.emplace(fit_classifier(train, classifier));
  }
  if (method == Method::Fsa || method == Method::Fpsa) means.emplace(estimate_class_means(train));
  const Eigen::VectorXd train_priors = empirical_priors(train).aligned(class_list);

  // Forest refits inside the per-region loop stay single-threaded when the
  // regions themselves run concurrently.
  ClassifierConfig inner = classifier;
  if (config.workers > 1) inner.workers = 1;

  std::vector<std::vector<int>> predictions(targets.size());
  run_indexed(targets.size(), config.workers, [&](std::size_t t) {
    const std::string& id = targets[t];
    const Dataset& test = regions.at(id);
    try {
      Eigen::VectorXd test_p;
      if (uses_priors(method)) {
        const ClassPriors& p = priors.at(id);
        p.validate(1e-6);
        test_p = p.aligned(class_list);
      }
      std::vector<int>& out = predictions[t];
      const std::uint64_t region_seed = derive_seed(seed, t + 1);
      switch (method) {
        case Method::Gmc:
          out.assign(static_cast<std::size_t>(test.size()), major_class_classify(test_p));
          break;
        case Method::Uat:
          out = predict_all(*base, test);
          break;
        case Method::Psa:
          for (Eigen::Index i = 0; i < test.size(); ++i) {
            out.push_back(predict_label(psa_reweight(base->posteriors(test.features.row(i).transpose()),
                                                     train_priors, test_p)));
          }
          break;
        case Method::Fsa:
        case Method::Fpsa: {
          const RegionalShift shift = estimate_regional_shift(test.feature_mean(), priors.at(id), *means);
          for (Eigen::Index i = 0; i < test.size(); ++i) {
            const Eigen::VectorXd x = fsa_transform(test.features.row(i).transpose(), shift);
            const PosteriorVector post = base->posteriors(x);
            out.push_back(method == Method::Fsa ? predict_label(post)
                                                : predict_label(psa_reweight(post, train_priors, test_p)));
          }
          break;
        }
        case Method::SmotePsa:
        case Method::ZtFpsa:
        case Method::ZtSmoteFpsa: {
          ClassifierConfig cfg = inner;
          cfg.forest.seed = region_seed;
          const PipelineInput in{train, test, priors.at(id), cfg, config.smote_k, region_seed};
          out = method == Method::SmotePsa ? pipeline_smote_psa(in)
                : method == Method::ZtFpsa ? pipeline_zt_fpsa(in)
                                           : pipeline_zt_smote_fpsa(in);
          break;
        }
      }
    } catch (const Error& e) {
      throw Error(e.code(), "region '" + id + "': " + e.detail());
    }
  });

  ExperimentResult result;
  result.train_region = train_region;
  result.method = method;
  result.seed = seed;
  result.aggregate = ConfusionMatrix(class_list);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const std::string& id = targets[t];
    ConfusionMatrix cm = confusion(regions.at(id).labels, predictions[t], class_list);
    result.aggregate += cm;
    if (cm.total() > 0) result.region_metrics.emplace(id, metrics(cm));
    result.per_region.emplace(id, std::move(cm));
    result.predictions.emplace(id, std::move(predictions[t]));
  }
  if (result.aggregate.total() > 0) result.aggregate_metrics = metrics(result.aggregate);
  return result;
}

// ---------------------------------------------------------------------------

std::vector<int> assign_folds(const Dataset& data, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorCode::InvalidParams, "need at least 2 folds");
  const bool grouped = !data.group_ids.empty();
  std::map<std::string, std::vector<Eigen::Index>> groups;
  std::vector<std::vector<Eigen::Index>> singletons;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    if (data.labels[static_cast<std::size_t>(i)] == kUnlabeled) continue;
    if (grouped) {
      groups[data.group_ids[static_cast<std::size_t>(i)]].push_back(i);
    } else {
      singletons.push_back({i});
    }
  }
  std::vector<std::vector<Eigen::Index>> units;
  if (grouped) {
    for (auto& [id, rows] : groups) units.push_back(std::move(rows));
  } else {
    units = std::move(singletons);
  }
  if (units.size() < static_cast<std::size_t>(folds)) {
    throw Error(ErrorCode::TooFewGroups, std::to_string(units.size()) + " groups cannot fill " +
                                             std::to_string(folds) + " folds");
  }
  Rng rng(seed);
  rng.shuffle(units.begin(), units.end());
  std::vector<int> fold_of(static_cast<std::size_t>(data.size()), -1);
  for (std::size_t u = 0; u < units.size(); ++u) {
    for (auto row : units[u]) fold_of[static_cast<std::size_t>(row)] = static_cast<int>(u % static_cast<std::size_t>(folds));
  }
  return fold_of;
}

CvResult oracle_cv(const Dataset& data, int folds, std::uint64_t seed, const ClassifierConfig& config) {
  data.validate();
  const auto fold_of = assign_folds(data, folds, seed);
  CvResult result;
  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> train_rows, test_rows;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
      if (fold_of[i] < 0) continue;
      (fold_of[i] == f ? test_rows : train_rows).push_back(static_cast<Eigen::Index>(i));
    }
    if (test_rows.empty()) continue;
    ClassifierConfig cfg = config;
    cfg.forest.seed = derive_seed(seed, static_cast<std::uint64_t>(f));
    const PartialClassifier model(data.subset(train_rows), cfg);
    for (auto row : test_rows) {
      if (model.predict(data.features.row(row).transpose()) == data.labels[static_cast<std::size_t>(row)]) {
        ++result.correct;
      }
      ++result.total;
    }
  }
  return result;
}

std::map<std::string, CvResult> oracle_cv_by_region(const std::map<std::string, Dataset>& regions,
                                                    int folds, std::uint64_t seed,
                                                    const ClassifierConfig& config) {
  std::map<std::string, CvResult> out;
  std::uint64_t r = 0;
  for (const auto& [id, data] : regions) {
    try {
      out.emplace(id, oracle_cv(data, folds, derive_seed(seed, r++), config));
    } catch (const Error& e) {
      throw Error(e.code(), "region '" + id + "': " + e.detail());
    }
  }
  return out;
}

double oracle_aggregate(const std::map<std::string, CvResult>& by_region, const std::string& train_region) {
  double weighted = 0.0, total = 0.0;
  for (const auto& [id, cv] : by_region) {
    if (id == train_region) continue;
    weighted += static_cast<double>(cv.correct);  // total × accuracy
    total += static_cast<double>(cv.total);
  }
  if (total == 0.0) throw Error(ErrorCode::InsufficientData, "no labeled test regions for the oracle");
  return weighted / total;
}

}  // namespace cropshift
