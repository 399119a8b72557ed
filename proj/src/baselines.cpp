#include "cropshift/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cropshift/error.hpp"
#include "cropshift/rng.hpp"
#include "cropshift/shift.hpp"

namespace cropshift {

std::vector<std::size_t> target_counts(const Eigen::VectorXd& priors, std::size_t total) {
  const auto k = static_cast<std::size_t>(priors.size());
  std::vector<std::size_t> counts(k);
  std::vector<double> remainders(k);
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const double exact = static_cast<double>(total) * priors(static_cast<Eigen::Index>(c));
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    remainders[c] = exact - static_cast<double>(counts[c]);
    assigned += counts[c];
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t i = 0; assigned < total && i < k; ++i, ++assigned) ++counts[order[i]];
  // Only reachable when priors sum noticeably below 1.
  for (std::size_t i = 0; assigned > total; ++i) {
    const auto c = order[k - 1 - (i % k)];
    if (counts[c] > 0) {
      --counts[c];
      --assigned;
    }
  }
  return counts;
}

namespace {

/// k nearest same-class neighbors of `member` (excluding itself); distance
/// ties resolved by sample index.
std::vector<Eigen::Index> nearest_neighbors(const Eigen::MatrixXd& features,
                                            const std::vector<Eigen::Index>& members,
                                            Eigen::Index member, int k) {
  std::vector<std::pair<double, Eigen::Index>> dist;
  dist.reserve(members.size());
  for (Eigen::Index other : members) {
    if (other == member) continue;
    dist.emplace_back((features.row(other) - features.row(member)).squaredNorm(), other);
  }
  const auto kk = static_cast<std::size_t>(k);
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < kk; ++i) out.push_back(dist[i].second);
  return out;
}

}  // namespace

SmoteResult smote_resample(const Dataset& train, const ClassPriors& target_priors, int k,
                           std::uint64_t seed) {
  train.validate();
  if (!train.fully_labeled()) throw Error(ErrorCode::UnlabeledData, "SMOTE needs labeled data");
  if (k < 1) throw Error(ErrorCode::InvalidParams, "SMOTE k must be positive");
  const Eigen::VectorXd p = target_priors.aligned(train.class_list);
  const auto n = static_cast<std::size_t>(train.size());
  const auto num_classes = static_cast<std::size_t>(train.num_classes());

  std::vector<std::vector<Eigen::Index>> members(num_classes);
  for (Eigen::Index i = 0; i < train.size(); ++i) members[static_cast<std::size_t>(train.labels[static_cast<std::size_t>(i)])].push_back(i);
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (p(static_cast<Eigen::Index>(c)) > 0.0 && members[c].size() < static_cast<std::size_t>(k) + 1) {
      throw Error(ErrorCode::SmoteInfeasible,
                  "class '" + train.class_list[c] + "' has " + std::to_string(members[c].size()) +
                      " samples, SMOTE with k=" + std::to_string(k) + " needs at least " +
                      std::to_string(k + 1));
    }
  }

  SmoteResult result;
  result.targets = target_counts(p, n);
  bool unchanged = true;
  for (std::size_t c = 0; c < num_classes; ++c) unchanged = unchanged && result.targets[c] == members[c].size();
  if (unchanged) {
    result.data = train;
    for (Eigen::Index i = 0; i < train.size(); ++i) result.origins.push_back({i, -1, 0.0});
    return result;
  }

  Rng rng(seed);
  std::vector<SmoteOrigin> origins;
  origins.reserve(n);
  for (std::size_t c = 0; c < num_classes; ++c) {
    const auto& pool = members[c];
    const std::size_t target = result.targets[c];
    if (target <= pool.size()) {
      std::vector<Eigen::Index> kept = pool;
      rng.shuffle(kept.begin(), kept.end());
      kept.resize(target);
      std::sort(kept.begin(), kept.end());
      for (auto idx : kept) origins.push_back({idx, -1, 0.0});
      continue;
    }
    for (auto idx : pool) origins.push_back({idx, -1, 0.0});
    std::vector<std::vector<Eigen::Index>> neighbor_cache(pool.size());
    for (std::size_t s = pool.size(); s < target; ++s) {
      const auto pick = static_cast<std::size_t>(rng.below(pool.size()));
      auto& neighbors = neighbor_cache[pick];
      if (neighbors.empty()) neighbors = nearest_neighbors(train.features, pool, pool[pick], k);
      const auto partner = neighbors[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(k)))];
      origins.push_back({pool[pick], partner, rng.uniform()});
    }
  }

  Dataset& out = result.data;
  out.class_list = train.class_list;
  out.features.resize(static_cast<Eigen::Index>(origins.size()), train.dim());
  const bool groups = !train.group_ids.empty();
  const bool pixels = !train.pixel_ids.empty();
  std::size_t synthetic_count = 0;
  for (std::size_t i = 0; i < origins.size(); ++i) {
    const auto& o = origins[i];
    const auto src = static_cast<std::size_t>(o.source);
    if (o.synthetic()) {
      out.features.row(static_cast<Eigen::Index>(i)) =
          train.features.row(o.source) + o.u * (train.features.row(o.neighbor) - train.features.row(o.source));
    } else {
      out.features.row(static_cast<Eigen::Index>(i)) = train.features.row(o.source);
    }
    out.labels.push_back(train.labels[src]);
    out.regions.push_back(train.regions[src]);
    if (groups) out.group_ids.push_back(train.group_ids[src]);
    if (pixels) {
      out.pixel_ids.push_back(o.synthetic() ? train.pixel_ids[src] + "#smote" + std::to_string(synthetic_count++)
                                            : train.pixel_ids[src]);
    }
  }
  result.origins = std::move(origins);
  return result;
}

// ---------------------------------------------------------------------------

ZTransform ztransform_fit(const Eigen::MatrixXd& rows) {
  if (rows.rows() < 2) throw Error(ErrorCode::InsufficientData, "z-transform needs at least 2 rows");
  ZTransform zt;
  zt.mean = rows.colwise().mean().transpose();
  const Eigen::MatrixXd centered = rows.rowwise() - zt.mean.transpose();
  zt.stddev = (centered.colwise().squaredNorm() / static_cast<double>(rows.rows())).cwiseSqrt().transpose();
  zt.degenerate.resize(static_cast<std::size_t>(rows.cols()));
  for (Eigen::Index j = 0; j < rows.cols(); ++j) {
    // Constant columns can leave round-off in the two-pass variance.
    zt.degenerate[static_cast<std::size_t>(j)] = zt.stddev(j) <= 1e-12 * (1.0 + std::abs(zt.mean(j)));
  }
  return zt;
}

Eigen::VectorXd ZTransform::apply(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != mean.size()) throw Error(ErrorCode::DimensionMismatch, "z-transform dimension mismatch");
  Eigen::VectorXd z(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    z(j) = degenerate[static_cast<std::size_t>(j)] ? 0.0 : (x(j) - mean(j)) / stddev(j);
  }
  return z;
}

Eigen::VectorXd ZTransform::invert(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  if (z.size() != mean.size()) throw Error(ErrorCode::DimensionMismatch, "z-transform dimension mismatch");
  Eigen::VectorXd x(z.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    x(j) = degenerate[static_cast<std::size_t>(j)] ? mean(j) : z(j) * stddev(j) + mean(j);
  }
  return x;
}

Eigen::MatrixXd ZTransform::apply_rows(const Eigen::MatrixXd& rows) const {
  Eigen::MatrixXd out(rows.rows(), rows.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) out.row(i) = apply(rows.row(i).transpose()).transpose();
  return out;
}

// ---------------------------------------------------------------------------

int major_class_classify(const Eigen::VectorXd& test_priors) { return argmax_index(test_priors); }

std::string major_class_classify(const ClassPriors& test_priors, const std::vector<std::string>& class_list) {
  return class_list[static_cast<std::size_t>(major_class_classify(test_priors.aligned(class_list)))];
}

namespace {

Dataset with_features(const Dataset& data, Eigen::MatrixXd features) {
  Dataset out = data;
  out.features = std::move(features);
  return out;
}

template <typename Classifier>
std::vector<int> predict_rows(const Classifier& model, const Eigen::MatrixXd& rows) {
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) labels.push_back(model.predict(rows.row(i).transpose()));
  return labels;
}

}  // namespace

std::vector<int> pipeline_smote_psa(const PipelineInput& in) {
  const auto balanced = smote_resample(in.train, in.test_priors, in.smote_k, in.seed);
  // Classes with zero target prior vanish from the rebalanced set.
  const PartialClassifier model(balanced.data, in.classifier);
  return predict_rows(model, in.test.features);
}

std::vector<int> pipeline_zt_fpsa(const PipelineInput& in) {
  const auto zt_train = ztransform_fit(in.train.features);
  const auto zt_test = ztransform_fit(in.test.features);
  const auto model = fit_classifier(with_features(in.train, zt_train.apply_rows(in.train.features)),
                                    in.classifier);
  const Eigen::VectorXd test_p = in.test_priors.aligned(in.train.class_list);
  const Eigen::MatrixXd test_z = zt_test.apply_rows(in.test.features);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(test_z.rows()));
  for (Eigen::Index i = 0; i < test_z.rows(); ++i) {
    labels.push_back(predict_label(
        psa_reweight(model.posteriors(test_z.row(i).transpose()), model.train_priors(), test_p)));
  }
  return labels;
}

std::vector<int> pipeline_zt_smote_fpsa(const PipelineInput& in) {
  const auto balanced = smote_resample(in.train, in.test_priors, in.smote_k, in.seed);
  const auto zt_train = ztransform_fit(balanced.data.features);
  const auto zt_test = ztransform_fit(in.test.features);
  const PartialClassifier model(
      with_features(balanced.data, zt_train.apply_rows(balanced.data.features)), in.classifier);
  return predict_rows(model, zt_test.apply_rows(in.test.features));
}

}  // namespace cropshift
