#include "cropshift/classify.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "cropshift/error.hpp"
#include "cropshift/rng.hpp"

namespace cropshift {

// ---------------------------------------------------------------------------
// Dataset

void Dataset::validate() const {
  const auto n = static_cast<std::size_t>(size());
  if (n == 0 || dim() == 0) throw Error(ErrorCode::InvalidParams, "dataset is empty");
  if (labels.size() != n || regions.size() != n) {
    throw Error(ErrorCode::InvalidParams, "label/region vectors do not match feature rows");
  }
  if (!group_ids.empty() && group_ids.size() != n) {
    throw Error(ErrorCode::InvalidParams, "group id vector does not match feature rows");
  }
  if (!pixel_ids.empty() && pixel_ids.size() != n) {
    throw Error(ErrorCode::InvalidParams, "pixel id vector does not match feature rows");
  }
  for (int label : labels) {
    if (label != kUnlabeled && (label < 0 || label >= num_classes())) {
      throw Error(ErrorCode::InvalidParams, "label index out of range");
    }
  }
  if (!features.allFinite()) throw Error(ErrorCode::InvalidParams, "non-finite feature value");
}

bool Dataset::fully_labeled() const {
  return std::none_of(labels.begin(), labels.end(), [](int l) { return l == kUnlabeled; });
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(class_list.size(), 0);
  for (int label : labels) {
    if (label != kUnlabeled) ++counts[static_cast<std::size_t>(label)];
  }
  return counts;
}

Dataset Dataset::subset(std::span<const Eigen::Index> rows) const {
  Dataset out;
  out.class_list = class_list;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), dim());
  out.labels.reserve(rows.size());
  out.regions.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(r);
    out.labels.push_back(labels[static_cast<std::size_t>(r)]);
    out.regions.push_back(regions[static_cast<std::size_t>(r)]);
    if (!group_ids.empty()) out.group_ids.push_back(group_ids[static_cast<std::size_t>(r)]);
    if (!pixel_ids.empty()) out.pixel_ids.push_back(pixel_ids[static_cast<std::size_t>(r)]);
  }
  return out;
}

Eigen::VectorXd Dataset::feature_mean() const { return features.colwise().mean().transpose(); }

Dataset concatenate(const std::vector<const Dataset*>& parts) {
  Dataset out;
  if (parts.empty()) return out;
  out.class_list = parts.front()->class_list;
  Eigen::Index rows = 0;
  const Eigen::Index d = parts.front()->dim();
  bool groups = true, pixels = true;
  for (const Dataset* part : parts) {
    if (part->class_list != out.class_list) {
      throw Error(ErrorCode::ClassMismatch, "cannot concatenate datasets with different classes");
    }
    if (part->dim() != d) throw Error(ErrorCode::DimensionMismatch, "feature dimensions differ");
    rows += part->size();
    groups = groups && !part->group_ids.empty();
    pixels = pixels && !part->pixel_ids.empty();
  }
  out.features.resize(rows, d);
  Eigen::Index offset = 0;
  for (const Dataset* part : parts) {
    out.features.middleRows(offset, part->size()) = part->features;
    offset += part->size();
    out.labels.insert(out.labels.end(), part->labels.begin(), part->labels.end());
    out.regions.insert(out.regions.end(), part->regions.begin(), part->regions.end());
    if (groups) out.group_ids.insert(out.group_ids.end(), part->group_ids.begin(), part->group_ids.end());
    if (pixels) out.pixel_ids.insert(out.pixel_ids.end(), part->pixel_ids.begin(), part->pixel_ids.end());
  }
  return out;
}

ClassPriors empirical_priors(const Dataset& data, const std::string& region_id) {
  const auto counts = data.class_counts();
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  if (total == 0) throw Error(ErrorCode::InsufficientData, "no labeled points");
  ClassPriors priors{region_id, data.class_list, {}};
  for (auto c : counts) priors.proportions.push_back(static_cast<double>(c) / total);
  return priors;
}

int argmax_index(const Eigen::Ref<const Eigen::VectorXd>& scores) {
  int best = 0;
  for (Eigen::Index k = 1; k < scores.size(); ++k) {
    if (scores(k) > scores(best)) best = static_cast<int>(k);
  }
  return best;
}

std::string predict_label(const PosteriorVector& p, const std::vector<std::string>& class_list) {
  if (static_cast<std::size_t>(p.size()) != class_list.size()) {
    throw Error(ErrorCode::ClassMismatch, "posterior length differs from class list");
  }
  return class_list[static_cast<std::size_t>(argmax_index(p))];
}

namespace {

void require_labeled(const Dataset& data) {
  if (!data.fully_labeled()) {
    throw Error(ErrorCode::UnlabeledData, "training data contains unlabeled points");
  }
}

void require_dim(Eigen::Index expected, Eigen::Index got) {
  if (expected != got) {
    throw Error(ErrorCode::DimensionMismatch,
                "expected " + std::to_string(expected) + " features, got " + std::to_string(got));
  }
}

PosteriorVector softmax(const Eigen::VectorXd& log_scores) {
  const double top = log_scores.maxCoeff();
  Eigen::VectorXd p = (log_scores.array() - top).exp().matrix();
  return p / p.sum();
}

}  // namespace

// ---------------------------------------------------------------------------
// LDA

LdaModel LdaModel::from_parameters(std::vector<std::string> class_list, Eigen::MatrixXd means,
                                   Eigen::MatrixXd covariance, Eigen::VectorXd priors) {
  const auto k = static_cast<Eigen::Index>(class_list.size());
  if (means.rows() != k || priors.size() != k || k == 0) {
    throw Error(ErrorCode::InvalidParams, "LDA parameter shapes disagree with class list");
  }
  if (covariance.rows() != means.cols() || covariance.cols() != means.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "covariance shape disagrees with means");
  }
  if ((priors.array() <= 0.0).any()) {
    throw Error(ErrorCode::ZeroTrainPrior, "LDA priors must be strictly positive");
  }
  LdaModel model;
  model.class_list_ = std::move(class_list);
  model.means_ = std::move(means);
  model.covariance_ = std::move(covariance);
  model.priors_ = std::move(priors);
  model.log_priors_ = model.priors_.array().log().matrix();
  model.factor_.compute(model.covariance_);
  if (model.factor_.info() != Eigen::Success ||
      !(model.factor_.matrixLLT().diagonal().array() > 0.0).all() ||
      !model.factor_.matrixLLT().allFinite()) {
    throw Error(ErrorCode::SingularCovariance, "pooled covariance is not positive definite");
  }
  model.whitened_means_ = model.factor_.matrixL().solve(model.means_.transpose());
  return model;
}

Eigen::VectorXd LdaModel::log_scores(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  require_dim(dim(), x.size());
  const Eigen::VectorXd z = factor_.matrixL().solve(x);
  Eigen::VectorXd scores(means_.rows());
  for (Eigen::Index k = 0; k < means_.rows(); ++k) {
    scores(k) = log_priors_(k) - 0.5 * (z - whitened_means_.col(k)).squaredNorm();
  }
  return scores;
}

PosteriorVector LdaModel::posteriors(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return softmax(log_scores(x));
}

LdaModel lda_fit(const Dataset& data, double ridge) {
  data.validate();
  require_labeled(data);
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) {
    throw Error(ErrorCode::InvalidParams, "ridge must be a nonnegative finite number");
  }
  const auto k = data.num_classes();
  const auto counts = data.class_counts();
  for (int c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) {
      throw Error(ErrorCode::EmptyClass, "class '" + data.class_list[static_cast<std::size_t>(c)] +
                                             "' has no training samples");
    }
  }
  const Eigen::Index n = data.size();
  if (n <= k) {
    throw Error(ErrorCode::InsufficientData, "LDA needs more samples than classes");
  }
  const Eigen::Index d = data.dim();
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(k, d);
  for (Eigen::Index i = 0; i < n; ++i) means.row(data.labels[static_cast<std::size_t>(i)]) += data.features.row(i);
  for (int c = 0; c < k; ++c) means.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);

  Eigen::MatrixXd centered(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    centered.row(i) = data.features.row(i) - means.row(data.labels[static_cast<std::size_t>(i)]);
  }
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - k);
  cov = 0.5 * (cov + cov.transpose());
  const double mean_diag = cov.diagonal().mean();
  cov.diagonal().array() += ridge * mean_diag;

  Eigen::VectorXd priors(k);
  for (int c = 0; c < k; ++c) priors(c) = static_cast<double>(counts[static_cast<std::size_t>(c)]) / static_cast<double>(n);
  return LdaModel::from_parameters(data.class_list, std::move(means), std::move(cov), std::move(priors));
}

PosteriorVector lda_posteriors(const LdaModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return model.posteriors(x);
}

// ---------------------------------------------------------------------------
// Random forest

const TreeNode& DecisionTree::leaf_for(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const TreeNode* node = &nodes.front();
  while (node->feature >= 0) {
    node = &nodes[static_cast<std::size_t>(x(node->feature) <= node->threshold ? node->left : node->right)];
  }
  return *node;
}

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double score = -1.0;  // Σ c_l²/n_l + Σ c_r²/n_r, larger is purer
};

class TreeGrower {
 public:
  TreeGrower(const Dataset& data, const ForestParams& params, int mtry, Rng rng)
      : data_(data), params_(params), mtry_(mtry), k_(data.num_classes()), rng_(std::move(rng)) {}

  DecisionTree grow() {
    const auto n = static_cast<std::uint64_t>(data_.size());
    sample_.resize(n);
    for (auto& idx : sample_) idx = static_cast<Eigen::Index>(rng_.below(n));

    DecisionTree tree;
    struct Pending {
      int node;
      std::size_t begin, end;
      int depth;
    };
    tree.nodes.emplace_back();
    std::vector<Pending> stack{{0, 0, sample_.size(), 0}};
    while (!stack.empty()) {
      const Pending job = stack.back();
      stack.pop_back();
      auto counts = count_classes(job.begin, job.end);
      const std::size_t size = job.end - job.begin;
      const bool pure = std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; }) <= 1;
      const bool depth_capped = params_.max_depth > 0 && job.depth >= params_.max_depth;
      SplitChoice split;
      if (!pure && !depth_capped && size >= 2 * static_cast<std::size_t>(params_.min_leaf)) {
        split = find_split(job.begin, job.end);
      }
      if (split.feature < 0) {
        TreeNode& leaf = tree.nodes[static_cast<std::size_t>(job.node)];
        leaf.majority = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
        leaf.counts = std::move(counts);
        continue;
      }
      const auto mid = std::stable_partition(
          sample_.begin() + static_cast<std::ptrdiff_t>(job.begin),
          sample_.begin() + static_cast<std::ptrdiff_t>(job.end), [&](Eigen::Index row) {
            return data_.features(row, split.feature) <= split.threshold;
          });
      const std::size_t mid_pos = static_cast<std::size_t>(mid - sample_.begin());
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      TreeNode& node = tree.nodes[static_cast<std::size_t>(job.node)];
      node.feature = split.feature;
      node.threshold = split.threshold;
      node.left = left;
      node.right = left + 1;
      node.majority = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      // Right pushed first so the left subtree is laid out first.
      stack.push_back({left + 1, mid_pos, job.end, job.depth + 1});
      stack.push_back({left, job.begin, mid_pos, job.depth + 1});
    }
    return tree;
  }

 private:
  std::vector<int> count_classes(std::size_t begin, std::size_t end) const {
    std::vector<int> counts(static_cast<std::size_t>(k_), 0);
    for (std::size_t i = begin; i < end; ++i) ++counts[static_cast<std::size_t>(label(sample_[i]))];
    return counts;
  }

  int label(Eigen::Index row) const { return data_.labels[static_cast<std::size_t>(row)]; }

  SplitChoice find_split(std::size_t begin, std::size_t end) {
    const auto d = static_cast<int>(data_.dim());
    std::vector<int> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), 0);
    SplitChoice best;
    int evaluated = 0;
    // Features are visited in random order; constant ones do not count
    // towards the per-split budget.
    for (int i = 0; i < d && evaluated < mtry_; ++i) {
      const auto j = i + static_cast<int>(rng_.below(static_cast<std::uint64_t>(d - i)));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
      const int feature = order[static_cast<std::size_t>(i)];
      if (evaluate_feature(feature, begin, end, best)) ++evaluated;
    }
    return best;
  }

  // Returns false when the feature is constant on this node.
  bool evaluate_feature(int feature, std::size_t begin, std::size_t end, SplitChoice& best) {
    values_.clear();
    for (std::size_t i = begin; i < end; ++i) {
      values_.push_back({data_.features(sample_[i], feature), label(sample_[i])});
    }
    std::sort(values_.begin(), values_.end(), [](const auto& a, const auto& b) {
      return a.first < b.first || (a.first == b.first && a.second < b.second);
    });
    if (values_.front().first == values_.back().first) return false;

    const std::size_t n = values_.size();
    std::vector<double> left(static_cast<std::size_t>(k_), 0.0), right(static_cast<std::size_t>(k_), 0.0);
    for (const auto& v : values_) right[static_cast<std::size_t>(v.second)] += 1.0;
    double sq_left = 0.0, sq_right = 0.0;
    for (double c : right) sq_right += c * c;
    const auto min_leaf = static_cast<std::size_t>(params_.min_leaf);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const auto c = static_cast<std::size_t>(values_[i].second);
      sq_left += 2.0 * left[c] + 1.0;
      sq_right -= 2.0 * right[c] - 1.0;
      left[c] += 1.0;
      right[c] -= 1.0;
      if (values_[i].first == values_[i + 1].first) continue;
      const std::size_t n_left = i + 1, n_right = n - n_left;
      if (n_left < min_leaf || n_right < min_leaf) continue;
      const double score = sq_left / static_cast<double>(n_left) + sq_right / static_cast<double>(n_right);
      if (score > best.score) {
        double threshold = 0.5 * (values_[i].first + values_[i + 1].first);
        if (!(threshold < values_[i + 1].first)) threshold = values_[i].first;
        best = {feature, threshold, score};
      }
    }
    return true;
  }

  const Dataset& data_;
  const ForestParams& params_;
  int mtry_;
  int k_;
  Rng rng_;
  std::vector<Eigen::Index> sample_;
  std::vector<std::pair<double, int>> values_;
};

}  // namespace

ForestModel rf_fit(const Dataset& data, const ForestParams& params, int workers) {
  data.validate();
  require_labeled(data);
  if (params.n_trees < 1 || params.min_leaf < 1 || params.max_depth < 0 ||
      params.features_per_split < 0 || params.features_per_split > data.dim()) {
    throw Error(ErrorCode::InvalidParams, "invalid forest parameters");
  }
  if (data.size() < 2) throw Error(ErrorCode::InsufficientData, "forest needs at least 2 samples");
  const int mtry = params.features_per_split > 0
                       ? params.features_per_split
                       : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(data.dim()))));

  ForestModel model;
  model.params = params;
  model.class_list = data.class_list;
  model.n_features = data.dim();
  model.train_priors = empirical_priors(data).aligned(data.class_list);
  model.trees.resize(static_cast<std::size_t>(params.n_trees));

  auto grow_range = [&](int first, int stride) {
    for (int t = first; t < params.n_trees; t += stride) {
      TreeGrower grower(data, params, mtry, Rng(derive_seed(params.seed, static_cast<std::uint64_t>(t))));
      model.trees[static_cast<std::size_t>(t)] = grower.grow();
    }
  };
  workers = std::clamp(workers, 1, params.n_trees);
  if (workers == 1) {
    grow_range(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(grow_range, w, workers);
  }
  return model;
}

PosteriorVector ForestModel::posteriors(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  require_dim(n_features, x.size());
  Eigen::VectorXd votes = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(class_list.size()));
  for (const auto& tree : trees) votes(tree.vote(x)) += 1.0;
  return votes / static_cast<double>(trees.size());
}

PosteriorVector rf_posteriors(const ForestModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return model.posteriors(x);
}

// ---------------------------------------------------------------------------
// TrainedClassifier

const std::vector<std::string>& TrainedClassifier::class_list() const {
  return std::visit([](const auto& m) -> const std::vector<std::string>& {
    if constexpr (std::is_same_v<std::decay_t<decltype(m)>, LdaModel>) {
      return m.class_list();
    } else {
      return m.class_list;
    }
  }, model_);
}

const Eigen::VectorXd& TrainedClassifier::train_priors() const {
  return std::visit([](const auto& m) -> const Eigen::VectorXd& {
    if constexpr (std::is_same_v<std::decay_t<decltype(m)>, LdaModel>) {
      return m.train_priors();
    } else {
      return m.train_priors;
    }
  }, model_);
}

Eigen::Index TrainedClassifier::dim() const {
  return std::visit([](const auto& m) -> Eigen::Index {
    if constexpr (std::is_same_v<std::decay_t<decltype(m)>, LdaModel>) {
      return m.dim();
    } else {
      return m.n_features;
    }
  }, model_);
}

PosteriorVector TrainedClassifier::posteriors(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return std::visit([&](const auto& m) { return m.posteriors(x); }, model_);
}

TrainedClassifier fit_classifier(const Dataset& data, const ClassifierConfig& config) {
  switch (config.kind) {
    case ClassifierKind::Lda:
      return TrainedClassifier(lda_fit(data, config.ridge));
    case ClassifierKind::RandomForest:
      return TrainedClassifier(rf_fit(data, config.forest, config.workers));
  }
  throw Error(ErrorCode::InvalidParams, "unknown classifier kind");
}

PartialClassifier::PartialClassifier(const Dataset& data, const ClassifierConfig& config)
    : num_classes_(data.num_classes()) {
  require_labeled(data);
  const auto counts = data.class_counts();
  std::vector<int> local_of(counts.size(), -1);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] > 0) {
      local_of[c] = static_cast<int>(present_.size());
      present_.push_back(static_cast<int>(c));
    }
  }
  if (present_.empty()) throw Error(ErrorCode::InsufficientData, "no training samples");
  if (present_.size() == 1) return;
  Dataset local = data;
  local.class_list.clear();
  for (int c : present_) local.class_list.push_back(data.class_list[static_cast<std::size_t>(c)]);
  for (auto& label : local.labels) label = local_of[static_cast<std::size_t>(label)];
  inner_.emplace(fit_classifier(local, config));
}

PosteriorVector PartialClassifier::posteriors(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  PosteriorVector full = PosteriorVector::Zero(num_classes_);
  if (!inner_) {
    full(present_.front()) = 1.0;
    return full;
  }
  const PosteriorVector local = inner_->posteriors(x);
  for (std::size_t i = 0; i < present_.size(); ++i) full(present_[i]) = local(static_cast<Eigen::Index>(i));
  return full;
}

}  // namespace cropshift
