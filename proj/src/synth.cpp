#include "cropshift/synth.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <fstream>
#include <istream>
#include <json.hpp>
#include <ostream>
#include <set>

#include "cropshift/error.hpp"
#include "cropshift/rng.hpp"

namespace cropshift {

using nlohmann::json;

int SyntheticSpec::region_index(const std::string& region_id) const {
  for (std::size_t r = 0; r < region_ids.size(); ++r) {
    if (region_ids[r] == region_id) return static_cast<int>(r);
  }
  throw Error(ErrorCode::UnknownRegion, "synthetic world has no region '" + region_id + "'");
}

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidSpec, msg); };
  const auto r = static_cast<Eigen::Index>(region_ids.size());
  const auto k = static_cast<Eigen::Index>(class_names.size());
  const Eigen::Index d = class_effects.cols();
  if (r < 1 || k < 1 || d < 1) fail("need at least one region, class and dimension");
  if (std::set<std::string>(region_ids.begin(), region_ids.end()).size() != region_ids.size()) {
    fail("duplicate region id");
  }
  if (std::set<std::string>(class_names.begin(), class_names.end()).size() != class_names.size()) {
    fail("duplicate class name");
  }
  if (class_effects.rows() != k) fail("class_effects must be K x d");
  if (region_effects.rows() != r || region_effects.cols() != d) fail("region_effects must be R x d");
  if (covariance.rows() != d || covariance.cols() != d) fail("covariance must be d x d");
  if (priors.rows() != r || priors.cols() != k) fail("priors must be R x K");
  if (samples_per_region.size() != region_ids.size()) fail("samples_per_region must have R entries");
  if (!class_effects.allFinite() || !region_effects.allFinite() || !covariance.allFinite() ||
      !priors.allFinite()) {
    fail("non-finite parameter");
  }
  if (train_region < 0 || train_region >= r) fail("train_region out of range");
  if (!region_effects.row(train_region).isZero(0.0)) fail("training region effect must be zero");
  if (!covariance.isApprox(covariance.transpose(), 1e-12)) fail("covariance is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) fail("covariance is not positive definite");
  for (Eigen::Index i = 0; i < r; ++i) {
    if ((priors.row(i).array() < 0.0).any()) fail("negative prior in region " + region_ids[static_cast<std::size_t>(i)]);
    if (std::abs(priors.row(i).sum() - 1.0) > 1e-9) {
      fail("priors of region " + region_ids[static_cast<std::size_t>(i)] + " do not sum to 1");
    }
  }
  for (int n : samples_per_region) {
    if (n < 0) fail("negative sample count");
  }
}

Eigen::VectorXd SyntheticSpec::population_mean(int region, int klass) const {
  return (region_effects.row(region) + class_effects.row(klass)).transpose();
}

Eigen::VectorXd SyntheticSpec::population_feature_mean(int region) const {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim());
  for (int k = 0; k < num_classes(); ++k) mean += priors(region, k) * population_mean(region, k);
  return mean;
}

ClassPriors SyntheticSpec::region_priors(int region) const {
  return ClassPriors::from_vector(region_ids[static_cast<std::size_t>(region)], class_names,
                                  priors.row(region).transpose());
}

Dataset generate_region(const SyntheticSpec& spec, int region, int n, std::uint64_t stream_seed) {
  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(spec.covariance).matrixL();
  const Eigen::Index d = spec.dim();
  const int k = spec.num_classes();
  Rng rng(stream_seed);
  Dataset data;
  data.class_list = spec.class_names;
  data.features.resize(n, d);
  data.labels.reserve(static_cast<std::size_t>(n));
  data.regions.assign(static_cast<std::size_t>(n), spec.region_ids[static_cast<std::size_t>(region)]);
  data.pixel_ids.reserve(static_cast<std::size_t>(n));
  Eigen::VectorXd z(d);
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    double cumulative = 0.0;
    int label = -1;
    for (int c = 0; c < k; ++c) {
      cumulative += spec.priors(region, c);
      if (u < cumulative && spec.priors(region, c) > 0.0) {
        label = c;
        break;
      }
    }
    if (label < 0) {
      // u landed in the round-off gap above the cumulative sum.
      for (int c = k - 1; c >= 0; --c) {
        if (spec.priors(region, c) > 0.0) {
          label = c;
          break;
        }
      }
    }
    for (Eigen::Index j = 0; j < d; ++j) z(j) = rng.normal();
    data.features.row(i) = (spec.population_mean(region, label) + chol * z).transpose();
    data.labels.push_back(label);
    data.pixel_ids.push_back(spec.region_ids[static_cast<std::size_t>(region)] + "_" + std::to_string(i));
  }
  return data;
}

std::map<std::string, Dataset> generate(const SyntheticSpec& spec) {
  spec.validate();
  std::map<std::string, Dataset> out;
  for (int r = 0; r < spec.num_regions(); ++r) {
    out.emplace(spec.region_ids[static_cast<std::size_t>(r)],
                generate_region(spec, r, spec.samples_per_region[static_cast<std::size_t>(r)],
                                derive_seed(spec.seed, static_cast<std::uint64_t>(r))));
  }
  return out;
}

LdaModel population_lda(const SyntheticSpec& spec, int region) {
  const int k = spec.num_classes();
  Eigen::MatrixXd means(k, spec.dim());
  for (int c = 0; c < k; ++c) means.row(c) = spec.population_mean(region, c).transpose();
  return LdaModel::from_parameters(spec.class_names, std::move(means), spec.covariance,
                                   spec.priors.row(region).transpose());
}

PosteriorVector true_posteriors(const SyntheticSpec& spec, const std::string& region_id,
                                const Eigen::Ref<const Eigen::VectorXd>& x) {
  spec.validate();
  const int region = spec.region_index(region_id);
  if (x.size() != spec.dim()) throw Error(ErrorCode::DimensionMismatch, "point has wrong dimension");
  const Eigen::LLT<Eigen::MatrixXd> llt(spec.covariance);
  Eigen::VectorXd scores(spec.num_classes());
  for (int c = 0; c < spec.num_classes(); ++c) {
    const double p = spec.priors(region, c);
    if (p == 0.0) {
      scores(c) = -std::numeric_limits<double>::infinity();
      continue;
    }
    const Eigen::VectorXd diff = x - spec.population_mean(region, c);
    const Eigen::VectorXd w = llt.matrixL().solve(diff);
    scores(c) = std::log(p) - 0.5 * w.squaredNorm();
  }
  const double top = scores.maxCoeff();
  Eigen::VectorXd post = (scores.array() - top).exp().matrix();
  return post / post.sum();
}

AccuracyEstimate bayes_accuracy(const SyntheticSpec& spec, const std::string& region_id,
                                int n_monte_carlo, std::uint64_t seed) {
  spec.validate();
  if (n_monte_carlo < 1) throw Error(ErrorCode::InvalidParams, "n_monte_carlo must be positive");
  const int region = spec.region_index(region_id);
  const Dataset draws = generate_region(spec, region, n_monte_carlo, seed);
  const Eigen::LLT<Eigen::MatrixXd> llt(spec.covariance);
  std::vector<Eigen::VectorXd> whitened_means;
  for (int c = 0; c < spec.num_classes(); ++c) {
    whitened_means.push_back(llt.matrixL().solve(spec.population_mean(region, c)));
  }
  int correct = 0;
  Eigen::VectorXd scores(spec.num_classes());
  for (int i = 0; i < n_monte_carlo; ++i) {
    const Eigen::VectorXd z = llt.matrixL().solve(draws.features.row(i).transpose());
    for (int c = 0; c < spec.num_classes(); ++c) {
      const double p = spec.priors(region, c);
      scores(c) = p > 0.0 ? std::log(p) - 0.5 * (z - whitened_means[static_cast<std::size_t>(c)]).squaredNorm()
                          : -std::numeric_limits<double>::infinity();
    }
    if (argmax_index(scores) == draws.labels[static_cast<std::size_t>(i)]) ++correct;
  }
  const double acc = static_cast<double>(correct) / n_monte_carlo;
  return {acc, std::sqrt(acc * (1.0 - acc) / n_monte_carlo)};
}

SyntheticSpec default_acceptance_world(std::uint64_t seed, int samples_per_region) {
  SyntheticSpec spec;
  spec.region_ids = {"region_1", "region_2", "region_3"};
  spec.class_names = {"class_1", "class_2", "class_3", "class_4"};
  spec.train_region = 0;
  const int d = 6;
  spec.covariance.resize(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) spec.covariance(i, j) = std::pow(0.3, std::abs(i - j));
  }
  spec.class_effects.resize(4, d);
  spec.class_effects << 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
                        2.0, 1.0, 0.0, 0.5, 0.0, 0.0,
                        0.0, 2.0, 1.5, 0.0, -0.5, 0.0,
                        1.0, 0.0, 2.0, 1.5, 0.0, 0.5;
  spec.region_effects.resize(3, d);
  spec.region_effects << 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
                         1.2, -0.8, 0.6, 0.0, 0.4, -0.4,
                         -0.8, 1.0, 0.0, -0.6, 0.5, 0.3;
  spec.priors.resize(3, 4);
  spec.priors << 0.25, 0.25, 0.25, 0.25,
                 0.70, 0.10, 0.10, 0.10,
                 0.10, 0.20, 0.30, 0.40;
  spec.samples_per_region.assign(3, samples_per_region);
  spec.seed = seed;
  return spec;
}

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from(const json& j, const char* name) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw Error(ErrorCode::InvalidSpec, std::string(name) + " must be a non-empty nested array");
  }
  const std::size_t cols = j.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw Error(ErrorCode::InvalidSpec, std::string(name) + " is ragged");
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = j[i][c].get<double>();
    }
  }
  return m;
}

}  // namespace

void write_spec(const SyntheticSpec& spec, std::ostream& out) {
  json doc;
  doc["schema"] = kSynthSpecSchema;
  doc["region_ids"] = spec.region_ids;
  doc["class_names"] = spec.class_names;
  doc["train_region"] = spec.region_ids.at(static_cast<std::size_t>(spec.train_region));
  doc["class_effects"] = matrix_json(spec.class_effects);
  doc["region_effects"] = matrix_json(spec.region_effects);
  doc["covariance"] = matrix_json(spec.covariance);
  doc["priors"] = matrix_json(spec.priors);
  doc["samples_per_region"] = spec.samples_per_region;
  doc["seed"] = spec.seed;
  out << doc.dump(2) << '\n';
}

SyntheticSpec read_spec(std::istream& in) {
  try {
    const json doc = json::parse(in);
    if (doc.value("schema", "") != kSynthSpecSchema) {
      throw Error(ErrorCode::InvalidSpec, std::string("expected schema '") + kSynthSpecSchema + "'");
    }
    SyntheticSpec spec;
    spec.region_ids = doc.at("region_ids").get<std::vector<std::string>>();
    spec.class_names = doc.at("class_names").get<std::vector<std::string>>();
    const auto train = doc.at("train_region").get<std::string>();
    spec.train_region = -1;
    for (std::size_t r = 0; r < spec.region_ids.size(); ++r) {
      if (spec.region_ids[r] == train) spec.train_region = static_cast<int>(r);
    }
    spec.class_effects = matrix_from(doc.at("class_effects"), "class_effects");
    spec.region_effects = matrix_from(doc.at("region_effects"), "region_effects");
    spec.covariance = matrix_from(doc.at("covariance"), "covariance");
    spec.priors = matrix_from(doc.at("priors"), "priors");
    spec.samples_per_region = doc.at("samples_per_region").get<std::vector<int>>();
    spec.seed = doc.at("seed").get<std::uint64_t>();
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, std::string("malformed synthetic spec: ") + e.what());
  }
}

SyntheticSpec read_spec_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  return read_spec(in);
}

}  // namespace cropshift
