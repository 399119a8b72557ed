#pragma once

// Synthetic additive Gaussian-mixture worlds: region r, class k features are
// drawn from Normal(a_r + b_k, Σ) with a shared covariance, labels from the
// region's priors. The same parameters give an exact Bayes oracle.

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "cropshift/classify.hpp"
#include "cropshift/priors.hpp"

namespace cropshift {

inline constexpr const char* kSynthSpecSchema = "cropshift-synth/1";

struct SyntheticSpec {
  std::vector<std::string> region_ids;   // R
  std::vector<std::string> class_names;  // K
  int train_region = 0;                  // index whose region effect is zero
  Eigen::MatrixXd class_effects;         // K x d
  Eigen::MatrixXd region_effects;        // R x d
  Eigen::MatrixXd covariance;            // d x d, SPD
  Eigen::MatrixXd priors;                // R x K, rows sum to 1
  std::vector<int> samples_per_region;   // R
  std::uint64_t seed = 0;

  Eigen::Index dim() const { return class_effects.cols(); }
  int num_regions() const { return static_cast<int>(region_ids.size()); }
  int num_classes() const { return static_cast<int>(class_names.size()); }
  int region_index(const std::string& region_id) const;

  /// Throws InvalidSpec on any shape, SPD, prior or train-region violation.
  void validate() const;

  /// Mean a_r + b_k.
  Eigen::VectorXd population_mean(int region, int klass) const;
  /// Σ_k p_{r,k} (a_r + b_k).
  Eigen::VectorXd population_feature_mean(int region) const;
  ClassPriors region_priors(int region) const;
};

/// Samples every region; region r uses its own RNG stream derived from
/// (seed, r), so the output does not depend on generation order.
std::map<std::string, Dataset> generate(const SyntheticSpec& spec);

/// Draws `n` labeled points of one region from an explicit stream.
Dataset generate_region(const SyntheticSpec& spec, int region, int n, std::uint64_t stream_seed);

/// Posterior of the generating model in region `region_id`.
PosteriorVector true_posteriors(const SyntheticSpec& spec, const std::string& region_id,
                                const Eigen::Ref<const Eigen::VectorXd>& x);

/// LDA model holding the exact population parameters of one region:
/// means a_r + b_k, covariance Σ, priors p_r.
LdaModel population_lda(const SyntheticSpec& spec, int region);

struct AccuracyEstimate {
  double accuracy = 0.0;
  double standard_error = 0.0;
};

/// Monte Carlo accuracy of the Bayes rule in one region.
AccuracyEstimate bayes_accuracy(const SyntheticSpec& spec, const std::string& region_id,
                                int n_monte_carlo, std::uint64_t seed);

/// R=3, K=4, d=6 world: region_1 trains with near-uniform priors, the
/// others carry additive offsets and one has strongly skewed priors.
SyntheticSpec default_acceptance_world(std::uint64_t seed = 42, int samples_per_region = 2000);

/// JSON config with a "schema" key; matrices as nested arrays.
void write_spec(const SyntheticSpec& spec, std::ostream& out);
SyntheticSpec read_spec(std::istream& in);
SyntheticSpec read_spec_file(const std::string& path);

}  // namespace cropshift
