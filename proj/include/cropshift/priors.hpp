#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace cropshift {

/// Class-probability vector of one region, keyed by class name.
struct ClassPriors {
  std::string region_id;
  std::vector<std::string> classes;
  std::vector<double> proportions;

  /// Throws InvalidPriors unless entries are finite, nonnegative, unique and
  /// sum to 1 within `tolerance`.
  void validate(double tolerance = 1e-9) const;

  /// Proportion of a class; throws ClassMismatch for an unknown class.
  double at(const std::string& class_name) const;

  /// Proportions reordered to `class_list`. Throws ClassMismatch unless the
  /// two class sets are identical.
  Eigen::VectorXd aligned(const std::vector<std::string>& class_list) const;

  static ClassPriors from_vector(std::string region_id, std::vector<std::string> classes,
                                 const Eigen::VectorXd& proportions);
};

}  // namespace cropshift
