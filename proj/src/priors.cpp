#include "cropshift/priors.hpp"

#include <cmath>
#include <set>

#include "cropshift/error.hpp"

namespace cropshift {

void ClassPriors::validate(double tolerance) const {
  if (classes.size() != proportions.size()) {
    throw Error(ErrorCode::InvalidPriors, "region '" + region_id + "': class/proportion count mismatch");
  }
  if (classes.empty()) {
    throw Error(ErrorCode::InvalidPriors, "region '" + region_id + "': no classes");
  }
  std::set<std::string> seen;
  double sum = 0.0;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (!seen.insert(classes[i]).second) {
      throw Error(ErrorCode::InvalidPriors,
                  "region '" + region_id + "': duplicate class '" + classes[i] + "'");
    }
    if (!std::isfinite(proportions[i]) || proportions[i] < 0.0) {
      throw Error(ErrorCode::InvalidPriors, "region '" + region_id + "': class '" + classes[i] +
                                                "' has invalid proportion");
    }
    sum += proportions[i];
  }
  if (std::abs(sum - 1.0) > tolerance) {
    throw Error(ErrorCode::InvalidPriors,
                "region '" + region_id + "': proportions sum to " + std::to_string(sum));
  }
}

double ClassPriors::at(const std::string& class_name) const {
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] == class_name) return proportions.at(i);
  }
  throw Error(ErrorCode::ClassMismatch,
              "region '" + region_id + "' has no prior for class '" + class_name + "'");
}

Eigen::VectorXd ClassPriors::aligned(const std::vector<std::string>& class_list) const {
  if (class_list.size() != classes.size()) {
    throw Error(ErrorCode::ClassMismatch, "region '" + region_id + "': priors cover " +
                                              std::to_string(classes.size()) + " classes, expected " +
                                              std::to_string(class_list.size()));
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(class_list.size()));
  for (std::size_t k = 0; k < class_list.size(); ++k) {
    out(static_cast<Eigen::Index>(k)) = at(class_list[k]);
  }
  return out;
}

ClassPriors ClassPriors::from_vector(std::string region_id, std::vector<std::string> classes,
                                     const Eigen::VectorXd& proportions) {
  ClassPriors priors{std::move(region_id), std::move(classes), {}};
  priors.proportions.assign(proportions.data(), proportions.data() + proportions.size());
  return priors;
}

}  // namespace cropshift
