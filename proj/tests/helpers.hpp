#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "cropshift/classify.hpp"
#include "cropshift/rng.hpp"

namespace testing {

inline cropshift::Dataset make_dataset(const Eigen::MatrixXd& x, std::vector<int> labels,
                                       std::vector<std::string> classes, const std::string& region = "r") {
  cropshift::Dataset d;
  d.features = x;
  d.labels = std::move(labels);
  d.class_list = std::move(classes);
  d.regions.assign(static_cast<std::size_t>(x.rows()), region);
  for (Eigen::Index i = 0; i < x.rows(); ++i) d.pixel_ids.push_back(region + "_" + std::to_string(i));
  return d;
}

/// Gaussian blobs with the given class centers and unit-ish spread.
inline cropshift::Dataset blobs(const Eigen::MatrixXd& centers, int per_class, double spread, std::uint64_t seed,
                                const std::string& region = "r") {
  cropshift::Rng rng(seed);
  const auto k = centers.rows();
  Eigen::MatrixXd x(k * per_class, centers.cols());
  std::vector<int> labels;
  std::vector<std::string> classes;
  for (Eigen::Index c = 0; c < k; ++c) classes.push_back("c" + std::to_string(c));
  for (Eigen::Index c = 0; c < k; ++c) {
    for (int i = 0; i < per_class; ++i) {
      for (Eigen::Index j = 0; j < centers.cols(); ++j) x(c * per_class + i, j) = centers(c, j) + spread * rng.normal();
      labels.push_back(static_cast<int>(c));
    }
  }
  return make_dataset(x, std::move(labels), std::move(classes), region);
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    cropshift::Rng rng(std::hash<std::string>{}(tag) ^ static_cast<std::uint64_t>(::getpid()));
    path_ = std::filesystem::temp_directory_path() / ("cropshift_" + tag + "_" + std::to_string(rng.next_u64() % 1000000));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace testing
