#pragma once

#include <iosfwd>
#include <string>

#include "cropshift/classify.hpp"

namespace cropshift {

/// Format tag written into every model file. Loading rejects other tags.
inline constexpr const char* kModelFormat = "cropshift-model";
inline constexpr int kModelFormatVersion = 1;

void save_model(const TrainedClassifier& model, std::ostream& out);
TrainedClassifier load_model(std::istream& in);

void save_model_file(const TrainedClassifier& model, const std::string& path);
TrainedClassifier load_model_file(const std::string& path);

}  // namespace cropshift
