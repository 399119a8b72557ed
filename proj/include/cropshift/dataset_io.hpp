#pragma once

// File formats shared by the CLI and tests.
//
//   time series (long):  pixel_id,region_id,label,band,time_years,value,clear
//   features (wide):     pixel_id,region_id,label[,group_id],f0,...,f{d-1}
//   band manifest:       one band name per line, in feature order
//   priors:              region_id,class,proportion
//                     or region_id,class,area,mean_field_area
//   shifts:              region_id,f0,...,f{d-1}
//   confusion:           true_class,<class_1>,...,<class_K>

#include <Eigen/Core>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cropshift/classify.hpp"
#include "cropshift/eval.hpp"
#include "cropshift/features.hpp"
#include "cropshift/priors.hpp"
#include "cropshift/shift.hpp"

namespace cropshift {

/// Reads long-format series grouped by pixel (first-appearance order), one
/// Observation per distinct time. `time_years` may hold YYYY-MM-DD dates
/// when `anchor` is given. Throws ParseError with the offending line.
std::vector<PixelTimeSeries> read_timeseries(std::istream& in, const std::string& source,
                                             const std::optional<CalendarDate>& anchor = std::nullopt);
std::vector<PixelTimeSeries> read_timeseries_file(const std::string& path,
                                                  const std::optional<CalendarDate>& anchor = std::nullopt);

void write_features(std::ostream& out, const FeatureTable& table);
void write_band_manifest(std::ostream& out, const std::vector<std::string>& bands);
std::vector<std::string> read_band_manifest(std::istream& in);
void write_drop_report(std::ostream& out, const std::vector<DroppedPixel>& dropped);

struct FeatureFile {
  std::vector<std::string> pixel_ids;
  std::vector<std::string> region_ids;
  std::vector<std::string> labels;     // empty string when unlabeled
  std::vector<std::string> group_ids;  // empty when the column is absent
  Eigen::MatrixXd values;
};

FeatureFile read_features(std::istream& in, const std::string& source);
FeatureFile read_features_file(const std::string& path);
/// Concatenates files with identical feature widths.
FeatureFile merge_feature_files(const std::vector<FeatureFile>& files);

/// Writes one Dataset (labels resolved through its class list).
void write_dataset_features(std::ostream& out, const Dataset& data);

/// Sorted distinct non-empty labels, plus any extra classes.
std::vector<std::string> collect_classes(const FeatureFile& file, const std::vector<std::string>& extra = {});

/// Splits rows by region. Labels outside `class_list` raise ParseError.
std::map<std::string, Dataset> to_region_datasets(const FeatureFile& file,
                                                  const std::vector<std::string>& class_list);

/// Proportions must sum to 1 within 1e-6 per region (ParseError otherwise);
/// area rows go through aggregate_to_priors.
std::map<std::string, ClassPriors> read_priors(std::istream& in, const std::string& source);
std::map<std::string, ClassPriors> read_priors_file(const std::string& path);
void write_priors(std::ostream& out, const std::map<std::string, ClassPriors>& priors);

void write_shifts(std::ostream& out, const std::vector<RegionalShift>& shifts);
void write_confusion(std::ostream& out, const ConfusionMatrix& cm);

}  // namespace cropshift
