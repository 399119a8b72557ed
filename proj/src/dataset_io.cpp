#include "cropshift/dataset_io.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_map>

#include "cropshift/csv.hpp"
#include "cropshift/error.hpp"

namespace cropshift {

namespace {

[[noreturn]] void parse_fail(const std::string& source, std::size_t line, const std::string& msg) {
  throw Error(ErrorCode::ParseError, source + ":" + std::to_string(line) + ": " + msg);
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  return in;
}

bool looks_like_date(const std::string& text) {
  return text.size() == 10 && text[4] == '-' && text[7] == '-';
}

}  // namespace

std::vector<PixelTimeSeries> read_timeseries(std::istream& in, const std::string& source,
                                             const std::optional<CalendarDate>& anchor) {
  const csv::Table table = csv::read(in, source);
  if (table.header.empty()) return {};
  const auto c_pixel = table.require_column("pixel_id", source);
  const auto c_region = table.require_column("region_id", source);
  const auto c_label = table.require_column("label", source);
  const auto c_band = table.require_column("band", source);
  const auto c_time = table.require_column("time_years", source);
  const auto c_value = table.require_column("value", source);
  const auto c_clear = table.require_column("clear", source);

  struct PixelBuild {
    PixelTimeSeries series;
    std::size_t first_line;
    std::map<double, Observation> by_time;
    std::set<std::string> bands;
  };
  std::vector<PixelBuild> pixels;
  std::unordered_map<std::string, std::size_t> index;

  for (const auto& row : table.rows) {
    const auto& f = row.fields;
    const std::string& pixel_id = f[c_pixel];
    if (pixel_id.empty()) parse_fail(source, row.line, "empty pixel_id");
    std::optional<std::string> label;
    if (!f[c_label].empty()) label = f[c_label];

    auto [it, inserted] = index.try_emplace(pixel_id, pixels.size());
    if (inserted) {
      pixels.push_back({PixelTimeSeries{pixel_id, f[c_region], label, {}}, row.line, {}, {}});
    }
    PixelBuild& build = pixels[it->second];
    if (build.series.region_id != f[c_region] || build.series.label != label) {
      parse_fail(source, row.line, "pixel '" + pixel_id + "' changes region or label");
    }

    double t = 0.0;
    if (anchor && looks_like_date(f[c_time])) {
      try {
        t = year_fraction(parse_date(f[c_time]), *anchor);
      } catch (const Error& e) {
        parse_fail(source, row.line, e.detail());
      }
    } else {
      t = csv::parse_double(f[c_time], source, row.line);
    }
    const double value = csv::parse_double(f[c_value], source, row.line);
    bool clear = false;
    if (f[c_clear] == "1") {
      clear = true;
    } else if (f[c_clear] != "0") {
      parse_fail(source, row.line, "clear must be 0 or 1");
    }

    Observation& obs = build.by_time[t];
    const bool fresh = obs.band_values.empty();
    obs.time_years = t;
    if (!obs.band_values.emplace(f[c_band], value).second) {
      parse_fail(source, row.line, "duplicate band '" + f[c_band] + "' at the same time");
    }
    // A pass is clear only if every band row says so.
    obs.clear = fresh ? clear : (obs.clear && clear);
    build.bands.insert(f[c_band]);
  }

  std::vector<PixelTimeSeries> out;
  out.reserve(pixels.size());
  for (auto& build : pixels) {
    for (auto& [t, obs] : build.by_time) {
      if (obs.band_values.size() != build.bands.size()) {
        parse_fail(source, build.first_line,
                   "pixel '" + build.series.pixel_id + "' is missing bands at t=" + csv::format_double(t));
      }
      build.series.observations.push_back(std::move(obs));
    }
    out.push_back(std::move(build.series));
  }
  return out;
}

std::vector<PixelTimeSeries> read_timeseries_file(const std::string& path,
                                                  const std::optional<CalendarDate>& anchor) {
  auto in = open_input(path);
  return read_timeseries(in, path, anchor);
}

void write_features(std::ostream& out, const FeatureTable& table) {
  const std::size_t width = table.band_manifest.size() * kCoefficientsPerBand;
  std::vector<std::string> header{"pixel_id", "region_id", "label"};
  for (std::size_t j = 0; j < width; ++j) header.push_back("f" + std::to_string(j));
  csv::write_row(out, header);
  for (const auto& row : table.rows) {
    std::vector<std::string> fields{row.pixel_id, row.region_id, row.label.value_or("")};
    for (double v : row.values) fields.push_back(csv::format_double(v));
    csv::write_row(out, fields);
  }
}

void write_band_manifest(std::ostream& out, const std::vector<std::string>& bands) {
  for (const auto& b : bands) out << b << '\n';
}

std::vector<std::string> read_band_manifest(std::istream& in) {
  std::vector<std::string> bands;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t");
    bands.push_back(line.substr(first, last - first + 1));
  }
  if (std::set<std::string>(bands.begin(), bands.end()).size() != bands.size()) {
    throw Error(ErrorCode::ParseError, "band manifest lists a band twice");
  }
  return bands;
}

void write_drop_report(std::ostream& out, const std::vector<DroppedPixel>& dropped) {
  csv::write_row(out, {"pixel_id", "region_id", "reason"});
  for (const auto& d : dropped) csv::write_row(out, {d.pixel_id, d.region_id, d.reason});
}

FeatureFile read_features(std::istream& in, const std::string& source) {
  const csv::Table table = csv::read(in, source);
  FeatureFile file;
  if (table.header.empty()) return file;
  const auto c_pixel = table.require_column("pixel_id", source);
  const auto c_region = table.require_column("region_id", source);
  const auto c_label = table.require_column("label", source);
  const auto c_group = table.column("group_id");
  std::vector<std::size_t> feature_cols;
  for (std::size_t j = 0;; ++j) {
    auto col = table.column("f" + std::to_string(j));
    if (!col) break;
    feature_cols.push_back(*col);
  }
  if (feature_cols.empty()) parse_fail(source, 1, "no feature columns f0..");
  const std::size_t known = 3 + (c_group ? 1 : 0) + feature_cols.size();
  if (known != table.header.size()) parse_fail(source, 1, "unexpected columns in feature header");

  file.values.resize(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(feature_cols.size()));
  std::set<std::string> seen;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const auto& f = row.fields;
    if (!seen.insert(f[c_pixel]).second) parse_fail(source, row.line, "duplicate pixel_id '" + f[c_pixel] + "'");
    file.pixel_ids.push_back(f[c_pixel]);
    file.region_ids.push_back(f[c_region]);
    file.labels.push_back(f[c_label]);
    if (c_group) file.group_ids.push_back(f[*c_group]);
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      file.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          csv::parse_double(f[feature_cols[j]], source, row.line);
    }
  }
  return file;
}

FeatureFile read_features_file(const std::string& path) {
  auto in = open_input(path);
  return read_features(in, path);
}

FeatureFile merge_feature_files(const std::vector<FeatureFile>& files) {
  FeatureFile out;
  Eigen::Index rows = 0, cols = -1;
  bool groups = !files.empty();
  for (const auto& f : files) {
    if (f.pixel_ids.empty()) continue;
    if (cols >= 0 && f.values.cols() != cols) {
      throw Error(ErrorCode::ParseError, "feature files have different widths");
    }
    cols = f.values.cols();
    rows += f.values.rows();
    groups = groups && !f.group_ids.empty();
  }
  out.values.resize(rows, std::max<Eigen::Index>(cols, 0));
  Eigen::Index at = 0;
  std::set<std::string> seen;
  for (const auto& f : files) {
    if (f.pixel_ids.empty()) continue;
    out.values.middleRows(at, f.values.rows()) = f.values;
    at += f.values.rows();
    for (const auto& id : f.pixel_ids) {
      if (!seen.insert(id).second) throw Error(ErrorCode::ParseError, "duplicate pixel_id '" + id + "' across files");
    }
    out.pixel_ids.insert(out.pixel_ids.end(), f.pixel_ids.begin(), f.pixel_ids.end());
    out.region_ids.insert(out.region_ids.end(), f.region_ids.begin(), f.region_ids.end());
    out.labels.insert(out.labels.end(), f.labels.begin(), f.labels.end());
    if (groups) out.group_ids.insert(out.group_ids.end(), f.group_ids.begin(), f.group_ids.end());
  }
  return out;
}

void write_dataset_features(std::ostream& out, const Dataset& data) {
  std::vector<std::string> header{"pixel_id", "region_id", "label"};
  if (!data.group_ids.empty()) header.push_back("group_id");
  for (Eigen::Index j = 0; j < data.dim(); ++j) header.push_back("f" + std::to_string(j));
  csv::write_row(out, header);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const auto r = static_cast<std::size_t>(i);
    const int label = data.labels[r];
    std::vector<std::string> fields{data.pixel_ids.empty() ? std::to_string(i) : data.pixel_ids[r],
                                    data.regions[r],
                                    label == kUnlabeled ? "" : data.class_list[static_cast<std::size_t>(label)]};
    if (!data.group_ids.empty()) fields.push_back(data.group_ids[r]);
    for (Eigen::Index j = 0; j < data.dim(); ++j) fields.push_back(csv::format_double(data.features(i, j)));
    csv::write_row(out, fields);
  }
}

std::vector<std::string> collect_classes(const FeatureFile& file, const std::vector<std::string>& extra) {
  std::set<std::string> classes(extra.begin(), extra.end());
  for (const auto& l : file.labels) {
    if (!l.empty()) classes.insert(l);
  }
  return {classes.begin(), classes.end()};
}

std::map<std::string, Dataset> to_region_datasets(const FeatureFile& file,
                                                  const std::vector<std::string>& class_list) {
  std::map<std::string, std::vector<Eigen::Index>> rows_by_region;
  for (std::size_t i = 0; i < file.region_ids.size(); ++i) {
    rows_by_region[file.region_ids[i]].push_back(static_cast<Eigen::Index>(i));
  }
  std::map<std::string, Dataset> out;
  for (const auto& [region, rows] : rows_by_region) {
    Dataset data;
    data.class_list = class_list;
    data.features.resize(static_cast<Eigen::Index>(rows.size()), file.values.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto r = static_cast<std::size_t>(rows[i]);
      data.features.row(static_cast<Eigen::Index>(i)) = file.values.row(rows[i]);
      const std::string& label = file.labels[r];
      if (label.empty()) {
        data.labels.push_back(kUnlabeled);
      } else {
        auto it = std::find(class_list.begin(), class_list.end(), label);
        if (it == class_list.end()) {
          throw Error(ErrorCode::ParseError, "pixel '" + file.pixel_ids[r] + "' has unknown label '" + label + "'");
        }
        data.labels.push_back(static_cast<int>(it - class_list.begin()));
      }
      data.regions.push_back(region);
      data.pixel_ids.push_back(file.pixel_ids[r]);
      if (!file.group_ids.empty()) data.group_ids.push_back(file.group_ids[r]);
    }
    out.emplace(region, std::move(data));
  }
  return out;
}

std::map<std::string, ClassPriors> read_priors(std::istream& in, const std::string& source) {
  const csv::Table table = csv::read(in, source);
  if (table.header.empty()) throw Error(ErrorCode::ParseError, source + ": empty priors file");
  const auto c_region = table.require_column("region_id", source);
  const auto c_class = table.require_column("class", source);
  const auto c_prop = table.column("proportion");
  const auto c_area = table.column("area");
  const auto c_mfa = table.column("mean_field_area");
  if (!c_prop && !(c_area && c_mfa)) {
    parse_fail(source, 1, "priors need a proportion column or area and mean_field_area columns");
  }

  std::map<std::string, ClassPriors> out;
  if (c_prop) {
    std::map<std::string, std::size_t> first_line;
    for (const auto& row : table.rows) {
      auto& p = out[row.fields[c_region]];
      p.region_id = row.fields[c_region];
      first_line.try_emplace(p.region_id, row.line);
      p.classes.push_back(row.fields[c_class]);
      p.proportions.push_back(csv::parse_double(row.fields[*c_prop], source, row.line));
    }
    for (auto& [region, p] : out) {
      try {
        p.validate(1e-6);
      } catch (const Error& e) {
        parse_fail(source, first_line[region], e.detail());
      }
    }
    return out;
  }

  std::map<std::string, std::map<std::string, double>> areas, mfas;
  std::map<std::string, std::size_t> first_line;
  for (const auto& row : table.rows) {
    const auto& region = row.fields[c_region];
    const auto& klass = row.fields[c_class];
    first_line.try_emplace(region, row.line);
    if (areas[region].contains(klass)) parse_fail(source, row.line, "duplicate class '" + klass + "'");
    areas[region][klass] = csv::parse_double(row.fields[*c_area], source, row.line);
    mfas[region][klass] = csv::parse_double(row.fields[*c_mfa], source, row.line);
  }
  for (const auto& [region, a] : areas) {
    try {
      out.emplace(region, aggregate_to_priors(region, a, mfas[region]));
    } catch (const Error& e) {
      parse_fail(source, first_line[region], std::string(to_string(e.code())) + ": " + e.detail());
    }
  }
  return out;
}

std::map<std::string, ClassPriors> read_priors_file(const std::string& path) {
  auto in = open_input(path);
  return read_priors(in, path);
}

void write_priors(std::ostream& out, const std::map<std::string, ClassPriors>& priors) {
  csv::write_row(out, {"region_id", "class", "proportion"});
  for (const auto& [region, p] : priors) {
    for (std::size_t k = 0; k < p.classes.size(); ++k) {
      csv::write_row(out, {region, p.classes[k], csv::format_double(p.proportions[k])});
    }
  }
}

void write_shifts(std::ostream& out, const std::vector<RegionalShift>& shifts) {
  std::vector<std::string> header{"region_id"};
  const Eigen::Index d = shifts.empty() ? 0 : shifts.front().offset.size();
  for (Eigen::Index j = 0; j < d; ++j) header.push_back("f" + std::to_string(j));
  csv::write_row(out, header);
  for (const auto& s : shifts) {
    std::vector<std::string> fields{s.region_id};
    for (Eigen::Index j = 0; j < s.offset.size(); ++j) fields.push_back(csv::format_double(s.offset(j)));
    csv::write_row(out, fields);
  }
}

void write_confusion(std::ostream& out, const ConfusionMatrix& cm) {
  std::vector<std::string> header{"true_class"};
  header.insert(header.end(), cm.class_list.begin(), cm.class_list.end());
  csv::write_row(out, header);
  for (std::size_t i = 0; i < cm.class_list.size(); ++i) {
    std::vector<std::string> fields{cm.class_list[i]};
    for (std::size_t j = 0; j < cm.class_list.size(); ++j) {
      fields.push_back(std::to_string(cm.counts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
    }
    csv::write_row(out, fields);
  }
}

}  // namespace cropshift
