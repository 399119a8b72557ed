#include "cropshift/features.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <numbers>
#include <set>

#include "cropshift/error.hpp"

namespace cropshift {

namespace {

constexpr double kRankTolerance = 1e-10;

}  // namespace

double compute_gcvi(double nir, double green) {
  if (green == 0.0) {
    throw Error(ErrorCode::DivisionByZero, "GCVI undefined for green reflectance 0");
  }
  return nir / green - 1.0;
}

PixelTimeSeries filter_clear(const PixelTimeSeries& series) {
  PixelTimeSeries out{series.pixel_id, series.region_id, series.label, {}};
  std::copy_if(series.observations.begin(), series.observations.end(),
               std::back_inserter(out.observations),
               [](const Observation& obs) { return obs.clear; });
  return out;
}

PixelTimeSeries append_gcvi(const PixelTimeSeries& series, const std::string& nir_band,
                            const std::string& green_band) {
  PixelTimeSeries out = series;
  for (auto& obs : out.observations) {
    auto nir = obs.band_values.find(nir_band);
    auto green = obs.band_values.find(green_band);
    if (nir == obs.band_values.end() || green == obs.band_values.end()) {
      throw Error(ErrorCode::ParseError, "pixel " + series.pixel_id + ": GCVI needs bands '" +
                                             nir_band + "' and '" + green_band + "'");
    }
    try {
      obs.band_values[kGcviBand] = compute_gcvi(nir->second, green->second);
    } catch (const Error& e) {
      throw Error(e.code(), "pixel " + series.pixel_id + " at t=" +
                                std::to_string(obs.time_years) + ": green reflectance is 0");
    }
  }
  return out;
}

std::array<double, kCoefficientsPerBand> harmonic_basis(double time_years) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  return {1.0,
          std::cos(two_pi * time_years),
          std::sin(two_pi * time_years),
          std::cos(2.0 * two_pi * time_years),
          std::sin(2.0 * two_pi * time_years)};
}

double evaluate_harmonics(const HarmonicCoefficients& coeffs, double time_years) {
  const auto basis = harmonic_basis(time_years);
  const auto w = coeffs.as_array();
  double sum = 0.0;
  for (int i = 0; i < kCoefficientsPerBand; ++i) sum += w[i] * basis[i];
  return sum;
}

HarmonicCoefficients fit_harmonics(std::span<const TimedValue> samples) {
  std::set<double> distinct;
  for (const auto& s : samples) distinct.insert(s.time_years);
  if (distinct.size() < static_cast<std::size_t>(kCoefficientsPerBand)) {
    throw Error(ErrorCode::InsufficientObservations,
                std::to_string(distinct.size()) + " distinct time values, need " +
                    std::to_string(kCoefficientsPerBand));
  }

  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd design(n, kCoefficientsPerBand);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    if (!std::isfinite(s.time_years) || !std::isfinite(s.value)) {
      throw Error(ErrorCode::ParseError, "non-finite sample in harmonic fit");
    }
    const auto row = harmonic_basis(s.time_years);
    for (int j = 0; j < kCoefficientsPerBand; ++j) design(i, j) = row[j];
    y(i) = s.value;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) < kRankTolerance * sv(0)) {
    throw Error(ErrorCode::RankDeficient, "harmonic design matrix is numerically singular");
  }
  const Eigen::VectorXd beta = svd.solve(y);
  return {beta(0), beta(1), beta(2), beta(3), beta(4)};
}

FeatureVector build_features(const PixelTimeSeries& series,
                             const std::vector<std::string>& band_manifest) {
  FeatureVector fv{series.pixel_id, series.region_id, series.label, {}};
  fv.values.reserve(band_manifest.size() * kCoefficientsPerBand);
  std::vector<TimedValue> samples;
  for (const auto& band : band_manifest) {
    samples.clear();
    for (const auto& obs : series.observations) {
      auto it = obs.band_values.find(band);
      if (it == obs.band_values.end()) {
        throw Error(ErrorCode::ParseError,
                    "pixel " + series.pixel_id + ": missing band '" + band + "'");
      }
      samples.push_back({obs.time_years, it->second});
    }
    try {
      const auto coeffs = fit_harmonics(samples).as_array();
      fv.values.insert(fv.values.end(), coeffs.begin(), coeffs.end());
    } catch (const Error& e) {
      throw Error(e.code(), "pixel " + series.pixel_id + ", band " + band + ": " + e.detail());
    }
  }
  return fv;
}

FeatureTable featurize(const std::vector<PixelTimeSeries>& pixels,
                       const std::vector<std::string>& band_manifest,
                       const FeaturizeOptions& options) {
  FeatureTable table;
  table.band_manifest = band_manifest;
  const bool wants_gcvi =
      std::find(band_manifest.begin(), band_manifest.end(), kGcviBand) != band_manifest.end();
  for (const auto& pixel : pixels) {
    try {
      PixelTimeSeries series = filter_clear(pixel);
      const bool has_gcvi = !series.observations.empty() &&
                            series.observations.front().band_values.contains(kGcviBand);
      if (wants_gcvi && !has_gcvi) {
        series = append_gcvi(series, options.nir_band, options.green_band);
      }
      table.rows.push_back(build_features(series, band_manifest));
    } catch (const Error& e) {
      // A band missing from the input is a schema problem, not a bad pixel.
      if (e.code() == ErrorCode::ParseError) throw;
      table.dropped.push_back({pixel.pixel_id, pixel.region_id, e.what()});
    }
  }
  return table;
}

CalendarDate parse_date(const std::string& text) {
  int y = 0;
  unsigned m = 0, d = 0;
  char dash1 = 0, dash2 = 0;
  if (text.size() == 10 && std::sscanf(text.c_str(), "%4d%c%2u%c%2u", &y, &dash1, &m, &dash2,
                                       &d) == 5 &&
      dash1 == '-' && dash2 == '-') {
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                          std::chrono::day{d}};
    if (ymd.ok()) return {y, m, d};
  }
  throw Error(ErrorCode::ParseError, "invalid date '" + text + "', expected YYYY-MM-DD");
}

double year_fraction(const CalendarDate& date, const CalendarDate& anchor) {
  using namespace std::chrono;
  const sys_days a{year{anchor.year} / month{anchor.month} / day{anchor.day}};
  const sys_days b{year{date.year} / month{date.month} / day{date.day}};
  return static_cast<double>((b - a).count()) / 365.25;
}

}  // namespace cropshift
