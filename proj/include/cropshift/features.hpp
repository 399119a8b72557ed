#pragma once

// Harmonic featurization of irregular, quality-flagged multispectral series.
//
// Each band's clear observations are regressed onto the annual Fourier basis
//   [1, cos 2πt, sin 2πt, cos 4πt, sin 4πt]
// with t in years since April 1 of the target year, and the five coefficients
// of every band are concatenated band-major into the feature vector.

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cropshift {

inline constexpr int kHarmonicFrequencies = 2;
inline constexpr int kCoefficientsPerBand = 1 + 2 * kHarmonicFrequencies;
inline constexpr const char* kGcviBand = "GCVI";

struct Observation {
  double time_years = 0.0;
  std::map<std::string, double> band_values;
  bool clear = true;
};

struct PixelTimeSeries {
  std::string pixel_id;
  std::string region_id;
  std::optional<std::string> label;
  std::vector<Observation> observations;  // sorted by time_years
};

struct HarmonicCoefficients {
  double c = 0.0;
  double a1 = 0.0;
  double b1 = 0.0;
  double a2 = 0.0;
  double b2 = 0.0;

  std::array<double, kCoefficientsPerBand> as_array() const { return {c, a1, b1, a2, b2}; }
  bool operator==(const HarmonicCoefficients&) const = default;
};

struct FeatureVector {
  std::string pixel_id;
  std::string region_id;
  std::optional<std::string> label;
  std::vector<double> values;  // band-major, (c, a1, b1, a2, b2) per band
};

struct TimedValue {
  double time_years;
  double value;
};

/// Green Chlorophyll Vegetation Index, NIR / GREEN - 1.
/// Throws Error{DivisionByZero} when green == 0.
double compute_gcvi(double nir, double green);

/// Keeps the clear observations, in order.
PixelTimeSeries filter_clear(const PixelTimeSeries& series);

/// Adds a GCVI band computed from `nir_band` and `green_band` to every
/// observation. Expects an already clear-filtered series.
PixelTimeSeries append_gcvi(const PixelTimeSeries& series, const std::string& nir_band,
                            const std::string& green_band);

/// Row of the harmonic design matrix at time t.
std::array<double, kCoefficientsPerBand> harmonic_basis(double time_years);

/// Evaluates c + Σ a_k cos(2πkt) + b_k sin(2πkt).
double evaluate_harmonics(const HarmonicCoefficients& coeffs, double time_years);

/// Unweighted least squares onto the harmonic basis, solved by SVD.
/// Throws InsufficientObservations with fewer than five distinct times and
/// RankDeficient when σ_min < 1e-10 σ_max.
HarmonicCoefficients fit_harmonics(std::span<const TimedValue> samples);

/// Fits every manifest band and concatenates the coefficients. Failures are
/// rethrown with the pixel id and band name in the message.
FeatureVector build_features(const PixelTimeSeries& series,
                             const std::vector<std::string>& band_manifest);

struct DroppedPixel {
  std::string pixel_id;
  std::string region_id;
  std::string reason;
};

struct FeatureTable {
  std::vector<std::string> band_manifest;
  std::vector<FeatureVector> rows;
  std::vector<DroppedPixel> dropped;
};

struct FeaturizeOptions {
  std::string nir_band = "B8";
  std::string green_band = "B3";
};

/// Full per-pixel pipeline: clear filter, GCVI (when the manifest asks for
/// it), harmonic fit. Pixels whose fit fails are reported in `dropped`;
/// a manifest band absent from the input raises ParseError.
FeatureTable featurize(const std::vector<PixelTimeSeries>& pixels,
                       const std::vector<std::string>& band_manifest,
                       const FeaturizeOptions& options = {});

struct CalendarDate {
  int year = 0;
  unsigned month = 1;
  unsigned day = 1;
};

/// Parses YYYY-MM-DD; throws ParseError.
CalendarDate parse_date(const std::string& text);

/// (date - anchor) in days divided by 365.25.
double year_fraction(const CalendarDate& date, const CalendarDate& anchor);

}  // namespace cropshift
