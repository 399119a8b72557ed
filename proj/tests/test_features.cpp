#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "cropshift/error.hpp"
#include "cropshift/features.hpp"
#include "cropshift/rng.hpp"

using namespace cropshift;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Independent reference: normal equations on a basis built here.
Eigen::VectorXd normal_equations_fit(const std::vector<TimedValue>& s) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(s.size()), 5);
  Eigen::VectorXd y(static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double t = s[i].time_years;
    const auto r = static_cast<Eigen::Index>(i);
    x.row(r) << 1.0, std::cos(kTwoPi * t), std::sin(kTwoPi * t), std::cos(2 * kTwoPi * t), std::sin(2 * kTwoPi * t);
    y(r) = s[i].value;
  }
  return (x.transpose() * x).ldlt().solve(x.transpose() * y);
}

double signal(const HarmonicCoefficients& h, double t) {
  return h.c + h.a1 * std::cos(kTwoPi * t) + h.b1 * std::sin(kTwoPi * t) + h.a2 * std::cos(2 * kTwoPi * t) +
         h.b2 * std::sin(2 * kTwoPi * t);
}

HarmonicCoefficients random_coeffs(Rng& rng) {
  return {rng.normal() * 3, rng.normal(), rng.normal(), rng.normal(), rng.normal()};
}

std::vector<double> random_times(Rng& rng, int n) {
  std::vector<double> t;
  for (int i = 0; i < n; ++i) t.push_back(rng.uniform());
  std::sort(t.begin(), t.end());
  return t;
}

std::vector<TimedValue> sample(const HarmonicCoefficients& h, const std::vector<double>& times, double shift = 0.0) {
  std::vector<TimedValue> s;
  for (double t : times) s.push_back({t, signal(h, t - shift)});
  return s;
}

double max_diff(const HarmonicCoefficients& a, const HarmonicCoefficients& b) {
  const auto x = a.as_array();
  const auto y = b.as_array();
  double m = 0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

Observation obs(double t, std::map<std::string, double> bands, bool clear = true) {
  return {t, std::move(bands), clear};
}

PixelTimeSeries pixel_with_days(const std::string& id, int clear_days, const std::vector<std::string>& bands) {
  PixelTimeSeries p{id, "reg", "wheat", {}};
  for (int i = 0; i < 12; ++i) {
    std::map<std::string, double> values;
    for (std::size_t b = 0; b < bands.size(); ++b) {
      values[bands[b]] = 0.2 + 0.01 * static_cast<double>(b) + 0.1 * std::sin(kTwoPi * i / 12.0);
    }
    p.observations.push_back(obs(i / 12.0, values, i < clear_days));
  }
  return p;
}

}  // namespace

TEST_CASE("gcvi") {
  CHECK(compute_gcvi(0.5, 0.5) == 0.0);
  CHECK(compute_gcvi(0.6, 0.2) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(compute_gcvi(0.3, 0.2) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(compute_gcvi(0.3, 0.0), Error);
  try {
    compute_gcvi(0.3, 0.0);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DivisionByZero);
  }
}

TEST_CASE("filter_clear") {
  PixelTimeSeries p{"p", "r", std::nullopt, {obs(0.1, {{"B", 1}}), obs(0.2, {{"B", 2}}), obs(0.3, {{"B", 3}})}};
  CHECK(filter_clear(p).observations.size() == 3);

  for (auto& o : p.observations) o.clear = false;
  CHECK(filter_clear(p).observations.empty());

  p.observations[0].clear = true;
  p.observations[2].clear = true;
  const auto kept = filter_clear(p);
  REQUIRE(kept.observations.size() == 2);
  CHECK(kept.observations[0].time_years == 0.1);
  CHECK(kept.observations[1].time_years == 0.3);

  const auto twice = filter_clear(kept);
  REQUIRE(twice.observations.size() == kept.observations.size());
  for (std::size_t i = 0; i < kept.observations.size(); ++i) {
    CHECK(twice.observations[i].time_years == kept.observations[i].time_years);
  }
}

TEST_CASE("append_gcvi adds a band from nir and green") {
  PixelTimeSeries p{"p", "r", std::nullopt, {obs(0.1, {{"B8", 0.6}, {"B3", 0.2}})}};
  const auto out = append_gcvi(p, "B8", "B3");
  CHECK(out.observations[0].band_values.at(kGcviBand) == doctest::Approx(2.0));
  p.observations[0].band_values["B3"] = 0.0;
  CHECK_THROWS_AS(append_gcvi(p, "B8", "B3"), Error);
}

TEST_CASE("harmonic fit of simple signals") {
  SUBCASE("constant") {
    std::vector<TimedValue> s;
    for (int i = 0; i < 6; ++i) s.push_back({0.1 + 0.13 * i, 3.0});
    const auto h = fit_harmonics(s);
    CHECK(h.c == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(std::abs(h.a1) < 1e-12);
    CHECK(std::abs(h.b1) < 1e-12);
    CHECK(std::abs(h.a2) < 1e-12);
    CHECK(std::abs(h.b2) < 1e-12);
  }
  SUBCASE("one cosine at uniform times matches normal equations") {
    std::vector<TimedValue> s;
    for (int i = 0; i < 10; ++i) {
      const double t = i / 10.0;
      s.push_back({t, 1.0 + 2.0 * std::cos(kTwoPi * t)});
    }
    const auto h = fit_harmonics(s);
    const Eigen::VectorXd ref = normal_equations_fit(s);
    const auto got = h.as_array();
    for (int j = 0; j < 5; ++j) CHECK(std::abs(got[static_cast<std::size_t>(j)] - ref(j)) < 1e-12);
    CHECK(h.c == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(h.a1 == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("basis row and evaluation agree") {
    const HarmonicCoefficients h{1, 2, 3, 4, 5};
    const auto row = harmonic_basis(0.37);
    const auto c = h.as_array();
    double dot = 0;
    for (std::size_t j = 0; j < row.size(); ++j) dot += row[j] * c[j];
    CHECK(evaluate_harmonics(h, 0.37) == doctest::Approx(dot).epsilon(1e-14));
    CHECK(evaluate_harmonics(h, 0.37) == doctest::Approx(signal(h, 0.37)).epsilon(1e-14));
  }
}

TEST_CASE("harmonic fit rejects degenerate sampling") {
  auto code_of = [](const std::vector<TimedValue>& s) {
    try {
      fit_harmonics(s);
    } catch (const Error& e) {
      return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::IoError;
  };
  CHECK(code_of({{0.1, 1}, {0.2, 2}, {0.3, 1}, {0.4, 0}}) == ErrorCode::InsufficientObservations);
  // Ten samples, but only four distinct times.
  std::vector<TimedValue> repeated;
  for (int i = 0; i < 10; ++i) repeated.push_back({0.1 * (i % 4), 1.0 * i});
  CHECK(code_of(repeated) == ErrorCode::InsufficientObservations);
  // Half-year spacing zeroes the sin(2πt) column.
  CHECK(code_of({{0.0, 1}, {0.5, 2}, {1.0, 3}, {1.5, 4}, {2.0, 5}}) == ErrorCode::RankDeficient);
  CHECK(code_of({}) == ErrorCode::InsufficientObservations);
}

TEST_CASE("harmonic fit properties over random signals") {
  Rng rng(20240601);
  for (int trial = 0; trial < 100; ++trial) {
    const auto h = random_coeffs(rng);
    const auto times = random_times(rng, 8 + static_cast<int>(rng.below(30)));

    // Exact recovery.
    const auto fit = fit_harmonics(sample(h, times));
    CHECK(max_diff(fit, h) <= 1e-9);

    // Residual orthogonality on a noisy version.
    auto noisy = sample(h, times);
    for (auto& s : noisy) s.value += 0.3 * rng.normal();
    const auto nf = fit_harmonics(noisy);
    double res_norm = 0;
    std::array<double, 5> dots{};
    std::array<double, 5> col_norms{};
    for (const auto& s : noisy) {
      const double r = s.value - signal(nf, s.time_years);
      res_norm += r * r;
      const auto row = harmonic_basis(s.time_years);
      for (std::size_t j = 0; j < 5; ++j) {
        dots[j] += row[j] * r;
        col_norms[j] += row[j] * row[j];
      }
    }
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(std::abs(dots[j]) <= 1e-8 * std::max(1.0, std::sqrt(res_norm * col_norms[j])));
    }

    // Phase shift rotates each (a_k, b_k) pair by 2πkδ.
    const double delta = rng.uniform();
    const auto shifted = fit_harmonics(sample(h, times, delta));
    const double th1 = kTwoPi * delta;
    const double th2 = 2 * kTwoPi * delta;
    const HarmonicCoefficients rotated{fit.c,
                                       fit.a1 * std::cos(th1) - fit.b1 * std::sin(th1),
                                       fit.a1 * std::sin(th1) + fit.b1 * std::cos(th1),
                                       fit.a2 * std::cos(th2) - fit.b2 * std::sin(th2),
                                       fit.a2 * std::sin(th2) + fit.b2 * std::cos(th2)};
    CHECK(max_diff(shifted, rotated) <= 1e-9);

    // Adding a harmonic signal adds its coefficients.
    const auto g = random_coeffs(rng);
    auto summed = noisy;
    for (auto& s : summed) s.value += signal(g, s.time_years);
    const auto sf = fit_harmonics(summed);
    const HarmonicCoefficients expect{nf.c + g.c, nf.a1 + g.a1, nf.b1 + g.b1, nf.a2 + g.a2, nf.b2 + g.b2};
    CHECK(max_diff(sf, expect) <= 1e-9);
  }
}

TEST_CASE("build_features layout") {
  const std::vector<std::string> two{"B4", "B8"};
  const auto p = pixel_with_days("p1", 12, two);
  const auto fv = build_features(p, two);
  CHECK(fv.values.size() == 10);
  CHECK(fv.pixel_id == "p1");
  CHECK(fv.label == std::optional<std::string>("wheat"));

  std::vector<std::string> spectral{"B1", "B2", "B3", "B4", "B5", "B6", "B7", "B8", "B8A", "B9", "B10", "B11", "B12"};
  auto manifest = spectral;
  manifest.push_back(kGcviBand);
  const auto table = featurize({pixel_with_days("p2", 12, spectral)}, manifest);
  REQUIRE(table.rows.size() == 1);
  CHECK(table.rows[0].values.size() == 70);
}

TEST_CASE("pixels with too few clear days are dropped whole") {
  const std::vector<std::string> bands{"B3", "B8"};
  const auto table = featurize({pixel_with_days("ok", 12, bands), pixel_with_days("cloudy", 4, bands)}, bands);
  REQUIRE(table.rows.size() == 1);
  CHECK(table.rows[0].pixel_id == "ok");
  REQUIRE(table.dropped.size() == 1);
  CHECK(table.dropped[0].pixel_id == "cloudy");
  CHECK(table.dropped[0].reason.find("InsufficientObservations") != std::string::npos);

  try {
    build_features(filter_clear(pixel_with_days("cloudy", 4, bands)), bands);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientObservations);
    CHECK(std::string(e.what()).find("cloudy") != std::string::npos);
  }
}

TEST_CASE("a manifest band missing from the input is a schema error") {
  CHECK_THROWS_AS(featurize({pixel_with_days("p", 12, {"B3"})}, {"B3", "B4"}), Error);
}

TEST_CASE("dates") {
  const auto anchor = parse_date("2020-04-01");
  CHECK(year_fraction(parse_date("2020-04-01"), anchor) == 0.0);
  CHECK(year_fraction(parse_date("2021-04-01"), anchor) == doctest::Approx(365.0 / 365.25).epsilon(1e-15));
  CHECK(year_fraction(parse_date("2020-03-31"), anchor) == doctest::Approx(-1.0 / 365.25).epsilon(1e-15));
  CHECK_THROWS_AS(parse_date("2020-02-30"), Error);
  CHECK_THROWS_AS(parse_date("20200401"), Error);
}
