#include <doctest.h>

#include <functional>

#include "cropshift/error.hpp"
#include "cropshift/shift.hpp"
#include "cropshift/synth.hpp"
#include "helpers.hpp"

using namespace cropshift;
using testing::make_dataset;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Eigen::VectorXd random_simplex(Rng& rng, int k) {
  Eigen::VectorXd p(k);
  for (int i = 0; i < k; ++i) p(i) = -std::log(1.0 - rng.uniform());
  return p / p.sum();
}

}  // namespace

TEST_CASE("psa reweighting by hand") {
  const auto p = vec({0.6, 0.4});
  const auto out = psa_reweight(p, vec({0.5, 0.5}), vec({0.2, 0.8}));
  CHECK(out(0) == doctest::Approx(0.24 / 0.88).epsilon(1e-15));
  CHECK(out(1) == doctest::Approx(0.64 / 0.88).epsilon(1e-15));
  CHECK(argmax_index(out) == 1);

  const auto same = psa_reweight(p, vec({0.3, 0.7}), vec({0.3, 0.7}));
  CHECK((same - p).cwiseAbs().maxCoeff() < 1e-15);

  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto train = random_simplex(rng, 4);
    const auto test = random_simplex(rng, 4);
    const auto k = static_cast<Eigen::Index>(rng.below(4));
    CHECK(argmax_index(psa_reweight(Eigen::VectorXd::Unit(4, k), train, test)) == k);
  }
}

TEST_CASE("psa errors") {
  CHECK(code_of([] { psa_reweight(vec({0.5, 0.5}), vec({1.0, 0.0}), vec({0.5, 0.5})); }) == ErrorCode::ZeroTrainPrior);
  CHECK(code_of([] { psa_reweight(vec({0.5, 0.5}), vec({0.5, 0.5}), vec({0.2, 0.3, 0.5})); }) ==
        ErrorCode::ClassMismatch);
  CHECK(code_of([] { psa_reweight(vec({1.0, 0.0}), vec({0.5, 0.5}), vec({0.0, 1.0})); }) == ErrorCode::AllZeroScores);
}

TEST_CASE("psa with named priors aligns by class") {
  const std::vector<std::string> classes{"maize", "wheat"};
  const ClassPriors train{"t", {"wheat", "maize"}, {0.5, 0.5}};
  const ClassPriors test{"r", {"wheat", "maize"}, {0.8, 0.2}};
  const auto out = psa_reweight(vec({0.6, 0.4}), classes, train, test);
  CHECK(out(0) == doctest::Approx(0.24 / 0.88).epsilon(1e-15));

  const ClassPriors extra{"r", {"wheat", "maize", "rice"}, {0.4, 0.2, 0.4}};
  CHECK(code_of([&] { psa_reweight(vec({0.6, 0.4}), classes, train, extra); }) == ErrorCode::ZeroTrainPrior);
}

TEST_CASE("psa argmax invariances") {
  Rng rng(2);
  for (int trial = 0; trial < 2000; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(5));
    const auto p = random_simplex(rng, k);
    const auto train = random_simplex(rng, k);
    CHECK(argmax_index(psa_reweight(p, train, train)) == argmax_index(p));
    const auto test = random_simplex(rng, k);
    const double scale = 0.01 + 100 * rng.uniform();
    CHECK(argmax_index(psa_reweight(p, train, test)) == argmax_index(psa_reweight(p, train, scale * test)));
  }
}

TEST_CASE("class means") {
  Eigen::MatrixXd x(3, 2);
  x << 0, 0, 2, 2, 5, 7;
  const auto d = make_dataset(x, {0, 0, 1}, {"a", "b"});
  const auto m = estimate_class_means(d);
  CHECK(m.means(0, 0) == 1.0);
  CHECK(m.means(0, 1) == 1.0);
  CHECK(m.means(1, 0) == 5.0);
  CHECK(m.means(1, 1) == 7.0);

  Eigen::MatrixXd xp(3, 2);
  xp << 5, 7, 2, 2, 0, 0;
  const auto mp = estimate_class_means(make_dataset(xp, {1, 0, 0}, {"a", "b"}));
  CHECK(mp.means == m.means);

  const auto missing = make_dataset(x, {0, 0, 0}, {"a", "b"});
  CHECK(code_of([&] { estimate_class_means(missing); }) == ErrorCode::EmptyClass);
}

TEST_CASE("regional shift estimate") {
  ClassMeans means{{"a", "b"}, Eigen::MatrixXd(2, 1)};
  means.means << 0, 10;
  const ClassPriors test{"r", {"a", "b"}, {0.3, 0.7}};
  const auto s = estimate_regional_shift(vec({8.0}), test, means);
  CHECK(s.region_id == "r");
  CHECK(s.offset(0) == doctest::Approx(1.0).epsilon(1e-15));

  const auto zero = estimate_regional_shift(vec({7.0}), test, means);
  CHECK(std::abs(zero.offset(0)) < 1e-15);
}

TEST_CASE("regional shift recovers the generating offset from population means") {
  const auto spec = default_acceptance_world();
  ClassMeans means{spec.class_names, Eigen::MatrixXd(spec.num_classes(), spec.dim())};
  for (int k = 0; k < spec.num_classes(); ++k) means.means.row(k) = spec.population_mean(spec.train_region, k);
  for (int r = 0; r < spec.num_regions(); ++r) {
    const auto s = estimate_regional_shift(spec.population_feature_mean(r), spec.region_priors(r), means);
    CHECK((s.offset - spec.region_effects.row(r).transpose()).norm() <= 1e-9);
  }
}

TEST_CASE("fsa transform") {
  const RegionalShift s{"r", vec({1, -1})};
  const auto y = fsa_transform(vec({5, 5}), s);
  CHECK(y(0) == 4.0);
  CHECK(y(1) == 6.0);
  CHECK(fsa_transform(vec({5, 5}), RegionalShift{"r", vec({0, 0})}) == vec({5, 5}));
  const RegionalShift neg{"r", -s.offset};
  CHECK(fsa_transform(fsa_transform(vec({0.25, 9.5}), s), neg) == vec({0.25, 9.5}));
}

TEST_CASE("fpsa degenerates to the plain and prior-adjusted rules") {
  Eigen::MatrixXd centers(3, 2);
  centers << 0, 0, 2, 0, 0, 2;
  const auto d = testing::blobs(centers, 30, 1.0, 4);
  const TrainedClassifier model(lda_fit(d));
  const RegionalShift none{"r", Eigen::VectorXd::Zero(2)};
  const auto train = model.train_priors();
  const auto test = vec({0.1, 0.3, 0.6});
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const Eigen::Vector2d x(rng.normal() * 2, rng.normal() * 2);
    CHECK(fpsa_classify(model, x, none, train, train) == model.predict(x));
    CHECK(fpsa_classify(model, x, none, train, test) == argmax_index(psa_reweight(model.posteriors(x), train, test)));
  }
}

TEST_CASE("fpsa on exact parameters equals the target-region Bayes rule") {
  const auto spec = default_acceptance_world(42, 500);
  const TrainedClassifier source(population_lda(spec, spec.train_region));
  const auto train_priors = spec.priors.row(spec.train_region).transpose().eval();
  for (int r = 0; r < spec.num_regions(); ++r) {
    const auto oracle = population_lda(spec, r);
    const RegionalShift shift{spec.region_ids[static_cast<std::size_t>(r)], spec.region_effects.row(r).transpose()};
    const Eigen::VectorXd test_priors = spec.priors.row(r).transpose();
    const auto data = generate_region(spec, r, 500, 99 + static_cast<std::uint64_t>(r));
    int mismatches = 0;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      const Eigen::VectorXd x = data.features.row(i).transpose();
      mismatches += fpsa_classify(source, x, shift, train_priors, test_priors) != argmax_index(oracle.posteriors(x));
    }
    CHECK(mismatches == 0);
  }
}

TEST_CASE("fpsa agrees with the Bayes label at least as often as the unadjusted rule") {
  const auto spec = default_acceptance_world(42, 2000);
  const auto regions = generate(spec);
  const auto& train = regions.at("region_1");
  const TrainedClassifier model(lda_fit(train));
  const auto means = estimate_class_means(train);
  for (const std::string region : {"region_2", "region_3"}) {
    const auto& test = regions.at(region);
    const int r = spec.region_index(region);
    const auto shift = estimate_regional_shift(test.feature_mean(), spec.region_priors(r), means);
    const Eigen::VectorXd test_priors = spec.priors.row(r).transpose();
    int fpsa = 0, uat = 0;
    for (Eigen::Index i = 0; i < test.size(); ++i) {
      const Eigen::VectorXd x = test.features.row(i).transpose();
      const int bayes = argmax_index(true_posteriors(spec, region, x));
      fpsa += fpsa_classify(model, x, shift, model.train_priors(), test_priors) == bayes;
      uat += model.predict(x) == bayes;
    }
    CHECK(fpsa >= uat);
  }
}

TEST_CASE("priors from aggregate areas") {
  const auto p = aggregate_to_priors("r", {{"a", 100}, {"b", 300}}, {{"a", 10}, {"b", 30}});
  CHECK(p.at("a") == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(p.at("b") == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(aggregate_to_priors("r", {{"a", 42}}, {{"a", 7}}).at("a") == 1.0);

  const auto eq = aggregate_to_priors("r", {{"a", 1}, {"b", 3}}, {{"a", 2}, {"b", 2}});
  CHECK(eq.at("a") == doctest::Approx(0.25).epsilon(1e-15));

  const auto zero = aggregate_to_priors("r", {{"a", 0}, {"b", 5}}, {{"b", 1}});
  CHECK(zero.at("a") == 0.0);
  CHECK(code_of([] { aggregate_to_priors("r", {{"a", 1}}, {{"a", 0}}); }) == ErrorCode::ZeroMeanFieldArea);
  CHECK(code_of([] { aggregate_to_priors("r", {{"a", 1}}, {}); }) == ErrorCode::ZeroMeanFieldArea);
  CHECK(code_of([] { aggregate_to_priors("r", {{"a", 0}}, {{"a", 1}}); }) == ErrorCode::AllZeroAreas);

  const auto c = counts_to_priors("r", {{"a", 1}, {"b", 3}});
  CHECK(c.at("b") == 0.75);
}

TEST_CASE("class priors helpers") {
  const ClassPriors p{"r", {"b", "a"}, {0.25, 0.75}};
  CHECK(p.aligned({"a", "b"}) == vec({0.75, 0.25}));
  CHECK(code_of([&] { p.aligned({"a", "c"}); }) == ErrorCode::ClassMismatch);
  CHECK(code_of([&] { p.at("c"); }) == ErrorCode::ClassMismatch);
  CHECK(code_of([] { ClassPriors{"r", {"a", "b"}, {0.5, 0.6}}.validate(); }) == ErrorCode::InvalidPriors);
  CHECK(code_of([] { ClassPriors{"r", {"a", "a"}, {0.5, 0.5}}.validate(); }) == ErrorCode::InvalidPriors);
  CHECK(code_of([] { ClassPriors{"r", {"a", "b"}, {1.5, -0.5}}.validate(); }) == ErrorCode::InvalidPriors);
}
