#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "cli.hpp"
#include "cropshift/csv.hpp"
#include "cropshift/synth.hpp"
#include "helpers.hpp"

using namespace cropshift;
namespace fs = std::filesystem;
using testing::slurp;
using testing::spit;
using testing::TempDir;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "cropshift");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string dir_listing(const fs::path& root) {
  std::vector<std::string> entries;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    entries.push_back(fs::relative(e.path(), root).string() + (e.is_regular_file() ? "=" + slurp(e.path()) : ""));
  }
  std::sort(entries.begin(), entries.end());
  std::string all;
  for (const auto& e : entries) all += e + "\n";
  return all;
}

std::vector<std::string> synth_world(const TempDir& tmp, int samples = 300) {
  const auto r = invoke({"synth", "--default", "--samples", std::to_string(samples), "--out-dir", tmp / "w"});
  REQUIRE(r.code == 0);
  return {tmp / "w/features_region_1.csv", tmp / "w/features_region_2.csv", tmp / "w/features_region_3.csv"};
}

std::vector<std::string> experiment_args(const std::vector<std::string>& features, const TempDir& tmp,
                                         const std::string& out) {
  std::vector<std::string> args{"experiment", "--features"};
  args.insert(args.end(), features.begin(), features.end());
  args.insert(args.end(), {"--priors", tmp / "w/priors.csv", "--train-region", "region_1", "--out-dir", out});
  return args;
}

std::string write_timeseries(const TempDir& tmp, const std::vector<std::string>& bands) {
  std::ostringstream s;
  s << "pixel_id,region_id,label,band,time_years,value,clear\n";
  for (const std::string pixel : {"good", "cloudy"}) {
    for (int i = 0; i < 12; ++i) {
      const double t = i / 12.0;
      const int clear = pixel == "good" || i < 4;
      for (std::size_t b = 0; b < bands.size(); ++b) {
        const double v = 0.2 + 0.01 * static_cast<double>(b) + 0.1 * std::cos(2 * 3.141592653589793 * t);
        s << pixel << ",reg,maize," << bands[b] << ',' << csv::format_double(t) << ',' << csv::format_double(v) << ','
          << clear << '\n';
      }
    }
  }
  spit(tmp / "ts.csv", s.str());
  std::string manifest;
  for (const auto& b : bands) manifest += b + "\n";
  manifest += "GCVI\n";
  spit(tmp / "bands.txt", manifest);
  return tmp / "ts.csv";
}

}  // namespace

TEST_CASE("exit codes stay within the documented set") {
  for (int c = 0; c <= static_cast<int>(ErrorCode::IoError); ++c) {
    const int code = cli::exit_code_for(static_cast<ErrorCode>(c));
    CHECK((code == 2 || code == 3 || code == 4));
  }
  CHECK(cli::exit_code_for(ErrorCode::ParseError) == 2);
  CHECK(cli::exit_code_for(ErrorCode::InvalidSpec) == 2);
  CHECK(cli::exit_code_for(ErrorCode::TrainRegionMissingClass) == 3);
  CHECK(cli::exit_code_for(ErrorCode::MissingPriors) == 4);
  CHECK(invoke({}).code == 4);
  CHECK(invoke({"bogus"}).code == 4);
  CHECK(invoke({"entropy", "--nope"}).code == 4);
  CHECK(invoke({"--help"}).code == 0);
}

TEST_CASE("features command") {
  TempDir tmp("features");
  const std::vector<std::string> bands{"B1", "B2", "B3", "B4", "B5", "B6", "B7", "B8", "B8A", "B9", "B10", "B11", "B12"};
  const auto ts = write_timeseries(tmp, bands);
  const auto r = invoke({"features", "--input", ts, "--bands", tmp / "bands.txt", "--output", tmp / "f.csv", "--drops",
                      tmp / "drops.csv"});
  REQUIRE(r.code == 0);
  const auto table = csv::read_file(tmp / "f.csv");
  CHECK(table.header.size() == 3 + 70);
  REQUIRE(table.rows.size() == 1);
  CHECK(table.rows[0].fields[0] == "good");
  const auto drops = csv::read_file(tmp / "drops.csv");
  REQUIRE(drops.rows.size() == 1);
  CHECK(drops.rows[0].fields[0] == "cloudy");

  const auto first = slurp(tmp / "f.csv");
  REQUIRE(invoke({"features", "--input", ts, "--bands", tmp / "bands.txt", "--output", tmp / "f.csv", "--drops",
               tmp / "drops.csv"})
              .code == 0);
  CHECK(slurp(tmp / "f.csv") == first);

  spit(tmp / "empty.csv", "");
  const auto e = invoke({"features", "--input", tmp / "empty.csv", "--bands", tmp / "bands.txt", "--output", tmp / "e.csv"});
  CHECK(e.code == 0);
  CHECK(e.err.find("warning") != std::string::npos);
  CHECK(slurp(tmp / "e.csv").empty());

  spit(tmp / "bad.csv", "pixel_id,region_id,label,band,time_years,value\np,r,l,B1,0,1\n");
  CHECK(invoke({"features", "--input", tmp / "bad.csv", "--bands", tmp / "bands.txt", "--output", tmp / "b.csv"}).code == 2);
  CHECK(invoke({"features", "--input", tmp / "missing.csv", "--bands", tmp / "bands.txt", "--output", tmp / "b.csv"}).code ==
        2);
}

TEST_CASE("synth command") {
  TempDir tmp("synth");
  const auto r = invoke({"synth", "--default", "--samples", "100", "--out-dir", tmp / "a"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(tmp / "a/features_region_1.csv"));
  CHECK(fs::exists(tmp / "a/features_region_3.csv"));
  CHECK(fs::exists(tmp / "a/priors.csv"));
  REQUIRE(invoke({"synth", "--spec", tmp / "a/spec.json", "--out-dir", tmp / "b"}).code == 0);
  CHECK(dir_listing(tmp / "a") == dir_listing(tmp / "b"));

  auto spec = nlohmann::json::parse(slurp(tmp / "a/spec.json"));
  spec["priors"][1][0] = 0.9;
  spit(tmp / "tampered.json", spec.dump());
  CHECK(invoke({"synth", "--spec", tmp / "tampered.json", "--out-dir", tmp / "c"}).code == 2);
  CHECK(invoke({"synth", "--out-dir", tmp / "c"}).code == 4);
}

TEST_CASE("experiment command") {
  TempDir tmp("experiment");
  const auto features = synth_world(tmp);

  auto args = experiment_args(features, tmp, tmp / "all");
  args.insert(args.end(), {"--method", "all", "--seed", "42"});
  REQUIRE(invoke(args).code == 0);
  int dirs = 0;
  for (const auto& e : fs::directory_iterator(tmp / "all")) dirs += e.is_directory();
  CHECK(dirs == 8);
  for (const char* tag : {"gmc", "uat", "psa", "fsa", "fpsa", "smote-psa", "zt-fpsa", "zt-smote-fpsa"}) {
    const fs::path d = fs::path(tmp / "all") / tag;
    CHECK(fs::exists(d / "metrics.json"));
    CHECK(fs::exists(d / "confusion_aggregate.csv"));
    CHECK(fs::exists(d / "confusion_region_2.csv"));
    const auto m = nlohmann::json::parse(slurp(d / "metrics.json"));
    CHECK(m["method"] == tag);
    CHECK(m["seed"] == 42);
    CHECK(m["config"]["classifier"] == "lda");
    CHECK(m["aggregate"]["undefined_f1"].is_array());
  }

  // Guess-major-class accuracy is the pooled frequency of each region's major class.
  const auto gmc = nlohmann::json::parse(slurp(fs::path(tmp / "all") / "gmc/metrics.json"));
  std::int64_t hits = 0, total = 0;
  for (int r = 1; r < 3; ++r) {
    const auto table = csv::read_file(features[static_cast<std::size_t>(r)]);
    const std::string major = r == 1 ? "class_1" : "class_4";
    for (const auto& row : table.rows) {
      hits += row.fields[2] == major;
      ++total;
    }
  }
  CHECK(gmc["aggregate"]["overall_accuracy"].get<double>() ==
        doctest::Approx(static_cast<double>(hits) / static_cast<double>(total)).epsilon(1e-15));

  auto one = experiment_args(features, tmp, tmp / "x");
  one.insert(one.end(), {"--method", "fpsa", "--seed", "42"});
  REQUIRE(invoke(one).code == 0);
  auto again = experiment_args(features, tmp, tmp / "y");
  again.insert(again.end(), {"--method", "fpsa", "--seed", "42", "--workers", "3"});
  REQUIRE(invoke(again).code == 0);
  CHECK(dir_listing(tmp / "x") == dir_listing(tmp / "y"));
}

TEST_CASE("experiment command failures") {
  TempDir tmp("experiment_fail");
  const auto features = synth_world(tmp, 100);

  auto no_priors = experiment_args(features, tmp, tmp / "o");
  no_priors[static_cast<std::size_t>(std::find(no_priors.begin(), no_priors.end(), "--priors") - no_priors.begin()) + 1] =
      tmp / "none.csv";
  spit(tmp / "none.csv", "region_id,class,proportion\nregion_1,class_1,1\n");
  auto psa = no_priors;
  psa.insert(psa.end(), {"--method", "psa"});
  CHECK(invoke(psa).code == 4);

  auto rf = experiment_args(features, tmp, tmp / "o");
  rf.insert(rf.end(), {"--method", "uat", "--classifier", "rf"});
  CHECK(invoke(rf).code == 4);
  auto badm = experiment_args(features, tmp, tmp / "o");
  badm.insert(badm.end(), {"--method", "magic"});
  CHECK(invoke(badm).code == 4);

  // A training region without class_4 rows.
  const auto table = csv::read_file(features[0]);
  std::ostringstream s;
  csv::write_row(s, table.header);
  for (const auto& row : table.rows) {
    if (row.fields[2] != "class_4") csv::write_row(s, row.fields);
  }
  spit(tmp / "thin.csv", s.str());
  auto thin = experiment_args({tmp / "thin.csv", features[1], features[2]}, tmp, tmp / "o");
  thin.insert(thin.end(), {"--method", "uat"});
  CHECK(invoke(thin).code == 3);

  spit(tmp / "broken.csv", "pixel_id,region_id,label,f0\np,region_1,class_1,abc\n");
  auto broken = experiment_args({tmp / "broken.csv"}, tmp, tmp / "o");
  CHECK(invoke(broken).code == 2);
}

TEST_CASE("config files") {
  TempDir tmp("config");
  const auto features = synth_world(tmp, 100);
  nlohmann::json cfg;
  cfg["schema"] = "cropshift-config/1";
  cfg["method"] = "psa";
  cfg["features"] = features;
  cfg["priors"] = tmp / "w/priors.csv";
  cfg["train_region"] = "region_1";
  cfg["out_dir"] = tmp / "c";
  spit(tmp / "cfg.json", cfg.dump());
  REQUIRE(invoke({"experiment", "--config", tmp / "cfg.json"}).code == 0);
  CHECK(fs::exists(fs::path(tmp / "c") / "psa/metrics.json"));
  REQUIRE(invoke({"experiment", "--config", tmp / "cfg.json", "--method", "uat"}).code == 0);
  CHECK(fs::exists(fs::path(tmp / "c") / "uat/metrics.json"));

  cfg["colour"] = "blue";
  spit(tmp / "bad.json", cfg.dump());
  CHECK(invoke({"experiment", "--config", tmp / "bad.json"}).code == 4);
  spit(tmp / "junk.json", "{");
  CHECK(invoke({"experiment", "--config", tmp / "junk.json"}).code == 2);
  cfg.erase("colour");
  cfg["schema"] = "cropshift-config/0";
  spit(tmp / "old.json", cfg.dump());
  CHECK(invoke({"experiment", "--config", tmp / "old.json"}).code == 4);
}

TEST_CASE("entropy and priors-from-areas commands") {
  TempDir tmp("entropy");
  std::string priors = "region_id,class,proportion\n";
  for (int k = 0; k < 6; ++k) priors += "zeta,c" + std::to_string(k) + ",0.16666666666666666\n";
  priors += "alpha,c0,1\nalpha,c1,0\n";
  spit(tmp / "p.csv", priors);
  const auto r = invoke({"entropy", "--priors", tmp / "p.csv"});
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  const auto table = csv::read(in, "out");
  CHECK(table.header == std::vector<std::string>{"region_id", "entropy_nats"});
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[0].fields[0] == "alpha");
  CHECK(csv::parse_double(table.rows[0].fields[1], "", 0) == 0.0);
  CHECK(std::abs(csv::parse_double(table.rows[1].fields[1], "", 0) - std::log(6.0)) < 1e-9);

  spit(tmp / "bad.csv", "region_id,class,proportion\nr,a,0.3\n");
  CHECK(invoke({"entropy", "--priors", tmp / "bad.csv"}).code == 2);

  spit(tmp / "areas.csv", "region_id,class,area,mean_field_area\nr,a,100,10\nr,b,300,30\n");
  const auto a = invoke({"priors-from-areas", "--areas", tmp / "areas.csv", "--output", tmp / "out.csv"});
  REQUIRE(a.code == 0);
  CHECK(slurp(tmp / "out.csv") == "region_id,class,proportion\nr,a,0.5\nr,b,0.5\n");
  spit(tmp / "zero.csv", "region_id,class,area,mean_field_area\nr,a,100,0\n");
  CHECK(invoke({"priors-from-areas", "--areas", tmp / "zero.csv"}).code == 2);
  CHECK(invoke({"priors-from-areas", "--areas", tmp / "p.csv"}).code == 2);
}

TEST_CASE("train, predict and oracle commands") {
  TempDir tmp("train");
  const auto features = synth_world(tmp, 200);
  REQUIRE(invoke({"train", "--features", features[0], "--output", tmp / "m.json"}).code == 0);
  REQUIRE(invoke({"predict", "--model", tmp / "m.json", "--features", features[1], "--output", tmp / "p.csv"}).code == 0);
  const auto pred = csv::read_file(tmp / "p.csv");
  CHECK(pred.rows.size() == 200);
  CHECK(pred.header.size() == 3 + 4);
  CHECK(invoke({"train", "--features", features[0], "--classifier", "rf", "--output", tmp / "rf.json"}).code == 4);
  REQUIRE(invoke({"train", "--features", features[0], "--classifier", "rf", "--trees", "10", "--seed", "1", "--output",
               tmp / "rf.json"})
              .code == 0);

  std::vector<std::string> args{"oracle", "--features"};
  args.insert(args.end(), features.begin(), features.end());
  args.insert(args.end(), {"--seed", "3", "--train-region", "region_1", "--output", tmp / "o.csv"});
  const auto o = invoke(args);
  REQUIRE(o.code == 0);
  CHECK(csv::read_file(tmp / "o.csv").rows.size() == 3);
  const auto first = slurp(tmp / "o.csv");
  args.insert(args.end(), {"--workers", "2"});
  REQUIRE(invoke(args).code == 0);
  CHECK(slurp(tmp / "o.csv") == first);
}
