#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cropshift/classify.hpp"
#include "cropshift/csv.hpp"
#include "cropshift/dataset_io.hpp"
#include "cropshift/eval.hpp"
#include "cropshift/features.hpp"
#include "cropshift/model_io.hpp"
#include "cropshift/synth.hpp"

namespace cropshift::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

inline constexpr const char* kConfigSchema = "cropshift-config/1";

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError:
    case ErrorCode::IoError:
    case ErrorCode::InvalidSpec:
    case ErrorCode::LengthMismatch:
    case ErrorCode::UnknownLabel:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::DivisionByZero:
    case ErrorCode::ZeroMeanFieldArea:
    case ErrorCode::AllZeroAreas:
      return kExitInput;
    case ErrorCode::InsufficientObservations:
    case ErrorCode::RankDeficient:
    case ErrorCode::EmptyClass:
    case ErrorCode::SingularCovariance:
    case ErrorCode::InsufficientData:
    case ErrorCode::UnlabeledData:
    case ErrorCode::ZeroTrainPrior:
    case ErrorCode::AllZeroScores:
    case ErrorCode::SmoteInfeasible:
    case ErrorCode::EmptyMatrix:
    case ErrorCode::TrainRegionMissingClass:
    case ErrorCode::TooFewGroups:
      return kExitTrainingData;
    case ErrorCode::InvalidParams:
    case ErrorCode::InvalidPriors:
    case ErrorCode::ClassMismatch:
    case ErrorCode::MissingPriors:
    case ErrorCode::UnknownRegion:
      return kExitConfig;
  }
  return kExitConfig;
}

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::InvalidParams, msg); }

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  return out;
}

// Output always uses '\n' and the classic locale.
template <typename Fn>
void write_file(const fs::path& path, Fn&& fn) {
  auto out = open_output(path);
  out.imbue(std::locale::classic());
  fn(out);
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

std::string slug(const std::string& text) {
  std::string s;
  for (char c : text) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    s.push_back(keep ? c : '_');
  }
  return s;
}

// ---------------------------------------------------------------------------
// Shared classifier / run options

struct RunConfig {
  std::string method = "fpsa";
  std::string classifier = "lda";
  double ridge = kDefaultRidge;
  int n_trees = 100;
  int features_per_split = 0;
  int min_leaf = 1;
  int max_depth = 0;
  int smote_k = kDefaultSmoteK;
  std::optional<std::uint64_t> seed;
  std::string train_region;
  std::vector<std::string> features;
  std::string priors;
  std::string out_dir;
  int workers = 1;
  int folds = 5;
};

struct RunOptions {
  CLI::Option* method = nullptr;
  CLI::Option* classifier = nullptr;
  CLI::Option* ridge = nullptr;
  CLI::Option* n_trees = nullptr;
  CLI::Option* features_per_split = nullptr;
  CLI::Option* min_leaf = nullptr;
  CLI::Option* max_depth = nullptr;
  CLI::Option* smote_k = nullptr;
  CLI::Option* seed = nullptr;
  CLI::Option* train_region = nullptr;
  CLI::Option* features = nullptr;
  CLI::Option* priors = nullptr;
  CLI::Option* out_dir = nullptr;
  CLI::Option* workers = nullptr;
  CLI::Option* folds = nullptr;
  std::string config_path;
  std::uint64_t seed_value = 0;
};

void add_classifier_options(CLI::App& app, RunConfig& cfg, RunOptions& opt) {
  opt.classifier = app.add_option("--classifier", cfg.classifier, "lda or rf");
  opt.ridge = app.add_option("--ridge", cfg.ridge, "LDA covariance ridge, relative to the mean variance");
  opt.n_trees = app.add_option("--trees", cfg.n_trees, "random forest size");
  opt.features_per_split = app.add_option("--features-per-split", cfg.features_per_split,
                                          "features tried per split (0 = ceil(sqrt(d)))");
  opt.min_leaf = app.add_option("--min-leaf", cfg.min_leaf, "minimum rows per leaf");
  opt.max_depth = app.add_option("--max-depth", cfg.max_depth, "tree depth limit (0 = none)");
  opt.seed = app.add_option("--seed", opt.seed_value, "seed for stochastic steps");
  opt.workers = app.add_option("--workers", cfg.workers, "worker threads (never changes outputs)");
  app.add_option("--config", opt.config_path, "JSON config file; command-line flags take precedence");
}

template <typename T>
void take(const ojson& j, const char* key, CLI::Option* flag, T& field) {
  if (!j.contains(key) || (flag && flag->count() > 0)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    config_error(std::string("config key '") + key + "' has the wrong type");
  }
}

void apply_config_file(RunConfig& cfg, const RunOptions& opt) {
  if (opt.config_path.empty()) return;
  std::ifstream in(opt.config_path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + opt.config_path + "'");
  ojson j;
  try {
    j = ojson::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, opt.config_path + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::ParseError, opt.config_path + ": expected a JSON object");
  if (!j.contains("schema") || j["schema"] != kConfigSchema) {
    config_error(opt.config_path + ": schema must be \"" + kConfigSchema + "\"");
  }
  static const char* const known[] = {"schema",   "method",      "classifier",   "ridge",
                                      "trees",    "features_per_split", "min_leaf", "max_depth",
                                      "smote_k",  "seed",        "train_region", "features",
                                      "priors",   "out_dir",     "workers",      "folds"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      config_error(opt.config_path + ": unknown key '" + key + "'");
    }
  }
  take(j, "method", opt.method, cfg.method);
  take(j, "classifier", opt.classifier, cfg.classifier);
  take(j, "ridge", opt.ridge, cfg.ridge);
  take(j, "trees", opt.n_trees, cfg.n_trees);
  take(j, "features_per_split", opt.features_per_split, cfg.features_per_split);
  take(j, "min_leaf", opt.min_leaf, cfg.min_leaf);
  take(j, "max_depth", opt.max_depth, cfg.max_depth);
  take(j, "smote_k", opt.smote_k, cfg.smote_k);
  take(j, "train_region", opt.train_region, cfg.train_region);
  take(j, "priors", opt.priors, cfg.priors);
  take(j, "out_dir", opt.out_dir, cfg.out_dir);
  take(j, "workers", opt.workers, cfg.workers);
  take(j, "folds", opt.folds, cfg.folds);
  if (j.contains("features") && !(opt.features && opt.features->count() > 0)) {
    if (j["features"].is_string()) {
      cfg.features = {j["features"].get<std::string>()};
    } else {
      take(j, "features", nullptr, cfg.features);
    }
  }
  if (j.contains("seed") && !(opt.seed && opt.seed->count() > 0)) {
    std::uint64_t s = 0;
    take(j, "seed", nullptr, s);
    cfg.seed = s;
  }
}

void resolve(RunConfig& cfg, RunOptions& opt) {
  if (opt.seed && opt.seed->count() > 0) cfg.seed = opt.seed_value;
  apply_config_file(cfg, opt);
}

ClassifierConfig classifier_config(const RunConfig& cfg) {
  ClassifierConfig c;
  if (cfg.classifier == "lda") {
    c.kind = ClassifierKind::Lda;
  } else if (cfg.classifier == "rf") {
    c.kind = ClassifierKind::RandomForest;
  } else {
    config_error("classifier must be lda or rf, got '" + cfg.classifier + "'");
  }
  if (!(cfg.ridge >= 0.0)) config_error("ridge must be non-negative");
  if (cfg.n_trees < 1 || cfg.features_per_split < 0 || cfg.min_leaf < 1 || cfg.max_depth < 0) {
    config_error("invalid forest parameters");
  }
  if (cfg.workers < 1) config_error("workers must be at least 1");
  c.ridge = cfg.ridge;
  c.forest.n_trees = cfg.n_trees;
  c.forest.features_per_split = cfg.features_per_split;
  c.forest.min_leaf = cfg.min_leaf;
  c.forest.max_depth = cfg.max_depth;
  c.forest.seed = cfg.seed.value_or(0);
  c.workers = cfg.workers;
  return c;
}

bool is_stochastic(const RunConfig& cfg, Method method) {
  return cfg.classifier == "rf" || method == Method::SmotePsa || method == Method::ZtSmoteFpsa;
}

ojson config_json(const RunConfig& cfg, const std::string& method_tag) {
  ojson j;
  j["schema"] = kConfigSchema;
  j["method"] = method_tag;
  j["classifier"] = cfg.classifier;
  if (cfg.classifier == "lda") {
    j["ridge"] = cfg.ridge;
  } else {
    j["trees"] = cfg.n_trees;
    j["features_per_split"] = cfg.features_per_split;
    j["min_leaf"] = cfg.min_leaf;
    j["max_depth"] = cfg.max_depth;
  }
  j["smote_k"] = cfg.smote_k;
  j["seed"] = cfg.seed ? ojson(*cfg.seed) : ojson(nullptr);
  j["train_region"] = cfg.train_region;
  j["features"] = cfg.features;
  j["priors"] = cfg.priors;
  return j;
}

ojson optional_list(const std::vector<std::optional<double>>& values) {
  ojson a = ojson::array();
  for (const auto& v : values) a.push_back(v ? ojson(*v) : ojson(nullptr));
  return a;
}

ojson metrics_json(const MetricsReport& m, std::int64_t total, const std::vector<std::string>& classes) {
  ojson j;
  j["n"] = total;
  j["overall_accuracy"] = m.overall_accuracy;
  j["producers_accuracy"] = optional_list(m.producers_accuracy);
  j["users_accuracy"] = optional_list(m.users_accuracy);
  j["f1"] = optional_list(m.f1);
  j["macro_f1"] = m.macro_f1;
  // Classes with no truth and no predictions count as 0 in macro_f1.
  ojson undefined = ojson::array();
  for (std::size_t k = 0; k < m.f1.size(); ++k) {
    if (!m.f1[k]) undefined.push_back(classes[k]);
  }
  j["undefined_f1"] = undefined;
  return j;
}

FeatureFile load_features(const std::vector<std::string>& paths) {
  if (paths.empty()) config_error("no feature files given");
  std::vector<FeatureFile> files;
  for (const auto& p : paths) files.push_back(read_features_file(p));
  return merge_feature_files(files);
}

// ---------------------------------------------------------------------------
// features

struct FeaturesArgs {
  std::string input;
  std::string bands;
  std::string anchor;
  std::string output;
  std::string drops;
  std::string nir = "B8";
  std::string green = "B3";
};

int cmd_features(const FeaturesArgs& a, std::ostream& out, std::ostream& err) {
  std::optional<CalendarDate> anchor;
  if (!a.anchor.empty()) {
    try {
      anchor = parse_date(a.anchor);
    } catch (const Error& e) {
      config_error("--anchor: " + e.detail());
    }
  }
  std::vector<std::string> manifest;
  {
    std::ifstream in(a.bands, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + a.bands + "'");
    manifest = read_band_manifest(in);
  }
  if (manifest.empty()) throw Error(ErrorCode::ParseError, a.bands + ": band manifest is empty");

  std::ifstream in(a.input, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + a.input + "'");
  const bool empty_input = in.peek() == std::char_traits<char>::eof();
  const auto pixels = read_timeseries(in, a.input, anchor);
  const FeatureTable table = featurize(pixels, manifest, FeaturizeOptions{a.nir, a.green});

  const fs::path drops = a.drops.empty() ? fs::path(a.output + ".drops.csv") : fs::path(a.drops);
  if (empty_input) {
    err << "warning: " << a.input << " is empty; writing empty outputs\n";
    write_file(a.output, [](std::ostream&) {});
    write_file(drops, [](std::ostream&) {});
    return kExitOk;
  }
  write_file(a.output, [&](std::ostream& o) { write_features(o, table); });
  write_file(drops, [&](std::ostream& o) { write_drop_report(o, table.dropped); });
  out << "featurized " << table.rows.size() << " pixels, dropped " << table.dropped.size() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string spec;
  std::string out_dir;
  bool use_default = false;
  std::uint64_t seed = 42;
  int samples = 2000;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* samples_opt = nullptr;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  SyntheticSpec spec;
  if (a.use_default == !a.spec.empty()) config_error("give exactly one of --spec or --default");
  if (a.use_default) {
    spec = default_acceptance_world(a.seed, a.samples);
  } else {
    spec = read_spec_file(a.spec);
    if (a.seed_opt->count() > 0) spec.seed = a.seed;
    if (a.samples_opt->count() > 0) {
      spec.samples_per_region.assign(static_cast<std::size_t>(spec.num_regions()), a.samples);
    }
  }
  spec.validate();
  const auto regions = generate(spec);
  const fs::path dir(a.out_dir);
  for (const auto& [region, data] : regions) {
    write_file(dir / ("features_" + slug(region) + ".csv"), [&](std::ostream& o) { write_dataset_features(o, data); });
  }
  std::map<std::string, ClassPriors> priors;
  for (int r = 0; r < spec.num_regions(); ++r) priors.emplace(spec.region_ids[static_cast<std::size_t>(r)], spec.region_priors(r));
  write_file(dir / "priors.csv", [&](std::ostream& o) { write_priors(o, priors); });
  write_file(dir / "spec.json", [&](std::ostream& o) { write_spec(spec, o); });
  out << "wrote " << regions.size() << " regions to " << dir.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// experiment

int cmd_experiment(RunConfig cfg, RunOptions& opt, std::ostream& out) {
  resolve(cfg, opt);
  if (cfg.train_region.empty()) config_error("--train-region is required");
  if (cfg.out_dir.empty()) config_error("--out-dir is required");
  if (cfg.smote_k < 1) config_error("smote_k must be at least 1");

  std::vector<Method> methods;
  if (cfg.method == "all") {
    methods.assign(std::begin(kAllMethods), std::end(kAllMethods));
  } else {
    try {
      methods.push_back(parse_method(cfg.method));
    } catch (const Error& e) {
      config_error(e.detail());
    }
  }
  ExperimentConfig ecfg;
  ecfg.classifier = classifier_config(cfg);
  ecfg.smote_k = cfg.smote_k;
  ecfg.workers = cfg.workers;
  for (Method m : methods) {
    if (is_stochastic(cfg, m) && !cfg.seed) {
      config_error("--seed is required for " + std::string(to_string(m)) + " with " + cfg.classifier);
    }
  }

  const FeatureFile file = load_features(cfg.features);
  std::map<std::string, ClassPriors> priors;
  std::vector<std::string> prior_classes;
  if (!cfg.priors.empty()) {
    priors = read_priors_file(cfg.priors);
    for (const auto& [region, p] : priors) prior_classes.insert(prior_classes.end(), p.classes.begin(), p.classes.end());
  }
  const auto classes = collect_classes(file, prior_classes);
  const auto regions = to_region_datasets(file, classes);

  for (Method m : methods) {
    const std::string tag(to_string(m));
    const ExperimentResult result = run_transfer_experiment(regions, cfg.train_region, m, priors, ecfg, cfg.seed.value_or(0));
    const fs::path dir = fs::path(cfg.out_dir) / tag;
    ojson report;
    report["method"] = tag;
    report["train_region"] = cfg.train_region;
    report["seed"] = cfg.seed ? ojson(*cfg.seed) : ojson(nullptr);
    report["config"] = config_json(cfg, tag);
    report["classes"] = classes;
    report["aggregate"] = metrics_json(result.aggregate_metrics, result.aggregate.total(), result.aggregate.class_list);
    ojson per_region = ojson::object();
    for (const auto& [region, cm] : result.per_region) {
      write_file(dir / ("confusion_" + slug(region) + ".csv"), [&](std::ostream& o) { write_confusion(o, cm); });
      auto it = result.region_metrics.find(region);
      if (it != result.region_metrics.end()) per_region[region] = metrics_json(it->second, cm.total(), cm.class_list);
    }
    report["regions"] = per_region;
    write_file(dir / "confusion_aggregate.csv", [&](std::ostream& o) { write_confusion(o, result.aggregate); });
    write_file(dir / "predictions.csv", [&](std::ostream& o) {
      csv::write_row(o, {"pixel_id", "region_id", "label", "predicted"});
      for (const auto& [region, preds] : result.predictions) {
        const Dataset& data = regions.at(region);
        for (std::size_t i = 0; i < preds.size(); ++i) {
          const int truth = data.labels[i];
          csv::write_row(o, {data.pixel_ids[i], region,
                             truth == kUnlabeled ? "" : classes[static_cast<std::size_t>(truth)],
                             classes[static_cast<std::size_t>(preds[i])]});
        }
      }
    });
    write_file(dir / "metrics.json", [&](std::ostream& o) { o << report.dump(2) << '\n'; });
    out << tag << ": aggregate overall accuracy " << csv::format_double(result.aggregate_metrics.overall_accuracy)
        << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// oracle

int cmd_oracle(RunConfig cfg, RunOptions& opt, const std::string& output, std::ostream& out) {
  resolve(cfg, opt);
  if (cfg.folds < 2) config_error("folds must be at least 2");
  if (!cfg.seed) config_error("--seed is required for fold assignment");
  const ClassifierConfig ccfg = classifier_config(cfg);
  const FeatureFile file = load_features(cfg.features);
  const auto classes = collect_classes(file);
  const auto regions = to_region_datasets(file, classes);
  if (!cfg.train_region.empty() && !regions.contains(cfg.train_region)) {
    throw Error(ErrorCode::UnknownRegion, "'" + cfg.train_region + "' has no rows");
  }
  const auto by_region = oracle_cv_by_region(regions, cfg.folds, *cfg.seed, ccfg);
  write_file(output, [&](std::ostream& o) {
    csv::write_row(o, {"region_id", "correct", "total", "accuracy"});
    for (const auto& [region, cv] : by_region) {
      csv::write_row(o, {region, std::to_string(cv.correct), std::to_string(cv.total), csv::format_double(cv.accuracy())});
    }
  });
  if (!cfg.train_region.empty()) {
    out << "oracle aggregate excluding " << cfg.train_region << ": "
        << csv::format_double(oracle_aggregate(by_region, cfg.train_region)) << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train / predict

int cmd_train(RunConfig cfg, RunOptions& opt, const std::string& output, std::ostream& out) {
  resolve(cfg, opt);
  if (cfg.classifier == "rf" && !cfg.seed) config_error("--seed is required for rf");
  const ClassifierConfig ccfg = classifier_config(cfg);
  const FeatureFile file = load_features(cfg.features);
  const auto classes = collect_classes(file);
  const auto regions = to_region_datasets(file, classes);
  Dataset train;
  if (cfg.train_region.empty()) {
    std::vector<const Dataset*> parts;
    for (const auto& [region, data] : regions) parts.push_back(&data);
    train = concatenate(parts);
  } else {
    auto it = regions.find(cfg.train_region);
    if (it == regions.end()) throw Error(ErrorCode::UnknownRegion, "'" + cfg.train_region + "' has no rows");
    train = it->second;
  }
  std::vector<Eigen::Index> labeled;
  for (std::size_t i = 0; i < train.labels.size(); ++i) {
    if (train.labels[i] != kUnlabeled) labeled.push_back(static_cast<Eigen::Index>(i));
  }
  train = train.subset(labeled);
  const TrainedClassifier model = fit_classifier(train, ccfg);
  save_model_file(model, output);
  out << "trained " << cfg.classifier << " on " << train.size() << " rows\n";
  return kExitOk;
}

int cmd_predict(const std::string& model_path, const std::vector<std::string>& features, const std::string& output,
                std::ostream& out) {
  const TrainedClassifier model = load_model_file(model_path);
  const FeatureFile file = load_features(features);
  if (file.values.rows() > 0 && file.values.cols() != model.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "model expects " + std::to_string(model.dim()) + " features, file has " +
                                                  std::to_string(file.values.cols()));
  }
  const auto& classes = model.class_list();
  write_file(output, [&](std::ostream& o) {
    std::vector<std::string> header{"pixel_id", "region_id", "predicted"};
    for (const auto& c : classes) header.push_back("p_" + c);
    csv::write_row(o, header);
    for (Eigen::Index i = 0; i < file.values.rows(); ++i) {
      const Eigen::VectorXd x = file.values.row(i).transpose();
      const PosteriorVector p = model.posteriors(x);
      const auto r = static_cast<std::size_t>(i);
      std::vector<std::string> row{file.pixel_ids[r], file.region_ids[r],
                                   classes[static_cast<std::size_t>(argmax_index(p))]};
      for (Eigen::Index k = 0; k < p.size(); ++k) row.push_back(csv::format_double(p(k)));
      csv::write_row(o, row);
    }
  });
  out << "predicted " << file.values.rows() << " rows\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// entropy / priors-from-areas

int cmd_entropy(const std::string& priors_path, const std::string& output, std::ostream& out) {
  const auto priors = read_priors_file(priors_path);
  auto emit = [&](std::ostream& o) {
    csv::write_row(o, {"region_id", "entropy_nats"});
    for (const auto& [region, p] : priors) csv::write_row(o, {region, csv::format_double(shannon_entropy(p))});
  };
  if (output.empty()) {
    emit(out);
  } else {
    write_file(output, emit);
  }
  return kExitOk;
}

int cmd_priors_from_areas(const std::string& areas_path, const std::string& output, std::ostream& out) {
  const csv::Table header_check = csv::read_file(areas_path);
  if (!header_check.header.empty() && (!header_check.column("area") || !header_check.column("mean_field_area"))) {
    throw Error(ErrorCode::ParseError, areas_path + ": expected columns region_id,class,area,mean_field_area");
  }
  const auto priors = read_priors_file(areas_path);
  auto emit = [&](std::ostream& o) { write_priors(o, priors); };
  if (output.empty()) {
    emit(out);
  } else {
    write_file(output, emit);
  }
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Crop-type classification under regional distribution shift", "cropshift"};
  app.require_subcommand(1);

  FeaturesArgs fa;
  auto* features = app.add_subcommand("features", "Harmonic features from a long-format time series");
  features->add_option("--input", fa.input, "time series CSV")->required();
  features->add_option("--bands", fa.bands, "band manifest (one band per line)")->required();
  features->add_option("--anchor", fa.anchor, "YYYY-MM-DD origin for date-valued time columns");
  features->add_option("--output", fa.output, "feature CSV")->required();
  features->add_option("--drops", fa.drops, "drop report CSV (default <output>.drops.csv)");
  features->add_option("--nir-band", fa.nir, "band used as NIR for GCVI");
  features->add_option("--green-band", fa.green, "band used as green for GCVI");

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Sample a synthetic world to feature and priors CSVs");
  synth->add_option("--spec", sa.spec, "world spec JSON");
  synth->add_flag("--default", sa.use_default, "use the built-in acceptance world");
  sa.seed_opt = synth->add_option("--seed", sa.seed, "sampling seed (overrides the spec)");
  sa.samples_opt = synth->add_option("--samples", sa.samples, "points per region (overrides the spec)");
  synth->add_option("--out-dir", sa.out_dir, "output directory")->required();

  RunConfig ecfg;
  RunOptions eopt;
  auto* experiment = app.add_subcommand("experiment", "Train on one region, evaluate on the rest");
  eopt.method = experiment->add_option("--method", ecfg.method, "gmc, uat, psa, fsa, fpsa, smote-psa, zt-fpsa, zt-smote-fpsa or all");
  eopt.features = experiment->add_option("--features", ecfg.features, "feature CSV files");
  eopt.priors = experiment->add_option("--priors", ecfg.priors, "test-region priors CSV");
  eopt.train_region = experiment->add_option("--train-region", ecfg.train_region, "training region id");
  eopt.out_dir = experiment->add_option("--out-dir", ecfg.out_dir, "output directory (one subdirectory per method)");
  eopt.smote_k = experiment->add_option("--smote-k", ecfg.smote_k, "SMOTE neighbours");
  add_classifier_options(*experiment, ecfg, eopt);

  RunConfig ocfg;
  RunOptions oopt;
  std::string oracle_out;
  auto* oracle = app.add_subcommand("oracle", "Within-region cross-validated accuracy");
  oopt.features = oracle->add_option("--features", ocfg.features, "feature CSV files");
  oopt.folds = oracle->add_option("--folds", ocfg.folds, "number of folds");
  oopt.train_region = oracle->add_option("--train-region", ocfg.train_region, "region excluded from the aggregate");
  oracle->add_option("--output", oracle_out, "per-region CSV")->required();
  add_classifier_options(*oracle, ocfg, oopt);

  RunConfig tcfg;
  RunOptions topt;
  std::string model_out;
  auto* train = app.add_subcommand("train", "Fit a classifier and save it as JSON");
  topt.features = train->add_option("--features", tcfg.features, "feature CSV files");
  topt.train_region = train->add_option("--region", tcfg.train_region, "restrict training to one region");
  train->add_option("--output", model_out, "model JSON")->required();
  add_classifier_options(*train, tcfg, topt);

  std::string model_in, predict_out;
  std::vector<std::string> predict_features;
  auto* predict = app.add_subcommand("predict", "Posteriors and labels from a saved model");
  predict->add_option("--model", model_in, "model JSON")->required();
  predict->add_option("--features", predict_features, "feature CSV files")->required();
  predict->add_option("--output", predict_out, "prediction CSV")->required();

  std::string entropy_priors, entropy_out;
  auto* entropy = app.add_subcommand("entropy", "Shannon entropy (nats) of each region's class priors");
  entropy->add_option("--priors", entropy_priors, "priors CSV")->required();
  entropy->add_option("--output", entropy_out, "output CSV (default stdout)");

  std::string areas_in, areas_out;
  auto* areas = app.add_subcommand("priors-from-areas", "Class priors from crop areas and mean field sizes");
  areas->add_option("--areas", areas_in, "CSV: region_id,class,area,mean_field_area")->required();
  areas->add_option("--output", areas_out, "priors CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (*features) return cmd_features(fa, out, err);
    if (*synth) return cmd_synth(sa, out);
    if (*experiment) return cmd_experiment(ecfg, eopt, out);
    if (*oracle) return cmd_oracle(ocfg, oopt, oracle_out, out);
    if (*train) return cmd_train(tcfg, topt, model_out, out);
    if (*predict) return cmd_predict(model_in, predict_features, predict_out, out);
    if (*entropy) return cmd_entropy(entropy_priors, entropy_out, out);
    if (*areas) return cmd_priors_from_areas(areas_in, areas_out, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitConfig;
}

}  // namespace cropshift::cli
