#include "cropshift/model_io.hpp"

#include <fstream>
#include <istream>
#include <json.hpp>
#include <ostream>

#include "cropshift/error.hpp"

namespace cropshift {

using nlohmann::json;

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].size() != static_cast<std::size_t>(cols)) {
      throw Error(ErrorCode::ParseError, "ragged matrix in model file");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(i), c) = j[i][static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json lda_to_json(const LdaModel& m) {
  return {{"kind", "lda"},
          {"class_list", m.class_list()},
          {"dim", m.dim()},
          {"class_means", matrix_to_json(m.class_means())},
          {"covariance", matrix_to_json(m.covariance())},
          {"train_priors", vector_to_json(m.train_priors())}};
}

LdaModel lda_from_json(const json& j) {
  const auto dim = j.at("dim").get<Eigen::Index>();
  return LdaModel::from_parameters(j.at("class_list").get<std::vector<std::string>>(),
                                   matrix_from_json(j.at("class_means"), dim),
                                   matrix_from_json(j.at("covariance"), dim),
                                   vector_from_json(j.at("train_priors")));
}

json forest_to_json(const ForestModel& m) {
  json trees = json::array();
  for (const auto& tree : m.trees) {
    json nodes = json::array();
    for (const auto& node : tree.nodes) {
      if (node.feature < 0) {
        nodes.push_back({{"counts", node.counts}, {"majority", node.majority}});
      } else {
        nodes.push_back({{"feature", node.feature},
                         {"threshold", node.threshold},
                         {"left", node.left},
                         {"right", node.right},
                         {"majority", node.majority}});
      }
    }
    trees.push_back(std::move(nodes));
  }
  return {{"kind", "random_forest"},
          {"class_list", m.class_list},
          {"n_features", m.n_features},
          {"train_priors", vector_to_json(m.train_priors)},
          {"params",
           {{"n_trees", m.params.n_trees},
            {"features_per_split", m.params.features_per_split},
            {"min_leaf", m.params.min_leaf},
            {"max_depth", m.params.max_depth},
            {"seed", m.params.seed}}},
          {"trees", std::move(trees)}};
}

ForestModel forest_from_json(const json& j) {
  ForestModel m;
  m.class_list = j.at("class_list").get<std::vector<std::string>>();
  m.n_features = j.at("n_features").get<Eigen::Index>();
  m.train_priors = vector_from_json(j.at("train_priors"));
  const auto& p = j.at("params");
  m.params.n_trees = p.at("n_trees").get<int>();
  m.params.features_per_split = p.at("features_per_split").get<int>();
  m.params.min_leaf = p.at("min_leaf").get<int>();
  m.params.max_depth = p.at("max_depth").get<int>();
  m.params.seed = p.at("seed").get<std::uint64_t>();
  const int k = static_cast<int>(m.class_list.size());
  for (const auto& jt : j.at("trees")) {
    DecisionTree tree;
    for (const auto& jn : jt) {
      TreeNode node;
      node.majority = jn.at("majority").get<int>();
      if (jn.contains("counts")) {
        node.counts = jn.at("counts").get<std::vector<int>>();
        if (static_cast<int>(node.counts.size()) != k) {
          throw Error(ErrorCode::ParseError, "leaf count vector has wrong length");
        }
      } else {
        node.feature = jn.at("feature").get<int>();
        node.threshold = jn.at("threshold").get<double>();
        node.left = jn.at("left").get<int>();
        node.right = jn.at("right").get<int>();
      }
      if (node.majority < 0 || node.majority >= k) throw Error(ErrorCode::ParseError, "bad leaf class");
      tree.nodes.push_back(std::move(node));
    }
    const auto n = static_cast<int>(tree.nodes.size());
    for (const auto& node : tree.nodes) {
      if (node.feature >= 0 && (node.feature >= m.n_features || node.left <= 0 || node.left >= n ||
                                node.right <= 0 || node.right >= n)) {
        throw Error(ErrorCode::ParseError, "tree node references are out of range");
      }
    }
    if (tree.nodes.empty()) throw Error(ErrorCode::ParseError, "empty tree");
    m.trees.push_back(std::move(tree));
  }
  if (m.trees.empty()) throw Error(ErrorCode::ParseError, "forest has no trees");
  return m;
}

}  // namespace

void save_model(const TrainedClassifier& model, std::ostream& out) {
  json doc = std::visit(
      [](const auto& m) {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, LdaModel>) {
          return lda_to_json(m);
        } else {
          return forest_to_json(m);
        }
      },
      model.model());
  doc["format"] = kModelFormat;
  doc["version"] = kModelFormatVersion;
  out << doc.dump(1) << '\n';
}

TrainedClassifier load_model(std::istream& in) {
  try {
    const json doc = json::parse(in);
    if (doc.value("format", "") != kModelFormat) {
      throw Error(ErrorCode::ParseError, "not a cropshift model file");
    }
    if (doc.value("version", 0) != kModelFormatVersion) {
      throw Error(ErrorCode::ParseError, "unsupported model version " + doc.value("version", json()).dump());
    }
    const auto kind = doc.at("kind").get<std::string>();
    if (kind == "lda") return TrainedClassifier(lda_from_json(doc));
    if (kind == "random_forest") return TrainedClassifier(forest_from_json(doc));
    throw Error(ErrorCode::ParseError, "unknown model kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed model file: ") + e.what());
  }
}

void save_model_file(const TrainedClassifier& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  save_model(model, out);
}

TrainedClassifier load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  return load_model(in);
}

}  // namespace cropshift
