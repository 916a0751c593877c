#include "loco/model_io.h"

#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace loco {

using nlohmann::json;

namespace {

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix json_matrix(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j.at(i).size()) != cols) throw std::runtime_error("model: ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  }
  return m;
}

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector json_vector(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

std::string model_to_json(const FittedModel& model) {
  json j;
  j["method"] = method_name(model.method);
  j["theta_hat"] = matrix_json(model.theta_hat.entries());
  j["reference_action"] = model.reference_action ? json(*model.reference_action) : json(nullptr);
  if (model.reduced) {
    const auto& sub = model.reduced->subspace;
    j["subspace"] = {{"rank", sub.rank},
                     {"u_hat", matrix_json(sub.u_hat)},
                     {"v_hat", matrix_json(sub.v_hat)},
                     {"singular_values", vector_json(sub.singular_values)}};
    j["theta_rtv"] = vector_json(model.reduced->theta_rtv);
  }
  if (model.cs) {
    const auto& cs = *model.cs;
    j["confidence_set"] = {{"theta_hat", vector_json(cs.theta_hat())},
                           {"w", matrix_json(cs.w())},
                           {"radius", cs.radius()},
                           {"ridge", cs.ridge()},
                           {"gamma", cs.gamma()},
                           {"delta", cs.delta()}};
  }
  return j.dump(1);
}

FittedModel model_from_json(const std::string& text) {
  const json j = json::parse(text);
  FittedModel model;
  model.method = parse_method(j.at("method").get<std::string>());
  model.theta_hat = RewardMatrix(json_matrix(j.at("theta_hat")));
  if (!j.at("reference_action").is_null()) model.reference_action = j["reference_action"].get<int>();
  if (j.contains("subspace")) {
    const auto& s = j["subspace"];
    Subspace sub{json_matrix(s.at("u_hat")), json_matrix(s.at("v_hat")), s.at("rank").get<int>(),
                 json_vector(s.at("singular_values"))};
    auto reduced = std::make_shared<ReducedModel>(ReducedModel{std::move(sub), json_vector(j.at("theta_rtv"))});
    reduced->validate();
    model.reduced = std::move(reduced);
  }
  if (j.contains("confidence_set")) {
    const auto& c = j["confidence_set"];
    model.cs = std::make_shared<ConfidenceSet>(json_vector(c.at("theta_hat")), json_matrix(c.at("w")),
                                               c.at("radius").get<double>(), c.at("ridge").get<double>(),
                                               c.at("gamma").get<double>(), c.at("delta").get<double>());
  }
  if (model.method == Method::Prs && (!model.reduced || !model.cs)) {
    throw std::runtime_error("model: PRS model needs subspace and confidence set");
  }
  if (model.method == Method::MlePessimistic && !model.cs) {
    throw std::runtime_error("model: pessimistic model needs a confidence set");
  }
  return model;
}

void save_model(const std::string& path, const FittedModel& model) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << model_to_json(model) << '\n';
}

FittedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace loco
