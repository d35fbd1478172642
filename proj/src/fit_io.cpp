#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "etsbm/inference.hpp"

namespace etsbm {

namespace {

using nlohmann::json;

constexpr int kFitFormatVersion = 1;

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

Matrix matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows)
    throw std::runtime_error("fit file: matrix row count mismatch");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = data.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw std::runtime_error("fit file: matrix column count mismatch");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json record_json(const ElboRecord& r) {
  return {{"iteration", r.iteration}, {"net", r.net}, {"text", r.text}, {"total", r.total}};
}

ElboRecord record_from(const json& j) {
  return {j.at("iteration").get<int>(), j.at("net").get<double>(), j.at("text").get<double>(),
          j.at("total").get<double>()};
}

json schedule_json(const Schedule& s) {
  return {{"max_iter", s.max_iter},         {"inner_steps", s.inner_steps},
          {"lr_topics", s.lr_topics},       {"lr_xi", s.lr_xi},
          {"train_samples", s.train_samples}, {"eval_samples", s.eval_samples},
          {"tolerance", s.tolerance},       {"patience", s.patience},
          {"warmup", s.warmup}};
}

Schedule schedule_from(const json& j) {
  Schedule s;
  s.max_iter = j.at("max_iter").get<int>();
  s.inner_steps = j.at("inner_steps").get<int>();
  s.lr_topics = j.at("lr_topics").get<double>();
  s.lr_xi = j.at("lr_xi").get<double>();
  s.train_samples = j.at("train_samples").get<int>();
  s.eval_samples = j.at("eval_samples").get<int>();
  s.tolerance = j.at("tolerance").get<double>();
  s.patience = j.at("patience").get<int>();
  s.warmup = j.value("warmup", 0);
  return s;
}

}  // namespace

void save_fit(const FitResult& fit, const std::filesystem::path& path) {
  json j;
  j["format"] = "etsbm-fit";
  j["version"] = kFitFormatVersion;
  j["model"] = fit.model;
  j["seed"] = fit.seed;
  j["num_clusters"] = fit.num_clusters;
  j["topic_config"] = {{"num_topics", fit.topic_config.num_topics},
                       {"embedding_dim", fit.topic_config.embedding_dim},
                       {"hidden", fit.topic_config.hidden}};
  j["schedule"] = schedule_json(fit.schedule);
  j["priors"] = {{"gamma0", vector_json(fit.priors.gamma0)}, {"a", fit.priors.a}, {"b", fit.priors.b}};
  j["tau"] = matrix_json(fit.clusters.tau());
  j["xi"] = matrix_json(fit.clusters.xi());
  j["labels"] = fit.labels;
  j["pi1"] = matrix_json(fit.blocks.pi1);
  j["pi2"] = matrix_json(fit.blocks.pi2);
  j["gamma"] = vector_json(fit.blocks.gamma);
  json trace = json::array();
  for (const auto& r : fit.elbo_trace) trace.push_back(record_json(r));
  j["elbo_trace"] = std::move(trace);
  j["final_elbo"] = record_json(fit.final_elbo);
  j["initial_elbo"] = record_json(fit.diagnostics.initial);
  j["converged"] = fit.diagnostics.converged;
  j["iterations"] = fit.diagnostics.iterations;

  const auto encoder_path = std::filesystem::path(path.string() + ".encoder");
  if (fit.topics) {
    j["topics"] = {{"alpha", matrix_json(fit.topics->alpha)},
                   {"rho", matrix_json(fit.topics->rho)},
                   {"train_rho", fit.topics->train_rho},
                   {"encoder_file", encoder_path.filename().string()}};
    std::ofstream enc(encoder_path, std::ios::binary);
    if (!enc) throw std::runtime_error("cannot write '" + encoder_path.string() + "'");
    const auto arrays = nn::to_arrays(fit.topics->encoder);
    nn::write_arrays(arrays, enc);
    if (!enc) throw std::runtime_error("failed writing '" + encoder_path.string() + "'");
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write fit file '" + path.string() + "'");
  out << j.dump(1) << '\n';
  if (!out) throw std::runtime_error("failed writing fit file '" + path.string() + "'");
}

FitResult load_fit(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open fit file '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("fit file '" + path.string() + "': " + e.what());
  }
  if (j.value("format", "") != "etsbm-fit")
    throw std::runtime_error("'" + path.string() + "' is not a fit file");
  if (j.at("version").get<int>() != kFitFormatVersion)
    throw std::runtime_error("unsupported fit file version " + j.at("version").dump());

  FitResult fit;
  try {
    fit.model = j.at("model").get<std::string>();
    fit.seed = j.at("seed").get<std::uint64_t>();
    fit.num_clusters = j.at("num_clusters").get<int>();
    const auto& tc = j.at("topic_config");
    fit.topic_config = {tc.at("num_topics").get<int>(), tc.at("embedding_dim").get<int>(),
                        tc.at("hidden").get<int>()};
    fit.schedule = schedule_from(j.at("schedule"));
    fit.priors.gamma0 = vector_from(j.at("priors").at("gamma0"));
    fit.priors.a = j.at("priors").at("a").get<double>();
    fit.priors.b = j.at("priors").at("b").get<double>();
    fit.clusters = ClusterPosterior::from_xi(matrix_from(j.at("xi")));
    // tau is stored too; the xi form is authoritative and reproduces it.
    fit.labels = j.at("labels").get<std::vector<int>>();
    fit.blocks.pi1 = matrix_from(j.at("pi1"));
    fit.blocks.pi2 = matrix_from(j.at("pi2"));
    fit.blocks.gamma = vector_from(j.at("gamma"));
    for (const auto& r : j.at("elbo_trace")) fit.elbo_trace.push_back(record_from(r));
    fit.final_elbo = record_from(j.at("final_elbo"));
    fit.diagnostics.initial = record_from(j.at("initial_elbo"));
    fit.diagnostics.converged = j.at("converged").get<bool>();
    fit.diagnostics.iterations = j.at("iterations").get<int>();

    if (j.contains("topics")) {
      const auto& t = j.at("topics");
      TopicModelParams topics;
      topics.alpha = matrix_from(t.at("alpha"));
      topics.rho = matrix_from(t.at("rho"));
      topics.train_rho = t.at("train_rho").get<bool>();
      const auto enc_path = path.parent_path() / t.at("encoder_file").get<std::string>();
      std::ifstream enc(enc_path);
      if (!enc) throw std::runtime_error("cannot open encoder checkpoint '" + enc_path.string() + "'");
      const auto arrays = nn::read_arrays(enc);
      topics.encoder = nn::encoder_from_arrays(arrays);
      fit.topics = std::move(topics);
    }
  } catch (const json::exception& e) {
    throw std::runtime_error("fit file '" + path.string() + "': " + e.what());
  }
  return fit;
}

}  // namespace etsbm
