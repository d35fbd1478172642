#include "etsbm/simulator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include "etsbm/random.hpp"

namespace etsbm {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

constexpr int kBuiltinTopics = 4;
constexpr int kWordsPerTopic = 100;

}  // namespace

Scenario parse_scenario(std::string_view s) {
  const auto l = lower(s);
  if (l == "a") return Scenario::A;
  if (l == "b") return Scenario::B;
  if (l == "c") return Scenario::C;
  throw std::invalid_argument("unknown scenario '" + std::string(s) + "' (expected A, B or C)");
}

Difficulty parse_difficulty(std::string_view s) {
  const auto l = lower(s);
  if (l == "easy") return Difficulty::Easy;
  if (l == "hard1" || l == "hard-1") return Difficulty::Hard1;
  if (l == "hard2" || l == "hard-2") return Difficulty::Hard2;
  throw std::invalid_argument("unknown difficulty '" + std::string(s) +
                              "' (expected easy, hard1 or hard2)");
}

const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::A: return "A";
    case Scenario::B: return "B";
    case Scenario::C: return "C";
  }
  return "?";
}

const char* to_string(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return "easy";
    case Difficulty::Hard1: return "hard1";
    case Difficulty::Hard2: return "hard2";
  }
  return "?";
}

void ScenarioConfig::validate() const {
  const auto Q = static_cast<Eigen::Index>(num_clusters);
  if (Q < 1) throw std::invalid_argument("scenario needs at least one cluster");
  if (connection.rows() != Q || connection.cols() != Q || topic_assignment.rows() != Q ||
      topic_assignment.cols() != Q || proportions.size() != Q)
    throw std::invalid_argument("scenario matrices do not match the cluster count");
  if ((connection.array() < 0.0).any() || (connection.array() > 1.0).any())
    throw std::invalid_argument("connection probabilities must lie in [0, 1]");
  if ((topic_assignment.array() < 0).any() || (topic_assignment.array() >= num_topics).any())
    throw std::invalid_argument("topic assignment out of range");
  if ((proportions.array() < 0.0).any() || std::abs(proportions.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("cluster proportions must lie on the simplex");
  if (mean_text_len <= 0.0) throw std::invalid_argument("mean text length must be positive");
  if (zeta < 0.0 || zeta > 1.0) throw std::invalid_argument("zeta must lie in [0, 1]");
}

ScenarioConfig scenario_params(Scenario scenario, Difficulty difficulty) {
  double eta = 0.25;
  double eps = 0.01;
  ScenarioConfig cfg;
  cfg.mean_text_len = 150.0;
  cfg.zeta = 0.0;
  if (difficulty == Difficulty::Hard1) eps = 0.2;
  if (difficulty == Difficulty::Hard2) {
    eta = 0.1;
    cfg.mean_text_len = 110.0;
    cfg.zeta = 0.7;
  }

  switch (scenario) {
    case Scenario::A:
      cfg.num_clusters = 3;
      cfg.num_topics = 4;
      cfg.connection = Eigen::MatrixXd::Constant(3, 3, eps);
      cfg.connection.diagonal().setConstant(eta);
      cfg.topic_assignment = Eigen::MatrixXi::Constant(3, 3, 3);
      cfg.topic_assignment.diagonal() << 0, 1, 2;
      break;
    case Scenario::B:
      cfg.num_clusters = 2;
      cfg.num_topics = 3;
      cfg.connection = Eigen::MatrixXd::Constant(2, 2, eta);
      cfg.topic_assignment = Eigen::MatrixXi::Constant(2, 2, 2);
      cfg.topic_assignment.diagonal() << 0, 1;
      break;
    case Scenario::C:
      cfg.num_clusters = 4;
      cfg.num_topics = 3;
      cfg.connection = Eigen::MatrixXd::Constant(4, 4, eps);
      cfg.connection.diagonal().setConstant(eta);
      cfg.connection(2, 3) = eta;
      cfg.connection(3, 2) = eta;
      cfg.topic_assignment = Eigen::MatrixXi::Constant(4, 4, 2);
      cfg.topic_assignment.diagonal() << 0, 1, 0, 1;
      break;
  }
  cfg.proportions = Eigen::VectorXd::Constant(cfg.num_clusters, 1.0 / cfg.num_clusters);
  return cfg;
}

Eigen::VectorXd apply_noise(const Eigen::VectorXd& theta_star, double zeta) {
  const double K = static_cast<double>(theta_star.size());
  return ((1.0 - zeta) * theta_star.array() + zeta / K).matrix();
}

TopicSet builtin_topics(int num_topics, int words_per_topic, std::uint64_t seed, double leak) {
  if (num_topics < 1 || words_per_topic < 1 || num_topics * words_per_topic < 2)
    throw std::invalid_argument("builtin topics need K >= 1 and V >= 2");
  if (leak < 0.0 || leak >= 1.0) throw std::invalid_argument("leak must lie in [0, 1)");
  const int V = num_topics * words_per_topic;

  std::vector<std::string> words;
  words.reserve(static_cast<std::size_t>(V));
  char buf[32];
  for (int k = 0; k < num_topics; ++k)
    for (int j = 0; j < words_per_topic; ++j) {
      std::snprintf(buf, sizeof buf, "t%dw%03d", k + 1, j);
      words.emplace_back(buf);
    }

  Rng rng(seed);
  Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(num_topics, V);
  std::vector<int> rank(static_cast<std::size_t>(words_per_topic));
  for (int k = 0; k < num_topics; ++k) {
    std::iota(rank.begin(), rank.end(), 0);
    std::shuffle(rank.begin(), rank.end(), rng);
    double z = 0.0;
    for (int j = 0; j < words_per_topic; ++j) z += 1.0 / (rank[j] + 1.0);
    for (int j = 0; j < words_per_topic; ++j)
      dist(k, k * words_per_topic + j) = (1.0 - leak) / (rank[j] + 1.0) / z;
    if (leak > 0.0 && num_topics > 1) {
      const double share = leak / (V - words_per_topic);
      for (int v = 0; v < V; ++v)
        if (v / words_per_topic != k) dist(k, v) = share;
    } else if (leak > 0.0) {
      dist.row(k) /= dist.row(k).sum();
    }
  }
  return {Vocabulary(std::move(words)), std::move(dist)};
}

std::vector<int> GroundTruth::edge_topic_vector(const TextGraph& graph) const {
  std::vector<int> out;
  out.reserve(graph.num_edges());
  for (const auto& e : graph.edges()) out.push_back(edge_topics.at({e.src, e.dst}));
  return out;
}

SimulatedNetwork sample_network(const ScenarioConfig& cfg, std::size_t num_nodes,
                                const TopicSet& topics, std::uint64_t seed) {
  cfg.validate();
  const int Q = cfg.num_clusters;
  if (num_nodes < static_cast<std::size_t>(Q))
    throw std::invalid_argument("sample_network needs at least Q nodes");
  if (topics.word_dist.rows() < cfg.num_topics)
    throw std::invalid_argument("topic set has fewer topics than the scenario needs");
  const auto V = topics.word_dist.cols();
  const auto Ktrue = static_cast<Eigen::Index>(cfg.num_topics);

  Rng rng(seed);

  GroundTruth truth;
  truth.node_labels.resize(num_nodes);
  {
    std::discrete_distribution<int> pick(cfg.proportions.data(),
                                         cfg.proportions.data() + cfg.proportions.size());
    for (auto& l : truth.node_labels) l = pick(rng);
  }

  // Word distribution of each cluster pair: noisy theta mixed over the topics.
  std::vector<std::discrete_distribution<int>> pair_words;
  pair_words.reserve(static_cast<std::size_t>(Q * Q));
  for (int q = 0; q < Q; ++q)
    for (int r = 0; r < Q; ++r) {
      Eigen::VectorXd star = Eigen::VectorXd::Zero(Ktrue);
      star(cfg.topic_assignment(q, r)) = 1.0;
      const Eigen::VectorXd theta = apply_noise(star, cfg.zeta);
      const Eigen::RowVectorXd mix = theta.transpose() * topics.word_dist.topRows(Ktrue);
      pair_words.emplace_back(mix.data(), mix.data() + V);
    }

  std::poisson_distribution<int> length(cfg.mean_text_len);
  std::vector<std::uint32_t> counts(static_cast<std::size_t>(V));
  std::vector<EdgeDocument> edges;
  for (std::size_t i = 0; i < num_nodes; ++i) {
    for (std::size_t j = 0; j < num_nodes; ++j) {
      if (i == j) continue;
      const int q = truth.node_labels[i];
      const int r = truth.node_labels[j];
      std::bernoulli_distribution link(cfg.connection(q, r));
      if (!link(rng)) continue;
      const int n = std::max(1, length(rng));
      std::fill(counts.begin(), counts.end(), 0u);
      auto& words = pair_words[static_cast<std::size_t>(q * Q + r)];
      for (int w = 0; w < n; ++w) ++counts[static_cast<std::size_t>(words(rng))];
      EdgeDocument doc;
      doc.src = i;
      doc.dst = j;
      for (std::size_t v = 0; v < counts.size(); ++v)
        if (counts[v] > 0) doc.counts.push_back({static_cast<std::uint32_t>(v), counts[v]});
      edges.push_back(std::move(doc));
      truth.edge_topics[{i, j}] = cfg.topic_assignment(q, r);
    }
  }
  return {TextGraph(num_nodes, topics.vocab, std::move(edges)), std::move(truth)};
}

SimulatedNetwork simulate(Scenario scenario, Difficulty difficulty, std::size_t num_nodes,
                          std::uint64_t seed) {
  const auto cfg = scenario_params(scenario, difficulty);
  const auto topics = builtin_topics(kBuiltinTopics, kWordsPerTopic, derive_seed(seed, {1}));
  return sample_network(cfg, num_nodes, topics, derive_seed(seed, {2}));
}

void write_truth(const GroundTruth& truth, std::ostream& out) {
  for (std::size_t i = 0; i < truth.node_labels.size(); ++i)
    out << "N " << i << ' ' << truth.node_labels[i] << '\n';
  for (const auto& [pair, topic] : truth.edge_topics)
    out << "T " << pair.first << ' ' << pair.second << ' ' << topic << '\n';
}

GroundTruth read_truth(std::istream& in) {
  GroundTruth truth;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "N") {
      std::size_t node = 0;
      int label = 0;
      if (!(ls >> node >> label)) throw DataError("malformed node record", lineno);
      if (node != truth.node_labels.size()) throw DataError("node records out of order", lineno);
      truth.node_labels.push_back(label);
    } else if (tag == "T") {
      std::size_t s = 0, d = 0;
      int topic = 0;
      if (!(ls >> s >> d >> topic)) throw DataError("malformed topic record", lineno);
      truth.edge_topics[{s, d}] = topic;
    } else {
      throw DataError("unknown truth record '" + tag + "'", lineno);
    }
  }
  return truth;
}

void save_truth(const GroundTruth& truth, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write truth file '" + path.string() + "'");
  write_truth(truth, out);
}

GroundTruth load_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open truth file '" + path.string() + "'");
  return read_truth(in);
}

}  // namespace etsbm
