#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "etsbm/corpus.hpp"

namespace etsbm {

enum class Scenario { A, B, C };
enum class Difficulty { Easy, Hard1, Hard2 };

Scenario parse_scenario(std::string_view s);      // "A" | "B" | "C" (case-insensitive)
Difficulty parse_difficulty(std::string_view s);  // "easy" | "hard1" | "hard2"
const char* to_string(Scenario s);
const char* to_string(Difficulty d);

struct ScenarioConfig {
  int num_clusters = 0;
  int num_topics = 0;
  Eigen::MatrixXd connection;        // Q x Q probabilities
  Eigen::MatrixXi topic_assignment;  // Q x Q topic indices
  Eigen::VectorXd proportions;       // Q, sums to 1
  double mean_text_len = 150.0;
  double zeta = 0.0;

  void validate() const;
};

ScenarioConfig scenario_params(Scenario scenario, Difficulty difficulty);

// (1 - zeta) * theta_star + zeta * uniform.
Eigen::VectorXd apply_noise(const Eigen::VectorXd& theta_star, double zeta);

struct TopicSet {
  Vocabulary vocab;
  Eigen::MatrixXd word_dist;  // K x V, rows on the simplex
};

// K Zipf-shaped topics over disjoint blocks of `words_per_topic` words.
// `leak` moves that fraction of each topic's mass uniformly onto the other
// blocks (0 keeps the supports disjoint).
TopicSet builtin_topics(int num_topics, int words_per_topic, std::uint64_t seed, double leak = 0.0);

using NodePair = std::pair<std::size_t, std::size_t>;

struct GroundTruth {
  std::vector<int> node_labels;
  std::map<NodePair, int> edge_topics;

  // Topic labels aligned with graph.edges() order.
  std::vector<int> edge_topic_vector(const TextGraph& graph) const;
};

struct SimulatedNetwork {
  TextGraph graph;
  GroundTruth truth;
};

SimulatedNetwork sample_network(const ScenarioConfig& cfg, std::size_t num_nodes,
                                const TopicSet& topics, std::uint64_t seed);

// Scenario network over the shared 4 x 100-word builtin vocabulary.
SimulatedNetwork simulate(Scenario scenario, Difficulty difficulty, std::size_t num_nodes,
                          std::uint64_t seed);

void write_truth(const GroundTruth& truth, std::ostream& out);
GroundTruth read_truth(std::istream& in);
void save_truth(const GroundTruth& truth, const std::filesystem::path& path);
GroundTruth load_truth(const std::filesystem::path& path);

}  // namespace etsbm
