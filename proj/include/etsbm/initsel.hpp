#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "etsbm/baselines.hpp"
#include "etsbm/inference.hpp"

namespace etsbm {

inline constexpr double kSoftLabelMass = 0.95;

// One-hot rows moved to `keep` on the assigned cluster, the rest spread evenly.
Matrix soften_labels(const std::vector<int>& labels, int num_clusters, double keep = kSoftLabelMass);

Matrix init_random(std::size_t num_nodes, int num_clusters, std::uint64_t seed);

struct KMeansResult {
  std::vector<int> labels;
  Matrix centers;                     // Q x D
  double inertia = 0.0;
  std::vector<double> inertia_trace;  // best restart, after each assignment step
};

// k-means++ seeding, Lloyd iterations, best inertia over `restarts`.
KMeansResult kmeans(const Matrix& points, int num_clusters, std::uint64_t seed, int restarts = 10,
                    int max_iter = 300);

Matrix init_kmeans_adjacency(const PreparedGraph& graph, int num_clusters, std::uint64_t seed);

// Node features: mean topic proportions over out-edges and in-edges, then the
// degree-normalized out-row and in-column of the adjacency matrix.
Matrix dissimilarity_features(const PreparedGraph& graph, const Matrix& edge_theta);
Matrix init_dissimilarity(const PreparedGraph& graph, const Matrix& edge_theta, int num_clusters,
                          std::uint64_t seed);

enum class InitStrategy { Random, KMeans, Dissimilarity };
InitStrategy parse_init(std::string_view s);
const char* to_string(InitStrategy s);

// Builds the initial tau for a restart; ETM proportions are required for the
// dissimilarity strategy.
Matrix initial_tau(InitStrategy strategy, const PreparedGraph& graph, const Matrix* edge_theta,
                   int num_clusters, std::uint64_t seed);

struct SelectionOptions {
  std::vector<int> q_range;
  int restarts = 10;
  InitStrategy init = InitStrategy::Dissimilarity;
  FitOptions fit;       // num_clusters and seed are set per task
  EtmOptions etm;       // fitted once per dataset; its topic config follows `fit.topic`
  // Start every text fit from the ETM's topic parameters.
  bool warm_start_topics = true;
  // With several candidate Q, the best restart of each Q is continued for this
  // many outer iterations without early stopping before the ELBOs are compared.
  int refine_iterations = 700;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::optional<std::vector<int>> truth;  // node labels, for the ARI column
  // Sees every completed fit; may run on worker threads.
  std::function<void(const FitResult&)> on_fit;
};

struct RestartRecord {
  int q = 0;
  int restart = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  ElboRecord elbo;
  std::optional<double> node_ari;
};

struct SelectionReport {
  std::vector<RestartRecord> runs;  // q-major, restart-minor
  std::vector<int> q_values;
  std::vector<double> best_elbo;          // per q, after refinement; -inf when every restart failed
  std::vector<RestartRecord> refined;     // per q when refinement ran, restart = the refined one
  std::vector<std::optional<FitResult>> best_fit;
  int chosen_q = 0;
};

// Fits every (Q, restart) cell, keeps the best frozen ELBO per Q, refines it
// and picks the argmax (smaller Q on ties). Throws if every restart of some Q
// failed.
SelectionReport select_q(const TextGraph& graph, const SelectionOptions& options);

// Delimited table with a leading "# chosen_q=<Q>" line.
void write_selection(const SelectionReport& report, std::ostream& out);

// Runs fn(0..n-1) on up to `jobs` threads; the first exception is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace etsbm
