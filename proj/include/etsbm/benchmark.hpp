#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "etsbm/eval.hpp"
#include "etsbm/initsel.hpp"
#include "etsbm/simulator.hpp"

namespace etsbm {

struct BenchmarkOptions {
  std::size_t nodes = 100;
  int replicates = 10;
  int restarts = 1;    // per model and replicate; the best frozen ELBO is kept
  int num_topics = 0;  // 0: the scenario's true topic count
  InitStrategy init = InitStrategy::Dissimilarity;  // for etsbm; sbm always uses k-means
  // etsbm, etsbm@<init> (random, kmeans, dissimilarity), sbm, etm
  std::vector<std::string> models{"etsbm", "sbm", "etm"};
  FitOptions fit;  // num_clusters, topic.num_topics and seed are set per task
  EtmOptions etm;
  bool warm_start_topics = true;
  bool keep_fits = false;
  std::uint64_t seed = 0;
  int jobs = 1;
  // Sees every completed fit, restarts included; may run on worker threads.
  std::function<void(const FitResult&)> on_fit;
};

struct ModelOutcome {
  std::string model;
  bool ok = false;
  std::string error;
  std::optional<double> node_ari;
  std::optional<double> edge_ari;
  std::optional<double> init_ari;  // of the kept restart's starting partition
  std::optional<ElboRecord> elbo;
  std::optional<FitResult> fit;  // when keep_fits
};

struct ReplicateResult {
  Scenario scenario = Scenario::A;
  Difficulty difficulty = Difficulty::Easy;
  int replicate = 0;
  std::uint64_t data_seed = 0;
  std::vector<ModelOutcome> models;

  const ModelOutcome* find(const std::string& model) const;
};

// Simulates one network and fits every requested model on it. Model errors
// are recorded, not thrown.
ReplicateResult run_replicate(Scenario scenario, Difficulty difficulty, int replicate,
                              const BenchmarkOptions& options);

// Every (scenario, difficulty, replicate) task, spread over options.jobs
// threads; the result order is task order whatever the job count.
std::vector<ReplicateResult> run_benchmark(std::span<const Scenario> scenarios,
                                           std::span<const Difficulty> difficulties,
                                           const BenchmarkOptions& options);

std::vector<AriRow> ari_rows(std::span<const ReplicateResult> results);

struct CellSummary {
  std::string scenario;
  std::string difficulty;
  std::string model;
  std::size_t runs = 0;  // successful fits
  std::size_t failures = 0;
  std::optional<double> node_mean, node_sd;
  std::optional<double> edge_mean, edge_sd;
};

// Mean and sample standard deviation per (scenario, difficulty, model).
std::vector<CellSummary> summarize(std::span<const ReplicateResult> results);
// One line per cell, "mean±sd".
void write_summary(std::span<const CellSummary> cells, std::ostream& out);

}  // namespace etsbm
