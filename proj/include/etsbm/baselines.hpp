#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "etsbm/inference.hpp"

namespace etsbm {

// SBM-only VBEM: the ETSBM loop with every text term removed. The returned
// FitResult carries model = "sbm" and no topic parameters.
FitResult fit_sbm(const PreparedGraph& graph, const Matrix& init_tau, int num_clusters,
                  const std::optional<Priors>& priors, const Schedule& schedule, std::uint64_t seed);
FitResult fit_sbm(const TextGraph& graph, const Matrix& init_tau, int num_clusters,
                  const std::optional<Priors>& priors, const Schedule& schedule, std::uint64_t seed);

struct EtmOptions {
  TopicModelConfig topic;
  int epochs = 30;
  // Epochs are added until at least this many optimizer steps have run.
  int min_steps = 3000;
  int batch_size = 16;
  double lr = 2e-3;             // encoder
  double lr_embeddings = 2e-3;  // alpha and rho
  int train_samples = 1;
  int theta_samples = 64;  // draws averaged into the reported proportions
  // Independent trainings; the one with the best frozen corpus ELBO is kept.
  int restarts = 2;
  int score_samples = 16;
  std::uint64_t seed = 0;
  std::optional<Matrix> embeddings;
};

struct EtmFit {
  TopicModelParams topics;
  Matrix theta;                     // E x K posterior-mean proportions, graph edge order
  std::vector<double> elbo_trace;   // mean per-document training ELBO of each epoch
  double score = 0.0;               // frozen mean per-document ELBO of the kept run
  int restart = 0;                  // index of the kept run
};

// Amortized topic model with one document per edge.
EtmFit fit_etm(const TextGraph& graph, const EtmOptions& options);

// Argmax, lowest index on ties.
int edge_topic_from_theta(std::span<const double> theta);
std::vector<int> edge_topics_from_theta(const Matrix& theta);

}  // namespace etsbm
