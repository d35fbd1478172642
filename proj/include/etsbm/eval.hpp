#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "etsbm/inference.hpp"

namespace etsbm {

// Hubert-Arabie adjusted Rand index. When both partitions are trivial in the
// same way (expected index equals the maximum) the value is 1.
double ari(std::span<const int> a, std::span<const int> b);

struct PosteriorMeans {
  Matrix pi_hat;     // Q x Q
  Vector gamma_hat;  // Q
};
PosteriorMeans posterior_means(const FitResult& fit);

// Dominant topic per edge (graph edge order) from word responsibilities under
// the posterior-mean proportions of the edge's hard cluster pair.
std::vector<int> edge_topic_labels(const FitResult& fit, const PreparedGraph& graph,
                                   int samples = 64, std::uint64_t seed = 0);

// Per topic, the `n` most probable words, descending, lower index first on ties.
std::vector<std::vector<std::string>> top_words(const Matrix& beta, const Vocabulary& vocab,
                                                std::size_t n);

struct MetaNode {
  int cluster = 0;
  double proportion = 0.0;
  std::size_t members = 0;
};

struct MetaEdge {
  int from = 0;
  int to = 0;
  std::size_t connections = 0;  // graph edges between the hard-assigned clusters
  double documents = 0.0;       // total word count of the expected meta-document
  int dominant_topic = -1;      // -1 for fits without a topic model
  double pi_hat = 0.0;
};

struct MetaGraph {
  std::vector<MetaNode> nodes;
  std::vector<MetaEdge> edges;  // ordered pairs with at least one connection
};

MetaGraph build_meta_graph(const FitResult& fit, const PreparedGraph& graph, int samples = 64,
                           std::uint64_t seed = 0);
void write_dot(const MetaGraph& meta, std::ostream& out);
// from,to,connections,documents,dominant_topic,pi_hat
void write_meta_summary(const MetaGraph& meta, std::ostream& out);

struct AriRow {
  std::string scenario;
  std::string difficulty;
  std::uint64_t seed = 0;
  std::string model;
  std::optional<double> node_ari;
  std::optional<double> edge_ari;
};
// scenario,difficulty,seed,model,node_ari,edge_ari (empty fields when absent)
void write_ari_rows(std::span<const AriRow> rows, std::ostream& out);

}  // namespace etsbm
