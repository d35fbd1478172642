#include "etsbm/eval.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "etsbm/baselines.hpp"

namespace etsbm {

namespace {

double choose2(double n) { return n * (n - 1.0) / 2.0; }

std::vector<int> compact(std::span<const int> labels) {
  std::vector<int> sorted(labels.begin(), labels.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    out[i] = static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), labels[i]) - sorted.begin());
  return out;
}

}  // namespace

double ari(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw std::invalid_argument("ari: label vectors differ in length");
  if (a.size() < 2) throw std::invalid_argument("ari: need at least two items");
  const auto ca = compact(a);
  const auto cb = compact(b);
  const int na = *std::max_element(ca.begin(), ca.end()) + 1;
  const int nb = *std::max_element(cb.begin(), cb.end()) + 1;
  std::vector<double> table(static_cast<std::size_t>(na * nb), 0.0), rows(na, 0.0), cols(nb, 0.0);
  for (std::size_t i = 0; i < ca.size(); ++i) {
    table[static_cast<std::size_t>(ca[i] * nb + cb[i])] += 1.0;
    rows[ca[i]] += 1.0;
    cols[cb[i]] += 1.0;
  }
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (double n : table) index += choose2(n);
  for (double n : rows) sum_a += choose2(n);
  for (double n : cols) sum_b += choose2(n);
  const double expected = sum_a * sum_b / choose2(static_cast<double>(a.size()));
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

PosteriorMeans posterior_means(const FitResult& fit) {
  PosteriorMeans pm;
  pm.pi_hat = fit.blocks.pi1.cwiseQuotient(fit.blocks.pi1 + fit.blocks.pi2);
  pm.gamma_hat = fit.blocks.gamma / fit.blocks.gamma.sum();
  return pm;
}

std::vector<int> edge_topic_labels(const FitResult& fit, const PreparedGraph& graph, int samples,
                                   std::uint64_t seed) {
  if (!fit.topics) throw std::invalid_argument("edge topics need a fit with a topic model");
  const auto Q = fit.clusters.num_clusters();
  const Matrix theta_bar = pair_topic_means(fit, graph, samples, seed);
  const Matrix beta = beta_from_embeddings(*fit.topics);
  const auto labels = fit.clusters.hard_labels();
  const auto K = beta.rows();

  std::vector<int> out;
  out.reserve(graph.edge_nodes.size());
  Vector load(K);
  for (std::size_t e = 0; e < graph.edge_nodes.size(); ++e) {
    const auto [i, j] = graph.edge_nodes[e];
    const Eigen::Index pair = labels[static_cast<std::size_t>(i)] * Q + labels[static_cast<std::size_t>(j)];
    load.setZero();
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(graph.counts,
                                                                         static_cast<Eigen::Index>(e));
         it; ++it) {
      const Vector resp = theta_bar.row(pair).transpose().cwiseProduct(beta.col(it.col()));
      const double z = resp.sum();
      if (z > 0.0) load += it.value() * resp / z;
    }
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < K; ++k)
      if (load(k) > load(best)) best = k;
    out.push_back(static_cast<int>(best));
  }
  return out;
}

std::vector<std::vector<std::string>> top_words(const Matrix& beta, const Vocabulary& vocab,
                                                std::size_t n) {
  if (static_cast<std::size_t>(beta.cols()) != vocab.size())
    throw std::invalid_argument("top_words: beta width differs from vocabulary size");
  if (n > vocab.size()) throw std::invalid_argument("top_words: n exceeds vocabulary size");
  std::vector<std::vector<std::string>> out;
  std::vector<std::size_t> idx(vocab.size());
  for (Eigen::Index k = 0; k < beta.rows(); ++k) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
      return beta(k, static_cast<Eigen::Index>(x)) > beta(k, static_cast<Eigen::Index>(y));
    });
    std::vector<std::string> words;
    for (std::size_t t = 0; t < n; ++t) words.push_back(vocab.word(idx[t]));
    out.push_back(std::move(words));
  }
  return out;
}

MetaGraph build_meta_graph(const FitResult& fit, const PreparedGraph& graph, int samples,
                           std::uint64_t seed) {
  const int Q = fit.clusters.num_clusters();
  const auto pm = posterior_means(fit);
  const auto labels = fit.clusters.hard_labels();
  MetaGraph meta;
  for (int q = 0; q < Q; ++q) {
    MetaNode node;
    node.cluster = q;
    node.proportion = pm.gamma_hat(q);
    node.members = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), q));
    meta.nodes.push_back(node);
  }

  std::vector<std::size_t> connections(static_cast<std::size_t>(Q * Q), 0);
  for (const auto& [i, j] : graph.edge_nodes)
    ++connections[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)] * Q +
                                           labels[static_cast<std::size_t>(j)])];
  const MetaDocuments md = expected_meta_documents(fit.clusters.tau(), graph);
  Matrix theta_bar;
  if (fit.topics) theta_bar = pair_topic_means(fit, graph, samples, seed);

  for (int q = 0; q < Q; ++q)
    for (int r = 0; r < Q; ++r) {
      const auto p = static_cast<std::size_t>(q * Q + r);
      if (connections[p] == 0) continue;
      MetaEdge e;
      e.from = q;
      e.to = r;
      e.connections = connections[p];
      e.documents = md.totals(static_cast<Eigen::Index>(p));
      e.pi_hat = pm.pi_hat(q, r);
      if (fit.topics) {
        const Vector row = theta_bar.row(static_cast<Eigen::Index>(p)).transpose();
        e.dominant_topic = edge_topic_from_theta({row.data(), static_cast<std::size_t>(row.size())});
      }
      meta.edges.push_back(e);
    }
  return meta;
}

void write_dot(const MetaGraph& meta, std::ostream& out) {
  static const char* kPalette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e",
                                   "#e6ab02", "#a6761d", "#666666", "#1f78b4", "#b2df8a"};
  constexpr std::size_t kColors = sizeof kPalette / sizeof kPalette[0];
  std::size_t max_conn = 1;
  for (const auto& e : meta.edges) max_conn = std::max(max_conn, e.connections);

  out << "digraph meta {\n";
  for (const auto& n : meta.nodes)
    out << "  c" << n.cluster << " [label=\"" << n.cluster << " (" << n.members
        << ")\", width=" << 0.5 + 3.0 * n.proportion << "];\n";
  for (const auto& e : meta.edges) {
    out << "  c" << e.from << " -> c" << e.to << " [penwidth="
        << 0.5 + 8.0 * static_cast<double>(e.connections) / static_cast<double>(max_conn)
        << ", color=\""
        << (e.dominant_topic < 0 ? "#999999" : kPalette[static_cast<std::size_t>(e.dominant_topic) % kColors])
        << "\", label=\"";
    if (e.dominant_topic >= 0) out << "topic " << e.dominant_topic << ", ";
    out << "pi " << e.pi_hat << "\"];\n";
  }
  out << "}\n";
}

void write_meta_summary(const MetaGraph& meta, std::ostream& out) {
  out << "from,to,connections,documents,dominant_topic,pi_hat\n";
  for (const auto& e : meta.edges)
    out << e.from << ',' << e.to << ',' << e.connections << ',' << e.documents << ','
        << e.dominant_topic << ',' << e.pi_hat << '\n';
}

void write_ari_rows(std::span<const AriRow> rows, std::ostream& out) {
  out << "scenario,difficulty,seed,model,node_ari,edge_ari\n";
  for (const auto& r : rows) {
    out << r.scenario << ',' << r.difficulty << ',' << r.seed << ',' << r.model << ',';
    if (r.node_ari) out << *r.node_ari;
    out << ',';
    if (r.edge_ari) out << *r.edge_ari;
    out << '\n';
  }
}

}  // namespace etsbm
