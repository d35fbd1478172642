#include "etsbm/initsel.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "etsbm/eval.hpp"

namespace etsbm {

Matrix soften_labels(const std::vector<int>& labels, int num_clusters, double keep) {
  const auto M = static_cast<Eigen::Index>(labels.size());
  if (num_clusters == 1) return Matrix::Ones(M, 1);
  const double rest = (1.0 - keep) / (num_clusters - 1);
  Matrix tau = Matrix::Constant(M, num_clusters, rest);
  for (Eigen::Index i = 0; i < M; ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    if (l < 0 || l >= num_clusters) throw std::invalid_argument("label out of range");
    tau(i, l) = keep;
  }
  return tau;
}

Matrix init_random(std::size_t num_nodes, int num_clusters, std::uint64_t seed) {
  if (num_clusters < 1 || static_cast<std::size_t>(num_clusters) > num_nodes)
    throw std::invalid_argument("random init needs 1 <= Q <= M");
  Rng rng(seed);
  std::uniform_int_distribution<int> pick(0, num_clusters - 1);
  std::vector<int> labels(num_nodes);
  for (auto& l : labels) l = pick(rng);
  return soften_labels(labels, num_clusters);
}

namespace {

struct Lloyd {
  std::vector<int> labels;
  Matrix centers;
  double inertia = 0.0;
  std::vector<double> trace;
};

// Nearest center, lowest index on ties; returns the inertia.
double assign(const Matrix& x, const Matrix& centers, std::vector<int>& labels) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
      const double d = (x.row(i) - centers.row(c)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<int>(c);
      }
    }
    labels[static_cast<std::size_t>(i)] = arg;
    total += best;
  }
  return total;
}

Lloyd run_kmeans(const Matrix& x, int Q, Rng& rng, int max_iter) {
  const auto N = x.rows();
  Lloyd out;
  out.centers.resize(Q, x.cols());
  std::vector<double> d2(static_cast<std::size_t>(N), std::numeric_limits<double>::infinity());
  std::uniform_int_distribution<Eigen::Index> first(0, N - 1);
  out.centers.row(0) = x.row(first(rng));
  for (int c = 1; c < Q; ++c) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < N; ++i) {
      auto& d = d2[static_cast<std::size_t>(i)];
      d = std::min(d, (x.row(i) - out.centers.row(c - 1)).squaredNorm());
      sum += d;
    }
    Eigen::Index pick = 0;
    if (sum > 0.0) {
      std::discrete_distribution<Eigen::Index> dist(d2.begin(), d2.end());
      pick = dist(rng);
    } else {
      pick = first(rng);
    }
    out.centers.row(c) = x.row(pick);
  }

  out.labels.assign(static_cast<std::size_t>(N), 0);
  std::vector<int> previous;
  for (int it = 0; it < max_iter; ++it) {
    out.inertia = assign(x, out.centers, out.labels);
    out.trace.push_back(out.inertia);
    if (out.labels == previous) break;
    previous = out.labels;
    Matrix sums = Matrix::Zero(Q, x.cols());
    std::vector<int> sizes(static_cast<std::size_t>(Q), 0);
    for (Eigen::Index i = 0; i < N; ++i) {
      sums.row(out.labels[static_cast<std::size_t>(i)]) += x.row(i);
      ++sizes[static_cast<std::size_t>(out.labels[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < Q; ++c)
      if (sizes[static_cast<std::size_t>(c)] > 0) out.centers.row(c) = sums.row(c) / sizes[static_cast<std::size_t>(c)];
  }
  return out;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, int num_clusters, std::uint64_t seed, int restarts,
                    int max_iter) {
  if (num_clusters < 1 || points.rows() < num_clusters)
    throw std::invalid_argument("kmeans needs 1 <= Q <= N");
  if (restarts < 1 || max_iter < 1) throw std::invalid_argument("kmeans needs restarts, iterations >= 1");
  if (!points.allFinite()) throw std::invalid_argument("kmeans points must be finite");
  Rng rng(seed);
  std::optional<Lloyd> best;
  for (int r = 0; r < restarts; ++r) {
    auto run = run_kmeans(points, num_clusters, rng, max_iter);
    if (!best || run.inertia < best->inertia) best = std::move(run);
  }
  return {std::move(best->labels), std::move(best->centers), best->inertia, std::move(best->trace)};
}

Matrix init_kmeans_adjacency(const PreparedGraph& graph, int num_clusters, std::uint64_t seed) {
  const auto M = static_cast<Eigen::Index>(graph.num_nodes);
  Matrix profile(M, 2 * M);
  profile << graph.adjacency, graph.adjacency.transpose();
  return soften_labels(kmeans(profile, num_clusters, seed).labels, num_clusters);
}

Matrix dissimilarity_features(const PreparedGraph& graph, const Matrix& edge_theta) {
  const auto M = static_cast<Eigen::Index>(graph.num_nodes);
  const auto K = edge_theta.cols();
  if (edge_theta.rows() != static_cast<Eigen::Index>(graph.edge_nodes.size()))
    throw std::invalid_argument("topic proportions must cover every edge");
  Matrix out_topics = Matrix::Zero(M, K), in_topics = Matrix::Zero(M, K);
  Vector out_deg = Vector::Zero(M), in_deg = Vector::Zero(M);
  for (std::size_t e = 0; e < graph.edge_nodes.size(); ++e) {
    const auto [i, j] = graph.edge_nodes[e];
    out_topics.row(i) += edge_theta.row(static_cast<Eigen::Index>(e));
    in_topics.row(j) += edge_theta.row(static_cast<Eigen::Index>(e));
    out_deg(i) += 1.0;
    in_deg(j) += 1.0;
  }
  Matrix features(M, 2 * K + 2 * M);
  for (Eigen::Index i = 0; i < M; ++i) {
    features.row(i).segment(0, K) =
        out_deg(i) > 0 ? Eigen::RowVectorXd(out_topics.row(i) / out_deg(i))
                       : Eigen::RowVectorXd::Constant(K, 1.0 / static_cast<double>(K));
    features.row(i).segment(K, K) =
        in_deg(i) > 0 ? Eigen::RowVectorXd(in_topics.row(i) / in_deg(i))
                      : Eigen::RowVectorXd::Constant(K, 1.0 / static_cast<double>(K));
    const double o = graph.adjacency.row(i).sum();
    const double n = graph.adjacency.col(i).sum();
    features.row(i).segment(2 * K, M) =
        o > 0 ? Eigen::RowVectorXd(graph.adjacency.row(i) / o)
              : Eigen::RowVectorXd::Constant(M, 1.0 / static_cast<double>(M));
    features.row(i).segment(2 * K + M, M) =
        n > 0 ? Eigen::RowVectorXd(graph.adjacency.col(i).transpose() / n)
              : Eigen::RowVectorXd::Constant(M, 1.0 / static_cast<double>(M));
  }
  return features;
}

Matrix init_dissimilarity(const PreparedGraph& graph, const Matrix& edge_theta, int num_clusters,
                          std::uint64_t seed) {
  return soften_labels(kmeans(dissimilarity_features(graph, edge_theta), num_clusters, seed).labels,
                       num_clusters);
}

InitStrategy parse_init(std::string_view s) {
  std::string l(s);
  for (auto& c : l) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (l == "random") return InitStrategy::Random;
  if (l == "kmeans") return InitStrategy::KMeans;
  if (l == "dissimilarity") return InitStrategy::Dissimilarity;
  throw std::invalid_argument("unknown init strategy '" + std::string(s) +
                              "' (expected random, kmeans or dissimilarity)");
}

const char* to_string(InitStrategy s) {
  switch (s) {
    case InitStrategy::Random: return "random";
    case InitStrategy::KMeans: return "kmeans";
    case InitStrategy::Dissimilarity: return "dissimilarity";
  }
  return "?";
}

Matrix initial_tau(InitStrategy strategy, const PreparedGraph& graph, const Matrix* edge_theta,
                   int num_clusters, std::uint64_t seed) {
  switch (strategy) {
    case InitStrategy::Random: return init_random(graph.num_nodes, num_clusters, seed);
    case InitStrategy::KMeans: return init_kmeans_adjacency(graph, num_clusters, seed);
    case InitStrategy::Dissimilarity:
      if (edge_theta == nullptr) throw std::invalid_argument("dissimilarity init needs ETM proportions");
      return init_dissimilarity(graph, *edge_theta, num_clusters, seed);
  }
  throw std::invalid_argument("unknown init strategy");
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

SelectionReport select_q(const TextGraph& graph, const SelectionOptions& options) {
  if (options.q_range.empty()) throw std::invalid_argument("empty Q range");
  if (options.restarts < 1) throw std::invalid_argument("restarts must be at least 1");
  const auto prepared = PreparedGraph::from(graph, options.fit.use_text);

  std::optional<Matrix> theta;
  std::optional<TopicModelParams> warm;
  const bool warm_start = options.warm_start_topics && options.fit.use_text;
  if (options.init == InitStrategy::Dissimilarity || warm_start) {
    EtmOptions etm = options.etm;
    etm.topic = options.fit.topic;
    etm.embeddings = options.fit.embeddings;
    etm.seed = derive_seed(options.seed, {0});
    auto e = fit_etm(graph, etm);
    theta = std::move(e.theta);
    if (warm_start) warm = std::move(e.topics);
  }

  SelectionReport report;
  report.q_values = options.q_range;
  const auto R = static_cast<std::size_t>(options.restarts);
  const std::size_t tasks = options.q_range.size() * R;
  report.runs.resize(tasks);
  std::vector<std::optional<FitResult>> fits(tasks);

  parallel_for(tasks, options.jobs, [&](std::size_t t) {
    const int q = options.q_range[t / R];
    const int restart = static_cast<int>(t % R);
    auto& rec = report.runs[t];
    rec.q = q;
    rec.restart = restart;
    rec.seed = derive_seed(options.seed, {static_cast<std::uint64_t>(q), static_cast<std::uint64_t>(restart) + 1});
    try {
      FitOptions fo = options.fit;
      fo.num_clusters = q;
      fo.seed = derive_seed(rec.seed, {1});
      if (warm) fo.topic_init = warm;
      const Matrix tau0 = initial_tau(options.init, prepared, theta ? &*theta : nullptr, q,
                                      derive_seed(rec.seed, {2}));
      auto f = fit(prepared, tau0, fo);
      if (options.on_fit) options.on_fit(f);
      rec.elbo = f.final_elbo;
      if (options.truth) rec.node_ari = ari(*options.truth, f.labels);
      rec.ok = true;
      fits[t] = std::move(f);
    } catch (const std::exception& e) {
      rec.error = e.what();
    }
  });

  report.best_elbo.assign(options.q_range.size(), -std::numeric_limits<double>::infinity());
  report.best_fit.resize(options.q_range.size());
  const bool refine = options.q_range.size() > 1 && options.refine_iterations > 0;
  if (refine) report.refined.resize(options.q_range.size());
  for (std::size_t k = 0; k < options.q_range.size(); ++k) {
    std::optional<std::size_t> best;
    for (std::size_t r = 0; r < R; ++r) {
      const auto t = k * R + r;
      if (!report.runs[t].ok) continue;
      if (!best || report.runs[t].elbo.total > report.runs[*best].elbo.total) best = t;
    }
    if (!best)
      throw std::runtime_error("every restart failed for Q=" + std::to_string(options.q_range[k]) +
                               ": " + report.runs[k * R].error);
    report.best_elbo[k] = report.runs[*best].elbo.total;
    report.best_fit[k] = std::move(fits[*best]);
    if (refine) report.refined[k] = report.runs[*best];
  }

  // The early-stopping rule leaves the text term short of convergence by more
  // than the gap between neighbouring Q, so the winners are trained further.
  if (refine) {
    parallel_for(options.q_range.size(), options.jobs, [&](std::size_t k) {
      auto& rec = report.refined[k];
      auto& best = *report.best_fit[k];
      try {
        FitOptions fo = options.fit;
        fo.num_clusters = rec.q;
        fo.seed = derive_seed(rec.seed, {3});
        fo.schedule.max_iter = options.refine_iterations;
        fo.schedule.tolerance = 0.0;
        fo.topic_init = best.topics;
        auto f = fit(prepared, best.clusters.tau(), fo);
        if (options.on_fit) options.on_fit(f);
        rec.elbo = f.final_elbo;
        if (options.truth) rec.node_ari = ari(*options.truth, f.labels);
        best = std::move(f);
      } catch (const std::exception& e) {
        // the unrefined winner stands
        rec.ok = false;
        rec.error = e.what();
      }
    });
    for (std::size_t k = 0; k < options.q_range.size(); ++k)
      if (report.refined[k].ok) report.best_elbo[k] = report.refined[k].elbo.total;
  }

  std::size_t chosen = 0;
  for (std::size_t k = 1; k < options.q_range.size(); ++k) {
    const bool better = report.best_elbo[k] > report.best_elbo[chosen] ||
                        (report.best_elbo[k] == report.best_elbo[chosen] &&
                         options.q_range[k] < options.q_range[chosen]);
    if (better) chosen = k;
  }
  report.chosen_q = options.q_range[chosen];
  return report;
}

void write_selection(const SelectionReport& report, std::ostream& out) {
  out << "# chosen_q=" << report.chosen_q << '\n';
  out << "q,restart,seed,status,elbo_net,elbo_text,elbo_total,node_ari\n";
  const auto row = [&](const RestartRecord& r, const char* status) {
    out << r.q << ',' << r.restart << ',' << r.seed << ',';
    if (r.ok) {
      out << status << ',' << r.elbo.net << ',' << r.elbo.text << ',' << r.elbo.total << ',';
      if (r.node_ari) out << *r.node_ari;
    } else {
      std::string msg = r.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out << "failed: " << msg << ",,,,";
    }
    out << '\n';
  };
  for (const auto& r : report.runs) row(r, "ok");
  for (const auto& r : report.refined) row(r, "refined");
}

}  // namespace etsbm
