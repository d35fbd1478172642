#include "etsbm/baselines.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace etsbm {

FitResult fit_sbm(const PreparedGraph& graph, const Matrix& init_tau, int num_clusters,
                  const std::optional<Priors>& priors, const Schedule& schedule,
                  std::uint64_t seed) {
  FitOptions options;
  options.num_clusters = num_clusters;
  options.priors = priors;
  options.schedule = schedule;
  options.seed = seed;
  options.use_text = false;
  return fit(graph, init_tau, options);
}

FitResult fit_sbm(const TextGraph& graph, const Matrix& init_tau, int num_clusters,
                  const std::optional<Priors>& priors, const Schedule& schedule,
                  std::uint64_t seed) {
  return fit_sbm(PreparedGraph::from(graph, false), init_tau, num_clusters, priors, schedule, seed);
}

namespace {

Matrix dense_counts(const TextGraph& graph, std::span<const std::size_t> rows) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(rows.size()),
                          static_cast<Eigen::Index>(graph.vocab().size()));
  for (std::size_t b = 0; b < rows.size(); ++b)
    for (const auto& wc : graph.edges()[rows[b]].counts)
      m(static_cast<Eigen::Index>(b), wc.word) = wc.count;
  return m;
}

}  // namespace

namespace {

Matrix normalized_rows(Matrix counts) {
  for (Eigen::Index e = 0; e < counts.rows(); ++e) {
    const double n = counts.row(e).sum();
    if (n > 0.0) counts.row(e) /= n;
  }
  return counts;
}

EtmFit train_etm(const TextGraph& graph, const Matrix& all_counts, const EtmOptions& options,
                 std::uint64_t seed) {
  const std::size_t E = graph.num_edges();
  Rng rng(seed);
  EtmFit out;
  out.topics = TopicModelParams::init(graph.vocab().size(), options.topic, rng, options.embeddings);
  const auto K = static_cast<std::size_t>(out.topics.num_topics());
  auto views = out.topics.views();
  const std::size_t num_encoder_views = out.topics.encoder.views().size();
  const std::span<const nn::ParamView> all_views(views);
  const auto encoder_views = all_views.first(num_encoder_views);
  const auto embed_views = all_views.subspan(num_encoder_views);
  nn::AdamState adam_encoder({.lr = options.lr}, encoder_views);
  nn::AdamState adam_embed({.lr = options.lr_embeddings}, embed_views);

  std::vector<std::size_t> order(E);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(options.batch_size);
  const auto steps_per_epoch = static_cast<long>((E + batch - 1) / batch);
  const int epochs = std::max<long>(options.epochs, (options.min_steps + steps_per_epoch - 1) / steps_per_epoch);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < E; start += batch) {
      const std::span<const std::size_t> rows(order.data() + start, std::min(batch, E - start));
      const Matrix counts = dense_counts(graph, rows);
      const auto noise = draw_noise(static_cast<std::size_t>(options.train_samples), rows.size(), K, rng);
      auto g = document_elbo(counts, out.topics, noise, {.topic_params = true});
      total += g.value;
      auto gv = g.d_encoder.views();
      std::vector<std::span<const double>> grads;
      std::vector<Matrix> negated;
      negated.reserve(gv.size() + 2);
      for (const auto& v : gv) {
        negated.push_back(-Eigen::Map<const Eigen::VectorXd>(v.values.data(),
                                                              static_cast<Eigen::Index>(v.values.size())));
      }
      negated.push_back(-g.d_alpha);
      if (out.topics.train_rho) negated.push_back(-g.d_rho);
      for (const auto& m : negated) grads.emplace_back(m.data(), static_cast<std::size_t>(m.size()));
      const std::span<const std::span<const double>> all_grads(grads);
      adam_encoder.update(encoder_views, all_grads.first(num_encoder_views));
      adam_embed.update(embed_views, all_grads.subspan(num_encoder_views));
    }
    if (!out.topics.encoder.all_finite() || !out.topics.alpha.allFinite())
      throw NumericError("ETM parameters diverged in epoch " + std::to_string(epoch + 1));
    out.elbo_trace.push_back(total / static_cast<double>(E));
  }

  // The score uses the same draws for every restart so runs compare fairly.
  Rng score_rng(derive_seed(options.seed, {3}));
  const auto noise = draw_shared_noise(static_cast<std::size_t>(options.score_samples), E, K, score_rng);
  out.score = document_elbo(all_counts, out.topics, noise).value / static_cast<double>(E);
  return out;
}

}  // namespace

EtmFit fit_etm(const TextGraph& graph, const EtmOptions& options) {
  const std::size_t E = graph.num_edges();
  if (E == 0) throw std::invalid_argument("ETM needs a nonempty corpus");
  if (options.epochs < 0 || options.min_steps < 0 || options.batch_size < 1 || options.train_samples < 1 ||
      options.theta_samples < 1 || options.restarts < 1 || options.score_samples < 1)
    throw std::invalid_argument("invalid ETM options");
  std::size_t words = 0;
  for (const auto& e : graph.edges()) words += e.total();
  if (words == 0) throw std::invalid_argument("ETM needs a nonempty corpus");

  std::vector<std::size_t> all(E);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const Matrix counts = dense_counts(graph, all);

  EtmFit out;
  for (int r = 0; r < options.restarts; ++r) {
    const auto seed = r == 0 ? derive_seed(options.seed, {1})
                             : derive_seed(options.seed, {1, static_cast<std::uint64_t>(r)});
    auto run = train_etm(graph, counts, options, seed);
    run.restart = r;
    if (r == 0 || run.score > out.score) out = std::move(run);
  }

  // Posterior-mean proportions over a fixed set of draws.
  Rng theta_rng(derive_seed(options.seed, {2}));
  const auto S = static_cast<std::size_t>(options.theta_samples);
  const auto K = static_cast<std::size_t>(out.topics.num_topics());
  out.theta = Matrix::Zero(static_cast<Eigen::Index>(E), static_cast<Eigen::Index>(K));
  const auto enc = nn::encoder_forward(out.topics.encoder, normalized_rows(counts));
  const Matrix sigma = (0.5 * enc.log_var.array()).exp().matrix();
  const auto noise = draw_shared_noise(S, E, K, theta_rng);
  for (const auto& eps : noise) out.theta += nn::softmax_rows(enc.mu + sigma.cwiseProduct(eps));
  out.theta /= static_cast<double>(S);
  return out;
}

int edge_topic_from_theta(std::span<const double> theta) {
  if (theta.empty()) throw std::invalid_argument("empty topic proportions");
  std::size_t best = 0;
  for (std::size_t k = 1; k < theta.size(); ++k)
    if (theta[k] > theta[best]) best = k;
  return static_cast<int>(best);
}

std::vector<int> edge_topics_from_theta(const Matrix& theta) { return row_argmax(theta); }

}  // namespace etsbm
