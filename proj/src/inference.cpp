#include "etsbm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <boost/math/special_functions/digamma.hpp>

namespace etsbm {

namespace {

double digamma(double x) { return boost::math::digamma(x); }

double log_beta(double x, double y) { return std::lgamma(x) + std::lgamma(y) - std::lgamma(x + y); }

double log_multi_beta(const Vector& g) {
  double s = 0.0;
  for (Eigen::Index q = 0; q < g.size(); ++q) s += std::lgamma(g(q));
  return s - std::lgamma(g.sum());
}

Matrix digamma_of(const Matrix& m) { return m.unaryExpr([](double x) { return digamma(x); }); }

void check_tau(const Matrix& tau, const PreparedGraph& graph) {
  if (tau.rows() != static_cast<Eigen::Index>(graph.num_nodes) || tau.cols() < 1)
    throw std::invalid_argument("tau must be M x Q with Q >= 1");
}

void check_block(const BlockPosterior& block, Eigen::Index Q) {
  if (block.pi1.rows() != Q || block.pi1.cols() != Q || block.pi2.rows() != Q ||
      block.pi2.cols() != Q || block.gamma.size() != Q)
    throw std::invalid_argument("block posterior does not match tau");
  if (!((block.pi1.array() > 0.0).all() && (block.pi2.array() > 0.0).all() &&
        (block.gamma.array() > 0.0).all()))
    throw NumericError("non-positive Beta/Dirichlet variational parameter");
}

// Per-edge outer-product weights tau_iq * tau_jr, E x Q^2 (column q*Q + r).
Matrix pair_weights(const Matrix& tau, const PreparedGraph& graph) {
  const auto Q = tau.cols();
  const auto E = static_cast<Eigen::Index>(graph.edge_nodes.size());
  Matrix w(E, Q * Q);
  for (Eigen::Index e = 0; e < E; ++e) {
    const auto [i, j] = graph.edge_nodes[static_cast<std::size_t>(e)];
    for (Eigen::Index q = 0; q < Q; ++q)
      for (Eigen::Index r = 0; r < Q; ++r) w(e, q * Q + r) = tau(i, q) * tau(j, r);
  }
  return w;
}

}  // namespace

PreparedGraph PreparedGraph::from(const TextGraph& graph, bool with_text) {
  PreparedGraph g;
  g.num_nodes = graph.num_nodes();
  g.vocab_size = graph.vocab().size();
  g.adjacency = graph.adjacency();
  g.edge_nodes.reserve(graph.num_edges());
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t k = 0; k < graph.num_edges(); ++k) {
    const auto& e = graph.edges()[k];
    g.edge_nodes.emplace_back(static_cast<int>(e.src), static_cast<int>(e.dst));
    if (!with_text) continue;
    for (const auto& wc : e.counts)
      triplets.emplace_back(static_cast<int>(k), static_cast<int>(wc.word), wc.count);
  }
  g.counts.resize(static_cast<Eigen::Index>(graph.num_edges()),
                  static_cast<Eigen::Index>(g.vocab_size));
  g.counts.setFromTriplets(triplets.begin(), triplets.end());
  return g;
}

Priors Priors::defaults(int num_clusters) {
  Priors p;
  p.gamma0 = Vector::Ones(num_clusters);
  return p;
}

void Priors::validate(int num_clusters) const {
  if (gamma0.size() != num_clusters) throw std::invalid_argument("gamma0 must have length Q");
  if (!(gamma0.array() > 0.0).all() || !(a > 0.0) || !(b > 0.0))
    throw std::invalid_argument("prior parameters must be positive");
}

ClusterPosterior ClusterPosterior::from_tau(const Matrix& tau, double floor) {
  if (tau.cols() < 1) throw std::invalid_argument("tau needs at least one column");
  for (Eigen::Index i = 0; i < tau.rows(); ++i) {
    if (!tau.row(i).allFinite() || (tau.row(i).array() < 0.0).any() ||
        std::abs(tau.row(i).sum() - 1.0) > 1e-6)
      throw std::invalid_argument("tau row " + std::to_string(i) + " is not on the simplex");
  }
  const auto Q = tau.cols();
  Matrix xi(tau.rows(), Q - 1);
  for (Eigen::Index i = 0; i < tau.rows(); ++i) {
    const double last = std::log(std::max(tau(i, Q - 1), floor));
    for (Eigen::Index q = 0; q + 1 < Q; ++q) xi(i, q) = std::log(std::max(tau(i, q), floor)) - last;
  }
  return from_xi(xi);
}

ClusterPosterior ClusterPosterior::from_xi(const Matrix& xi) {
  ClusterPosterior c;
  c.xi_ = xi;
  c.sync_from_xi();
  return c;
}

void ClusterPosterior::sync_from_xi() {
  const auto M = xi_.rows();
  const auto Q = xi_.cols() + 1;
  tau_.resize(M, Q);
  for (Eigen::Index i = 0; i < M; ++i) {
    double m = 0.0;
    for (Eigen::Index q = 0; q + 1 < Q; ++q) m = std::max(m, xi_(i, q));
    double z = 0.0;
    for (Eigen::Index q = 0; q < Q; ++q) {
      const double x = q + 1 < Q ? xi_(i, q) : 0.0;
      tau_(i, q) = std::exp(x - m);
      z += tau_(i, q);
    }
    tau_.row(i) /= z;
  }
}

std::vector<int> row_argmax(const Matrix& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()), 0);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index q = 1; q < m.cols(); ++q)
      if (m(i, q) > m(i, best)) best = q;
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> ClusterPosterior::hard_labels() const { return row_argmax(tau_); }

MetaDocuments expected_meta_documents(const Matrix& tau, const PreparedGraph& graph) {
  check_tau(tau, graph);
  const auto Q = tau.cols();
  const Matrix weights = pair_weights(tau, graph);
  MetaDocuments md;
  md.counts = (graph.counts.transpose() * weights).transpose();
  md.totals = md.counts.rowwise().sum();
  md.normalized = Matrix::Zero(Q * Q, md.counts.cols());
  for (Eigen::Index p = 0; p < Q * Q; ++p)
    if (md.totals(p) > 0.0) md.normalized.row(p) = md.counts.row(p) / md.totals(p);
  return md;
}

BlockPosterior update_block_posterior(const Matrix& tau, const PreparedGraph& graph,
                                      const Priors& priors) {
  check_tau(tau, graph);
  priors.validate(static_cast<int>(tau.cols()));
  const Vector s = tau.colwise().sum().transpose();
  const Matrix linked = tau.transpose() * graph.adjacency * tau;
  const Matrix pairs = s * s.transpose() - tau.transpose() * tau;
  BlockPosterior block;
  block.pi1 = (linked.array() + priors.a).matrix();
  block.pi2 = ((pairs - linked).array() + priors.b).matrix();
  block.gamma = priors.gamma0 + s;
  return block;
}

double elbo_net(const Matrix& tau, const BlockPosterior& block, const PreparedGraph& graph,
                const Priors& priors) {
  check_tau(tau, graph);
  const auto Q = tau.cols();
  check_block(block, Q);
  priors.validate(static_cast<int>(Q));

  const Vector s = tau.colwise().sum().transpose();
  const Matrix linked = tau.transpose() * graph.adjacency * tau;
  const Matrix unlinked = s * s.transpose() - tau.transpose() * tau - linked;

  double value = 0.0;
  for (Eigen::Index q = 0; q < Q; ++q) {
    for (Eigen::Index r = 0; r < Q; ++r) {
      const double k1 = block.pi1(q, r);
      const double k2 = block.pi2(q, r);
      const double e_log_pi = digamma(k1) - digamma(k1 + k2);
      const double e_log_1mpi = digamma(k2) - digamma(k1 + k2);
      // E[log p(A | Y, pi)]
      value += linked(q, r) * e_log_pi + unlinked(q, r) * e_log_1mpi;
      // E[log p(pi)] - E[log R(pi)]
      value += (priors.a - k1) * e_log_pi + (priors.b - k2) * e_log_1mpi + log_beta(k1, k2) -
               log_beta(priors.a, priors.b);
    }
  }

  const double psi_sum = digamma(block.gamma.sum());
  for (Eigen::Index q = 0; q < Q; ++q) {
    const double e_log_gamma = digamma(block.gamma(q)) - psi_sum;
    // E[log p(Y | gamma)] + E[log p(gamma)] - E[log R(gamma)]
    value += (s(q) + priors.gamma0(q) - block.gamma(q)) * e_log_gamma;
  }
  value += log_multi_beta(block.gamma) - log_multi_beta(priors.gamma0);

  // -E[log R(Y)], 0 log 0 = 0
  for (Eigen::Index i = 0; i < tau.size(); ++i) {
    const double t = tau(i);
    if (t > 0.0) value -= t * std::log(t);
  }
  if (!std::isfinite(value)) throw NumericError("elbo_net is not finite");
  return value;
}

Matrix elbo_net_grad_tau(const Matrix& tau, const BlockPosterior& block, const PreparedGraph& graph,
                         const Priors& priors) {
  check_tau(tau, graph);
  const auto Q = tau.cols();
  const auto M = tau.rows();
  check_block(block, Q);

  const Matrix psi_sum = digamma_of(block.pi1 + block.pi2);
  const Matrix d1 = digamma_of(block.pi1) - psi_sum;
  const Matrix d0 = digamma_of(block.pi2) - psi_sum;
  const Matrix delta = d1 - d0;
  const Vector s = tau.colwise().sum().transpose();
  const Matrix others = Vector::Ones(M) * s.transpose() - tau;  // sum over j != i of tau_j

  Matrix g = graph.adjacency * tau * delta.transpose();
  g.noalias() += graph.adjacency.transpose() * tau * delta;
  g.noalias() += others * d0.transpose();
  g.noalias() += others * d0;

  const double psi_total = digamma(block.gamma.sum());
  constexpr double kLogFloor = -700.0;
  for (Eigen::Index i = 0; i < M; ++i)
    for (Eigen::Index q = 0; q < Q; ++q) {
      const double lt = tau(i, q) > 0.0 ? std::max(std::log(tau(i, q)), kLogFloor) : kLogFloor;
      g(i, q) += digamma(block.gamma(q)) - psi_total - lt - 1.0;
    }
  (void)priors;
  return g;
}

double kl_gaussian(const Vector& mu, const Vector& log_var) {
  return 0.5 * (log_var.array().exp() + mu.array().square() - 1.0 - log_var.array()).sum();
}

TopicModelParams TopicModelParams::init(std::size_t vocab_size, const TopicModelConfig& config,
                                        Rng& rng, const std::optional<Matrix>& embeddings) {
  if (config.num_topics < 1 || config.embedding_dim < 1 || config.hidden < 1)
    throw std::invalid_argument("topic model dimensions must be positive");
  const auto V = static_cast<Eigen::Index>(vocab_size);
  TopicModelParams t;
  std::normal_distribution<double> normal(0.0, 1.0);
  if (embeddings) {
    if (embeddings->cols() != V) throw std::invalid_argument("embedding matrix must have V columns");
    t.rho = *embeddings;
    t.train_rho = false;
  } else {
    t.rho.resize(config.embedding_dim, V);
    for (Eigen::Index j = 0; j < V; ++j)
      for (Eigen::Index l = 0; l < t.rho.rows(); ++l) t.rho(l, j) = normal(rng);
    t.train_rho = true;
  }
  const auto L = t.rho.rows();
  t.alpha.resize(L, config.num_topics);
  const double scale = 1.0 / std::sqrt(static_cast<double>(L));
  for (Eigen::Index k = 0; k < t.alpha.cols(); ++k)
    for (Eigen::Index l = 0; l < L; ++l) t.alpha(l, k) = scale * normal(rng);
  t.encoder = nn::EncoderParams::glorot(vocab_size, static_cast<std::size_t>(config.hidden),
                                        static_cast<std::size_t>(config.num_topics), rng);
  return t;
}

std::vector<nn::ParamView> TopicModelParams::views() {
  auto v = encoder.views();
  v.push_back({"alpha", {alpha.data(), static_cast<std::size_t>(alpha.size())}});
  if (train_rho) v.push_back({"rho", {rho.data(), static_cast<std::size_t>(rho.size())}});
  return v;
}

Matrix log_beta_from_embeddings(const TopicModelParams& topics) {
  return nn::log_softmax_rows(topics.alpha.transpose() * topics.rho);
}

Matrix beta_from_embeddings(const TopicModelParams& topics) {
  return nn::softmax_rows(topics.alpha.transpose() * topics.rho);
}

NoiseDraws draw_noise(std::size_t samples, std::size_t pairs, std::size_t topics, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  NoiseDraws out(samples);
  for (auto& m : out) {
    m.resize(static_cast<Eigen::Index>(pairs), static_cast<Eigen::Index>(topics));
    for (Eigen::Index p = 0; p < m.rows(); ++p)
      for (Eigen::Index k = 0; k < m.cols(); ++k) m(p, k) = normal(rng);
  }
  return out;
}

NoiseDraws draw_shared_noise(std::size_t samples, std::size_t pairs, std::size_t topics, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  NoiseDraws out(samples);
  for (auto& m : out) {
    Eigen::RowVectorXd row(static_cast<Eigen::Index>(topics));
    for (Eigen::Index k = 0; k < row.size(); ++k) row(k) = normal(rng);
    m = row.replicate(static_cast<Eigen::Index>(pairs), 1);
  }
  return out;
}

TextElbo document_elbo(const Matrix& counts, const TopicModelParams& topics,
                       const NoiseDraws& noise, TextGradRequest request) {
  if (noise.empty()) throw std::invalid_argument("text ELBO needs at least one sample");
  const auto B = counts.rows();
  const auto K = static_cast<Eigen::Index>(topics.num_topics());
  const auto V = counts.cols();
  if (topics.rho.cols() != V) throw std::invalid_argument("embedding width differs from V");
  for (const auto& eps : noise)
    if (eps.rows() != B || eps.cols() != K) throw std::invalid_argument("noise shape mismatch");

  const Vector totals = counts.rowwise().sum();
  Matrix normalized = Matrix::Zero(B, V);
  for (Eigen::Index p = 0; p < B; ++p)
    if (totals(p) > 0.0) normalized.row(p) = counts.row(p) / totals(p);

  const auto enc = nn::encoder_forward(topics.encoder, normalized);
  const Matrix beta = log_beta_from_embeddings(topics).array().exp().matrix();
  const Matrix sigma = (0.5 * enc.log_var.array()).exp().matrix();
  const double inv_s = 1.0 / static_cast<double>(noise.size());
  const bool want_grad = request.topic_params || request.tau;

  TextElbo out;
  out.mu = enc.mu;
  out.log_var = enc.log_var;
  Matrix d_mu = Matrix::Zero(B, K);
  Matrix d_lv = Matrix::Zero(B, K);
  Matrix d_beta = Matrix::Zero(K, V);
  if (request.tau) out.d_counts = Matrix::Zero(B, V);

  for (const auto& eps : noise) {
    const Matrix delta = enc.mu + sigma.cwiseProduct(eps);
    const Matrix theta = nn::softmax_rows(delta);
    const Matrix mix = theta * beta;  // B x V
    const Matrix log_mix = mix.array().log().matrix();
    const double recon = counts.cwiseProduct(log_mix).sum();
    if (!std::isfinite(recon)) {
      for (Eigen::Index p = 0; p < B; ++p)
        if (!log_mix.row(p).allFinite())
          throw NumericError("text ELBO: non-finite log-likelihood for document row " +
                             std::to_string(p));
      throw NumericError("text ELBO: non-finite reconstruction");
    }
    out.per_sample.push_back(recon);
    out.reconstruction += inv_s * recon;
    if (!want_grad) continue;

    const Matrix d_mix = inv_s * counts.cwiseQuotient(mix);
    const Matrix d_theta = d_mix * beta.transpose();
    const Vector inner = theta.cwiseProduct(d_theta).rowwise().sum();
    const Matrix d_delta = theta.cwiseProduct(d_theta - inner.replicate(1, K));
    d_mu += d_delta;
    d_lv += 0.5 * d_delta.cwiseProduct(eps).cwiseProduct(sigma);
    if (request.topic_params) d_beta.noalias() += theta.transpose() * d_mix;
    if (request.tau) out.d_counts += inv_s * log_mix;
  }

  for (Eigen::Index p = 0; p < B; ++p)
    out.kl += kl_gaussian(enc.mu.row(p).transpose(), enc.log_var.row(p).transpose());
  out.value = out.reconstruction - out.kl;
  if (!std::isfinite(out.value)) throw NumericError("text ELBO: non-finite KL term");
  if (!want_grad) return out;

  d_mu -= enc.mu;
  d_lv -= 0.5 * (enc.log_var.array().exp() - 1.0).matrix();

  const auto enc_grads =
      nn::encoder_backward(topics.encoder, enc.cache, d_mu, d_lv, request.topic_params, request.tau);

  if (request.topic_params) {
    out.d_encoder = enc_grads.params;
    const Matrix bd = beta.cwiseProduct(d_beta);
    const Matrix d_logits = bd - beta.cwiseProduct(bd.rowwise().sum().replicate(1, V));
    out.d_alpha = topics.rho * d_logits.transpose();
    if (topics.train_rho) out.d_rho = topics.alpha * d_logits;
  }

  if (request.tau) {
    // Back through the row normalization of the encoder input.
    for (Eigen::Index p = 0; p < B; ++p) {
      const double n = totals(p);
      if (n <= 0.0) continue;
      const double proj = enc_grads.input.row(p).dot(normalized.row(p));
      out.d_counts.row(p) += (enc_grads.input.row(p).array() - proj).matrix() / n;
    }
  }
  return out;
}

TextElbo elbo_text(const Matrix& tau, const TopicModelParams& topics, const PreparedGraph& graph,
                   const NoiseDraws& noise, TextGradRequest request) {
  check_tau(tau, graph);
  const auto Q = tau.cols();
  if (static_cast<Eigen::Index>(graph.vocab_size) != topics.rho.cols())
    throw std::invalid_argument("embedding width differs from V");
  const MetaDocuments md = expected_meta_documents(tau, graph);
  TextElbo out;
  try {
    out = document_elbo(md.counts, topics, noise, request);
  } catch (const NumericError& e) {
    std::string msg = e.what();
    const auto at = msg.find("document row ");
    if (at != std::string::npos) {
      const auto p = std::stoll(msg.substr(at + 13));
      msg = msg.substr(0, at) + "cluster pair (" + std::to_string(p / Q) + "," +
            std::to_string(p % Q) + ")";
    }
    throw NumericError(msg);
  }
  if (!request.tau) return out;

  // Meta-documents are bilinear in tau through the per-edge pair weights.
  const Matrix d_weights = graph.counts * out.d_counts.transpose();  // E x Q^2
  out.d_tau = Matrix::Zero(tau.rows(), Q);
  for (std::size_t e = 0; e < graph.edge_nodes.size(); ++e) {
    const auto [i, j] = graph.edge_nodes[e];
    const auto row = static_cast<Eigen::Index>(e);
    for (Eigen::Index q = 0; q < Q; ++q)
      for (Eigen::Index r = 0; r < Q; ++r) {
        const double g = d_weights(row, q * Q + r);
        out.d_tau(i, q) += g * tau(j, r);
        out.d_tau(j, r) += g * tau(i, q);
      }
  }
  return out;
}

TextElbo elbo_text_mc(const Matrix& tau, const TopicModelParams& topics, const PreparedGraph& graph,
                      std::size_t samples, std::uint64_t seed, TextGradRequest request) {
  if (samples < 1) throw std::invalid_argument("text ELBO needs S >= 1");
  Rng rng(seed);
  const auto Q = static_cast<std::size_t>(tau.cols());
  return elbo_text(tau, topics, graph,
                   draw_noise(samples, Q * Q, static_cast<std::size_t>(topics.num_topics()), rng),
                   request);
}

ElboRecord frozen_elbo(const Matrix& tau, const BlockPosterior& block,
                       const TopicModelParams* topics, const PreparedGraph& graph,
                       const Priors& priors, int samples, std::uint64_t seed) {
  ElboRecord rec;
  rec.net = elbo_net(tau, block, graph, priors);
  if (topics != nullptr) {
    Rng rng(seed);
    const auto Q = static_cast<std::size_t>(tau.cols());
    const auto noise = draw_shared_noise(static_cast<std::size_t>(std::max(samples, 1)), Q * Q,
                                         static_cast<std::size_t>(topics->num_topics()), rng);
    rec.text = elbo_text(tau, *topics, graph, noise).value;
  }
  rec.total = rec.net + rec.text;
  return rec;
}

namespace {

std::vector<std::span<const double>> spans_of(TextElbo& g, bool train_rho) {
  auto views = g.d_encoder.views();
  auto spans = nn::const_spans(views);
  spans.emplace_back(g.d_alpha.data(), static_cast<std::size_t>(g.d_alpha.size()));
  if (train_rho) spans.emplace_back(g.d_rho.data(), static_cast<std::size_t>(g.d_rho.size()));
  return spans;
}

void negate(TextElbo& g) {
  auto& e = g.d_encoder;
  e.w1 = -e.w1;
  e.b1 = -e.b1;
  e.w2 = -e.w2;
  e.b2 = -e.b2;
  e.w_mu = -e.w_mu;
  e.b_mu = -e.b_mu;
  e.w_lv = -e.w_lv;
  e.b_lv = -e.b_lv;
  g.d_alpha = -g.d_alpha;
  if (g.d_rho.size() > 0) g.d_rho = -g.d_rho;
}

// d L / d xi from d L / d tau through tau_i = softmax([xi_i, 0]).
Matrix chain_to_xi(const Matrix& tau, const Matrix& d_tau) {
  const auto Q = tau.cols();
  Matrix d_xi(tau.rows(), Q - 1);
  for (Eigen::Index i = 0; i < tau.rows(); ++i) {
    const double mean = tau.row(i).dot(d_tau.row(i));
    for (Eigen::Index q = 0; q + 1 < Q; ++q) d_xi(i, q) = tau(i, q) * (d_tau(i, q) - mean);
  }
  return d_xi;
}

constexpr std::uint64_t kFrozenNoiseTag = 0xf20ce;

}  // namespace

FitResult fit(const PreparedGraph& graph, const Matrix& init_tau, const FitOptions& options) {
  const int Q = options.num_clusters;
  const auto M = static_cast<Eigen::Index>(graph.num_nodes);
  if (Q < 1) throw std::invalid_argument("Q must be at least 1");
  if (Q > M) throw std::invalid_argument("Q must not exceed the number of nodes");
  if (init_tau.rows() != M || init_tau.cols() != Q)
    throw std::invalid_argument("initial tau must be M x Q");
  const auto& sched = options.schedule;
  if (sched.max_iter < 0 || sched.inner_steps < 1 || sched.train_samples < 1 ||
      sched.eval_samples < 1)
    throw std::invalid_argument("invalid schedule");

  FitResult res;
  res.model = options.use_text ? "etsbm" : "sbm";
  res.num_clusters = Q;
  res.topic_config = options.topic;
  res.schedule = sched;
  res.seed = options.seed;
  res.priors = options.priors.value_or(Priors::defaults(Q));
  res.priors.validate(Q);
  const Priors& priors = res.priors;

  Rng rng(derive_seed(options.seed, {1}));
  const std::uint64_t frozen_seed = derive_seed(options.seed, {kFrozenNoiseTag});

  ClusterPosterior clusters =
      Q == 1 ? ClusterPosterior::from_tau(Matrix::Ones(M, 1)) : ClusterPosterior::from_tau(init_tau);

  if (options.use_text) {
    if (options.topic_init) {
      const auto& t = *options.topic_init;
      if (t.rho.cols() != static_cast<Eigen::Index>(graph.vocab_size) ||
          t.encoder.input_dim() != graph.vocab_size || t.alpha.rows() != t.rho.rows())
        throw std::invalid_argument("initial topic parameters do not match the vocabulary");
      res.topics = t;
      res.topic_config.num_topics = t.num_topics();
      res.topic_config.embedding_dim = static_cast<int>(t.rho.rows());
      res.topic_config.hidden = static_cast<int>(t.encoder.hidden_dim());
    } else {
      res.topics = TopicModelParams::init(graph.vocab_size, options.topic, rng, options.embeddings);
    }
  }
  TopicModelParams* topics = res.topics ? &*res.topics : nullptr;

  // The encoder and the embeddings (alpha, rho) get separate optimizers so
  // their step sizes can differ.
  nn::AdamState adam_encoder, adam_embed;
  std::vector<nn::ParamView> encoder_views, embed_views;
  std::size_t num_encoder_views = 0;
  if (topics) {
    auto all = topics->views();
    num_encoder_views = topics->encoder.views().size();
    encoder_views.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(num_encoder_views));
    embed_views.assign(all.begin() + static_cast<std::ptrdiff_t>(num_encoder_views), all.end());
    adam_encoder = nn::AdamState({.lr = sched.lr_topics}, encoder_views);
    adam_embed = nn::AdamState({.lr = sched.embedding_lr()}, embed_views);
  }
  std::vector<nn::ParamView> xi_views;
  nn::AdamState adam_xi;
  auto refresh_xi_view = [&] {
    auto& xi = clusters.mutable_xi();
    xi_views = {{"xi", {xi.data(), static_cast<std::size_t>(xi.size())}}};
  };
  refresh_xi_view();
  adam_xi = nn::AdamState({.lr = sched.lr_xi}, xi_views);

  const auto P = static_cast<std::size_t>(Q) * static_cast<std::size_t>(Q);
  BlockPosterior block = update_block_posterior(clusters.tau(), graph, priors);
  res.diagnostics.initial =
      frozen_elbo(clusters.tau(), block, topics, graph, priors, sched.eval_samples, frozen_seed);

  int stable = 0;
  double previous = res.diagnostics.initial.total;
  for (int it = 1; it <= sched.max_iter; ++it) {
    // (1) closed-form network posterior
    res.diagnostics.net_before_update.push_back(elbo_net(clusters.tau(), block, graph, priors));
    block = update_block_posterior(clusters.tau(), graph, priors);
    res.diagnostics.net_after_update.push_back(elbo_net(clusters.tau(), block, graph, priors));

    // (2) topic model
    if (topics) {
      for (int s = 0; s < sched.inner_steps; ++s) {
        auto noise = draw_noise(static_cast<std::size_t>(sched.train_samples), P,
                                static_cast<std::size_t>(topics->num_topics()), rng);
        auto g = elbo_text(clusters.tau(), *topics, graph, noise, {.topic_params = true});
        negate(g);
        const auto grads = spans_of(g, topics->train_rho);
        const std::span<const std::span<const double>> all_grads(grads);
        adam_encoder.update(encoder_views, all_grads.first(num_encoder_views));
        adam_embed.update(embed_views, all_grads.subspan(num_encoder_views));
      }
      if (!topics->encoder.all_finite() || !topics->alpha.allFinite())
        throw NumericError("topic model parameters diverged at iteration " + std::to_string(it));
    }

    // (3) memberships through xi
    if (Q > 1 && it > sched.warmup) {
      for (int s = 0; s < sched.inner_steps; ++s) {
        Matrix d_tau = elbo_net_grad_tau(clusters.tau(), block, graph, priors);
        if (topics) {
          auto noise = draw_noise(static_cast<std::size_t>(sched.train_samples), P,
                                  static_cast<std::size_t>(topics->num_topics()), rng);
          d_tau += elbo_text(clusters.tau(), *topics, graph, noise, {.tau = true}).d_tau;
        }
        Matrix step = -chain_to_xi(clusters.tau(), d_tau);
        const std::span<const double> grad[] = {{step.data(), static_cast<std::size_t>(step.size())}};
        adam_xi.update(xi_views, grad);
        clusters.sync_from_xi();
        if (!clusters.tau().allFinite())
          throw NumericError("memberships diverged at iteration " + std::to_string(it));
      }
    }

    if (options.record_blocks) {
      res.diagnostics.block_trace.push_back(block);
      res.diagnostics.tau_trace.push_back(clusters.tau());
    }

    ElboRecord rec =
        frozen_elbo(clusters.tau(), block, topics, graph, priors, sched.eval_samples, frozen_seed);
    rec.iteration = it;
    res.elbo_trace.push_back(rec);
    res.diagnostics.iterations = it;

    const double rel = std::abs(rec.total - previous) / std::max(std::abs(previous), 1e-300);
    previous = rec.total;
    stable = rel < sched.tolerance ? stable + 1 : 0;
    if (stable >= sched.patience) {
      res.diagnostics.converged = true;
      break;
    }
  }

  block = update_block_posterior(clusters.tau(), graph, priors);
  res.final_elbo =
      frozen_elbo(clusters.tau(), block, topics, graph, priors, sched.eval_samples, frozen_seed);
  res.final_elbo.iteration = res.diagnostics.iterations;
  res.blocks = std::move(block);
  res.labels = clusters.hard_labels();
  res.clusters = std::move(clusters);
  return res;
}

FitResult fit(const TextGraph& graph, const Matrix& init_tau, const FitOptions& options) {
  return fit(PreparedGraph::from(graph, options.use_text), init_tau, options);
}

Matrix pair_topic_means(const FitResult& fit, const PreparedGraph& graph, int samples,
                        std::uint64_t seed) {
  if (!fit.topics) throw std::invalid_argument("fit has no topic model");
  const auto& tau = fit.clusters.tau();
  const auto Q = static_cast<std::size_t>(tau.cols());
  const auto K = static_cast<std::size_t>(fit.topics->num_topics());
  const MetaDocuments md = expected_meta_documents(tau, graph);
  const auto enc = nn::encoder_forward(fit.topics->encoder, md.normalized);
  const Matrix sigma = (0.5 * enc.log_var.array()).exp().matrix();
  Rng rng(seed);
  const auto noise = draw_shared_noise(static_cast<std::size_t>(std::max(samples, 1)), Q * Q, K, rng);
  Matrix mean = Matrix::Zero(static_cast<Eigen::Index>(Q * Q), static_cast<Eigen::Index>(K));
  for (const auto& eps : noise) mean += nn::softmax_rows(enc.mu + sigma.cwiseProduct(eps));
  return mean / static_cast<double>(noise.size());
}

}  // namespace etsbm
