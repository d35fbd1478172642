#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "etsbm/corpus.hpp"
#include "etsbm/nn.hpp"

namespace etsbm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Numeric failure inside inference (non-finite intermediate, invalid
// variational parameter). The message carries the locus.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Graph in the dense/sparse form used by the inference kernels.
struct PreparedGraph {
  std::size_t num_nodes = 0;
  std::size_t vocab_size = 0;
  Matrix adjacency;                                  // M x M, zero diagonal
  std::vector<std::pair<int, int>> edge_nodes;       // (src, dst) per edge
  Eigen::SparseMatrix<double, Eigen::RowMajor> counts;  // E x V

  // `with_text = false` keeps the edges but drops every word count.
  static PreparedGraph from(const TextGraph& graph, bool with_text = true);
  bool has_text() const { return counts.nonZeros() > 0; }
};

struct Priors {
  Vector gamma0;  // Dirichlet prior on cluster proportions
  double a = 1.0;  // Beta prior on connection probabilities
  double b = 1.0;

  static Priors defaults(int num_clusters);
  void validate(int num_clusters) const;
};

// Soft memberships tau (M x Q) and their log-ratio form
// xi_iq = log tau_iq - log tau_iQ (M x Q-1).
class ClusterPosterior {
 public:
  ClusterPosterior() = default;
  // Rows must be on the simplex; entries are floored at `floor` before the
  // log-ratio map.
  static ClusterPosterior from_tau(const Matrix& tau, double floor = 1e-10);
  static ClusterPosterior from_xi(const Matrix& xi);

  const Matrix& tau() const noexcept { return tau_; }
  const Matrix& xi() const noexcept { return xi_; }
  Matrix& mutable_xi() noexcept { return xi_; }
  // Recomputes tau from xi after an in-place xi update.
  void sync_from_xi();

  int num_clusters() const { return static_cast<int>(tau_.cols()); }
  std::vector<int> hard_labels() const;

 private:
  Matrix tau_;
  Matrix xi_;
};

// Variational Beta(pi1, pi2) per cluster pair and Dirichlet(gamma) on proportions.
struct BlockPosterior {
  Matrix pi1;
  Matrix pi2;
  Vector gamma;
};

std::vector<int> row_argmax(const Matrix& m);

// ---- meta-documents -------------------------------------------------------

struct MetaDocuments {
  Matrix counts;      // Q^2 x V, row q*Q + r
  Matrix normalized;  // rows divided by their totals, zero rows kept at zero
  Vector totals;      // Q^2
};

// W~_qr = sum over edges (i, j) of tau_iq tau_jr W_ij.
MetaDocuments expected_meta_documents(const Matrix& tau, const PreparedGraph& graph);

// ---- network part ---------------------------------------------------------

BlockPosterior update_block_posterior(const Matrix& tau, const PreparedGraph& graph,
                                      const Priors& priors);

// Network terms of the ELBO: E[log p(A|Y,pi)] + E[log p(Y|gamma)] +
// E[log p(pi) + log p(gamma)] - E[log R(Y) R(pi) R(gamma)].
// Throws NumericError on non-positive Beta/Dirichlet parameters.
double elbo_net(const Matrix& tau, const BlockPosterior& block, const PreparedGraph& graph,
                const Priors& priors);

// d elbo_net / d tau with the block posterior held fixed.
Matrix elbo_net_grad_tau(const Matrix& tau, const BlockPosterior& block, const PreparedGraph& graph,
                         const Priors& priors);

// ---- text part ------------------------------------------------------------

// KL(N(mu, diag exp(log_var)) || N(0, I)).
double kl_gaussian(const Vector& mu, const Vector& log_var);

struct TopicModelConfig {
  int num_topics = 3;
  int embedding_dim = 50;
  int hidden = 800;
};

struct TopicModelParams {
  Matrix rho;    // L x V word embeddings
  Matrix alpha;  // L x K topic embeddings
  nn::EncoderParams encoder;
  bool train_rho = true;

  // rho ~ N(0, 1) (trainable) unless `embeddings` is given (then fixed).
  static TopicModelParams init(std::size_t vocab_size, const TopicModelConfig& config, Rng& rng,
                               const std::optional<Matrix>& embeddings = std::nullopt);

  int num_topics() const { return static_cast<int>(alpha.cols()); }
  std::vector<nn::ParamView> views();
};

// beta_k = softmax(rho^T alpha_k), K x V.
Matrix beta_from_embeddings(const TopicModelParams& topics);
Matrix log_beta_from_embeddings(const TopicModelParams& topics);

// Standard-normal draws, one P x K matrix per Monte-Carlo sample.
using NoiseDraws = std::vector<Matrix>;
NoiseDraws draw_noise(std::size_t samples, std::size_t pairs, std::size_t topics, Rng& rng);
// Same draw for every pair within a sample.
NoiseDraws draw_shared_noise(std::size_t samples, std::size_t pairs, std::size_t topics, Rng& rng);

struct TextGradRequest {
  bool topic_params = false;  // encoder, alpha, and rho when trainable
  bool tau = false;
};

struct TextElbo {
  double value = 0.0;  // reconstruction - kl
  double reconstruction = 0.0;
  double kl = 0.0;
  std::vector<double> per_sample;  // reconstruction of each MC sample
  Matrix mu, log_var;              // encoder outputs per pair

  // Filled on request.
  nn::EncoderParams d_encoder;
  Matrix d_alpha;
  Matrix d_rho;
  Matrix d_tau;
  Matrix d_counts;  // w.r.t. the document counts, through the normalized encoder input too
};

// Text ELBO of independent bag-of-words rows (B x V counts); the encoder sees
// each row divided by its total. `request.tau` asks for d_counts.
TextElbo document_elbo(const Matrix& counts, const TopicModelParams& topics,
                       const NoiseDraws& noise, TextGradRequest request = {});

// Monte-Carlo text ELBO with reparameterized gradients:
// sum_qr [ mean_s sum_v W~_qr^v log(theta^s_qr . beta_v) - KL_qr ].
TextElbo elbo_text(const Matrix& tau, const TopicModelParams& topics, const PreparedGraph& graph,
                   const NoiseDraws& noise, TextGradRequest request = {});

// Convenience form drawing S independent samples per pair from `seed`.
TextElbo elbo_text_mc(const Matrix& tau, const TopicModelParams& topics, const PreparedGraph& graph,
                      std::size_t samples, std::uint64_t seed, TextGradRequest request = {});

// ---- fit ------------------------------------------------------------------

struct Schedule {
  int max_iter = 300;
  int inner_steps = 1;
  double lr_topics = 2e-3;
  double lr_xi = 5e-2;
  // Step size for alpha and rho; non-positive means lr_topics.
  double lr_embeddings = 1e-2;
  int train_samples = 1;
  int eval_samples = 64;
  double tolerance = 1e-5;
  int patience = 10;
  // Outer iterations that update only the topic model before tau moves.
  int warmup = 0;

  double embedding_lr() const { return lr_embeddings > 0.0 ? lr_embeddings : lr_topics; }
};

struct ElboRecord {
  int iteration = 0;
  double net = 0.0;
  double text = 0.0;
  double total = 0.0;
};

struct FitOptions {
  int num_clusters = 2;
  TopicModelConfig topic;
  std::optional<Priors> priors;
  Schedule schedule;
  std::uint64_t seed = 0;
  std::optional<Matrix> embeddings;  // fixed rho when present
  // Starting topic parameters (e.g. a fitted ETM); fresh ones when absent.
  std::optional<TopicModelParams> topic_init;
  bool use_text = true;
  bool record_blocks = false;
};

struct FitDiagnostics {
  std::vector<double> net_before_update;  // per outer iteration, around the closed-form step
  std::vector<double> net_after_update;
  ElboRecord initial;  // frozen ELBO at the initial tau
  bool converged = false;
  int iterations = 0;
  std::vector<BlockPosterior> block_trace;  // when record_blocks
  std::vector<Matrix> tau_trace;            // when record_blocks
};

struct FitResult {
  std::string model = "etsbm";
  ClusterPosterior clusters;
  BlockPosterior blocks;
  std::optional<TopicModelParams> topics;
  Priors priors;
  std::vector<ElboRecord> elbo_trace;
  ElboRecord final_elbo;
  std::vector<int> labels;
  int num_clusters = 0;
  TopicModelConfig topic_config;
  Schedule schedule;
  std::uint64_t seed = 0;
  FitDiagnostics diagnostics;
};

// VBEM: closed-form block posterior, Adam steps on the topic model, Adam
// steps on xi. Throws std::invalid_argument for Q < 1, Q > M or a malformed
// initial tau; NumericError on numeric failure.
FitResult fit(const PreparedGraph& graph, const Matrix& init_tau, const FitOptions& options);
FitResult fit(const TextGraph& graph, const Matrix& init_tau, const FitOptions& options);

// ELBO with frozen parameters and `samples` shared-noise draws from `seed`.
ElboRecord frozen_elbo(const Matrix& tau, const BlockPosterior& block,
                       const TopicModelParams* topics, const PreparedGraph& graph,
                       const Priors& priors, int samples, std::uint64_t seed);

// Posterior-mean topic proportions per cluster pair (Q^2 x K) over `samples`
// shared-noise draws.
Matrix pair_topic_means(const FitResult& fit, const PreparedGraph& graph, int samples = 64,
                        std::uint64_t seed = 0);

// Versioned JSON container; the encoder goes to `<path>.encoder`.
void save_fit(const FitResult& fit, const std::filesystem::path& path);
FitResult load_fit(const std::filesystem::path& path);

}  // namespace etsbm
