#include "etsbm/check.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "etsbm/eval.hpp"
#include "etsbm/inference.hpp"
#include "etsbm/random.hpp"

namespace etsbm {

namespace {

Matrix random_tau(Eigen::Index M, Eigen::Index Q, Rng& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Matrix t(M, Q);
  for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = u(rng);
  for (Eigen::Index i = 0; i < M; ++i) t.row(i) /= t.row(i).sum();
  return t;
}

TextGraph random_graph(std::size_t M, std::size_t V, double density, Rng& rng) {
  std::vector<std::string> words;
  for (std::size_t v = 0; v < V; ++v) words.push_back("w" + std::to_string(v));
  std::bernoulli_distribution link(density), use(0.4);
  std::uniform_int_distribution<std::uint32_t> count(1, 6);
  std::vector<EdgeDocument> edges;
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < M; ++j) {
      if (i == j || !link(rng)) continue;
      EdgeDocument d{i, j, {}};
      for (std::size_t v = 0; v < V; ++v)
        if (use(rng)) d.counts.push_back({static_cast<std::uint32_t>(v), count(rng)});
      if (d.counts.empty()) d.counts.push_back({0, 1});
      edges.push_back(std::move(d));
    }
  return TextGraph(M, Vocabulary(words), std::move(edges));
}

CheckItem item(std::string name, double error, double tolerance, std::string detail = {}) {
  return {std::move(name), error, tolerance, error <= tolerance, std::move(detail)};
}

CheckItem check_meta_documents(Rng& rng) {
  double worst = 0.0;
  for (int t = 0; t < 5; ++t) {
    const auto tg = random_graph(10, 7, 0.4, rng);
    const auto g = PreparedGraph::from(tg);
    const Matrix tau = random_tau(10, 3, rng);
    Matrix brute = Matrix::Zero(9, 7);
    for (const auto& e : tg.edges())
      for (Eigen::Index q = 0; q < 3; ++q)
        for (Eigen::Index r = 0; r < 3; ++r)
          for (const auto& wc : e.counts)
            brute(q * 3 + r, wc.word) += tau(static_cast<Eigen::Index>(e.src), q) *
                                         tau(static_cast<Eigen::Index>(e.dst), r) * wc.count;
    worst = std::max(worst, (expected_meta_documents(tau, g).counts - brute).cwiseAbs().maxCoeff());
  }
  return item("meta_documents_brute_force", worst, 1e-12, "max abs difference, M=10 Q=3");
}

CheckItem check_net_gradient(Rng& rng) {
  double worst = 0.0;
  for (int t = 0; t < 5; ++t) {
    const auto g = PreparedGraph::from(random_graph(6, 3, 0.5, rng));
    const auto pr = Priors::defaults(3);
    Matrix tau = random_tau(6, 3, rng);
    const auto b = update_block_posterior(tau, g, pr);
    const Matrix grad = elbo_net_grad_tau(tau, b, g, pr);
    const std::vector<nn::ParamView> views{{"tau", {tau.data(), static_cast<std::size_t>(tau.size())}}};
    const std::span<const double> an[] = {{grad.data(), static_cast<std::size_t>(grad.size())}};
    worst = std::max(worst, nn::finite_diff_check([&] { return elbo_net(tau, b, g, pr); }, views, an)
                                .max_rel_error());
  }
  return item("net_gradient_tau_fd", worst, 1e-4, "max relative error, central differences");
}

std::vector<CheckItem> check_text_gradients(Rng& rng, bool corrupt) {
  const auto g = PreparedGraph::from(random_graph(6, 8, 0.5, rng));
  const int K = 3;
  const Eigen::Index Q = 2;
  auto topics = TopicModelParams::init(8, {K, 4, 5}, rng);
  std::normal_distribution<double> n(0.0, 0.3);
  for (Eigen::Index i = 0; i < topics.encoder.b1.size(); ++i) topics.encoder.b1(i) = n(rng);
  for (Eigen::Index i = 0; i < topics.encoder.b_lv.size(); ++i) topics.encoder.b_lv(i) = n(rng);
  Matrix tau = random_tau(6, Q, rng);
  const auto noise = draw_noise(3, static_cast<std::size_t>(Q * Q), K, rng);
  auto te = elbo_text(tau, topics, g, noise, {.topic_params = true, .tau = true});

  if (corrupt) {
    topics.alpha.array() += 0.5;
    topics.encoder.b_mu.array() += 0.5;
    tau.col(0).array() *= 0.8;
    tau.col(1) = (1.0 - tau.col(0).array()).matrix();
  }

  auto views = topics.views();
  auto grad_views = te.d_encoder.views();
  auto spans = nn::const_spans(grad_views);
  spans.emplace_back(te.d_alpha.data(), static_cast<std::size_t>(te.d_alpha.size()));
  spans.emplace_back(te.d_rho.data(), static_cast<std::size_t>(te.d_rho.size()));
  const auto report =
      nn::finite_diff_check([&] { return elbo_text(tau, topics, g, noise).value; }, views, spans);
  const std::vector<nn::ParamView> tv{{"tau", {tau.data(), static_cast<std::size_t>(tau.size())}}};
  const std::span<const double> ts[] = {{te.d_tau.data(), static_cast<std::size_t>(te.d_tau.size())}};
  const auto rt =
      nn::finite_diff_check([&] { return elbo_text(tau, topics, g, noise).value; }, tv, ts);
  return {item("text_gradient_topic_params_fd", report.max_rel_error(), 1e-4,
               "max relative error over encoder, alpha, rho; frozen noise"),
          item("text_gradient_tau_fd", rt.max_rel_error(), 1e-4, "max relative error; frozen noise")};
}

CheckItem check_kl(Rng& rng, std::size_t samples) {
  const Eigen::Vector3d mu(0.3, -1.1, 0.0), lv(-0.5, 0.4, 1.2);
  const double exact = kl_gaussian(mu, lv);
  std::normal_distribution<double> z;
  double sum = 0.0, sq = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    double log_ratio = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double e = z(rng);
      const double x = mu(k) + std::exp(0.5 * lv(k)) * e;
      log_ratio += -0.5 * lv(k) - 0.5 * e * e + 0.5 * x * x;
    }
    sum += log_ratio;
    sq += log_ratio * log_ratio;
  }
  const double n = static_cast<double>(samples);
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  return item("kl_gaussian_monte_carlo", std::abs(mean - exact) / se, 3.0,
              "standard errors from the mean of " + std::to_string(samples) + " draws");
}

CheckItem check_beta_bernoulli(Rng& rng) {
  double worst = 0.0;
  for (int t = 0; t < 5; ++t) {
    const auto g = PreparedGraph::from(random_graph(7, 3, 0.3, rng));
    Priors pr = Priors::defaults(1);
    pr.a = 0.5 + t * 0.4;
    pr.b = 1.5 - t * 0.2;
    const Matrix tau = Matrix::Ones(7, 1);
    const auto b = update_block_posterior(tau, g, pr);
    const double n1 = g.adjacency.sum();
    const double n0 = 7.0 * 6.0 - n1;
    const auto lbeta = [](double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); };
    const double exact = lbeta(pr.a + n1, pr.b + n0) - lbeta(pr.a, pr.b);
    worst = std::max(worst, std::abs(elbo_net(tau, b, g, pr) - exact));
  }
  return item("net_elbo_q1_beta_bernoulli", worst, 1e-6, "abs difference to the exact marginal");
}

void partitions(int n, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == n) {
    out.push_back(cur);
    return;
  }
  const int used = cur.empty() ? 0 : *std::max_element(cur.begin(), cur.end()) + 1;
  for (int l = 0; l <= std::min(used, 2); ++l) {
    cur.push_back(l);
    partitions(n, cur, out);
    cur.pop_back();
  }
}

double ari_pairs(const std::vector<int>& a, const std::vector<int>& b) {
  long long both = 0, only_a = 0, only_b = 0, neither = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      if (sa && sb) ++both;
      else if (sa) ++only_a;
      else if (sb) ++only_b;
      else ++neither;
    }
  const long long num = 2 * (both * neither - only_a * only_b);
  const long long den = (both + only_a) * (only_a + neither) + (both + only_b) * (only_b + neither);
  return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

CheckItem check_ari(int max_nodes) {
  double worst = 0.0;
  std::size_t pairs = 0;
  for (int n = 2; n <= max_nodes; ++n) {
    std::vector<std::vector<int>> parts;
    std::vector<int> cur;
    partitions(n, cur, parts);
    for (const auto& a : parts)
      for (const auto& b : parts) {
        worst = std::max(worst, std::abs(ari(a, b) - ari_pairs(a, b)));
        ++pairs;
      }
  }
  return item("ari_pair_counting", worst, 1e-12,
              std::to_string(pairs) + " partition pairs, N<=" + std::to_string(max_nodes) + ", Q<=3");
}

}  // namespace

std::vector<CheckItem> run_checks(const CheckOptions& options) {
  std::vector<CheckItem> items;
  Rng meta(derive_seed(options.seed, {1})), net(derive_seed(options.seed, {2})),
      text(derive_seed(options.seed, {3})), kl(derive_seed(options.seed, {4})),
      marg(derive_seed(options.seed, {5}));
  items.push_back(check_meta_documents(meta));
  items.push_back(check_net_gradient(net));
  for (auto& it : check_text_gradients(text, options.corrupt)) items.push_back(std::move(it));
  items.push_back(check_kl(kl, options.kl_samples));
  items.push_back(check_beta_bernoulli(marg));
  items.push_back(check_ari(options.ari_max_nodes));
  return items;
}

void write_check_report(const std::vector<CheckItem>& items, std::ostream& out) {
  out << "name,error,tolerance,status,detail\n";
  for (const auto& it : items) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e,%.1e", it.error, it.tolerance);
    out << it.name << ',' << buf << ',' << (it.passed ? "pass" : "FAIL") << ",\"" << it.detail << "\"\n";
  }
}

}  // namespace etsbm
