#include <doctest.h>

#include <cmath>
#include <sstream>

#include "etsbm/nn.hpp"

using namespace etsbm;
using namespace etsbm::nn;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = n(rng);
  return m;
}

Matrix random_simplex_rows(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = u(rng);
  for (Eigen::Index i = 0; i < r; ++i) m.row(i) /= m.row(i).sum();
  return m;
}

double gaussian_kl(const Matrix& mu, const Matrix& lv) {
  return 0.5 * (lv.array().exp() + mu.array().square() - 1.0 - lv.array()).sum();
}

struct EncoderLoss {
  EncoderParams params;
  Matrix input, c_mu, c_lv;

  double operator()() const {
    const auto out = encoder_forward(params, input);
    return (out.mu.cwiseProduct(c_mu)).sum() + (out.log_var.cwiseProduct(c_lv)).sum() +
           gaussian_kl(out.mu, out.log_var);
  }
  EncoderGrads grads() const {
    const auto out = encoder_forward(params, input);
    const Matrix d_mu = c_mu + out.mu;
    const Matrix d_lv = c_lv + 0.5 * (out.log_var.array().exp() - 1.0).matrix();
    return encoder_backward(params, out.cache, d_mu, d_lv);
  }
};

EncoderLoss make_loss(std::uint64_t seed) {
  Rng rng(seed);
  EncoderLoss l;
  l.params = EncoderParams::glorot(7, 6, 3, rng);
  // Non-zero biases so every path is exercised.
  l.params.b1 = random_matrix(6, 1, rng, 0.3);
  l.params.b2 = random_matrix(6, 1, rng, 0.3);
  l.params.b_mu = random_matrix(3, 1, rng, 0.3);
  l.params.b_lv = random_matrix(3, 1, rng, 0.3);
  l.input = random_simplex_rows(4, 7, rng);
  l.input.row(3).setZero();  // empty-pair convention
  l.c_mu = random_matrix(4, 3, rng);
  l.c_lv = random_matrix(4, 3, rng);
  return l;
}

}  // namespace

TEST_CASE("softmax") {
  const Vector u = softmax(Vector::Zero(3));
  CHECK((u.array() - 1.0 / 3).abs().maxCoeff() < 1e-15);
  const Vector big = softmax(Eigen::Vector2d(1000, 0));
  CHECK(big(0) == 1.0);
  CHECK(big(1) == 0.0);
  CHECK(big.allFinite());
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const Vector x = random_matrix(6, 1, rng, 5.0);
    const Vector s = softmax(x);
    CHECK(std::abs(s.sum() - 1.0) < 1e-12);
    CHECK((s.array() > 0.0).all());
    CHECK((softmax((x.array() + 17.5).matrix()) - s).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(log_sum_exp(x) - std::log(x.array().exp().sum())) < 1e-12);
    // monotone: raising one input raises its probability
    Vector y = x;
    y(2) += 0.5;
    CHECK(softmax(y)(2) > s(2));
  }
  const Matrix rows = random_matrix(4, 5, rng);
  const Matrix sm = softmax_rows(rows);
  const Matrix lsm = log_softmax_rows(rows);
  CHECK((sm.array().log() - lsm.array()).abs().maxCoeff() < 1e-12);
}

TEST_CASE("encoder forward") {
  Rng rng(1);
  auto p = EncoderParams::glorot(5, 4, 2, rng);
  CHECK(p.parameter_count() == 5 * 4 + 4 + 4 * 4 + 4 + 2 * (4 * 2 + 2));
  const Matrix x = random_simplex_rows(3, 5, rng);

  auto z = EncoderParams::zeros(5, 4, 2);
  z.b_mu << 0.3, -1.2;
  z.b_lv << 0.5, 20.0;
  const auto out = encoder_forward(z, x);
  for (int b = 0; b < 3; ++b) {
    CHECK(out.mu(b, 0) == 0.3);
    CHECK(out.mu(b, 1) == -1.2);
    CHECK(out.log_var(b, 1) == kLogVarMax);
  }

  Matrix same(2, 5);
  same.row(0) = x.row(0);
  same.row(1) = x.row(0);
  const auto o2 = encoder_forward(p, same);
  CHECK(o2.mu.row(0) == o2.mu.row(1));
  CHECK(encoder_forward(p, same).mu == o2.mu);

  Matrix bad = x;
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(encoder_forward(p, bad), std::invalid_argument);
  CHECK_THROWS_AS(encoder_forward(p, Matrix::Zero(2, 4)), std::invalid_argument);
}

TEST_CASE("encoder gradients match central differences on 10 seeds") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto loss = make_loss(seed);
    auto g = loss.grads();
    auto views = loss.params.views();
    auto gviews = g.params.views();
    const auto report = finite_diff_check(std::ref(loss), views, const_spans(gviews), {.tolerance = 1e-4});
    CAPTURE(seed);
    for (const auto& b : report.blocks) {
      CAPTURE(b.name);
      CHECK(b.max_rel_error <= 1e-4);
    }
    CHECK(report.passed);

    // Input gradient through a view on the input batch.
    std::vector<ParamView> in_view{{"input", {loss.input.data(), static_cast<std::size_t>(loss.input.size())}}};
    const std::span<const double> gin[] = {{g.input.data(), static_cast<std::size_t>(g.input.size())}};
    CHECK(finite_diff_check(std::ref(loss), in_view, gin).passed);
  }
}

TEST_CASE("finite difference step sweep brackets a minimum") {
  auto loss = make_loss(99);
  auto g = loss.grads();
  auto views = loss.params.views();
  auto gviews = g.params.views();
  const auto err = [&](double h) {
    return finite_diff_check(std::ref(loss), views, const_spans(gviews), {.step = h}).max_rel_error();
  };
  const double coarse = err(1e-1), mid = err(1e-5), fine = err(1e-11);
  CHECK(mid < coarse);
  CHECK(mid < fine);
  CHECK(err(1e-3) > mid);
}

TEST_CASE("quadratic loss has exact central differences") {
  std::vector<double> x{0.5, -1.5, 2.0};
  const std::vector<double> w{1.0, 3.0, 0.25};
  const auto loss = [&] {
    double s = 0;
    for (int i = 0; i < 3; ++i) s += w[i] * x[i] * x[i];
    return s;
  };
  std::vector<double> grad(3);
  for (int i = 0; i < 3; ++i) grad[i] = 2 * w[i] * x[i];
  const std::vector<ParamView> views{{"x", x}};
  const std::span<const double> g[] = {grad};
  const auto r = finite_diff_check(loss, views, g, {.step = 1e-3});
  CHECK(r.max_rel_error() <= 1e-8);
}

TEST_CASE("log-variance clamp blocks the gradient") {
  auto z = EncoderParams::zeros(3, 2, 1);
  z.b_lv << 15.0;
  Matrix x(1, 3);
  x << 0.2, 0.3, 0.5;
  const auto out = encoder_forward(z, x);
  const auto g = encoder_backward(z, out.cache, Matrix::Zero(1, 1), Matrix::Ones(1, 1));
  CHECK(g.params.b_lv(0) == 0.0);
}

TEST_CASE("reparameterized samples") {
  const Eigen::Vector2d mu(0.5, -2.0);
  CHECK(reparam(mu, Eigen::Vector2d(0.1, 0.3), Eigen::Vector2d::Zero()) == mu);
  const auto tiny = reparam(mu, Eigen::Vector2d::Constant(-745.0), Eigen::Vector2d(1.0, -1.0));
  CHECK(tiny == mu);

  Rng rng(5);
  const Eigen::Vector2d lv(0.4, -1.0);
  const int n = 100000;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  for (int i = 0; i < n; ++i) {
    const auto s = sample_reparam(mu, lv, rng);
    CHECK_MESSAGE((s.delta - reparam(mu, lv, s.eps)).isZero(0.0), "delta must follow eps");
    sum += s.delta;
  }
  const Eigen::Vector2d mean = sum / n;
  for (int k = 0; k < 2; ++k) CHECK(std::abs(mean(k) - mu(k)) < 4.0 * std::exp(lv(k) / 2) / std::sqrt(n));
}

TEST_CASE("adam") {
  std::vector<double> p{1.0, -2.0, 0.5};
  std::vector<double> q = p;
  const std::vector<ParamView> views{{"p", p}};
  AdamState state({.lr = 0.01}, views);

  const std::vector<double> zero(3, 0.0);
  const std::span<const double> gz[] = {zero};
  state.update(views, gz);
  CHECK(p == q);

  const std::vector<double> g{0.3, -4.0, 1e-3};
  const std::span<const double> gs[] = {g};
  AdamState fresh({.lr = 0.01}, views);
  fresh.update(views, gs);
  for (int i = 0; i < 3; ++i)
    CHECK(p[i] == doctest::Approx(q[i] - 0.01 * g[i] / (std::abs(g[i]) + 1e-8)).epsilon(1e-12));

  std::vector<double> a{1.0, 2.0}, b{1.0, 2.0};
  const std::vector<ParamView> va{{"a", a}}, vb{{"b", b}};
  AdamState sa({}, va), sb({}, vb);
  const std::vector<double> ga{0.5, -0.25};
  const std::span<const double> gg[] = {ga};
  for (int t = 0; t < 5; ++t) {
    sa.update(va, gg);
    sb.update(vb, gg);
  }
  CHECK(a == b);
  CHECK(sa.step() == 5);

  const std::vector<double> wrong(2, 0.0);
  const std::span<const double> gw[] = {wrong};
  CHECK_THROWS_AS(state.update(views, gw), std::invalid_argument);
}

TEST_CASE("array checkpoint round trip is exact") {
  Rng rng(8);
  auto p = EncoderParams::glorot(9, 5, 3, rng);
  p.b1 = random_matrix(5, 1, rng, 1e-7);
  p.b_mu(0) = 1.0 / 3.0;
  std::stringstream io;
  const auto arrays = to_arrays(p, "enc.");
  write_arrays(arrays, io);
  const auto back = read_arrays(io);
  const auto q = encoder_from_arrays(back, "enc.");
  CHECK(q.w1 == p.w1);
  CHECK(q.b1 == p.b1);
  CHECK(q.w_lv == p.w_lv);
  CHECK(q.b_mu == p.b_mu);
  std::stringstream bad("NOPE 1\n");
  CHECK_THROWS(read_arrays(bad));
}
