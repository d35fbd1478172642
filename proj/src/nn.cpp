#include "etsbm/nn.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace etsbm::nn {

Vector softmax(const Eigen::Ref<const Vector>& x) {
  if (x.size() == 0) return Vector();
  const double m = x.maxCoeff();
  Vector e = (x.array() - m).exp().matrix();
  return e / e.sum();
}

double log_sum_exp(const Eigen::Ref<const Vector>& x) {
  const double m = x.maxCoeff();
  return m + std::log((x.array() - m).exp().sum());
}

Matrix softmax_rows(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    out.row(i) = (x.row(i).array() - m).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

Matrix log_softmax_rows(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    const double lse = m + std::log((x.row(i).array() - m).exp().sum());
    out.row(i) = (x.row(i).array() - lse).matrix();
  }
  return out;
}

EncoderParams EncoderParams::zeros(std::size_t input, std::size_t hidden, std::size_t topics) {
  const auto V = static_cast<Eigen::Index>(input);
  const auto H = static_cast<Eigen::Index>(hidden);
  const auto K = static_cast<Eigen::Index>(topics);
  EncoderParams p;
  p.w1 = Matrix::Zero(H, V);
  p.b1 = Vector::Zero(H);
  p.w2 = Matrix::Zero(H, H);
  p.b2 = Vector::Zero(H);
  p.w_mu = Matrix::Zero(K, H);
  p.b_mu = Vector::Zero(K);
  p.w_lv = Matrix::Zero(K, H);
  p.b_lv = Vector::Zero(K);
  return p;
}

EncoderParams EncoderParams::glorot(std::size_t input, std::size_t hidden, std::size_t topics,
                                    Rng& rng) {
  EncoderParams p = zeros(input, hidden, topics);
  auto fill = [&rng](Matrix& w) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
  };
  fill(p.w1);
  fill(p.w2);
  fill(p.w_mu);
  fill(p.w_lv);
  return p;
}

std::size_t EncoderParams::parameter_count() const {
  return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size() + w_mu.size() +
                                  b_mu.size() + w_lv.size() + b_lv.size());
}

std::vector<ParamView> EncoderParams::views() {
  auto span_of = [](auto& m) { return std::span<double>(m.data(), static_cast<std::size_t>(m.size())); };
  return {{"enc.w1", span_of(w1)},     {"enc.b1", span_of(b1)},     {"enc.w2", span_of(w2)},
          {"enc.b2", span_of(b2)},     {"enc.w_mu", span_of(w_mu)}, {"enc.b_mu", span_of(b_mu)},
          {"enc.w_lv", span_of(w_lv)}, {"enc.b_lv", span_of(b_lv)}};
}

void EncoderParams::set_zero() {
  w1.setZero();
  b1.setZero();
  w2.setZero();
  b2.setZero();
  w_mu.setZero();
  b_mu.setZero();
  w_lv.setZero();
  b_lv.setZero();
}

bool EncoderParams::all_finite() const {
  return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite() &&
         w_mu.allFinite() && b_mu.allFinite() && w_lv.allFinite() && b_lv.allFinite();
}

namespace {

Matrix apply_softplus(const Matrix& z) {
  return z.unaryExpr([](double x) { return softplus(x); });
}

Matrix apply_sigmoid(const Matrix& z) {
  return z.unaryExpr([](double x) { return sigmoid(x); });
}

}  // namespace

EncoderOutput encoder_forward(const EncoderParams& params, const Matrix& input) {
  if (input.cols() != params.w1.cols())
    throw std::invalid_argument("encoder input has " + std::to_string(input.cols()) +
                                " columns, expected " + std::to_string(params.w1.cols()));
  if (!input.allFinite()) throw std::invalid_argument("encoder input is not finite");

  EncoderOutput out;
  auto& c = out.cache;
  c.input = input;
  c.z1.noalias() = input * params.w1.transpose();
  c.z1.rowwise() += params.b1.transpose();
  c.h1 = apply_softplus(c.z1);
  c.z2.noalias() = c.h1 * params.w2.transpose();
  c.z2.rowwise() += params.b2.transpose();
  c.h2 = apply_softplus(c.z2);
  out.mu.noalias() = c.h2 * params.w_mu.transpose();
  out.mu.rowwise() += params.b_mu.transpose();
  c.lv_raw.noalias() = c.h2 * params.w_lv.transpose();
  c.lv_raw.rowwise() += params.b_lv.transpose();
  out.log_var = c.lv_raw.cwiseMax(kLogVarMin).cwiseMin(kLogVarMax);
  return out;
}

EncoderGrads encoder_backward(const EncoderParams& params, const EncoderCache& cache,
                              const Matrix& d_mu, const Matrix& d_log_var, bool want_params,
                              bool want_input) {
  const Eigen::Index B = cache.input.rows();
  if (d_mu.rows() != B || d_log_var.rows() != B || d_mu.cols() != params.w_mu.rows() ||
      d_log_var.cols() != params.w_lv.rows())
    throw std::invalid_argument("encoder_backward: gradient shape mismatch");

  // The clamp passes gradient only inside its bounds.
  Matrix d_lv_raw = d_log_var;
  for (Eigen::Index i = 0; i < d_lv_raw.size(); ++i) {
    const double raw = cache.lv_raw(i);
    if (raw < kLogVarMin || raw > kLogVarMax) d_lv_raw(i) = 0.0;
  }

  EncoderGrads g;
  Matrix d_h2 = d_mu * params.w_mu;
  d_h2.noalias() += d_lv_raw * params.w_lv;
  Matrix d_z2 = d_h2.cwiseProduct(apply_sigmoid(cache.z2));
  Matrix d_h1 = d_z2 * params.w2;
  Matrix d_z1 = d_h1.cwiseProduct(apply_sigmoid(cache.z1));

  if (want_params) {
    g.params.w_mu.noalias() = d_mu.transpose() * cache.h2;
    g.params.b_mu = d_mu.colwise().sum().transpose();
    g.params.w_lv.noalias() = d_lv_raw.transpose() * cache.h2;
    g.params.b_lv = d_lv_raw.colwise().sum().transpose();
    g.params.w2.noalias() = d_z2.transpose() * cache.h1;
    g.params.b2 = d_z2.colwise().sum().transpose();
    g.params.w1.noalias() = d_z1.transpose() * cache.input;
    g.params.b1 = d_z1.colwise().sum().transpose();
  }
  if (want_input) g.input.noalias() = d_z1 * params.w1;
  return g;
}

Vector reparam(const Vector& mu, const Vector& log_var, const Vector& eps) {
  return (mu.array() + (0.5 * log_var.array()).exp() * eps.array()).matrix();
}

ReparamSample sample_reparam(const Vector& mu, const Vector& log_var, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ReparamSample s;
  s.eps.resize(mu.size());
  for (Eigen::Index k = 0; k < mu.size(); ++k) s.eps(k) = normal(rng);
  s.delta = reparam(mu, log_var, s.eps);
  return s;
}

AdamState::AdamState(AdamConfig config, std::span<const ParamView> params) : config_(config) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.emplace_back(p.values.size(), 0.0);
    v_.emplace_back(p.values.size(), 0.0);
  }
}

void AdamState::update(std::span<const ParamView> params,
                       std::span<const std::span<const double>> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw std::invalid_argument("adam: parameter block count mismatch");
  for (std::size_t b = 0; b < params.size(); ++b)
    if (params[b].values.size() != m_[b].size() || grads[b].size() != m_[b].size())
      throw std::invalid_argument("adam: shape mismatch in block '" + params[b].name + "'");

  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double lr = config_.lr;
  const double eps = config_.eps;
  for (std::size_t b = 0; b < params.size(); ++b) {
    const auto n = static_cast<Eigen::Index>(m_[b].size());
    Eigen::Map<Eigen::ArrayXd> p(params[b].values.data(), n);
    Eigen::Map<const Eigen::ArrayXd> g(grads[b].data(), n);
    Eigen::Map<Eigen::ArrayXd> m(m_[b].data(), n);
    Eigen::Map<Eigen::ArrayXd> v(v_[b].data(), n);
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    p -= lr * (m / c1) / ((v / c2).sqrt() + eps);
  }
}

double FdReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& b : blocks) m = std::max(m, b.max_rel_error);
  return m;
}

FdReport finite_diff_check(const std::function<double()>& loss, std::span<const ParamView> params,
                           std::span<const std::span<const double>> analytic,
                           const FdOptions& options) {
  if (params.size() != analytic.size())
    throw std::invalid_argument("finite_diff_check: block count mismatch");
  FdReport report;
  report.tolerance = options.tolerance;
  report.step = options.step;
  Rng rng(options.seed);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto values = params[b].values;
    if (analytic[b].size() != values.size())
      throw std::invalid_argument("finite_diff_check: shape mismatch in '" + params[b].name + "'");
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (options.max_per_block > 0 && idx.size() > options.max_per_block) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(options.max_per_block);
    }
    FdBlockReport block{params[b].name, 0.0, idx.size()};
    for (auto i : idx) {
      const double saved = values[i];
      values[i] = saved + options.step;
      const double up = loss();
      values[i] = saved - options.step;
      const double down = loss();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[b][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.abs_floor});
      block.max_rel_error = std::max(block.max_rel_error, std::abs(a - numeric) / denom);
    }
    report.blocks.push_back(std::move(block));
  }
  report.passed = report.max_rel_error() <= options.tolerance;
  return report;
}

void write_arrays(std::span<const NamedArray> arrays, std::ostream& out) {
  out << "ETSBM-ARRAYS 1\n";
  char buf[64];
  for (const auto& a : arrays) {
    out << a.name << ' ' << a.values.rows() << ' ' << a.values.cols() << '\n';
    for (Eigen::Index i = 0; i < a.values.rows(); ++i) {
      for (Eigen::Index j = 0; j < a.values.cols(); ++j) {
        auto res = std::to_chars(buf, buf + sizeof buf, a.values(i, j));
        if (j > 0) out << ' ';
        out.write(buf, res.ptr - buf);
      }
      out << '\n';
    }
  }
}

std::vector<NamedArray> read_arrays(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "ETSBM-ARRAYS" || version != 1)
    throw std::runtime_error("not an ETSBM-ARRAYS v1 container");
  std::vector<NamedArray> arrays;
  NamedArray a;
  Eigen::Index rows = 0, cols = 0;
  while (in >> a.name >> rows >> cols) {
    if (rows < 0 || cols < 0) throw std::runtime_error("negative array shape for '" + a.name + "'");
    a.values.resize(rows, cols);
    std::string tok;
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) {
        if (!(in >> tok)) throw std::runtime_error("truncated array '" + a.name + "'");
        double v = 0.0;
        auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
          throw std::runtime_error("bad value '" + tok + "' in array '" + a.name + "'");
        a.values(i, j) = v;
      }
    arrays.push_back(a);
  }
  return arrays;
}

std::vector<NamedArray> to_arrays(const EncoderParams& p, const std::string& prefix) {
  return {{prefix + "w1", p.w1},     {prefix + "b1", p.b1},     {prefix + "w2", p.w2},
          {prefix + "b2", p.b2},     {prefix + "w_mu", p.w_mu}, {prefix + "b_mu", p.b_mu},
          {prefix + "w_lv", p.w_lv}, {prefix + "b_lv", p.b_lv}};
}

EncoderParams encoder_from_arrays(std::span<const NamedArray> arrays, const std::string& prefix) {
  auto find = [&](const std::string& name) -> const Matrix& {
    for (const auto& a : arrays)
      if (a.name == prefix + name) return a.values;
    throw std::runtime_error("checkpoint lacks array '" + prefix + name + "'");
  };
  EncoderParams p;
  p.w1 = find("w1");
  p.b1 = find("b1");
  p.w2 = find("w2");
  p.b2 = find("b2");
  p.w_mu = find("w_mu");
  p.b_mu = find("b_mu");
  p.w_lv = find("w_lv");
  p.b_lv = find("b_lv");
  const auto H = p.w1.rows();
  const auto K = p.w_mu.rows();
  if (p.b1.size() != H || p.w2.rows() != H || p.w2.cols() != H || p.b2.size() != H ||
      p.w_mu.cols() != H || p.b_mu.size() != K || p.w_lv.rows() != K || p.w_lv.cols() != H ||
      p.b_lv.size() != K)
    throw std::runtime_error("checkpoint encoder shapes are inconsistent");
  return p;
}

std::vector<std::span<const double>> const_spans(const std::vector<ParamView>& views) {
  std::vector<std::span<const double>> out;
  out.reserve(views.size());
  for (const auto& v : views) out.emplace_back(v.values.data(), v.values.size());
  return out;
}

}  // namespace etsbm::nn
