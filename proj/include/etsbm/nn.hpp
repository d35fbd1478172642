#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "etsbm/random.hpp"

namespace etsbm::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

Vector softmax(const Eigen::Ref<const Vector>& x);
double log_sum_exp(const Eigen::Ref<const Vector>& x);
// Row-wise softmax / log-softmax of a batch.
Matrix softmax_rows(const Matrix& x);
Matrix log_softmax_rows(const Matrix& x);

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Bounds applied to the log-variance head.
inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

// A mutable view on one named parameter block.
struct ParamView {
  std::string name;
  std::span<double> values;
};

// V -> H -> H -> (K mean, K log-variance), softplus hidden activations.
// Weights are stored (out x in).
struct EncoderParams {
  Matrix w1, w2, w_mu, w_lv;
  Vector b1, b2, b_mu, b_lv;

  static EncoderParams zeros(std::size_t input, std::size_t hidden, std::size_t topics);
  // Glorot-uniform weights, zero biases.
  static EncoderParams glorot(std::size_t input, std::size_t hidden, std::size_t topics, Rng& rng);

  std::size_t input_dim() const { return static_cast<std::size_t>(w1.cols()); }
  std::size_t hidden_dim() const { return static_cast<std::size_t>(w1.rows()); }
  std::size_t num_topics() const { return static_cast<std::size_t>(w_mu.rows()); }
  std::size_t parameter_count() const;

  std::vector<ParamView> views();
  void set_zero();
  bool all_finite() const;
};

struct EncoderCache {
  Matrix input;   // B x V
  Matrix z1, h1;  // B x H
  Matrix z2, h2;  // B x H
  Matrix lv_raw;  // B x K, before clamping
};

struct EncoderOutput {
  Matrix mu;       // B x K
  Matrix log_var;  // B x K, clamped
  EncoderCache cache;
};

// Throws std::invalid_argument on non-finite input or shape mismatch.
EncoderOutput encoder_forward(const EncoderParams& params, const Matrix& input);

struct EncoderGrads {
  EncoderParams params;  // same shapes as the forward parameters
  Matrix input;          // B x V
};

EncoderGrads encoder_backward(const EncoderParams& params, const EncoderCache& cache,
                              const Matrix& d_mu, const Matrix& d_log_var,
                              bool want_params = true, bool want_input = true);

struct ReparamSample {
  Vector delta;
  Vector eps;
};

// delta = mu + exp(log_var / 2) * eps, eps ~ N(0, I).
ReparamSample sample_reparam(const Vector& mu, const Vector& log_var, Rng& rng);
Vector reparam(const Vector& mu, const Vector& log_var, const Vector& eps);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(AdamConfig config, std::span<const ParamView> params);

  const AdamConfig& config() const noexcept { return config_; }
  std::uint64_t step() const noexcept { return step_; }
  const std::vector<std::vector<double>>& first_moment() const noexcept { return m_; }
  const std::vector<std::vector<double>>& second_moment() const noexcept { return v_; }

  // One bias-corrected descent step: p -= lr * m_hat / (sqrt(v_hat) + eps).
  // Throws std::invalid_argument on any shape mismatch.
  void update(std::span<const ParamView> params, std::span<const std::span<const double>> grads);

 private:
  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

inline void adam_step(AdamState& state, std::span<const ParamView> params,
                      std::span<const std::span<const double>> grads) {
  state.update(params, grads);
}

struct FdBlockReport {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

struct FdReport {
  std::vector<FdBlockReport> blocks;
  double tolerance = 0.0;
  double step = 0.0;
  bool passed = false;

  double max_rel_error() const;
};

struct FdOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  // Entries checked per block (0 = all), chosen with `seed`.
  std::size_t max_per_block = 0;
  std::uint64_t seed = 0;
  // Denominator floor of |a - n| / max(|a|, |n|, floor).
  double abs_floor = 1e-8;
};

// Compares `analytic` against central differences of `loss`, perturbing the
// parameters through `params` in place (restored afterwards).
FdReport finite_diff_check(const std::function<double()>& loss, std::span<const ParamView> params,
                           std::span<const std::span<const double>> analytic,
                           const FdOptions& options = {});

// Checkpoint container of named row-major arrays:
//   ETSBM-ARRAYS 1
//   <name> <rows> <cols>
//   <values, shortest round-trip decimal, one row per line>
struct NamedArray {
  std::string name;
  Matrix values;
};

void write_arrays(std::span<const NamedArray> arrays, std::ostream& out);
std::vector<NamedArray> read_arrays(std::istream& in);

std::vector<NamedArray> to_arrays(const EncoderParams& params, const std::string& prefix = "");
EncoderParams encoder_from_arrays(std::span<const NamedArray> arrays, const std::string& prefix = "");

std::vector<std::span<const double>> const_spans(const std::vector<ParamView>& views);

}  // namespace etsbm::nn
