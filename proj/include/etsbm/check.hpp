#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace etsbm {

struct CheckItem {
  std::string name;
  double error = 0.0;  // the quantity compared against the tolerance
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

struct CheckOptions {
  std::uint64_t seed = 0;
  // Shifts the topic parameters between the analytic and the numerical
  // gradient, so the gradient checks must fail.
  bool corrupt = false;
  std::size_t kl_samples = 1000000;
  int ari_max_nodes = 8;
};

// Self-tests of the inference internals against independent computations:
// brute-force meta-documents, central differences of the network and text
// ELBO gradients, Monte-Carlo Gaussian KL, the closed-form Beta-Bernoulli
// marginal at Q=1 and pair-counting ARI on every small partition.
std::vector<CheckItem> run_checks(const CheckOptions& options);

// name,error,tolerance,status,detail
void write_check_report(const std::vector<CheckItem>& items, std::ostream& out);

}  // namespace etsbm
