#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "etsbm/benchmark.hpp"
#include "etsbm/initsel.hpp"

namespace etsbm {

// Every knob of the command-line tool. Keys in config files and flag names
// coincide ("lr-topics = 0.002" and --lr-topics 0.002).
struct RunConfig {
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out;

  // data
  std::string data;
  std::string truth;
  std::string scenario = "C";     // A, B, C or all (benchmark)
  std::string difficulty = "easy";  // easy, hard1, hard2 or all (benchmark)
  int nodes = 100;

  // model
  std::string model = "etsbm";  // etsbm or sbm
  int q = 0;                    // fit: required
  std::string q_range = "2:5";  // select: lo:hi or a comma list
  int k = 0;                    // topics; 0: 3 for fit and select, the true count for benchmark
  int hidden = 800;
  int embedding_dim = 50;
  std::string embeddings;       // word-vector file; rho is fixed when given
  std::string init;             // empty: dissimilarity for etsbm, kmeans for sbm
  int restarts = 0;             // 0: 1 for fit and benchmark, 10 for select
  bool warm_start = true;
  int refine_iter = 700;        // select only, when several Q are compared

  // schedule
  int max_iter = 300;
  double lr_topics = 2e-3;
  double lr_embeddings = 1e-2;
  double lr_xi = 5e-2;
  int samples = 1;         // Monte-Carlo draws per gradient step
  int eval_samples = 64;   // shared draws for the frozen ELBO
  double tolerance = 1e-5;
  int patience = 10;

  // topic-model baseline
  int etm_epochs = 30;
  int etm_min_steps = 3000;
  int etm_restarts = 2;

  // benchmark
  int replicates = 10;
  std::string models = "etsbm,sbm,etm";

  // export-metagraph
  std::string fit;
  int top_words = 10;

  // check
  bool corrupt = false;
};

// Names of every key, in declaration order.
const std::vector<std::string>& config_keys();
bool is_flag_key(std::string_view key);

// Throws std::invalid_argument for unknown keys and unparsable values.
void set_config_value(RunConfig& config, std::string_view key, std::string_view value);
std::string get_config_value(const RunConfig& config, std::string_view key);

// "key = value" lines; blank lines and '#' comments are skipped.
RunConfig read_config(std::istream& in);
RunConfig load_config(const std::string& path);
void write_config(const RunConfig& config, std::ostream& out);

int resolved_topics(const RunConfig& config);  // k with the fit/select default
InitStrategy resolved_init(const RunConfig& config);
std::vector<int> parse_q_range(std::string_view s);
std::vector<std::string> split_list(std::string_view s);

FitOptions fit_options(const RunConfig& config, const std::optional<Matrix>& embeddings);
EtmOptions etm_options(const RunConfig& config);
SelectionOptions selection_options(const RunConfig& config, std::vector<int> q_range,
                                   const std::optional<Matrix>& embeddings);
BenchmarkOptions benchmark_options(const RunConfig& config);

}  // namespace etsbm
