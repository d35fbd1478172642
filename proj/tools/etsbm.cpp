// Command-line front end: simulate, fit, select, benchmark, export-metagraph, check.
#include <CLI11.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "etsbm/benchmark.hpp"
#include "etsbm/check.hpp"
#include "etsbm/config.hpp"
#include "etsbm/eval.hpp"
#include "etsbm/runtime.hpp"
#include "etsbm/simulator.hpp"

using namespace etsbm;

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

const std::map<std::string, std::string>& help_text() {
  static const std::map<std::string, std::string> h{
      {"seed", "master seed"},
      {"jobs", "worker threads for select and benchmark"},
      {"out", "primary output file"},
      {"data", "dataset file"},
      {"truth", "ground-truth file (simulate writes it, fit and select score against it)"},
      {"scenario", "A, B or C (benchmark also takes all)"},
      {"difficulty", "easy, hard1 or hard2 (benchmark also takes all)"},
      {"nodes", "number of nodes"},
      {"model", "etsbm or sbm"},
      {"q", "number of clusters"},
      {"q-range", "candidate cluster counts, lo:hi or a comma list"},
      {"k", "number of topics (0: 3, or the true count in benchmark)"},
      {"hidden", "encoder hidden width"},
      {"embedding-dim", "embedding dimension L"},
      {"embeddings", "word-vector file; fixes rho"},
      {"init", "random, kmeans or dissimilarity (empty: dissimilarity, kmeans for sbm)"},
      {"restarts", "restarts per fit (0: 1, or 10 for select)"},
      {"warm-start", "start text fits from the fitted topic model"},
      {"refine-iter", "extra iterations for the best fit of each Q before comparing them"},
      {"max-iter", "outer VBEM iterations"},
      {"lr-topics", "Adam step for the encoder"},
      {"lr-embeddings", "Adam step for alpha and rho"},
      {"lr-xi", "Adam step for the membership log-ratios"},
      {"samples", "Monte-Carlo draws per gradient step"},
      {"eval-samples", "shared draws for the frozen ELBO"},
      {"tolerance", "relative ELBO change counted as converged"},
      {"patience", "converged iterations before stopping"},
      {"etm-epochs", "topic-model epochs"},
      {"etm-min-steps", "minimum topic-model optimizer steps"},
      {"etm-restarts", "topic-model restarts"},
      {"replicates", "networks per scenario and difficulty"},
      {"models", "comma list of etsbm, etsbm@<init>, sbm, etm"},
      {"fit", "fit file written by the fit command"},
      {"top-words", "words listed per topic"},
      {"corrupt", "perturb parameters so the gradient checks must fail"},
  };
  return h;
}

// Binds flags to config keys; values given on the command line are applied
// over the config file after parsing.
class Binder {
 public:
  explicit Binder(const RunConfig& defaults) : defaults_(defaults) {}

  void add(CLI::App* app, std::initializer_list<const char*> keys) {
    for (const char* key : keys) {
      const std::string flag = std::string("--") + key;
      const auto& desc = help_text().at(key);
      CLI::Option* opt;
      if (is_flag_key(key)) {
        auto& sink = flags_[flag + app->get_name()];
        opt = app->add_flag(flag, sink, desc);
      } else {
        auto& sink = values_[flag + app->get_name()];
        opt = app->add_option(flag, sink, desc);
      }
      opt->default_str(get_config_value(defaults_, key));
      bound_.push_back({opt, key});
    }
  }

  void apply(RunConfig& config) const {
    for (const auto& [opt, key] : bound_) {
      if (opt->count() == 0) continue;
      const auto results = opt->results();
      set_config_value(config, key, is_flag_key(key) ? "true" : results.back());
    }
  }

 private:
  RunConfig defaults_;
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> flags_;
  std::vector<std::pair<CLI::Option*, std::string>> bound_;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw UsageError(message);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  return out;
}

std::optional<Matrix> embeddings_for(const RunConfig& c, const TextGraph& graph) {
  if (c.embeddings.empty()) return std::nullopt;
  return load_embeddings(c.embeddings, graph.vocab(), derive_seed(c.seed, {7})).values;
}

void report_scores(const FitResult& f, const TextGraph& graph, const RunConfig& c) {
  std::cout << "model " << f.model << " Q=" << f.num_clusters << " iterations="
            << f.diagnostics.iterations << " elbo=" << f.final_elbo.total << " (net "
            << f.final_elbo.net << ", text " << f.final_elbo.text << ")\n";
  if (c.truth.empty()) return;
  const auto truth = load_truth(c.truth);
  std::cout << "node_ari " << ari(truth.node_labels, f.labels) << '\n';
  if (f.topics) {
    const auto labels = edge_topic_labels(f, PreparedGraph::from(graph));
    std::cout << "edge_ari " << ari(truth.edge_topic_vector(graph), labels) << '\n';
  }
}

int cmd_simulate(const RunConfig& c) {
  require(!c.out.empty(), "simulate needs --out");
  require(c.nodes >= 2, "--nodes must be at least 2");
  const auto scenario = parse_scenario(c.scenario);
  const auto difficulty = parse_difficulty(c.difficulty);
  const auto sim = simulate(scenario, difficulty, static_cast<std::size_t>(c.nodes), c.seed);
  save_dataset(sim.graph, c.out);
  if (!c.truth.empty()) save_truth(sim.truth, c.truth);
  std::cout << "wrote " << c.out << ": " << sim.graph.num_nodes() << " nodes, " << sim.graph.num_edges()
            << " edges\n";
  return 0;
}

int cmd_fit(RunConfig c) {
  require(!c.data.empty(), "fit needs --data");
  require(!c.out.empty(), "fit needs --out");
  require(c.q >= 1, "--q must be at least 1");
  const auto graph = load_dataset(c.data);
  require(static_cast<std::size_t>(c.q) <= graph.num_nodes(), "--q exceeds the number of nodes");
  auto so = selection_options(c, {c.q}, embeddings_for(c, graph));
  so.restarts = c.restarts > 0 ? c.restarts : 1;
  const auto report = select_q(graph, so);
  const auto& f = *report.best_fit.front();
  save_fit(f, c.out);
  report_scores(f, graph, c);
  return 0;
}

int cmd_select(const RunConfig& c) {
  require(!c.data.empty(), "select needs --data");
  const auto graph = load_dataset(c.data);
  auto so = selection_options(c, parse_q_range(c.q_range), embeddings_for(c, graph));
  if (!c.truth.empty()) so.truth = load_truth(c.truth).node_labels;
  const auto report = select_q(graph, so);
  if (c.out.empty()) {
    write_selection(report, std::cout);
  } else {
    auto out = open_out(c.out);
    write_selection(report, out);
  }
  std::cout << "chosen_q " << report.chosen_q << '\n';
  return 0;
}

int cmd_benchmark(const RunConfig& c) {
  std::vector<Scenario> scenarios;
  std::vector<Difficulty> difficulties;
  if (c.scenario == "all") scenarios = {Scenario::A, Scenario::B, Scenario::C};
  else scenarios = {parse_scenario(c.scenario)};
  if (c.difficulty == "all") difficulties = {Difficulty::Easy, Difficulty::Hard1, Difficulty::Hard2};
  else difficulties = {parse_difficulty(c.difficulty)};
  const auto options = benchmark_options(c);
  const auto results = run_benchmark(scenarios, difficulties, options);
  if (!c.out.empty()) {
    auto out = open_out(c.out);
    write_ari_rows(ari_rows(results), out);
  }
  write_summary(summarize(results), std::cout);
  return 0;
}

int cmd_export(const RunConfig& c) {
  require(!c.fit.empty(), "export-metagraph needs --fit");
  require(!c.data.empty(), "export-metagraph needs --data");
  require(!c.out.empty(), "export-metagraph needs --out");
  require(c.top_words >= 1, "--top-words must be at least 1");
  const auto graph = load_dataset(c.data);
  const auto f = load_fit(c.fit);
  const auto prepared = PreparedGraph::from(graph);
  const auto meta = build_meta_graph(f, prepared, c.eval_samples, c.seed);
  const std::filesystem::path dot(c.out);
  {
    auto out = open_out(dot.string());
    write_dot(meta, out);
  }
  auto summary_path = dot;
  summary_path.replace_extension(".csv");
  {
    auto out = open_out(summary_path.string());
    write_meta_summary(meta, out);
  }
  std::cout << "wrote " << dot.string() << " and " << summary_path.string();
  if (f.topics) {
    auto words_path = dot;
    words_path.replace_extension(".topics.txt");
    auto out = open_out(words_path.string());
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(c.top_words), graph.vocab().size());
    const auto tw = top_words(beta_from_embeddings(*f.topics), graph.vocab(), n);
    for (std::size_t k = 0; k < tw.size(); ++k) {
      out << "topic " << k << ':';
      for (const auto& w : tw[k]) out << ' ' << w;
      out << '\n';
    }
    std::cout << " and " << words_path.string();
  }
  std::cout << '\n';
  return 0;
}

int cmd_check(const RunConfig& c) {
  CheckOptions o;
  o.seed = c.seed;
  o.corrupt = c.corrupt;
  const auto items = run_checks(o);
  write_check_report(items, std::cout);
  if (!c.out.empty()) {
    auto out = open_out(c.out);
    write_check_report(items, out);
  }
  bool ok = true;
  for (const auto& it : items) ok = ok && it.passed;
  std::cout << (ok ? "all checks passed\n" : "some checks FAILED\n");
  return ok ? 0 : kRuntimeError;
}

std::optional<std::string> config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--config") == 0 && i + 1 < argc) return argv[i + 1];
    if (std::strncmp(argv[i], "--config=", 9) == 0) return std::string(argv[i] + 9);
  }
  return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();

  RunConfig config;
  std::string config_file;
  try {
    if (const auto path = config_path(argc, argv)) config = load_config(*path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  }

  CLI::App app{"Embedded topics in a stochastic block model"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", config_file, "flat key = value file; flags override it");
  Binder binder(config);
  binder.add(&app, {"seed", "jobs", "out"});

  const auto model_keys = {"model",      "k",          "hidden",       "embedding-dim", "embeddings",
                           "init",       "restarts",   "warm-start",   "max-iter",      "lr-topics",
                           "lr-embeddings", "lr-xi",   "samples",      "eval-samples",  "tolerance",
                           "patience",   "etm-epochs", "etm-min-steps", "etm-restarts", "truth"};

  auto* simulate_cmd = app.add_subcommand("simulate", "sample a scenario network");
  binder.add(simulate_cmd, {"scenario", "difficulty", "nodes", "truth"});
  auto* fit_cmd = app.add_subcommand("fit", "fit ETSBM or the SBM baseline at one Q");
  binder.add(fit_cmd, {"data", "q"});
  binder.add(fit_cmd, model_keys);
  auto* select_cmd = app.add_subcommand("select", "choose Q by the best ELBO over restarts");
  binder.add(select_cmd, {"data", "q-range", "refine-iter"});
  binder.add(select_cmd, model_keys);
  auto* bench_cmd = app.add_subcommand("benchmark", "ARI table over simulated replicates");
  binder.add(bench_cmd, {"scenario", "difficulty", "nodes", "replicates", "models", "k", "hidden",
                         "embedding-dim", "init", "restarts", "warm-start", "max-iter", "lr-topics",
                         "lr-embeddings", "lr-xi", "samples", "eval-samples", "tolerance", "patience",
                         "etm-epochs", "etm-min-steps", "etm-restarts"});
  auto* export_cmd = app.add_subcommand("export-metagraph", "DOT meta-graph, summary and top words");
  binder.add(export_cmd, {"fit", "data", "top-words", "eval-samples"});
  auto* check_cmd = app.add_subcommand("check", "gradient, KL, meta-document and ARI self-tests");
  binder.add(check_cmd, {"corrupt"});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    binder.apply(config);
    require(config.jobs >= 1, "--jobs must be at least 1");
    if (simulate_cmd->parsed()) return cmd_simulate(config);
    if (fit_cmd->parsed()) return cmd_fit(config);
    if (select_cmd->parsed()) return cmd_select(config);
    if (bench_cmd->parsed()) return cmd_benchmark(config);
    if (export_cmd->parsed()) return cmd_export(config);
    if (check_cmd->parsed()) return cmd_check(config);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    for (auto* sub : app.get_subcommands()) std::cerr << sub->help();
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kUsageError;
}
