#include "etsbm/benchmark.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "etsbm/random.hpp"

namespace etsbm {

namespace {

// "etsbm" uses options.init; "etsbm@<strategy>" overrides it.
std::optional<InitStrategy> etsbm_init(const std::string& model, InitStrategy fallback) {
  if (model == "etsbm") return fallback;
  if (model.rfind("etsbm@", 0) == 0) return parse_init(model.substr(6));
  return std::nullopt;
}

void check_models(const BenchmarkOptions& o) {
  for (const auto& m : o.models)
    if (m != "sbm" && m != "etm" && !etsbm_init(m, o.init))
      throw std::invalid_argument("unknown model '" + m + "' (expected etsbm, etsbm@<init>, sbm or etm)");
  if (o.restarts < 1) throw std::invalid_argument("restarts must be at least 1");
  if (o.replicates < 1) throw std::invalid_argument("replicates must be at least 1");
}

struct Stats {
  std::optional<double> mean, sd;
};

Stats stats(const std::vector<double>& x) {
  Stats s;
  if (x.empty()) return s;
  double sum = 0.0;
  for (double v : x) sum += v;
  s.mean = sum / static_cast<double>(x.size());
  double sq = 0.0;
  for (double v : x) sq += (v - *s.mean) * (v - *s.mean);
  s.sd = x.size() > 1 ? std::sqrt(sq / static_cast<double>(x.size() - 1)) : 0.0;
  return s;
}

}  // namespace

const ModelOutcome* ReplicateResult::find(const std::string& model) const {
  for (const auto& m : models)
    if (m.model == model) return &m;
  return nullptr;
}

ReplicateResult run_replicate(Scenario scenario, Difficulty difficulty, int replicate,
                              const BenchmarkOptions& options) {
  check_models(options);
  ReplicateResult res;
  res.scenario = scenario;
  res.difficulty = difficulty;
  res.replicate = replicate;
  res.data_seed = derive_seed(options.seed, {static_cast<std::uint64_t>(scenario),
                                             static_cast<std::uint64_t>(difficulty),
                                             static_cast<std::uint64_t>(replicate)});
  const auto cfg = scenario_params(scenario, difficulty);
  const auto sim = simulate(scenario, difficulty, options.nodes, res.data_seed);
  const auto graph = PreparedGraph::from(sim.graph);
  const auto edge_truth = sim.truth.edge_topic_vector(sim.graph);
  const int Q = cfg.num_clusters;

  FitOptions fit_options = options.fit;
  fit_options.num_clusters = Q;
  fit_options.topic.num_topics = options.num_topics > 0 ? options.num_topics : cfg.num_topics;

  bool need_etm = false;
  for (const auto& m : options.models) {
    const auto init = etsbm_init(m, options.init);
    need_etm = need_etm || m == "etm" ||
               (init && (*init == InitStrategy::Dissimilarity || options.warm_start_topics));
  }
  std::optional<EtmFit> etm;
  std::string etm_error;
  if (need_etm) {
    try {
      EtmOptions eo = options.etm;
      eo.topic = fit_options.topic;
      eo.embeddings = fit_options.embeddings;
      eo.seed = derive_seed(res.data_seed, {1});
      etm = fit_etm(sim.graph, eo);
    } catch (const std::exception& e) {
      etm_error = std::string("ETM: ") + e.what();
    }
  }

  for (const auto& model : options.models) {
    ModelOutcome out;
    out.model = model;
    try {
      if (model == "etm") {
        if (!etm) throw std::runtime_error(etm_error);
        out.edge_ari = ari(edge_truth, edge_topics_from_theta(etm->theta));
        out.ok = true;
        res.models.push_back(std::move(out));
        continue;
      }
      const auto init = etsbm_init(model, options.init);
      const bool text = init.has_value();
      if (text && !etm && need_etm) throw std::runtime_error(etm_error);
      std::optional<FitResult> best;
      std::vector<int> best_init;
      for (int r = 0; r < options.restarts; ++r) {
        const auto rs = static_cast<std::uint64_t>(r);
        const auto init_seed = derive_seed(res.data_seed, {2, rs});
        const Matrix tau0 =
            text ? initial_tau(*init, graph, etm ? &etm->theta : nullptr, Q, init_seed)
                 : init_kmeans_adjacency(graph, Q, init_seed);
        FitOptions fo = fit_options;
        fo.seed = derive_seed(res.data_seed, {3, rs});
        fo.use_text = text;
        if (text && options.warm_start_topics) fo.topic_init = etm->topics;
        auto f = fit(graph, tau0, fo);
        if (options.on_fit) options.on_fit(f);
        if (!best || f.final_elbo.total > best->final_elbo.total) {
          best = std::move(f);
          best_init = row_argmax(tau0);
        }
      }
      out.node_ari = ari(sim.truth.node_labels, best->labels);
      out.init_ari = ari(sim.truth.node_labels, best_init);
      if (text) out.edge_ari = ari(edge_truth, edge_topic_labels(*best, graph));
      out.elbo = best->final_elbo;
      if (options.keep_fits) out.fit = std::move(best);
      out.ok = true;
    } catch (const std::exception& e) {
      out.error = e.what();
    }
    res.models.push_back(std::move(out));
  }
  return res;
}

std::vector<ReplicateResult> run_benchmark(std::span<const Scenario> scenarios,
                                           std::span<const Difficulty> difficulties,
                                           const BenchmarkOptions& options) {
  check_models(options);
  struct Task {
    Scenario s;
    Difficulty d;
    int rep;
  };
  std::vector<Task> tasks;
  for (auto s : scenarios)
    for (auto d : difficulties)
      for (int r = 0; r < options.replicates; ++r) tasks.push_back({s, d, r});
  std::vector<ReplicateResult> results(tasks.size());
  parallel_for(tasks.size(), options.jobs, [&](std::size_t t) {
    results[t] = run_replicate(tasks[t].s, tasks[t].d, tasks[t].rep, options);
  });
  return results;
}

std::vector<AriRow> ari_rows(std::span<const ReplicateResult> results) {
  std::vector<AriRow> rows;
  for (const auto& r : results)
    for (const auto& m : r.models) {
      if (!m.ok) continue;
      rows.push_back({to_string(r.scenario), to_string(r.difficulty), r.data_seed, m.model,
                      m.node_ari, m.edge_ari});
    }
  return rows;
}

std::vector<CellSummary> summarize(std::span<const ReplicateResult> results) {
  std::vector<CellSummary> cells;
  std::vector<std::vector<double>> node, edge;
  for (const auto& r : results)
    for (const auto& m : r.models) {
      std::size_t k = 0;
      while (k < cells.size() && !(cells[k].scenario == to_string(r.scenario) &&
                                   cells[k].difficulty == to_string(r.difficulty) &&
                                   cells[k].model == m.model))
        ++k;
      if (k == cells.size()) {
        CellSummary c;
        c.scenario = to_string(r.scenario);
        c.difficulty = to_string(r.difficulty);
        c.model = m.model;
        cells.push_back(std::move(c));
        node.emplace_back();
        edge.emplace_back();
      }
      if (!m.ok) {
        ++cells[k].failures;
        continue;
      }
      ++cells[k].runs;
      if (m.node_ari) node[k].push_back(*m.node_ari);
      if (m.edge_ari) edge[k].push_back(*m.edge_ari);
    }
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const auto n = stats(node[k]);
    const auto e = stats(edge[k]);
    cells[k].node_mean = n.mean;
    cells[k].node_sd = n.sd;
    cells[k].edge_mean = e.mean;
    cells[k].edge_sd = e.sd;
  }
  return cells;
}

void write_summary(std::span<const CellSummary> cells, std::ostream& out) {
  const auto cell = [](const std::optional<double>& m, const std::optional<double>& s) {
    if (!m) return std::string("-");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f±%.2f", *m, *s);
    return std::string(buf);
  };
  out << "scenario difficulty model runs failures node_ari edge_ari\n";
  for (const auto& c : cells)
    out << c.scenario << ' ' << c.difficulty << ' ' << c.model << ' ' << c.runs << ' ' << c.failures
        << ' ' << cell(c.node_mean, c.node_sd) << ' ' << cell(c.edge_mean, c.edge_sd) << '\n';
}

}  // namespace etsbm
