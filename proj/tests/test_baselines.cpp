#include <doctest.h>

#include <sstream>

#include "etsbm/baselines.hpp"
#include "etsbm/benchmark.hpp"
#include "etsbm/eval.hpp"
#include "etsbm/initsel.hpp"
#include "etsbm/simulator.hpp"

using namespace etsbm;

namespace {

EtmOptions small_etm(int K) {
  EtmOptions o;
  o.topic = {K, 4, 16};
  o.epochs = 3;
  o.min_steps = 60;
  o.restarts = 1;
  o.theta_samples = 8;
  o.score_samples = 4;
  o.seed = 4;
  return o;
}

}  // namespace

TEST_CASE("etm outputs") {
  const auto sim = simulate(Scenario::A, Difficulty::Easy, 30, 1);
  const auto fit = fit_etm(sim.graph, small_etm(3));
  REQUIRE(fit.theta.rows() == static_cast<Eigen::Index>(sim.graph.num_edges()));
  CHECK(fit.theta.cols() == 3);
  CHECK(fit.theta.minCoeff() >= 0.0);
  CHECK((fit.theta.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK(!fit.elbo_trace.empty());
  CHECK(fit.elbo_trace.back() > fit.elbo_trace.front());
  CHECK(std::isfinite(fit.score));

  const auto again = fit_etm(sim.graph, small_etm(3));
  CHECK(again.theta == fit.theta);
}

TEST_CASE("etm with one topic") {
  const auto sim = simulate(Scenario::A, Difficulty::Easy, 20, 2);
  const auto fit = fit_etm(sim.graph, small_etm(1));
  CHECK(fit.theta == Matrix::Ones(fit.theta.rows(), 1));
  CHECK(edge_topics_from_theta(fit.theta) == std::vector<int>(fit.theta.rows(), 0));
}

TEST_CASE("etm restarts keep the best score") {
  const auto sim = simulate(Scenario::A, Difficulty::Easy, 20, 3);
  auto o = small_etm(2);
  o.restarts = 3;
  const auto fit = fit_etm(sim.graph, o);
  CHECK(fit.restart >= 0);
  CHECK(fit.restart < 3);
  CHECK_THROWS_AS(fit_etm(sim.graph, [&] {
                    auto b = o;
                    b.restarts = 0;
                    return b;
                  }()),
                  std::invalid_argument);
}

TEST_CASE("sbm fit carries no topics") {
  const auto sim = simulate(Scenario::A, Difficulty::Easy, 40, 3);
  Schedule s;
  s.max_iter = 20;
  const auto f = fit_sbm(sim.graph, init_random(40, 3, 2), 3, std::nullopt, s, 1);
  CHECK(f.model == "sbm");
  CHECK(!f.topics.has_value());
  CHECK(f.final_elbo.text == 0.0);
}

TEST_CASE("benchmark summary") {
  ReplicateResult a{Scenario::C, Difficulty::Easy, 0, 1, {}};
  ReplicateResult b{Scenario::C, Difficulty::Easy, 1, 2, {}};
  ModelOutcome m;
  m.model = "etsbm";
  m.ok = true;
  m.node_ari = 0.5;
  m.edge_ari = 1.0;
  a.models.push_back(m);
  m.node_ari = 1.0;
  b.models.push_back(m);
  m.model = "sbm";
  m.ok = false;
  b.models.push_back(m);
  const auto cells = summarize(std::vector<ReplicateResult>{a, b});
  const auto* etsbm = [&]() -> const CellSummary* {
    for (const auto& c : cells)
      if (c.model == "etsbm") return &c;
    return nullptr;
  }();
  REQUIRE(etsbm != nullptr);
  CHECK(etsbm->runs == 2);
  CHECK(*etsbm->node_mean == doctest::Approx(0.75));
  CHECK(*etsbm->node_sd == doctest::Approx(std::sqrt(0.125)));
  CHECK(*etsbm->edge_sd == doctest::Approx(0.0));
  std::ostringstream out;
  write_summary(cells, out);
  CHECK(out.str().find("0.75±0.35") != std::string::npos);
  CHECK(b.find("sbm") != nullptr);
  CHECK(b.find("etm") == nullptr);
}
