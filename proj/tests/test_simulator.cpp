#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "etsbm/simulator.hpp"

using namespace etsbm;

TEST_CASE("scenario parameters") {
  const auto a = scenario_params(Scenario::A, Difficulty::Easy);
  CHECK(a.num_clusters == 3);
  CHECK(a.num_topics == 4);
  for (int q = 0; q < 3; ++q)
    for (int r = 0; r < 3; ++r) {
      CHECK(a.connection(q, r) == (q == r ? 0.25 : 0.01));
      CHECK(a.topic_assignment(q, r) == (q == r ? q : 3));
    }

  const auto b = scenario_params(Scenario::B, Difficulty::Easy);
  CHECK(b.num_clusters == 2);
  CHECK((b.connection.array() == 0.25).all());
  CHECK(b.topic_assignment(0, 0) == 0);
  CHECK(b.topic_assignment(1, 1) == 1);
  CHECK(b.topic_assignment(0, 1) == 2);
  CHECK(b.topic_assignment(1, 0) == 2);

  const auto c = scenario_params(Scenario::C, Difficulty::Hard2);
  CHECK(c.num_clusters == 4);
  CHECK(c.connection(0, 0) == 0.1);
  CHECK(c.connection(2, 3) == 0.1);
  CHECK(c.connection(0, 1) == 0.01);
  CHECK(c.zeta == 0.7);
  CHECK(c.mean_text_len == 110.0);

  const auto h1 = scenario_params(Scenario::A, Difficulty::Hard1);
  CHECK(h1.connection(0, 1) == 0.2);
  CHECK(h1.connection(0, 0) == 0.25);
  CHECK(h1.zeta == 0.0);

  for (auto s : {Scenario::A, Scenario::B, Scenario::C})
    for (auto d : {Difficulty::Easy, Difficulty::Hard1, Difficulty::Hard2}) {
      const auto cfg = scenario_params(s, d);
      CHECK_NOTHROW(cfg.validate());
      CHECK(std::abs(cfg.proportions.sum() - 1.0) < 1e-15);
    }
  CHECK_THROWS(parse_scenario("D"));
  CHECK(parse_difficulty("Hard2") == Difficulty::Hard2);
}

TEST_CASE("apply_noise") {
  const Eigen::Vector3d star(1, 0, 0);
  CHECK(apply_noise(star, 0.0) == star);
  const auto n = apply_noise(star, 0.7);
  CHECK(n(0) == doctest::Approx(0.3 + 0.7 / 3).epsilon(1e-14));
  CHECK(n(1) == doctest::Approx(0.7 / 3).epsilon(1e-14));
  CHECK(std::abs(n.sum() - 1.0) < 1e-12);
  const auto u = apply_noise(Eigen::Vector3d(0.2, 0.5, 0.3), 1.0);
  CHECK((u.array() - 1.0 / 3).abs().maxCoeff() < 1e-15);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unif;
  for (int t = 0; t < 100; ++t) {
    Eigen::VectorXd x(5);
    for (int k = 0; k < 5; ++k) x(k) = unif(rng);
    x /= x.sum();
    const double z = unif(rng);
    const auto y = apply_noise(x, z);
    CHECK(std::abs(y.sum() - 1.0) < 1e-12);
    CHECK(y.minCoeff() >= z / 5 - 1e-15);
  }
}

TEST_CASE("builtin topics") {
  const auto t = builtin_topics(4, 100, 9);
  CHECK(t.vocab.size() == 400);
  for (int k = 0; k < 4; ++k) {
    CHECK(std::abs(t.word_dist.row(k).sum() - 1.0) < 1e-12);
    CHECK(t.word_dist.row(k).segment(100 * k, 100).sum() >= 0.95);
  }
  CHECK(builtin_topics(4, 100, 9).word_dist == t.word_dist);
  CHECK(builtin_topics(4, 100, 10).word_dist != t.word_dist);
  const auto leaky = builtin_topics(3, 10, 1, 0.04);
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(leaky.word_dist.row(k).sum() - 1.0) < 1e-12);
    CHECK(leaky.word_dist.row(k).segment(10 * k, 10).sum() == doctest::Approx(0.96));
  }
}

TEST_CASE("sampled networks") {
  SUBCASE("determinism and no self-loops") {
    const auto a = simulate(Scenario::C, Difficulty::Easy, 60, 5);
    const auto b = simulate(Scenario::C, Difficulty::Easy, 60, 5);
    CHECK(a.graph == b.graph);
    CHECK(a.truth.node_labels == b.truth.node_labels);
    CHECK(a.graph.adjacency().diagonal().isZero());
    CHECK(a.truth.edge_topics.size() == a.graph.num_edges());
  }

  SUBCASE("scenario B density") {
    double total = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto sim = simulate(Scenario::B, Difficulty::Easy, 100, s);
      const double density = static_cast<double>(sim.graph.num_edges()) / (100.0 * 99.0);
      CHECK(std::abs(density - 0.25) < 0.05);
      total += density;
    }
    CHECK(std::abs(total / 10 - 0.25) < 0.01);
  }

  SUBCASE("block densities within 3 binomial sd") {
    const auto cfg = scenario_params(Scenario::C, Difficulty::Easy);
    const auto sim = simulate(Scenario::C, Difficulty::Easy, 100, 11);
    const auto A = sim.graph.adjacency();
    const auto& l = sim.truth.node_labels;
    Eigen::MatrixXd links = Eigen::MatrixXd::Zero(4, 4), pairs = Eigen::MatrixXd::Zero(4, 4);
    for (int i = 0; i < 100; ++i)
      for (int j = 0; j < 100; ++j) {
        if (i == j) continue;
        links(l[i], l[j]) += A(i, j);
        pairs(l[i], l[j]) += 1.0;
      }
    for (int q = 0; q < 4; ++q)
      for (int r = 0; r < 4; ++r) {
        const double p = cfg.connection(q, r);
        const double n = pairs(q, r);
        if (n == 0) continue;
        CHECK(std::abs(links(q, r) - n * p) <= 3.0 * std::sqrt(n * p * (1 - p)) + 1.0);
      }
  }

  SUBCASE("word support lies in the assigned topic block") {
    for (auto s : {Scenario::A, Scenario::B, Scenario::C}) {
      const auto sim = simulate(s, Difficulty::Easy, 40, 2);
      const auto topics = sim.truth.edge_topic_vector(sim.graph);
      for (std::size_t e = 0; e < sim.graph.num_edges(); ++e) {
        CHECK(sim.graph.edges()[e].total() >= 1);
        for (const auto& wc : sim.graph.edges()[e].counts)
          CHECK(static_cast<int>(wc.word) / 100 == topics[e]);
      }
    }
  }

  SUBCASE("truth file round trip") {
    const auto sim = simulate(Scenario::A, Difficulty::Hard2, 20, 1);
    std::stringstream io;
    write_truth(sim.truth, io);
    const auto back = read_truth(io);
    CHECK(back.node_labels == sim.truth.node_labels);
    CHECK(back.edge_topics == sim.truth.edge_topics);
  }
}
