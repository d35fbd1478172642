#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "etsbm/corpus.hpp"
#include "etsbm/simulator.hpp"

using namespace etsbm;

namespace {

TextGraph parse(const std::string& text) {
  std::istringstream in(text);
  return read_dataset(in);
}

std::string serialize(const TextGraph& g) {
  std::ostringstream out;
  write_dataset(g, out);
  return out.str();
}

std::size_t error_line(const std::string& text) {
  try {
    parse(text);
  } catch (const DataError& e) {
    return e.line();
  }
  return 0;
}

std::string error_text(const std::string& text) {
  try {
    parse(text);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

// Random valid dataset with edges emitted in shuffled order.
std::string random_dataset(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> m_dist(2, 9), v_dist(2, 12);
  const int M = m_dist(rng), V = v_dist(rng);
  std::ostringstream s;
  s << "M " << M << " V " << V << "\nVOCAB";
  for (int v = 0; v < V; ++v) s << " w" << v;
  s << '\n';
  std::vector<std::string> lines;
  std::bernoulli_distribution link(0.4), use(0.5);
  std::uniform_int_distribution<int> count(1, 9);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j) {
      if (i == j || !link(rng)) continue;
      std::ostringstream l;
      l << "E " << i << ' ' << j;
      bool any = false;
      for (int v = 0; v < V; ++v)
        if (use(rng) || (!any && v == V - 1)) {
          l << ' ' << v << ':' << count(rng);
          any = true;
        }
      lines.push_back(l.str());
    }
  std::shuffle(lines.begin(), lines.end(), rng);
  for (const auto& l : lines) s << l << '\n';
  return s.str();
}

}  // namespace

TEST_CASE("minimal dataset parses") {
  const auto g = parse("M 3 V 2\nVOCAB a b\nE 0 1 0:2\n");
  CHECK(g.num_nodes() == 3);
  CHECK(g.vocab().size() == 2);
  REQUIRE(g.num_edges() == 1);
  CHECK(g.edges()[0].src == 0);
  CHECK(g.edges()[0].dst == 1);
  CHECK(g.edges()[0].counts == std::vector<WordCount>{{0, 2}});
  const auto A = g.adjacency();
  CHECK(A(0, 1) == 1.0);
  CHECK(A.sum() == 1.0);
}

TEST_CASE("dataset errors carry line numbers") {
  CHECK(error_text("M 3 V 2\nVOCAB a b\nE 2 2 0:1\n").find("self-loop") != std::string::npos);
  CHECK(error_line("M 3 V 2\nVOCAB a b\nE 2 2 0:1\n") == 3);
  CHECK(error_line("M 3 V 2\nVOCAB a b\nE 0 1 0:1\nE 1 0 2:1\n") == 4);
  CHECK(error_line("M 3 V 2\nVOCAB a b\nE 0 1 0:1\nE 0 1 1:1\n") == 4);
  CHECK(error_line("M 3 V 2\nVOCAB a b\nE 0 1 1:1 0:1\n") == 3);
  CHECK(error_line("M 3 V 2\nVOCAB a a\n") == 2);
  CHECK(error_line("M 3 V 2\nVOCAB a b\nE 0 5 0:1\n") == 3);
  CHECK(error_line("M 3 V 2\nVOCAB a b\nE 0 1 0:x\n") == 3);
  CHECK_THROWS_AS(parse("garbage\n"), DataError);
}

TEST_CASE("empty edge list round-trips") {
  const auto g = parse("M 1 V 2\nVOCAB a b\n");
  CHECK(g.num_edges() == 0);
  CHECK(serialize(g) == "M 1 V 2\nVOCAB a b\n");
}

TEST_CASE("save/load round trip is canonical on random datasets") {
  std::mt19937_64 rng(42);
  for (int t = 0; t < 20; ++t) {
    const auto text = random_dataset(rng);
    const auto g = parse(text);
    const auto canon = serialize(g);
    const auto g2 = parse(canon);
    CHECK(g2 == g);
    CHECK(serialize(g2) == canon);
    CHECK(g2.count_matrix() == g.count_matrix());
    CHECK(g.adjacency().diagonal().isZero());
  }
}

TEST_CASE("simulated dataset survives a file round trip") {
  const auto sim = simulate(Scenario::A, Difficulty::Easy, 30, 3);
  const auto path = std::filesystem::temp_directory_path() / "etsbm_corpus_roundtrip.txt";
  save_dataset(sim.graph, path);
  const auto back = load_dataset(path);
  CHECK(back.count_matrix() == sim.graph.count_matrix());
  save_dataset(back, path.string() + ".2");
  std::ifstream a(path), b(path.string() + ".2");
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  CHECK(sa.str() == sb.str());
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".2");
}

TEST_CASE("preprocess_tokens") {
  const std::unordered_set<std::string> stop{"the", "it"};
  const std::vector<std::string> raw{"The", "it", "vote", "42", "EU"};
  CHECK(preprocess_tokens(raw, stop, 3) == std::vector<std::string>{"vote"});
  CHECK(preprocess_tokens(std::vector<std::string>{}, stop, 3).empty());
  CHECK(preprocess_tokens(std::vector<std::string>{"THE", "it"}, stop, 1).empty());

  const std::vector<std::string> mixed{"Élection", "3.14", "-7", "abc1", "Vote", "ab", "été"};
  const auto once = preprocess_tokens(mixed, stop, 3);
  // Only ASCII letters are case-folded; length counts code points.
  CHECK(once == std::vector<std::string>{"Élection", "abc1", "vote", "été"});
  CHECK(preprocess_tokens(once, stop, 3) == once);
}

TEST_CASE("embedding loading") {
  const Vocabulary vocab({"a", "b", "c"});
  SUBCASE("full coverage") {
    std::istringstream in("3 4\na 1 2 3 4\nb 5 6 7 8\nc 0 0 0 1\n");
    const auto e = read_embeddings(in, vocab);
    CHECK(e.dim() == 4);
    CHECK(e.loaded_words == 3);
    CHECK(e.values(1, 1) == 6.0);
    CHECK(e.values(3, 2) == 1.0);
  }
  SUBCASE("missing word is seeded") {
    const std::string text = "2 2\nc 1 1\na 2 2\n";
    std::istringstream in1(text), in2(text), in3(text);
    const auto e1 = read_embeddings(in1, vocab, 7);
    const auto e2 = read_embeddings(in2, vocab, 7);
    const auto e3 = read_embeddings(in3, vocab, 8);
    CHECK(e1.loaded_words == 2);
    CHECK(e1.values == e2.values);
    CHECK(e1.values.col(1) != e3.values.col(1));
    CHECK(e1.values.col(0) == Eigen::Vector2d(2, 2));
    CHECK(e1.values.col(1).cwiseAbs().maxCoeff() < 1.0);
  }
  SUBCASE("dimension mismatch") {
    std::istringstream in("2 3\na 1 2 3\nb 1 2\n");
    try {
      read_embeddings(in, vocab);
      FAIL("expected an error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("dimension mismatch") != std::string::npos);
    }
  }
}

TEST_CASE("vocabulary invariants") {
  CHECK_THROWS_AS(Vocabulary({"a"}), DataError);
  CHECK_THROWS_AS(Vocabulary({"a", "a"}), DataError);
  CHECK_THROWS_AS(Vocabulary({"a", "b c"}), DataError);
  const Vocabulary v({"x", "y"});
  CHECK(v.index_of("y") == 1u);
  CHECK_FALSE(v.index_of("z").has_value());
}
