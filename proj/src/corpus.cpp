#include "etsbm/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <tuple>

#include "etsbm/random.hpp"

namespace etsbm {

DataError::DataError(const std::string& what, std::size_t line)
    : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
      line_(line) {}

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  if (words_.size() < 2) throw DataError("vocabulary needs at least 2 words");
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    const auto& w = words_[i];
    if (w.empty()) throw DataError("empty vocabulary token");
    if (std::any_of(w.begin(), w.end(), [](unsigned char c) { return std::isspace(c); }))
      throw DataError("vocabulary token contains whitespace: '" + w + "'");
    if (!index_.emplace(w, i).second) throw DataError("duplicate vocabulary token '" + w + "'");
  }
}

std::optional<std::size_t> Vocabulary::index_of(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t EdgeDocument::total() const noexcept {
  std::uint64_t t = 0;
  for (const auto& wc : counts) t += wc.count;
  return t;
}

TextGraph::TextGraph(std::size_t num_nodes, Vocabulary vocab, std::vector<EdgeDocument> edges)
    : num_nodes_(num_nodes), vocab_(std::move(vocab)), edges_(std::move(edges)) {
  const std::size_t V = vocab_.size();
  for (auto& e : edges_) {
    if (e.src >= num_nodes_ || e.dst >= num_nodes_)
      throw DataError("edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) +
                      ") references a node >= M");
    if (e.src == e.dst) throw DataError("self-loop on node " + std::to_string(e.src));
    std::sort(e.counts.begin(), e.counts.end(),
              [](const WordCount& a, const WordCount& b) { return a.word < b.word; });
    for (std::size_t k = 0; k < e.counts.size(); ++k) {
      if (e.counts[k].word >= V)
        throw DataError("word index " + std::to_string(e.counts[k].word) + " >= V");
      if (e.counts[k].count == 0) throw DataError("zero word count");
      if (k > 0 && e.counts[k].word == e.counts[k - 1].word)
        throw DataError("repeated word index " + std::to_string(e.counts[k].word));
    }
    if (e.counts.empty()) throw DataError("edge document without words");
  }
  std::sort(edges_.begin(), edges_.end(), [](const EdgeDocument& a, const EdgeDocument& b) {
    return std::tie(a.src, a.dst) < std::tie(b.src, b.dst);
  });
  for (std::size_t k = 1; k < edges_.size(); ++k) {
    if (edges_[k].src == edges_[k - 1].src && edges_[k].dst == edges_[k - 1].dst)
      throw DataError("duplicate edge (" + std::to_string(edges_[k].src) + "," +
                      std::to_string(edges_[k].dst) + ")");
  }
}

Eigen::MatrixXd TextGraph::adjacency() const {
  const auto M = static_cast<Eigen::Index>(num_nodes_);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(M, M);
  for (const auto& e : edges_) a(e.src, e.dst) = 1.0;
  return a;
}

Eigen::MatrixXd TextGraph::count_matrix() const {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(edges_.size()),
                                            static_cast<Eigen::Index>(vocab_.size()));
  for (std::size_t k = 0; k < edges_.size(); ++k)
    for (const auto& wc : edges_[k].counts) c(k, wc.word) = wc.count;
  return c;
}

namespace {

template <typename T>
T parse_number(std::string_view tok, std::size_t line, const char* what) {
  T value{};
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw DataError(std::string("cannot parse ") + what + " '" + std::string(tok) + "'", line);
  return value;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

TextGraph read_dataset(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!split_ws(line).empty()) return true;
    }
    return false;
  };

  if (!next_line()) throw DataError("empty dataset file");
  auto head = split_ws(line);
  if (head.size() != 4 || head[0] != "M" || head[2] != "V")
    throw DataError("expected header 'M <int> V <int>'", lineno);
  const auto M = parse_number<std::size_t>(head[1], lineno, "node count");
  const auto V = parse_number<std::size_t>(head[3], lineno, "vocabulary size");

  if (!next_line()) throw DataError("missing VOCAB line", lineno + 1);
  auto voc = split_ws(line);
  if (voc.empty() || voc[0] != "VOCAB") throw DataError("expected VOCAB line", lineno);
  if (voc.size() - 1 != V)
    throw DataError("VOCAB lists " + std::to_string(voc.size() - 1) + " words, header says " +
                        std::to_string(V),
                    lineno);
  std::vector<std::string> words(voc.begin() + 1, voc.end());
  Vocabulary vocab = [&] {
    try {
      return Vocabulary(std::move(words));
    } catch (const DataError& e) {
      throw DataError(e.what(), lineno);
    }
  }();

  std::vector<EdgeDocument> edges;
  std::vector<std::size_t> edge_lines;
  while (next_line()) {
    auto toks = split_ws(line);
    if (toks[0] != "E") throw DataError("unknown record '" + std::string(toks[0]) + "'", lineno);
    if (toks.size() < 4) throw DataError("edge record needs src, dst and at least one word", lineno);
    EdgeDocument e;
    e.src = parse_number<std::size_t>(toks[1], lineno, "source node");
    e.dst = parse_number<std::size_t>(toks[2], lineno, "target node");
    if (e.src >= M || e.dst >= M) throw DataError("node index >= M", lineno);
    if (e.src == e.dst) throw DataError("self-loop on node " + std::to_string(e.src), lineno);
    for (std::size_t k = 3; k < toks.size(); ++k) {
      auto colon = toks[k].find(':');
      if (colon == std::string_view::npos)
        throw DataError("expected <widx>:<count>, got '" + std::string(toks[k]) + "'", lineno);
      WordCount wc;
      wc.word = parse_number<std::uint32_t>(toks[k].substr(0, colon), lineno, "word index");
      wc.count = parse_number<std::uint32_t>(toks[k].substr(colon + 1), lineno, "word count");
      if (wc.word >= V) throw DataError("word index " + std::to_string(wc.word) + " >= V", lineno);
      if (wc.count == 0) throw DataError("zero word count", lineno);
      if (!e.counts.empty() && wc.word <= e.counts.back().word)
        throw DataError("word indices must be strictly increasing", lineno);
      e.counts.push_back(wc);
    }
    edges.push_back(std::move(e));
    edge_lines.push_back(lineno);
  }

  // Duplicate ordered pairs are reported at the second occurrence.
  std::vector<std::size_t> order(edges.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(edges[a].src, edges[a].dst) < std::tie(edges[b].src, edges[b].dst);
  });
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto& a = edges[order[k - 1]];
    const auto& b = edges[order[k]];
    if (a.src == b.src && a.dst == b.dst)
      throw DataError("duplicate edge (" + std::to_string(b.src) + "," + std::to_string(b.dst) + ")",
                      std::max(edge_lines[order[k - 1]], edge_lines[order[k]]));
  }
  return TextGraph(M, std::move(vocab), std::move(edges));
}

void write_dataset(const TextGraph& graph, std::ostream& out) {
  out << "M " << graph.num_nodes() << " V " << graph.vocab().size() << '\n';
  out << "VOCAB";
  for (const auto& w : graph.vocab().words()) out << ' ' << w;
  out << '\n';
  for (const auto& e : graph.edges()) {
    out << "E " << e.src << ' ' << e.dst;
    for (const auto& wc : e.counts) out << ' ' << wc.word << ':' << wc.count;
    out << '\n';
  }
}

TextGraph load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  return read_dataset(in);
}

void save_dataset(const TextGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset '" + path.string() + "'");
  write_dataset(graph, out);
  if (!out) throw std::runtime_error("I/O failure writing '" + path.string() + "'");
}

namespace {

bool is_numeric_token(const std::string& t) {
  bool digit = false;
  for (unsigned char c : t) {
    if (std::isdigit(c)) {
      digit = true;
    } else if (c != '.' && c != ',' && c != '-' && c != '+') {
      return false;
    }
  }
  return digit;
}

std::size_t utf8_length(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

}  // namespace

std::vector<std::string> preprocess_tokens(std::span<const std::string> tokens,
                                           const std::unordered_set<std::string>& stopwords,
                                           std::size_t min_len) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& raw : tokens) {
    std::string t = raw;
    for (auto& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (t.empty() || stopwords.contains(t) || is_numeric_token(t) || utf8_length(t) < min_len)
      continue;
    out.push_back(std::move(t));
  }
  return out;
}

EmbeddingMatrix read_embeddings(std::istream& in, const Vocabulary& vocab, std::uint64_t seed) {
  std::string line;
  std::size_t lineno = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!split_ws(line).empty()) break;
  }
  auto head = split_ws(line);
  if (head.size() != 2) throw DataError("expected embedding header '<count> <L>'", lineno);
  parse_number<std::size_t>(head[0], lineno, "word count");
  dim = parse_number<std::size_t>(head[1], lineno, "embedding dimension");
  if (dim == 0) throw DataError("embedding dimension must be positive", lineno);

  const auto V = static_cast<Eigen::Index>(vocab.size());
  EmbeddingMatrix emb;
  emb.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), V);
  std::vector<bool> seen(vocab.size(), false);
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() - 1 != dim)
      throw DataError("dimension mismatch: expected " + std::to_string(dim) + " values, got " +
                          std::to_string(toks.size() - 1),
                      lineno);
    auto idx = vocab.index_of(toks[0]);
    if (!idx || seen[*idx]) continue;
    for (std::size_t l = 0; l < dim; ++l) {
      double v = parse_number<double>(toks[l + 1], lineno, "embedding value");
      if (!std::isfinite(v)) throw DataError("non-finite embedding value", lineno);
      emb.values(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(*idx)) = v;
    }
    seen[*idx] = true;
    ++emb.loaded_words;
  }

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 0.1);
  for (Eigen::Index v = 0; v < V; ++v) {
    if (seen[static_cast<std::size_t>(v)]) continue;
    for (Eigen::Index l = 0; l < emb.values.rows(); ++l) emb.values(l, v) = normal(rng);
  }
  return emb;
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                                std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file '" + path.string() + "'");
  return read_embeddings(in, vocab, seed);
}

}  // namespace etsbm
