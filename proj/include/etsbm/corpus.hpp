#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>

namespace etsbm {

// Raised for malformed input files and invariant violations. `line()` is the
// 1-based line of the offending record, or 0 when no file locus applies.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what, std::size_t line = 0);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class Vocabulary {
 public:
  Vocabulary() = default;
  // Throws DataError on duplicates, empty or whitespace-bearing tokens, or
  // fewer than two words.
  explicit Vocabulary(std::vector<std::string> words);

  std::size_t size() const noexcept { return words_.size(); }
  const std::string& word(std::size_t index) const { return words_.at(index); }
  const std::vector<std::string>& words() const noexcept { return words_; }
  std::optional<std::size_t> index_of(std::string_view word) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.words_ == b.words_;
  }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct WordCount {
  std::uint32_t word = 0;
  std::uint32_t count = 0;
  friend bool operator==(const WordCount&, const WordCount&) = default;
};

// Bag-of-words for every document sent from `src` to `dst`.
struct EdgeDocument {
  std::size_t src = 0;
  std::size_t dst = 0;
  std::vector<WordCount> counts;  // strictly increasing word index

  std::uint64_t total() const noexcept;
  friend bool operator==(const EdgeDocument&, const EdgeDocument&) = default;
};

// Directed graph without self-loops whose edges carry text. Edges are kept
// sorted by (src, dst); A_ij = 1 iff an EdgeDocument (i, j) exists.
class TextGraph {
 public:
  TextGraph() = default;
  TextGraph(std::size_t num_nodes, Vocabulary vocab, std::vector<EdgeDocument> edges);

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  const Vocabulary& vocab() const noexcept { return vocab_; }
  const std::vector<EdgeDocument>& edges() const noexcept { return edges_; }

  // Dense 0/1 adjacency, M x M.
  Eigen::MatrixXd adjacency() const;
  // Dense E x V count matrix in edge order.
  Eigen::MatrixXd count_matrix() const;

  friend bool operator==(const TextGraph&, const TextGraph&) = default;

 private:
  std::size_t num_nodes_ = 0;
  Vocabulary vocab_;
  std::vector<EdgeDocument> edges_;
};

// Dataset text format:
//   M <int> V <int>
//   VOCAB <w1> ... <wV>
//   E <src> <dst> <widx>:<count> ...      (one per edge, sorted)
TextGraph read_dataset(std::istream& in);
void write_dataset(const TextGraph& graph, std::ostream& out);
TextGraph load_dataset(const std::filesystem::path& path);
void save_dataset(const TextGraph& graph, const std::filesystem::path& path);

// Lowercases, then drops stopwords, purely numeric tokens and tokens with
// fewer than `min_len` characters (UTF-8 code points).
std::vector<std::string> preprocess_tokens(std::span<const std::string> tokens,
                                           const std::unordered_set<std::string>& stopwords,
                                           std::size_t min_len);

struct EmbeddingMatrix {
  Eigen::MatrixXd values;       // L x V, column v embeds word v
  std::size_t loaded_words = 0;  // columns taken from the file

  std::size_t dim() const noexcept { return static_cast<std::size_t>(values.rows()); }
};

// Reads the word-vector text format ("<count> <L>" header, then "<word> <L
// floats>" lines). Vocabulary words absent from the file get N(0, 0.1^2)
// columns drawn from `seed`, in vocabulary order.
EmbeddingMatrix load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                                std::uint64_t seed = 0);
EmbeddingMatrix read_embeddings(std::istream& in, const Vocabulary& vocab, std::uint64_t seed = 0);

}  // namespace etsbm
