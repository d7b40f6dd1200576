#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tlmg/corpus/corpus.hpp"
#include "tlmg/numerics/random.hpp"
#include "tlmg/numerics/sparse.hpp"
#include "tlmg/numerics/tensor.hpp"

namespace tlmg::tasg {

/// Window statistics with one window per transaction sentence. A word counts
/// once per window however often it repeats there.
struct CooccurrenceStats {
  std::size_t windows = 0;
  std::vector<std::size_t> word_count;  // indexed by word id
  // Keys (i, j) with i < j; absent pairs never co-occur.
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> pair_count;

  std::size_t joint(std::size_t i, std::size_t j) const;
};

/// Throws DomainError on a corpus without sentences.
CooccurrenceStats count_cooccurrence(std::span<const corpus::AccountCorpus> accounts,
                                     std::size_t vocab_size);

/// PMI(i, j) / -log p(i, j), evaluated with the smaller id first so the
/// value is exactly symmetric. nullopt when the pair never co-occurs; 1 when
/// p(i, j) = 1. Throws DomainError when either word never occurs.
std::optional<double> npmi(const CooccurrenceStats& stats, std::size_t i,
                           std::size_t j);

/// Raw count of `word` in `sentence` times ln(N / df(word)), where N and df
/// come from `stats`. Throws DomainError when df is zero.
double tfidf(const CooccurrenceStats& stats, std::size_t word,
             const corpus::TransactionSentence& sentence);

enum class Mode { npmi, tfidf, npmi_tfidf };

std::string to_string(Mode mode);
// Accepts "npmi", "tfidf", "npmi-tfidf".
Mode parse_mode(const std::string& text);

enum class EdgeKind { word_word, sentence_word };

struct VocabEdge {
  std::size_t u = 0;  // u < v
  std::size_t v = 0;
  double weight = 0.0;
  EdgeKind kind = EdgeKind::word_word;
};

struct SentenceRef {
  std::string account;
  std::size_t index = 0;
};

/// Nodes 0..vocab_size-1 are words; in TF-IDF modes node vocab_size + s is
/// the s-th sentence (accounts in corpus order, sentences in order).
struct VocabGraph {
  Mode mode = Mode::npmi;
  double theta = 0.2;
  std::size_t vocab_size = 0;
  std::vector<SentenceRef> sentences;
  std::vector<VocabEdge> edges;  // sorted by (u, v)

  std::size_t node_count() const { return vocab_size + sentences.size(); }
  // Word nodes with at least one edge.
  std::vector<bool> connected_words() const;
  nn::SparseMatrix normalized_adjacency() const;
};

/// Word-word edges with NPMI > theta and/or sentence-word edges whose TF-IDF,
/// divided by the sentence's largest TF-IDF, exceeds theta. Throws
/// DomainError unless 0 <= theta < 1.
VocabGraph build_graph(std::span<const corpus::AccountCorpus> accounts,
                       std::size_t vocab_size, Mode mode, double theta);

// JSON lines {u, v, weight, kind: "ww" | "sw"}.
void write_edges(const std::filesystem::path& path, const VocabGraph& graph);
// JSON lines {id, token} for words and {id, account, sentence} for sentences.
void write_nodes(const std::filesystem::path& path, const VocabGraph& graph,
                 const corpus::Vocabulary& vocab);

/// Inverse of write_edges/write_nodes.
VocabGraph read_graph(const std::filesystem::path& nodes,
                      const std::filesystem::path& edges, Mode mode, double theta);

/// Two GCN layers with ReLU on one-hot node features:
/// relu(A relu(A W1) W2), A the normalized adjacency.
class SimilarityGcn {
 public:
  SimilarityGcn() = default;
  SimilarityGcn(nn::ParameterStore& store, const std::string& prefix,
                std::size_t nodes, std::size_t hidden, std::size_t out_dim,
                Rng& rng);

  // [nodes, out_dim]; `a_hat` must outlive the returned graph.
  nn::Tensor forward(const nn::SparseMatrix& a_hat) const;
  std::size_t nodes() const { return nodes_; }
  std::size_t out_dim() const { return out_dim_; }

 private:
  std::size_t nodes_ = 0;
  std::size_t out_dim_ = 0;
  nn::Tensor w1_, w2_;
};

/// Glorot-uniform [fan_in, fan_out] matrix.
nn::Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace tlmg::tasg
