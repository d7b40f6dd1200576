#include "tlmg/tasg/tasg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "tlmg/error.hpp"
#include "tlmg/numerics/ops.hpp"

namespace tlmg::tasg {

using nn::Tensor;

std::size_t CooccurrenceStats::joint(std::size_t i, std::size_t j) const {
  if (i == j) return word_count.at(i);
  auto it = pair_count.find({std::min(i, j), std::max(i, j)});
  return it == pair_count.end() ? 0 : it->second;
}

CooccurrenceStats count_cooccurrence(std::span<const corpus::AccountCorpus> accounts,
                                     std::size_t vocab_size) {
  CooccurrenceStats s;
  s.word_count.assign(vocab_size, 0);
  std::vector<std::size_t> present;
  for (const auto& a : accounts) {
    for (const auto& sentence : a.sentences) {
      present.assign(sentence.words.begin(), sentence.words.end());
      std::sort(present.begin(), present.end());
      present.erase(std::unique(present.begin(), present.end()), present.end());
      for (std::size_t x = 0; x < present.size(); ++x) {
        if (present[x] >= vocab_size) {
          throw DomainError("count_cooccurrence: word id " + std::to_string(present[x]) +
                            " outside vocabulary");
        }
        ++s.word_count[present[x]];
        for (std::size_t y = x + 1; y < present.size(); ++y) {
          ++s.pair_count[{present[x], present[y]}];
        }
      }
      ++s.windows;
    }
  }
  if (s.windows == 0) throw DomainError("count_cooccurrence: corpus has no sentences");
  return s;
}

std::optional<double> npmi(const CooccurrenceStats& stats, std::size_t i,
                           std::size_t j) {
  const std::size_t a = std::min(i, j), b = std::max(i, j);
  if (stats.word_count.at(a) == 0 || stats.word_count.at(b) == 0) {
    throw DomainError("npmi: word never occurs");
  }
  const std::size_t joint = stats.joint(a, b);
  if (joint == 0) return std::nullopt;
  const double n = static_cast<double>(stats.windows);
  const double pij = static_cast<double>(joint) / n;
  if (pij == 1.0) return 1.0;
  const double pa = static_cast<double>(stats.word_count[a]) / n;
  const double pb = static_cast<double>(stats.word_count[b]) / n;
  const double pmi = std::log(pij) - std::log(pa) - std::log(pb);
  return std::clamp(pmi / -std::log(pij), -1.0, 1.0);
}

double tfidf(const CooccurrenceStats& stats, std::size_t word,
             const corpus::TransactionSentence& sentence) {
  const std::size_t df = word < stats.word_count.size() ? stats.word_count[word] : 0;
  if (df == 0) throw DomainError("tfidf: word absent from corpus");
  const auto tf = std::count(sentence.words.begin(), sentence.words.end(), word);
  return static_cast<double>(tf) *
         std::log(static_cast<double>(stats.windows) / static_cast<double>(df));
}

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::npmi: return "npmi";
    case Mode::tfidf: return "tfidf";
    case Mode::npmi_tfidf: return "npmi-tfidf";
  }
  return "npmi";
}

Mode parse_mode(const std::string& text) {
  if (text == "npmi") return Mode::npmi;
  if (text == "tfidf") return Mode::tfidf;
  if (text == "npmi-tfidf") return Mode::npmi_tfidf;
  throw ConfigError("unknown TASG mode '" + text + "'");
}

std::vector<bool> VocabGraph::connected_words() const {
  std::vector<bool> out(vocab_size, false);
  for (const auto& e : edges) {
    if (e.u < vocab_size) out[e.u] = true;
    if (e.v < vocab_size) out[e.v] = true;
  }
  return out;
}

nn::SparseMatrix VocabGraph::normalized_adjacency() const {
  std::vector<nn::WeightedEdge> w;
  w.reserve(edges.size());
  for (const auto& e : edges) w.push_back({e.u, e.v, e.weight});
  return nn::normalized_adjacency(node_count(), w);
}

VocabGraph build_graph(std::span<const corpus::AccountCorpus> accounts,
                       std::size_t vocab_size, Mode mode, double theta) {
  if (!(theta >= 0.0 && theta < 1.0)) {
    throw DomainError("build_graph: theta must lie in [0, 1)");
  }
  const CooccurrenceStats stats = count_cooccurrence(accounts, vocab_size);
  VocabGraph g;
  g.mode = mode;
  g.theta = theta;
  g.vocab_size = vocab_size;

  if (mode != Mode::tfidf) {
    for (const auto& [key, count] : stats.pair_count) {
      const auto score = npmi(stats, key.first, key.second);
      if (score && *score > theta) {
        g.edges.push_back({key.first, key.second, *score, EdgeKind::word_word});
      }
    }
  }
  if (mode != Mode::npmi) {
    std::vector<std::pair<std::size_t, double>> scores;
    for (const auto& a : accounts) {
      for (std::size_t s = 0; s < a.sentences.size(); ++s) {
        const std::size_t node = vocab_size + g.sentences.size();
        g.sentences.push_back({a.account, s});
        const auto& sentence = a.sentences[s];
        std::vector<std::size_t> words(sentence.words.begin(), sentence.words.end());
        std::sort(words.begin(), words.end());
        words.erase(std::unique(words.begin(), words.end()), words.end());
        scores.clear();
        double top = 0.0;
        for (auto w : words) {
          const double v = tfidf(stats, w, sentence);
          scores.emplace_back(w, v);
          top = std::max(top, v);
        }
        if (top <= 0.0) continue;
        for (const auto& [w, v] : scores) {
          const double normalized = v / top;
          if (normalized > theta) {
            g.edges.push_back({w, node, normalized, EdgeKind::sentence_word});
          }
        }
      }
    }
  }
  std::sort(g.edges.begin(), g.edges.end(), [](const VocabEdge& x, const VocabEdge& y) {
    return std::tie(x.u, x.v) < std::tie(y.u, y.v);
  });
  return g;
}

void write_edges(const std::filesystem::path& path, const VocabGraph& graph) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& e : graph.edges) {
    nlohmann::ordered_json j{{"u", e.u},
                             {"v", e.v},
                             {"weight", e.weight},
                             {"kind", e.kind == EdgeKind::word_word ? "ww" : "sw"}};
    out << j.dump() << '\n';
  }
}

void write_nodes(const std::filesystem::path& path, const VocabGraph& graph,
                 const corpus::Vocabulary& vocab) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (std::size_t i = 0; i < graph.vocab_size; ++i) {
    out << nlohmann::ordered_json{{"id", i}, {"token", vocab.token(i)}}.dump() << '\n';
  }
  for (std::size_t s = 0; s < graph.sentences.size(); ++s) {
    out << nlohmann::ordered_json{{"id", graph.vocab_size + s},
                                  {"account", graph.sentences[s].account},
                                  {"sentence", graph.sentences[s].index}}
               .dump()
        << '\n';
  }
}

VocabGraph read_graph(const std::filesystem::path& nodes,
                      const std::filesystem::path& edges, Mode mode, double theta) {
  std::ifstream in_nodes(nodes);
  if (!in_nodes) throw MissingArtifactError(nodes.string());
  std::ifstream in_edges(edges);
  if (!in_edges) throw MissingArtifactError(edges.string());
  VocabGraph g;
  g.mode = mode;
  g.theta = theta;
  std::string line;
  std::size_t expected = 0;
  while (std::getline(in_nodes, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (j.at("id").get<std::size_t>() != expected++) {
      throw ParseError(nodes.string() + ": node ids must be consecutive");
    }
    if (j.contains("token")) {
      if (!g.sentences.empty()) throw ParseError(nodes.string() + ": word after sentence node");
      ++g.vocab_size;
    } else {
      g.sentences.push_back({j.at("account").get<std::string>(),
                             j.at("sentence").get<std::size_t>()});
    }
  }
  while (std::getline(in_edges, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    VocabEdge e{j.at("u").get<std::size_t>(), j.at("v").get<std::size_t>(),
                j.at("weight").get<double>(),
                j.at("kind") == "ww" ? EdgeKind::word_word : EdgeKind::sentence_word};
    if (e.u >= e.v || e.v >= g.node_count()) throw ParseError(edges.string() + ": bad edge");
    g.edges.push_back(e);
  }
  return g;
}

Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(fan_in * fan_out);
  for (auto& x : v) x = rng.uniform(-limit, limit);
  return Tensor::from({fan_in, fan_out}, std::move(v));
}

SimilarityGcn::SimilarityGcn(nn::ParameterStore& store, const std::string& prefix,
                             std::size_t nodes, std::size_t hidden,
                             std::size_t out_dim, Rng& rng)
    : nodes_(nodes), out_dim_(out_dim) {
  w1_ = store.add(prefix + ".w1", glorot(nodes, hidden, rng));
  w2_ = store.add(prefix + ".w2", glorot(hidden, out_dim, rng));
}

Tensor SimilarityGcn::forward(const nn::SparseMatrix& a_hat) const {
  if (a_hat.size() != nodes_) {
    throw DimensionError("similarity GCN: built for " + std::to_string(nodes_) +
                         " nodes, adjacency has " + std::to_string(a_hat.size()));
  }
  // One-hot features make the first product A I W1 = A W1.
  const Tensor h1 = nn::relu(nn::spmm(a_hat, w1_));
  return nn::relu(nn::spmm(a_hat, nn::matmul(h1, w2_)));
}

}  // namespace tlmg::tasg
