#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "tlmg/aig/aig.hpp"
#include "tlmg/error.hpp"
#include "tlmg/numerics/gradcheck.hpp"
#include "tlmg/numerics/ops.hpp"
#include "tlmg/tasg/tasg.hpp"

using namespace tlmg;
using namespace tlmg::tasg;
using corpus::AccountCorpus;
using corpus::TransactionSentence;
using nn::Tensor;

namespace {

constexpr std::size_t A = 5, B = 6, C = 7, D = 8, E = 9, X = 10;

TransactionSentence sentence(std::vector<std::size_t> words) {
  TransactionSentence s;
  for (std::size_t i = 0; i < s.words.size(); ++i) s.words[i] = words[i % words.size()];
  return s;
}

std::vector<AccountCorpus> one_account(std::vector<std::vector<std::size_t>> sentences) {
  AccountCorpus a;
  a.account = "a";
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    a.sentences.push_back(sentence(sentences[i]));
    a.sentences.back().index = i;
  }
  return {a};
}

// {a b}, {a b}, {a c}, {d e}
std::vector<AccountCorpus> four_sentences() {
  return one_account({{A, B}, {A, B}, {A, C}, {D, E}});
}

std::vector<AccountCorpus> random_corpus(Rng& rng, std::size_t max_words) {
  const std::size_t n_sentences = 1 + rng.below(8);
  const std::size_t n_words = 2 + rng.below(max_words - 1);
  std::vector<AccountCorpus> out(1 + rng.below(2));
  for (std::size_t s = 0; s < n_sentences; ++s) {
    TransactionSentence t;
    for (auto& w : t.words) w = corpus::Vocabulary::kReserved + rng.below(n_words);
    auto& a = out[rng.below(out.size())];
    t.index = a.sentences.size();
    a.sentences.push_back(t);
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].account = "acc" + std::to_string(i);
  return out;
}

std::vector<const TransactionSentence*> all_sentences(const std::vector<AccountCorpus>& c) {
  std::vector<const TransactionSentence*> out;
  for (const auto& a : c)
    for (const auto& s : a.sentences) out.push_back(&s);
  return out;
}

bool has(const TransactionSentence& s, std::size_t w) {
  return std::find(s.words.begin(), s.words.end(), w) != s.words.end();
}

// Quadratic scan: for every pair, count sentences containing both, then the
// NPMI formula in the same expression order.
std::optional<double> oracle_npmi(const std::vector<AccountCorpus>& c, std::size_t i,
                                  std::size_t j) {
  const auto sents = all_sentences(c);
  std::size_t ci = 0, cj = 0, cij = 0;
  const std::size_t a = std::min(i, j), b = std::max(i, j);
  for (const auto* s : sents) {
    ci += has(*s, a);
    cj += has(*s, b);
    cij += has(*s, a) && has(*s, b);
  }
  if (cij == 0) return std::nullopt;
  const double n = static_cast<double>(sents.size());
  const double pij = cij / n;
  if (pij == 1.0) return 1.0;
  const double pmi = std::log(pij) - std::log(ci / n) - std::log(cj / n);
  return std::clamp(pmi / -std::log(pij), -1.0, 1.0);
}

double oracle_tfidf(const std::vector<AccountCorpus>& c, std::size_t w,
                    const TransactionSentence& d) {
  const auto sents = all_sentences(c);
  std::size_t df = 0;
  for (const auto* s : sents) df += has(*s, w);
  const double tf = static_cast<double>(std::count(d.words.begin(), d.words.end(), w));
  return tf * std::log(static_cast<double>(sents.size()) / static_cast<double>(df));
}

std::set<std::pair<std::size_t, std::size_t>> edge_set(const VocabGraph& g) {
  std::set<std::pair<std::size_t, std::size_t>> out;
  for (const auto& e : g.edges) out.insert({e.u, e.v});
  return out;
}

// Largest |eigenvalue| of a symmetric matrix by power iteration.
double spectral_radius(const nn::SparseMatrix& m, Rng& rng) {
  std::vector<double> x(m.size()), y(m.size());
  for (auto& v : x) v = rng.uniform(0.1, 1.0);
  double est = 0.0;
  for (int it = 0; it < 2000; ++it) {
    m.multiply(x, 1, y);
    double norm = 0.0, xn = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      norm += y[i] * y[i];
      xn += x[i] * x[i];
    }
    est = std::sqrt(norm / xn);
    if (norm == 0.0) break;
    for (std::size_t i = 0; i < y.size(); ++i) x[i] = y[i] / std::sqrt(norm);
  }
  return est;
}

}  // namespace

TEST(Cooccurrence, WordInEverySentenceHasProbabilityOne) {
  const auto c = one_account({{A, B}, {A, C}, {A}, {A, D}});
  const auto s = count_cooccurrence(c, 12);
  EXPECT_EQ(s.windows, 4u);
  EXPECT_EQ(s.word_count[A], 4u);
  EXPECT_EQ(s.joint(B, C), 0u);
  EXPECT_EQ(s.joint(C, B), 0u);
  EXPECT_EQ(s.joint(A, B), 1u);
}

TEST(Cooccurrence, EmptyCorpusIsAnError) {
  std::vector<AccountCorpus> none(2);
  EXPECT_THROW(count_cooccurrence(none, 12), DomainError);
}

TEST(Cooccurrence, MatchesBruteForceOnRandomCorpora) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = random_corpus(rng, 12);
    const std::size_t v = 5 + 12;
    const auto s = count_cooccurrence(c, v);
    const auto sents = all_sentences(c);
    ASSERT_EQ(s.windows, sents.size());
    for (std::size_t i = 0; i < v; ++i) {
      std::size_t ci = 0;
      for (const auto* t : sents) ci += has(*t, i);
      ASSERT_EQ(s.word_count[i], ci);
      for (std::size_t j = i + 1; j < v; ++j) {
        std::size_t cij = 0;
        for (const auto* t : sents) cij += has(*t, i) && has(*t, j);
        ASSERT_EQ(s.joint(i, j), cij);
        ASSERT_LE(cij, std::min(ci, s.word_count[j]));
      }
    }
  }
}

TEST(Npmi, HandComputedFourSentenceExample) {
  const auto s = count_cooccurrence(four_sentences(), 12);
  EXPECT_NEAR(*npmi(s, A, B), std::log(4.0 / 3.0) / std::log(2.0), 1e-12);
  EXPECT_EQ(*npmi(s, A, B), *oracle_npmi(four_sentences(), A, B));
  EXPECT_FALSE(npmi(s, B, C).has_value());
  EXPECT_THROW(npmi(s, A, 11), DomainError);
}

TEST(Npmi, PerfectAssociationAndIndependence) {
  const auto perfect = count_cooccurrence(one_account({{A, B}, {A, B}, {C}, {D}}), 12);
  EXPECT_EQ(*npmi(perfect, A, B), 1.0);
  const auto indep =
      count_cooccurrence(one_account({{A, B, X}, {A, X}, {B, X}, {X}}), 12);
  EXPECT_NEAR(*npmi(indep, A, B), 0.0, 1e-15);
  const auto everywhere = count_cooccurrence(one_account({{A, B}, {A, B}}), 12);
  EXPECT_EQ(*npmi(everywhere, A, B), 1.0);
}

TEST(Npmi, SymmetricInRangeAndEqualToOracle) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = random_corpus(rng, 12);
    const auto s = count_cooccurrence(c, 17);
    for (std::size_t i = 5; i < 17; ++i) {
      for (std::size_t j = 5; j < 17; ++j) {
        if (i == j || s.word_count[i] == 0 || s.word_count[j] == 0) continue;
        const auto a = npmi(s, i, j), b = npmi(s, j, i), o = oracle_npmi(c, i, j);
        ASSERT_EQ(a.has_value(), o.has_value());
        if (!a) continue;
        ASSERT_EQ(*a, *b);
        ASSERT_EQ(*a, *o);
        ASSERT_GE(*a, -1.0);
        ASSERT_LE(*a, 1.0);
        const bool perfect = s.joint(i, j) == s.word_count[i] && s.joint(i, j) == s.word_count[j];
        ASSERT_EQ(*a == 1.0, perfect);
      }
    }
  }
}

TEST(TfIdf, Examples) {
  std::vector<std::vector<std::size_t>> ten(10, std::vector<std::size_t>{X});
  ten[3] = {A, X, X, X, X, X};
  const auto c = one_account(ten);
  const auto s = count_cooccurrence(c, 12);
  EXPECT_EQ(tfidf(s, X, c[0].sentences[0]), 0.0);
  EXPECT_NEAR(tfidf(s, A, c[0].sentences[3]), std::log(10.0), 1e-15);
  EXPECT_EQ(tfidf(s, A, c[0].sentences[0]), 0.0);
  EXPECT_THROW(tfidf(s, B, c[0].sentences[0]), DomainError);

  const auto twice = one_account({{A, A, B, C, D, E}, {B}});
  const auto s2 = count_cooccurrence(twice, 12);
  EXPECT_EQ(tfidf(s2, A, twice[0].sentences[0]), 2.0 * std::log(2.0));
}

TEST(TfIdf, EqualsOracleAndVanishesForUbiquitousWords) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = random_corpus(rng, 12);
    const auto s = count_cooccurrence(c, 17);
    for (const auto* d : all_sentences(c)) {
      for (std::size_t w = 5; w < 17; ++w) {
        if (s.word_count[w] == 0) continue;
        const double v = tfidf(s, w, *d);
        ASSERT_EQ(v, oracle_tfidf(c, w, *d));
        if (s.word_count[w] == s.windows) {
          ASSERT_EQ(v, 0.0);
        }
      }
    }
  }
}

TEST(BuildGraph, NpmiThresholds) {
  const auto c = four_sentences();
  const auto high = build_graph(c, 12, Mode::npmi, 0.99);
  EXPECT_EQ(edge_set(high), (std::set<std::pair<std::size_t, std::size_t>>{{D, E}}));
  const auto low = build_graph(c, 12, Mode::npmi, 0.2);
  EXPECT_TRUE(edge_set(low).count({A, B}));
  for (const auto& e : low.edges) {
    EXPECT_GT(e.weight, 0.2);
    EXPECT_LE(e.weight, 1.0);
    EXPECT_NE(e.u, e.v);
    EXPECT_EQ(e.kind, EdgeKind::word_word);
  }
  const auto none = build_graph(one_account({{A, B}, {A, C}, {B, C}, {D}}), 12, Mode::npmi, 0.9);
  EXPECT_TRUE(none.edges.empty());
  EXPECT_EQ(none.normalized_adjacency().size(), 12u);
  EXPECT_THROW(build_graph(c, 12, Mode::npmi, 1.0), DomainError);
  EXPECT_THROW(build_graph(c, 12, Mode::npmi, -0.1), DomainError);
}

TEST(BuildGraph, TfIdfIsBipartiteAndNormalised) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = random_corpus(rng, 12);
    const auto g = build_graph(c, 17, Mode::tfidf, 0.2);
    EXPECT_EQ(g.sentences.size(), all_sentences(c).size());
    for (const auto& e : g.edges) {
      ASSERT_EQ(e.kind, EdgeKind::sentence_word);
      ASSERT_LT(e.u, 17u);
      ASSERT_GE(e.v, 17u);
      ASSERT_GT(e.weight, 0.2);
      ASSERT_LE(e.weight, 1.0);
    }
    const auto both = build_graph(c, 17, Mode::npmi_tfidf, 0.2);
    const auto n = build_graph(c, 17, Mode::npmi, 0.2);
    EXPECT_EQ(both.edges.size(), g.edges.size() + n.edges.size());
  }
}

TEST(BuildGraph, RaisingThetaNeverAddsEdges) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = random_corpus(rng, 12);
    for (Mode mode : {Mode::npmi, Mode::tfidf, Mode::npmi_tfidf}) {
      auto prev = edge_set(build_graph(c, 17, mode, 0.0));
      for (int k = 1; k <= 9; ++k) {
        const auto cur = edge_set(build_graph(c, 17, mode, k / 10.0));
        ASSERT_TRUE(std::includes(prev.begin(), prev.end(), cur.begin(), cur.end()));
        prev = cur;
      }
    }
  }
}

TEST(Adjacency, TwoNodeAndSpectralBound) {
  VocabGraph g;
  g.vocab_size = 2;
  g.edges.push_back({0, 1, 1.0, EdgeKind::word_word});
  const auto a = g.normalized_adjacency().dense();
  for (double v : a) EXPECT_DOUBLE_EQ(v, 0.5);

  Rng rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const auto c = random_corpus(rng, 12);
    for (Mode mode : {Mode::npmi, Mode::tfidf}) {
      const auto m = build_graph(c, 17, mode, 0.1).normalized_adjacency();
      EXPECT_TRUE(m.is_symmetric());
      for (double v : m.values()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
      EXPECT_LE(spectral_radius(m, rng), 1.0 + 1e-6);
    }
  }
}

TEST(SimilarityGcn, IsolatedNodeUsesOnlyItsOwnRow) {
  VocabGraph g;
  g.vocab_size = 4;
  g.edges.push_back({0, 1, 0.7, EdgeKind::word_word});
  const auto a_hat = g.normalized_adjacency();
  nn::ParameterStore store;
  Rng rng(7);
  SimilarityGcn gcn(store, "tasg", 4, 5, 3, rng);
  const Tensor out = gcn.forward(a_hat);
  const Tensor w1 = store.get("tasg.w1").tensor, w2 = store.get("tasg.w2").tensor;
  for (std::size_t c = 0; c < 3; ++c) {
    double v = 0.0;
    for (std::size_t k = 0; k < 5; ++k) v += std::max(0.0, w1.at(3, k)) * w2.at(k, c);
    EXPECT_NEAR(out.at(3, c), std::max(0.0, v), 1e-15);
  }
}

TEST(SimilarityGcn, GradientCheck) {
  Rng rng(8);
  const auto c = random_corpus(rng, 8);
  const auto g = build_graph(c, 13, Mode::npmi_tfidf, 0.1);
  const auto a_hat = g.normalized_adjacency();
  nn::ParameterStore store;
  SimilarityGcn gcn(store, "tasg", g.node_count(), 6, 4, rng);
  std::vector<double> head(g.node_count() * 4);
  for (auto& h : head) h = rng.uniform(-1, 1);
  const Tensor weights = Tensor::from({g.node_count(), 4}, head);
  const auto r = nn::check_gradients(
      [&] { return nn::sum(nn::mul(gcn.forward(a_hat), weights)); },
      {store.get("tasg.w1").tensor, store.get("tasg.w2").tensor});
  EXPECT_LE(r.max_relative_error, 1e-4);
}

TEST(TasgExport, EdgesAndNodes) {
  const auto c = four_sentences();
  const auto g = build_graph(c, 12, Mode::npmi_tfidf, 0.2);
  corpus::Vocabulary vocab;
  for (int i = 0; i < 7; ++i) vocab.add("w" + std::to_string(i));
  const auto dir = std::filesystem::temp_directory_path();
  write_edges(dir / "tasg_edges.jsonl", g);
  write_nodes(dir / "tasg_nodes.jsonl", g, vocab);
  std::ifstream in(dir / "tasg_edges.jsonl");
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("u").get<std::size_t>(), g.edges[n].u);
    EXPECT_TRUE(j.at("kind") == "ww" || j.at("kind") == "sw");
    ++n;
  }
  EXPECT_EQ(n, g.edges.size());
  std::ifstream nodes(dir / "tasg_nodes.jsonl");
  n = 0;
  while (std::getline(nodes, line)) ++n;
  EXPECT_EQ(n, g.node_count());
}

// ---------------------------------------------------------------- AIG

using aig::AccountGraph;
using aig::build_account_graph;
using corpus::Transfer;

namespace {

Transfer tx(std::string from, std::string to) { return {std::move(from), std::move(to), 1.0, 1}; }

double edge_weight(const AccountGraph& g, const std::string& a, const std::string& b) {
  const auto i = g.index_of(a), j = g.index_of(b);
  for (const auto& e : g.edges()) {
    if (e.u == std::min(i, j) && e.v == std::max(i, j)) return e.weight;
  }
  return 0.0;
}

}  // namespace

TEST(AccountGraph, CountsAreUndirected) {
  const std::vector<Transfer> log{tx("a", "b"), tx("a", "b"), tx("a", "b"), tx("c", "d"),
                                  tx("d", "c"), tx("e", "e")};
  const auto g = build_account_graph(log);
  EXPECT_EQ(g.accounts(), (std::vector<std::string>{"a", "b", "c", "d", "e"}));
  EXPECT_EQ(edge_weight(g, "a", "b"), 3.0);
  EXPECT_EQ(edge_weight(g, "c", "d"), 2.0);
  EXPECT_EQ(g.edges().size(), 2u);
}

TEST(AccountGraph, MatchesHashCountOracle) {
  Rng rng(9);
  std::vector<Transfer> log;
  const std::vector<std::string> names{"p", "q", "r", "s", "t"};
  for (int i = 0; i < 10; ++i) log.push_back(tx(names[rng.below(5)], names[rng.below(5)]));
  std::unordered_map<std::string, double> oracle;
  for (const auto& t : log) {
    if (t.from == t.to) continue;
    oracle[std::min(t.from, t.to) + "|" + std::max(t.from, t.to)] += 1.0;
  }
  const auto g = build_account_graph(log);
  EXPECT_EQ(g.edges().size(), oracle.size());
  for (const auto& [key, w] : oracle) {
    const auto bar = key.find('|');
    EXPECT_EQ(edge_weight(g, key.substr(0, bar), key.substr(bar + 1)), w) << key;
  }
}

TEST(AccountGraph, NodeFilterAndDeterminism) {
  const std::vector<Transfer> log{tx("a", "b"), tx("b", "x"), tx("c", "a")};
  const std::vector<std::string> nodes{"c", "b", "a"};
  const auto g = build_account_graph(log, &nodes);
  EXPECT_EQ(g.accounts(), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(g.edges().size(), 2u);
  EXPECT_FALSE(g.contains("x"));
  EXPECT_THROW(g.index_of("x"), DomainError);
  const auto h = build_account_graph(log, &nodes);
  EXPECT_EQ(g.normalized_adjacency(true).dense(), h.normalized_adjacency(true).dense());
}

TEST(AccountGraph, NormalizedAdjacencyExamples) {
  const std::vector<Transfer> lone{tx("a", "a")};
  EXPECT_EQ(build_account_graph(lone).normalized_adjacency(false).dense(),
            std::vector<double>{1.0});
  const std::vector<Transfer> once{tx("a", "b")};
  for (bool w : {false, true}) {
    for (double v : build_account_graph(once).normalized_adjacency(w).dense()) {
      EXPECT_DOUBLE_EQ(v, 0.5);
    }
  }
  const std::vector<Transfer> thrice{tx("a", "b"), tx("b", "a"), tx("a", "b")};
  const auto g = build_account_graph(thrice);
  const auto weighted = g.normalized_adjacency(true).dense();
  EXPECT_DOUBLE_EQ(weighted[0], 0.25);
  EXPECT_DOUBLE_EQ(weighted[1], 0.75);
  EXPECT_DOUBLE_EQ(weighted[2], 0.75);
  EXPECT_DOUBLE_EQ(weighted[3], 0.25);
  for (double v : g.normalized_adjacency(false).dense()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(AccountGraph, IsolatedRowIsBasisVector) {
  const std::vector<Transfer> log{tx("a", "b"), tx("c", "c"), tx("b", "d")};
  const auto g = build_account_graph(log);
  const auto& m = g.normalized_adjacency(true);
  EXPECT_TRUE(m.is_symmetric());
  const auto c = g.index_of("c");
  for (std::size_t j = 0; j < g.size(); ++j) EXPECT_EQ(m.at(c, j), j == c ? 1.0 : 0.0);
}

TEST(Gcn, IdentityAdjacencyIsPerNodeMlp) {
  Rng rng(10);
  const auto a_hat = nn::normalized_adjacency(4, {});
  const Tensor h = tasg::glorot(4, 3, rng), w1 = tasg::glorot(3, 5, rng),
               w2 = tasg::glorot(5, 2, rng);
  const Tensor out = aig::gcn_forward(a_hat, h, w1, w2);
  const Tensor mlp = nn::matmul(nn::relu(nn::matmul(h, w1)), w2);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out.data()[i], mlp.data()[i]);
}

TEST(Gcn, ZeroFeaturesGiveZeroOutput) {
  Rng rng(11);
  const std::vector<Transfer> log{tx("a", "b"), tx("b", "c")};
  const auto g = build_account_graph(log);
  const Tensor out = aig::gcn_forward(g.normalized_adjacency(true), Tensor::zeros({3, 4}),
                                      tasg::glorot(4, 5, rng), tasg::glorot(5, 2, rng));
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(aig::gcn_forward(g.normalized_adjacency(true), Tensor::zeros({2, 4}),
                                tasg::glorot(4, 5, rng), tasg::glorot(5, 2, rng)),
               DimensionError);
}

TEST(Gcn, GradientCheckFiveNodes) {
  Rng rng(12);
  const std::vector<Transfer> log{tx("a", "b"), tx("b", "c"), tx("c", "a"), tx("a", "b"),
                                  tx("d", "e"), tx("c", "d")};
  const auto g = build_account_graph(log);
  Tensor h = tasg::glorot(5, 4, rng), w1 = tasg::glorot(4, 6, rng), w2 = tasg::glorot(6, 2, rng);
  for (Tensor* t : {&h, &w1, &w2}) *t = Tensor::from(t->shape(), {t->data().begin(), t->data().end()}, true);
  const std::vector<std::size_t> labels{0, 1, 1, 0, 1};
  const auto r = nn::check_gradients(
      [&] {
        const Tensor z = aig::gcn_forward(g.normalized_adjacency(true), h, w1, w2);
        return nn::neg(nn::mean(nn::pick(nn::log_softmax(z), labels)));
      },
      {h, w1, w2});
  EXPECT_LE(r.max_relative_error, 1e-4);
}

TEST(Gcn, PermutationEquivariant) {
  Rng rng(13);
  const std::vector<std::string> names{"a", "b", "c", "d", "e", "f", "g"};
  std::vector<Transfer> log;
  for (int i = 0; i < 15; ++i) log.push_back(tx(names[rng.below(7)], names[rng.below(7)]));
  const auto g = build_account_graph(log);
  const std::size_t n = g.size();
  const Tensor h = tasg::glorot(n, 4, rng), w1 = tasg::glorot(4, 6, rng),
               w2 = tasg::glorot(6, 3, rng);
  const Tensor out = aig::gcn_forward(g.normalized_adjacency(true), h, w1, w2);

  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    // Node i of the original graph becomes node perm[i].
    std::vector<nn::WeightedEdge> edges;
    for (const auto& e : g.edges()) edges.push_back({perm[e.u], perm[e.v], e.weight});
    const auto a_perm = nn::normalized_adjacency(n, edges);
    std::vector<double> hp(n * 4);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < 4; ++c) hp[perm[i] * 4 + c] = h.at(i, c);
    const Tensor out_p = aig::gcn_forward(a_perm, Tensor::from({n, 4}, hp), w1, w2);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < 3; ++c) {
        // Neighbour sums run in a different order after relabelling.
        EXPECT_NEAR(out_p.at(perm[i], c), out.at(i, c), 1e-14);
      }
    }
  }
}

TEST(AigExport, RoundTrip) {
  const std::vector<Transfer> log{tx("a", "b"), tx("b", "a"), tx("c", "a")};
  const auto g = build_account_graph(log);
  const auto dir = std::filesystem::temp_directory_path();
  aig::write_nodes(dir / "aig_nodes.json", g);
  aig::write_edges(dir / "aig_edges.jsonl", g);
  const auto back = aig::read_graph(dir / "aig_nodes.json", dir / "aig_edges.jsonl");
  EXPECT_EQ(back.accounts(), g.accounts());
  ASSERT_EQ(back.edges().size(), g.edges().size());
  for (std::size_t i = 0; i < g.edges().size(); ++i) {
    EXPECT_EQ(back.edges()[i].weight, g.edges()[i].weight);
  }
  EXPECT_THROW(aig::read_graph(dir / "missing.json", dir / "aig_edges.jsonl"),
               MissingArtifactError);
}
