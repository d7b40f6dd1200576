#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "tlmg/corpus/corpus.hpp"
#include "tlmg/error.hpp"
#include "tlmg/numerics/random.hpp"

using namespace tlmg;
using namespace tlmg::corpus;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = std::filesystem::temp_directory_path() /
            ("tlmg_corpus_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
             "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::filesystem::path write(const std::string& name, const std::string& text) const {
    auto p = path_ / name;
    std::ofstream(p) << text;
    return p;
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

constexpr double kEth = 1e18;

}  // namespace

TEST(Ingest, OutflowsForSender) {
  TempDir dir;
  auto tx = dir.write("tx.csv",
                      "from,to,value_wei,timestamp\n"
                      "0xA,0xb,1000000000000000000,100\n"
                      "0xA,0xc,2000000000000000000,200\n"
                      "0xA,0xd,3,300\n");
  auto labels = dir.write("labels.csv", "address,label\n0xa,phisher\n");
  auto out = ingest(tx, labels);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].account, "0xa");
  EXPECT_EQ(out[0].label, Label::phisher);
  ASSERT_EQ(out[0].transactions.size(), 3u);
  for (const auto& t : out[0].transactions) EXPECT_EQ(t.direction, Direction::outflow);
}

TEST(Ingest, BothSidesGetARecord) {
  std::vector<Transfer> t{{"a", "b", 5, 10}};
  auto out = ingest(t, {{"a", Label::normal}, {"b", Label::phisher}});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].transactions[0].direction, Direction::outflow);
  EXPECT_EQ(out[1].transactions[0].direction, Direction::inflow);
  EXPECT_EQ(out[1].transactions[0].counterparty, "a");
}

TEST(Ingest, KeepsMostRecentHundred) {
  std::vector<Transfer> t;
  for (int i = 0; i < 150; ++i) t.push_back({"a", "x" + std::to_string(i), 1, 1000 + 150 - i});
  auto out = ingest(t, {{"a", Label::normal}});
  ASSERT_EQ(out[0].transactions.size(), 100u);
  EXPECT_EQ(out[0].transactions.front().timestamp, 1051);
  EXPECT_EQ(out[0].transactions.back().timestamp, 1150);
}

TEST(Ingest, TruncationKeepsLatestTimestamps) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Transfer> t;
    const int n = 1 + static_cast<int>(rng.below(40));
    for (int i = 0; i < n; ++i) {
      t.push_back({"a", "b", 1, 1 + static_cast<std::int64_t>(rng.below(30))});
    }
    IngestOptions opt;
    opt.max_transactions = 1 + rng.below(20);
    auto kept = ingest(t, {{"a", Label::normal}}, opt)[0].transactions;
    std::multiset<std::int64_t> all;
    for (const auto& x : t) all.insert(x.timestamp);
    for (const auto& x : kept) all.erase(all.find(x.timestamp));
    if (!all.empty()) {
      EXPECT_GE(kept.front().timestamp, *all.rbegin());
    }
    EXPECT_TRUE(std::is_sorted(kept.begin(), kept.end(), [](auto& l, auto& r) {
      return l.timestamp < r.timestamp;
    }));
  }
}

TEST(Ingest, TiesKeepFilePosition) {
  std::vector<Transfer> t{{"a", "first", 1, 50}, {"a", "second", 1, 50}, {"a", "early", 1, 10}};
  auto tx = ingest(t, {{"a", Label::normal}})[0].transactions;
  EXPECT_EQ(tx[0].counterparty, "early");
  EXPECT_EQ(tx[1].counterparty, "first");
  EXPECT_EQ(tx[2].counterparty, "second");
}

TEST(Ingest, EmptyFileGivesNoAccounts) {
  TempDir dir;
  auto tx = dir.write("tx.csv", "");
  auto labels = dir.write("labels.csv", "");
  EXPECT_TRUE(ingest(tx, labels).empty());
}

TEST(Ingest, MalformedRowNamesLine) {
  TempDir dir;
  auto tx = dir.write("tx.csv", "from,to,value_wei,timestamp\na,b,1,2\na,b,-5,3\n");
  auto labels = dir.write("labels.csv", "address,label\na,normal\n");
  try {
    ingest(tx, labels);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
}

TEST(Ingest, UnknownLabelIsAnError) {
  TempDir dir;
  auto labels = dir.write("labels.csv", "address,label\na,scammer\n");
  EXPECT_THROW(read_labels(labels), ParseError);
}

TEST(Ingest, DuplicateRowsAreKept) {
  std::vector<Transfer> t{{"a", "b", 7, 10}, {"a", "b", 7, 10}};
  EXPECT_EQ(ingest(t, {{"a", Label::normal}})[0].transactions.size(), 2u);
}

TEST(InterTimes, Examples) {
  std::vector<std::int64_t> ts{100, 160, 250};
  auto g = inter_times(ts);
  EXPECT_EQ(g[2][0], 150);
  for (const auto& v : g[0]) EXPECT_FALSE(v.has_value());
  std::vector<std::int64_t> ties(6, 5);
  for (const auto& row : inter_times(ties)) {
    for (const auto& v : row) {
      if (v) {
        EXPECT_EQ(*v, 0);
      }
    }
  }
}

TEST(InterTimes, DescendingIsAnError) {
  std::vector<std::int64_t> ts{10, 5};
  EXPECT_THROW(inter_times(ts), OrderingError);
}

TEST(InterTimes, LongerLookbackSpansMoreTime) {
  Rng rng(2);
  std::vector<std::int64_t> ts{1};
  for (int i = 0; i < 200; ++i) ts.push_back(ts.back() + static_cast<std::int64_t>(rng.below(1000)));
  for (const auto& row : inter_times(ts)) {
    for (std::size_t a = 0; a < kLagCount; ++a)
      for (std::size_t b = a + 1; b < kLagCount; ++b)
        if (row[a] && row[b]) {
          EXPECT_GE(*row[b], *row[a]);
        }
  }
}

TEST(Quantize, Amount) {
  EXPECT_EQ(quantize_amount(1.0 * kEth), "amt_b0");
  EXPECT_EQ(quantize_amount(0), "amt_zero");
  EXPECT_EQ(quantize_amount(0.05 * kEth), "amt_b-3");
  EXPECT_EQ(quantize_amount(1), "amt_b-18");        // 1 wei clamps low
  EXPECT_EQ(quantize_amount(1e40), "amt_b14");      // clamps high
  EXPECT_THROW(quantize_amount(-1), DomainError);
}

TEST(Quantize, Interval) {
  EXPECT_EQ(quantize_interval(0, 2), "it2_b0");
  EXPECT_EQ(quantize_interval(3600, 5), "it5_b11");
  EXPECT_EQ(quantize_interval(std::nullopt, 3), "it3_none");
  EXPECT_EQ(quantize_interval(std::int64_t{1} << 40, 4), "it4_b25");
  EXPECT_THROW(quantize_interval(-1, 2), DomainError);
  EXPECT_THROW(quantize_interval(3, 1), DomainError);
}

TEST(Quantize, BucketsAreMonotone) {
  auto bucket = [](const std::string& tok) {
    return std::stoi(tok.substr(tok.find("_b") + 2));
  };
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    double a = std::pow(10.0, rng.uniform(-2, 30)), b = std::pow(10.0, rng.uniform(-2, 30));
    if (a > b) std::swap(a, b);
    a = std::floor(a) + 1;
    b = std::floor(b) + 1;
    EXPECT_LE(bucket(quantize_amount(a)), bucket(quantize_amount(b)));
    std::int64_t x = static_cast<std::int64_t>(rng.below(1u << 30)),
                 y = static_cast<std::int64_t>(rng.below(1u << 30));
    if (x > y) std::swap(x, y);
    EXPECT_LE(bucket(quantize_interval(x, 2)), bucket(quantize_interval(y, 2)));
  }
}

TEST(Sentences, FirstOutflowOfOneEth) {
  AccountHistory h{"a", Label::normal, {{"a", "b", kEth, Direction::outflow, 10}}};
  auto c = build_sentences(std::span(&h, 1));
  ASSERT_EQ(c.accounts[0].sentences.size(), 1u);
  EXPECT_EQ(detokenize(c.accounts[0].sentences[0], c.vocab),
            (std::vector<std::string>{"amt_b0", "dir_out", "it2_none", "it3_none", "it4_none", "it5_none"}));
}

TEST(Sentences, InflowWord) {
  AccountHistory h{"a", Label::normal, {{"a", "b", kEth, Direction::inflow, 10}}};
  auto c = build_sentences(std::span(&h, 1));
  EXPECT_EQ(c.vocab.token(c.accounts[0].sentences[0].words[1]), "dir_in");
}

TEST(Sentences, RepeatedTransactionsVocabulary) {
  // Two identical transactions: neither has a 2nd predecessor, so both render
  // to the same six words.
  AccountHistory h{"a", Label::normal,
                   {{"a", "b", kEth, Direction::outflow, 10}, {"a", "b", kEth, Direction::outflow, 10}}};
  auto c = build_sentences(std::span(&h, 1));
  EXPECT_EQ(c.vocab.size(), 6u + 5u);
  // A third repeat has a 2nd predecessor at distance 0 and adds "it2_b0".
  h.transactions.push_back(h.transactions[0]);
  EXPECT_EQ(build_sentences(std::span(&h, 1)).vocab.size(), 7u + 5u);
}

TEST(Sentences, ReservedIdsAndFirstOccurrenceOrder) {
  std::vector<AccountHistory> hs{
      {"b", Label::normal, {{"b", "x", 0, Direction::inflow, 5}}},
      {"a", Label::normal, {{"a", "x", kEth, Direction::outflow, 5}}}};
  auto c = build_sentences(hs);
  EXPECT_EQ(c.vocab.token(0), "[PAD]");
  EXPECT_EQ(c.vocab.token(2), "[CLS]");
  EXPECT_EQ(c.vocab.token(4), "[NO_PREV]");
  // Account "a" is walked first.
  EXPECT_EQ(c.vocab.token(5), "amt_b0");
  EXPECT_EQ(c.accounts[0].account, "a");
}

TEST(Sentences, RandomHistoriesRoundTrip) {
  Rng rng(4);
  std::vector<AccountHistory> hs;
  for (int a = 0; a < 30; ++a) {
    AccountHistory h{"acc" + std::to_string(a), Label::normal, {}};
    std::int64_t t = 1000;
    const auto n = rng.below(15);
    for (std::uint64_t i = 0; i < n; ++i) {
      t += static_cast<std::int64_t>(rng.below(100000));
      h.transactions.push_back({h.account, "x", std::floor(std::pow(10, rng.uniform(0, 24))),
                                rng.bernoulli(0.5) ? Direction::inflow : Direction::outflow, t});
    }
    hs.push_back(h);
  }
  auto c = build_sentences(hs);
  ASSERT_EQ(c.accounts.size(), hs.size());
  for (const auto& corpus : c.accounts) {
    auto h = std::find_if(hs.begin(), hs.end(), [&](auto& x) { return x.account == corpus.account; });
    const auto words = sentence_words(*h);
    ASSERT_EQ(corpus.sentences.size(), words.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
      auto back = detokenize(corpus.sentences[i], c.vocab);
      ASSERT_EQ(back.size(), kWordsPerSentence);
      EXPECT_TRUE(std::equal(back.begin(), back.end(), words[i].begin()));
    }
  }
}

TEST(Artifacts, CorpusAndVocabularyRoundTrip) {
  TempDir dir;
  std::vector<AccountHistory> hs{
      {"a", Label::phisher, {{"a", "b", 3e18, Direction::outflow, 5}, {"a", "b", 1, Direction::inflow, 9}}},
      {"b", Label::normal, {}}};
  auto c = build_sentences(hs);
  write_corpus(dir.path() / "corpus.jsonl", c.accounts);
  write_vocabulary(dir.path() / "vocab.json", c.vocab);
  auto accounts = read_corpus(dir.path() / "corpus.jsonl");
  auto vocab = read_vocabulary(dir.path() / "vocab.json");
  ASSERT_EQ(accounts.size(), 2u);
  EXPECT_EQ(accounts[0].label, Label::phisher);
  EXPECT_EQ(accounts[0].sentences[1].words, c.accounts[0].sentences[1].words);
  EXPECT_TRUE(accounts[1].sentences.empty());
  EXPECT_EQ(vocab.fingerprint(), c.vocab.fingerprint());
  std::ifstream in(dir.path() / "corpus.jsonl");
  std::string first;
  std::getline(in, first);
  EXPECT_EQ(first.rfind("{\"account\":\"a\",\"label\":\"phisher\",\"sentences\":[[", 0), 0u);
}
