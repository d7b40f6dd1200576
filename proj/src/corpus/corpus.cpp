#include "tlmg/corpus/corpus.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tlmg/error.hpp"

namespace tlmg::corpus {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string location(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

// Reads non-empty lines, stripping a trailing CR. Returns nullopt for an empty
// file; otherwise the first line is the header.
std::optional<std::vector<std::pair<std::size_t, std::string>>> read_lines(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError(path.string());
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    lines.emplace_back(n, line);
  }
  if (lines.empty()) return std::nullopt;
  return lines;
}

bool all_digits(const std::string& s) {
  return !s.empty() &&
         std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

}  // namespace

std::string to_string(Label label) {
  switch (label) {
    case Label::phisher: return "phisher";
    case Label::normal: return "normal";
    case Label::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

Label parse_label(const std::string& text) {
  if (text == "phisher") return Label::phisher;
  if (text == "normal") return Label::normal;
  if (text == "unlabeled") return Label::unlabeled;
  throw ParseError("unknown label '" + text + "'");
}

std::vector<Transfer> read_transfers(const std::filesystem::path& path) {
  auto lines = read_lines(path);
  if (!lines) return {};
  const auto& [header_line, header] = lines->front();
  if (header != "from,to,value_wei,timestamp") {
    throw ParseError(location(path, header_line) +
                     "expected header 'from,to,value_wei,timestamp'");
  }
  std::vector<Transfer> out;
  out.reserve(lines->size() - 1);
  for (std::size_t k = 1; k < lines->size(); ++k) {
    const auto& [n, line] = (*lines)[k];
    auto f = split_csv(line);
    if (f.size() != 4) {
      throw ParseError(location(path, n) + "expected 4 fields, got " +
                       std::to_string(f.size()));
    }
    if (f[0].empty() || f[1].empty()) {
      throw ParseError(location(path, n) + "empty account address");
    }
    if (!all_digits(f[2])) {
      throw ParseError(location(path, n) + "value_wei '" + f[2] +
                       "' is not a non-negative integer");
    }
    Transfer t;
    t.from = lower(f[0]);
    t.to = lower(f[1]);
    t.value_wei = std::strtod(f[2].c_str(), nullptr);
    auto [ptr, ec] = std::from_chars(f[3].data(), f[3].data() + f[3].size(), t.timestamp);
    if (ec != std::errc() || ptr != f[3].data() + f[3].size() || t.timestamp <= 0) {
      throw ParseError(location(path, n) + "timestamp '" + f[3] +
                       "' is not a positive integer");
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::map<std::string, Label> read_labels(const std::filesystem::path& path) {
  auto lines = read_lines(path);
  std::map<std::string, Label> out;
  if (!lines) return out;
  const auto& [header_line, header] = lines->front();
  if (header != "address,label") {
    throw ParseError(location(path, header_line) + "expected header 'address,label'");
  }
  for (std::size_t k = 1; k < lines->size(); ++k) {
    const auto& [n, line] = (*lines)[k];
    auto f = split_csv(line);
    if (f.size() != 2 || f[0].empty()) {
      throw ParseError(location(path, n) + "expected 'address,label'");
    }
    if (f[1] != "phisher" && f[1] != "normal") {
      throw ParseError(location(path, n) + "unknown label '" + f[1] + "'");
    }
    out[lower(f[0])] = parse_label(f[1]);
  }
  return out;
}

std::vector<AccountHistory> ingest(std::span<const Transfer> transfers,
                                   const std::map<std::string, Label>& labels,
                                   const IngestOptions& options) {
  std::map<std::string, std::vector<Transaction>> by_account;
  auto wanted = [&](const std::string& a) {
    return options.include_unlabeled || labels.count(a) > 0;
  };
  for (const auto& t : transfers) {
    if (t.value_wei < 0 || t.timestamp <= 0) {
      throw DomainError("transfer with negative amount or non-positive timestamp");
    }
    if (wanted(t.from)) {
      by_account[t.from].push_back(
          {t.from, t.to, t.value_wei, Direction::outflow, t.timestamp});
    }
    if (wanted(t.to)) {
      by_account[t.to].push_back(
          {t.to, t.from, t.value_wei, Direction::inflow, t.timestamp});
    }
  }
  // Labeled accounts without any transfer still get an (empty) history.
  for (const auto& [account, label] : labels) by_account[account];

  std::vector<AccountHistory> out;
  out.reserve(by_account.size());
  for (auto& [account, txs] : by_account) {
    std::stable_sort(txs.begin(), txs.end(), [](const Transaction& a, const Transaction& b) {
      return a.timestamp < b.timestamp;
    });
    if (txs.size() > options.max_transactions) {
      txs.erase(txs.begin(),
                txs.end() - static_cast<std::ptrdiff_t>(options.max_transactions));
    }
    auto it = labels.find(account);
    out.push_back({account, it == labels.end() ? Label::unlabeled : it->second,
                   std::move(txs)});
  }
  return out;
}

std::vector<AccountHistory> ingest(const std::filesystem::path& transactions,
                                   const std::filesystem::path& labels,
                                   const IngestOptions& options) {
  auto transfers = read_transfers(transactions);
  return ingest(transfers, read_labels(labels), options);
}

std::vector<InterTimes> inter_times(std::span<const std::int64_t> timestamps) {
  std::vector<InterTimes> out(timestamps.size());
  for (std::size_t i = 0; i < timestamps.size(); ++i) {
    if (i > 0 && timestamps[i] < timestamps[i - 1]) {
      throw OrderingError("timestamps descend at position " + std::to_string(i));
    }
    for (std::size_t lag = kFirstLag; lag <= kLastLag; ++lag) {
      if (i >= lag) out[i][lag - kFirstLag] = timestamps[i] - timestamps[i - lag];
    }
  }
  return out;
}

std::string quantize_amount(double wei) {
  if (!(wei >= 0.0)) throw DomainError("amount must be non-negative");
  if (wei == 0.0) return "amt_zero";
  const double eth = wei / 1e18;
  const double k = std::clamp(std::floor(2.0 * std::log10(eth)), -18.0, 14.0);
  return "amt_b" + std::to_string(static_cast<int>(k));
}

std::string quantize_interval(std::optional<std::int64_t> dt, std::size_t lag) {
  if (lag < kFirstLag || lag > kLastLag) {
    throw DomainError("interval lag must be in [2, 5], got " + std::to_string(lag));
  }
  const std::string prefix = "it" + std::to_string(lag) + "_";
  if (!dt) return prefix + "none";
  if (*dt < 0) throw DomainError("negative interval");
  // floor(log2(dt + 1)) for integers is the bit width minus one.
  const auto k = std::bit_width(static_cast<std::uint64_t>(*dt) + 1) - 1;
  return prefix + "b" + std::to_string(std::min<int>(static_cast<int>(k), 25));
}

std::string direction_word(Direction d) {
  return d == Direction::inflow ? "dir_in" : "dir_out";
}

Vocabulary::Vocabulary() {
  for (const char* t : {"[PAD]", "[MASK]", "[CLS]", "[UNK]", "[NO_PREV]"}) add(t);
}

std::size_t Vocabulary::add(const std::string& token) {
  auto [it, inserted] = ids_.emplace(token, tokens_.size());
  if (inserted) tokens_.push_back(token);
  return it->second;
}

std::size_t Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) return kUnk;
  return it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  return ids_.count(token) > 0;
}

const std::string& Vocabulary::token(std::size_t id) const {
  if (id >= tokens_.size()) {
    throw DomainError("token id " + std::to_string(id) + " outside vocabulary of " +
                      std::to_string(tokens_.size()));
  }
  return tokens_[id];
}

std::uint64_t Vocabulary::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& t : tokens_) {
    for (unsigned char c : t) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0xff;
    h *= 1099511628211ULL;
  }
  return h;
}

std::map<std::string, std::size_t> Vocabulary::as_map() const {
  std::map<std::string, std::size_t> out;
  for (std::size_t i = 0; i < tokens_.size(); ++i) out[tokens_[i]] = i;
  return out;
}

Vocabulary Vocabulary::from_map(const std::map<std::string, std::size_t>& ids) {
  std::vector<std::string> tokens(ids.size());
  std::vector<bool> seen(ids.size(), false);
  for (const auto& [t, i] : ids) {
    if (i >= ids.size() || seen[i]) {
      throw ParseError("vocabulary ids are not a contiguous bijection");
    }
    seen[i] = true;
    tokens[i] = t;
  }
  Vocabulary v;
  for (std::size_t i = 0; i < kReserved; ++i) {
    if (i >= tokens.size() || tokens[i] != v.tokens_[i]) {
      throw ParseError("vocabulary reserved ids 0-4 do not match");
    }
  }
  for (std::size_t i = kReserved; i < tokens.size(); ++i) v.add(tokens[i]);
  return v;
}

std::vector<std::array<std::string, kWordsPerSentence>> sentence_words(
    const AccountHistory& history) {
  std::vector<std::int64_t> ts;
  ts.reserve(history.transactions.size());
  for (const auto& t : history.transactions) ts.push_back(t.timestamp);
  const auto gaps = inter_times(ts);
  std::vector<std::array<std::string, kWordsPerSentence>> out;
  out.reserve(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const auto& t = history.transactions[i];
    std::array<std::string, kWordsPerSentence> words;
    words[0] = quantize_amount(t.amount_wei);
    words[1] = direction_word(t.direction);
    for (std::size_t lag = kFirstLag; lag <= kLastLag; ++lag) {
      words[2 + lag - kFirstLag] = quantize_interval(gaps[i][lag - kFirstLag], lag);
    }
    out.push_back(std::move(words));
  }
  return out;
}

TokenizedCorpus build_sentences(std::span<const AccountHistory> histories) {
  std::vector<const AccountHistory*> order;
  for (const auto& h : histories) order.push_back(&h);
  std::stable_sort(order.begin(), order.end(),
                   [](const AccountHistory* a, const AccountHistory* b) {
                     return a->account < b->account;
                   });
  TokenizedCorpus out;
  for (const AccountHistory* h : order) {
    AccountCorpus c{h->account, h->label, {}};
    const auto words = sentence_words(*h);
    c.sentences.reserve(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
      TransactionSentence s;
      s.account = h->account;
      s.index = i;
      for (std::size_t w = 0; w < kWordsPerSentence; ++w) {
        s.words[w] = out.vocab.add(words[i][w]);
      }
      c.sentences.push_back(std::move(s));
    }
    out.accounts.push_back(std::move(c));
  }
  return out;
}

std::vector<std::string> detokenize(const TransactionSentence& sentence,
                                    const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (auto id : sentence.words) out.push_back(vocab.token(id));
  return out;
}

void write_corpus(const std::filesystem::path& path,
                  std::span<const AccountCorpus> accounts) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& a : accounts) {
    nlohmann::ordered_json j;
    j["account"] = a.account;
    j["label"] = to_string(a.label);
    auto sentences = nlohmann::ordered_json::array();
    for (const auto& s : a.sentences) sentences.push_back(s.words);
    j["sentences"] = std::move(sentences);
    out << j.dump() << '\n';
  }
}

std::vector<AccountCorpus> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError(path.string());
  std::vector<AccountCorpus> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      AccountCorpus c;
      c.account = j.at("account").get<std::string>();
      c.label = parse_label(j.at("label").get<std::string>());
      std::size_t idx = 0;
      for (const auto& s : j.at("sentences")) {
        TransactionSentence ts;
        auto words = s.get<std::vector<std::size_t>>();
        if (words.size() != kWordsPerSentence) {
          throw ParseError("sentence with " + std::to_string(words.size()) + " words");
        }
        std::copy(words.begin(), words.end(), ts.words.begin());
        ts.account = c.account;
        ts.index = idx++;
        c.sentences.push_back(std::move(ts));
      }
      out.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(location(path, n) + e.what());
    } catch (const ParseError& e) {
      throw ParseError(location(path, n) + e.what());
    }
  }
  return out;
}

void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  nlohmann::json j = vocab.as_map();
  out << j.dump(1) << '\n';
}

Vocabulary read_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError(path.string());
  try {
    auto j = nlohmann::json::parse(in);
    return Vocabulary::from_map(j.get<std::map<std::string, std::size_t>>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace tlmg::corpus
