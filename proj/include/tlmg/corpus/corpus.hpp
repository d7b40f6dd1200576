#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace tlmg::corpus {

enum class Direction : int { inflow = -1, outflow = 1 };
enum class Label { phisher, normal, unlabeled };

std::string to_string(Label label);
Label parse_label(const std::string& text);

/// One row of the transaction CSV.
struct Transfer {
  std::string from;
  std::string to;
  double value_wei = 0.0;
  std::int64_t timestamp = 0;
};

/// A transfer seen from one account's side.
struct Transaction {
  std::string account;
  std::string counterparty;
  double amount_wei = 0.0;
  Direction direction = Direction::outflow;
  std::int64_t timestamp = 0;
};

/// Chronological transactions of one account.
struct AccountHistory {
  std::string account;
  Label label = Label::unlabeled;
  std::vector<Transaction> transactions;
};

struct IngestOptions {
  std::size_t max_transactions = 100;
  // Also emit histories for counterparties missing from the label file.
  bool include_unlabeled = false;
};

/// Reads `from,to,value_wei,timestamp`. An empty file yields no rows.
std::vector<Transfer> read_transfers(const std::filesystem::path& path);
/// Reads `address,label` with label in {phisher, normal}.
std::map<std::string, Label> read_labels(const std::filesystem::path& path);

/// Splits every transfer into an outflow for the sender and an inflow for the
/// receiver, orders each account's records by timestamp (ties keep file
/// order) and keeps the `max_transactions` most recent. Output is sorted by
/// account id.
std::vector<AccountHistory> ingest(std::span<const Transfer> transfers,
                                   const std::map<std::string, Label>& labels,
                                   const IngestOptions& options = {});
std::vector<AccountHistory> ingest(const std::filesystem::path& transactions,
                                   const std::filesystem::path& labels,
                                   const IngestOptions& options = {});

// Lags n = 2..5 of the interval words.
inline constexpr std::size_t kFirstLag = 2;
inline constexpr std::size_t kLastLag = 5;
inline constexpr std::size_t kLagCount = kLastLag - kFirstLag + 1;
inline constexpr std::size_t kWordsPerSentence = 2 + kLagCount;

// Element n - 2 holds tau_i - tau_{i-n}; nullopt when there is no n-th
// predecessor.
using InterTimes = std::array<std::optional<std::int64_t>, kLagCount>;

/// Interval matrix for an ascending timestamp list. Throws OrderingError on a
/// descending pair.
std::vector<InterTimes> inter_times(std::span<const std::int64_t> timestamps);

/// "amt_zero" or "amt_bK" with K = floor(2 log10(ETH)) clamped to [-18, 14].
std::string quantize_amount(double wei);
/// "it{n}_bK" with K = floor(log2(dt + 1)) clamped to [0, 25], or
/// "it{n}_none" without a predecessor.
std::string quantize_interval(std::optional<std::int64_t> dt, std::size_t lag);

std::string direction_word(Direction d);

/// Token <-> id table. Ids 0..4 are reserved.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kMask = 1;
  static constexpr std::size_t kCls = 2;
  static constexpr std::size_t kUnk = 3;
  static constexpr std::size_t kNoPrev = 4;
  static constexpr std::size_t kReserved = 5;

  Vocabulary();

  // Returns the existing id or appends the token.
  std::size_t add(const std::string& token);
  std::size_t id(const std::string& token) const;
  bool contains(const std::string& token) const;
  const std::string& token(std::size_t id) const;
  std::size_t size() const { return tokens_.size(); }
  static bool is_reserved(std::size_t id) { return id < kReserved; }

  // FNV-1a over the tokens in id order; identifies a vocabulary in checkpoints.
  std::uint64_t fingerprint() const;

  std::map<std::string, std::size_t> as_map() const;
  static Vocabulary from_map(const std::map<std::string, std::size_t>& ids);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

struct TransactionSentence {
  std::array<std::size_t, kWordsPerSentence> words{};
  std::string account;
  std::size_t index = 0;
};

struct AccountCorpus {
  std::string account;
  Label label = Label::unlabeled;
  std::vector<TransactionSentence> sentences;
};

struct TokenizedCorpus {
  std::vector<AccountCorpus> accounts;
  Vocabulary vocab;
};

/// Token strings of every transaction of one history, in order.
std::vector<std::array<std::string, kWordsPerSentence>> sentence_words(
    const AccountHistory& history);

/// Tokenises all histories. Ids are handed out by first occurrence while
/// walking accounts in ascending id order.
TokenizedCorpus build_sentences(std::span<const AccountHistory> histories);

std::vector<std::string> detokenize(const TransactionSentence& sentence,
                                    const Vocabulary& vocab);

// Corpus JSON-lines: {"account", "label", "sentences": [[id, ...], ...]}.
void write_corpus(const std::filesystem::path& path,
                  std::span<const AccountCorpus> accounts);
std::vector<AccountCorpus> read_corpus(const std::filesystem::path& path);
// Vocabulary JSON: {token: id}.
void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab);
Vocabulary read_vocabulary(const std::filesystem::path& path);

}  // namespace tlmg::corpus
