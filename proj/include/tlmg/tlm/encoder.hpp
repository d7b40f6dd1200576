#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "tlmg/corpus/corpus.hpp"
#include "tlmg/numerics/checkpoint.hpp"
#include "tlmg/numerics/optim.hpp"
#include "tlmg/numerics/random.hpp"
#include "tlmg/numerics/tensor.hpp"
#include "tlmg/tlm/transformer.hpp"

namespace tlmg::tlm {

struct EncoderConfig {
  std::size_t layers = 4;
  std::size_t heads = 4;
  std::size_t dim = 128;
  std::size_t ff_dim = 512;
  // 100 sentences of 6 words plus two specials.
  std::size_t max_length = 602;
  double dropout = 0.1;

  // Throws ConfigError.
  void validate() const;
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

/// [CLS] followed by the account's sentences oldest first. Oldest sentences
/// are dropped until the sequence fits `max_length`; the result is then
/// right-padded with [PAD] up to `pad_to`.
std::vector<std::size_t> flatten_account(const corpus::AccountCorpus& account,
                                         std::size_t max_length,
                                         std::size_t pad_to = 0);

struct MaskedBatch {
  std::vector<std::size_t> input;
  std::vector<std::size_t> positions;  // ascending
  std::vector<std::size_t> originals;  // ids at `positions` before masking
  std::vector<bool> attend;            // false on [PAD]
};

/// Selects each non-reserved position with probability `rate`; a selected
/// token becomes [MASK] (80%), a random non-reserved token (10%) or stays
/// (10%).
MaskedBatch apply_mlm_mask(std::span<const std::size_t> seq, double rate,
                           std::size_t vocab_size, Rng& rng);
MaskedBatch apply_mlm_mask(std::span<const std::size_t> seq, double rate,
                           std::size_t vocab_size, std::uint64_t seed);

/// Mean negative log-likelihood of `targets` under row-wise softmax(logits).
nn::Tensor masked_nll(const nn::Tensor& logits,
                      std::span<const std::size_t> targets);

/// Token/positional embeddings, a stack of transformer blocks and an MLM head
/// whose output projection is tied to the token embedding.
class Encoder {
 public:
  Encoder(const EncoderConfig& config, std::size_t vocab_size,
          std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }
  std::size_t vocab_size() const { return vocab_size_; }
  nn::ParameterStore& parameters() { return store_; }
  const nn::ParameterStore& parameters() const { return store_; }

  /// [len, dim] final-layer states. Eval mode (no dropout) when `rng` is null.
  /// Padding positions are hidden from attention when `attend` is given.
  nn::Tensor encode(std::span<const std::size_t> ids, Rng* rng = nullptr,
                    const std::vector<bool>* attend = nullptr) const;
  /// Vocabulary logits for the selected rows of `hidden`.
  nn::Tensor mlm_logits(const nn::Tensor& hidden,
                        std::span<const std::size_t> positions) const;
  /// Throws DomainError when the batch has no masked position.
  nn::Tensor mlm_loss(const MaskedBatch& batch, Rng* rng = nullptr) const;

 private:
  EncoderConfig config_;
  std::size_t vocab_size_;
  nn::ParameterStore store_;
  nn::Tensor tok_, pos_, emb_g_, emb_b_;
  std::vector<TransformerBlock> blocks_;
  nn::Tensor head_w_, head_b_, head_g_, head_beta_, out_b_;
};

struct PretrainOptions {
  std::size_t epochs = 20;
  nn::AdamConfig adam{};
  std::size_t batch_size = 16;
  double mask_rate = 0.15;
  std::uint64_t seed = 42;
};

struct EpochLog {
  std::size_t epoch = 0;
  std::string split;
  double loss = 0.0;
  double elapsed_ms = 0.0;
};

struct PretrainResult {
  // Fixed-mask evaluation over the whole corpus before and after training.
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double initial_accuracy = 0.0;
  double final_accuracy = 0.0;
  std::vector<EpochLog> log;
  nn::AdamState optimizer;
};

struct MlmScore {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t masked = 0;
};

/// Eval-mode loss and top-1 accuracy with masks drawn from `seed`.
MlmScore evaluate_mlm(const Encoder& encoder,
                      std::span<const corpus::AccountCorpus> accounts,
                      double mask_rate, std::uint64_t seed);

/// MLM training with Adam. Each epoch writes one JSON line
/// {epoch, split, loss, elapsed_ms} to `log` when given; split "eval" lines
/// at epochs 0 and `epochs` carry the fixed-mask evaluation loss. Throws
/// NumericalError on a non-finite loss.
PretrainResult pretrain(Encoder& encoder,
                        std::span<const corpus::AccountCorpus> accounts,
                        const PretrainOptions& options,
                        std::ostream* log = nullptr);

void save_encoder(const std::filesystem::path& path, const Encoder& encoder,
                  const corpus::Vocabulary& vocab,
                  const nn::AdamState* optimizer = nullptr);
/// Throws ConfigError when the checkpoint was trained on another vocabulary.
Encoder load_encoder(const std::filesystem::path& path,
                     const corpus::Vocabulary& vocab);

struct SemanticEmbedding {
  nn::Tensor tokens;  // [len, dim], row 0 is [CLS]
  nn::Tensor pooled;  // [1, dim]
};

/// Final-layer token states of one account and its [CLS] state. Eval mode.
SemanticEmbedding semantic_embeddings(const Encoder& encoder,
                                      const corpus::AccountCorpus& account);

}  // namespace tlmg::tlm
