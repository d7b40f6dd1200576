#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tlmg/aig/aig.hpp"
#include "tlmg/corpus/corpus.hpp"
#include "tlmg/fusion/metrics.hpp"
#include "tlmg/numerics/optim.hpp"
#include "tlmg/numerics/random.hpp"
#include "tlmg/numerics/tensor.hpp"
#include "tlmg/tasg/tasg.hpp"
#include "tlmg/tlm/encoder.hpp"
#include "tlmg/tlm/transformer.hpp"

namespace tlmg::fusion {

// eq15: Pred = lambda Z_GCN + (1 - lambda) Z_MAN. prose: the weights swap.
enum class LambdaConvention { eq15, prose };
// two_term: -sum_c [y_c log p_c + (1 - y_c) log(1 - p_c)]. standard: -log p_y.
enum class LossKind { two_term, standard };

std::string to_string(LambdaConvention c);
LambdaConvention parse_convention(const std::string& text);
std::string to_string(LossKind k);
LossKind parse_loss(const std::string& text);

// Class indices of every probability pair.
inline constexpr std::size_t kNormal = 0;
inline constexpr std::size_t kPhisher = 1;

struct JointConfig {
  double lambda = 0.7;
  LambdaConvention convention = LambdaConvention::eq15;
  std::size_t man_layers = 4;
  std::size_t man_heads = 4;
  std::size_t man_dim = 128;
  std::size_t man_ff_dim = 512;
  double dropout = 0.1;
  std::size_t tasg_hidden = 64;
  std::size_t tasg_dim = 64;
  std::size_t gcn_hidden = 64;
  std::size_t batch_size = 64;
  nn::AdamConfig adam{};
  std::size_t epochs = 15;
  bool freeze_tlm = false;
  LossKind loss = LossKind::two_term;
  // Keep the parameters of the epoch with the best validation F1.
  bool select_best = true;

  // Throws ConfigError.
  void validate() const;
};

void to_json(nlohmann::json& j, const JointConfig& c);
void from_json(const nlohmann::json& j, JointConfig& c);

/// Pred = lambda Z_GCN + (1 - lambda) Z_MAN under eq15; the prose convention
/// weights Z_GCN by 1 - lambda. Throws DomainError unless 0 <= lambda <= 1.
nn::Tensor joint_predict(const nn::Tensor& z_gcn, const nn::Tensor& z_man,
                         double lambda,
                         LambdaConvention convention = LambdaConvention::eq15);

/// Mean over rows of the loss of each [rows, 2] probability pair against
/// its label; probabilities are clamped to [1e-12, 1 - 1e-12].
nn::Tensor cross_entropy(const nn::Tensor& pred, std::span<const std::size_t> labels,
                         LossKind kind = LossKind::two_term);

/// Per-token [E^s ; E^g] with E^g looked up by token id in `similarity`
/// ([vocab, d_g]); an undefined `similarity` leaves E^s unchanged.
nn::Tensor fuse(const nn::Tensor& semantic, const nn::Tensor& similarity,
                std::span<const std::size_t> ids);

/// Account-indexed matrix of pooled MAN embeddings feeding the AIG GCN.
class EmbeddingRegistry {
 public:
  EmbeddingRegistry() = default;
  EmbeddingRegistry(std::vector<std::string> accounts, std::size_t dim);

  std::size_t size() const { return accounts_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& accounts() const { return accounts_; }
  // Constant [size, dim] view of the current rows.
  const nn::Tensor& matrix() const { return matrix_; }
  std::span<const double> row(std::size_t r) const;
  // Steps since the row was last written.
  std::size_t staleness(std::size_t r) const { return staleness_.at(r); }

  void write(std::size_t r, std::span<const double> values);
  // Ages every row by one step.
  void tick();

 private:
  std::vector<std::string> accounts_;
  std::size_t dim_ = 0;
  nn::Tensor matrix_;
  std::vector<std::size_t> staleness_;
};

struct Split {
  std::vector<std::size_t> train, validation, test;
};

/// Stratified by label over the labelled rows; unlabelled rows are left out.
Split stratified_split(std::span<const corpus::Label> labels, std::uint64_t seed,
                       double train_fraction = 0.7, double validation_fraction = 0.15);

struct AccountOutput {
  nn::Tensor pooled;  // [1, man_dim]
  nn::Tensor z_man;   // [1, 2]
};

struct StepOutput {
  nn::Tensor loss;
  nn::Tensor pred;                  // [batch, 2]
  std::vector<nn::Tensor> pooled;   // per batch row
};

struct Predictions {
  std::vector<double> phisher;  // Pred phisher component per account row
  std::vector<double> loss;     // per-row loss against the row label (0 if unlabelled)
};

struct JointResult {
  EvalReport test;
  EvalReport validation;
  std::size_t best_epoch = 0;
  std::vector<tlm::EpochLog> log;
};

/// The MAN over fused embeddings, the TASG similarity GCN, the AIG GCN and
/// the registry, trained jointly with the encoder.
///
/// Account rows follow `graph`; `accounts` supplies each row's sentences
/// (rows without a corpus entry are encoded as [CLS] alone). `tasg` may be
/// null to drop the similarity embeddings.
class JointModel {
 public:
  JointModel(tlm::Encoder& encoder, std::span<const corpus::AccountCorpus> accounts,
             const aig::AccountGraph& graph, const tasg::VocabGraph* tasg,
             bool weighted_aig, const JointConfig& config, std::uint64_t seed);

  const JointConfig& config() const { return config_; }
  JointConfig& config() { return config_; }
  std::size_t size() const { return rows_.size(); }
  corpus::Label label(std::size_t row) const { return labels_.at(row); }
  const std::vector<corpus::Label>& labels() const { return labels_; }
  nn::ParameterStore& parameters() { return store_; }
  tlm::Encoder& encoder() { return encoder_; }
  EmbeddingRegistry& registry() { return registry_; }
  const EmbeddingRegistry& registry() const { return registry_; }

  /// [vocab, tasg_dim] E^g with reserved and isolated words zeroed;
  /// undefined without a TASG.
  nn::Tensor similarity_table() const;
  /// E^s of one row; training mode when `rng` is given.
  nn::Tensor semantic(std::size_t row, Rng* rng) const;
  /// Fused sequence of one row projected to man_dim.
  nn::Tensor fused(std::size_t row, const nn::Tensor& table, Rng* rng) const;
  /// Stacked blocks over a projected sequence; returns the pooled state and
  /// the class probabilities of the head.
  AccountOutput man_forward(const nn::Tensor& projected, Rng* rng) const;
  AccountOutput account_forward(std::size_t row, const nn::Tensor& table, Rng* rng) const;
  /// [size, 2] softmax of the AIG GCN over node features `x`.
  nn::Tensor gcn_probabilities(const nn::Tensor& x) const;

  /// Loss on `rows` with the in-batch registry rows live and the others
  /// constant.
  StepOutput batch_loss(std::span<const std::size_t> rows, Rng* rng) const;

  /// Embeds every account in eval mode and stores the pooled states.
  void initialize_registry();
  /// One optimiser step; writes the batch's pooled states into the registry.
  double train_step(std::span<const std::size_t> rows, Rng& rng);
  /// Eval-mode predictions for every row from a fresh embedding of all
  /// accounts. The registry is left untouched.
  Predictions predict() const;
  EvalReport evaluate_rows(const Predictions& p, std::span<const std::size_t> rows) const;

  /// Balanced batches, one validation pass per epoch; writes
  /// {epoch, split, loss, elapsed_ms} lines to `log`.
  JointResult train(const Split& split, std::ostream* log = nullptr);

  // Parameters of the joint model and the encoder.
  void save(const std::filesystem::path& path, const nlohmann::json& extra = {}) const;
  // Restores parameters saved by `save` from a model built the same way.
  void load(const std::filesystem::path& path);

 private:
  std::vector<nn::Parameter*> trainable();

  tlm::Encoder& encoder_;
  JointConfig config_;
  const aig::AccountGraph& graph_;
  const tasg::VocabGraph* tasg_;
  bool weighted_;
  std::vector<std::vector<std::size_t>> rows_;  // token ids per account row
  std::vector<corpus::Label> labels_;
  std::vector<nn::Tensor> frozen_semantic_;
  nn::ParameterStore store_;
  nn::SparseMatrix tasg_adjacency_;
  tasg::SimilarityGcn tasg_gcn_;
  nn::Tensor word_mask_;
  nn::Tensor proj_w_, proj_b_;
  std::vector<tlm::TransformerBlock> blocks_;
  nn::Tensor head_w_, head_b_;
  nn::Tensor gcn_w1_, gcn_w2_;
  EmbeddingRegistry registry_;
  std::uint64_t seed_;
  std::optional<nn::Adam> adam_;
};

}  // namespace tlmg::fusion
