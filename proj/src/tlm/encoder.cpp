#include "tlmg/tlm/encoder.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>

#include "tlmg/error.hpp"
#include "tlmg/numerics/ops.hpp"

namespace tlmg::tlm {

using corpus::Vocabulary;
using nn::Tensor;

void EncoderConfig::validate() const {
  if (layers == 0) throw ConfigError("encoder: layers must be positive");
  if (heads == 0 || dim == 0 || dim % heads != 0) {
    throw ConfigError("encoder: dim " + std::to_string(dim) +
                      " must be a positive multiple of heads " +
                      std::to_string(heads));
  }
  if (ff_dim == 0) throw ConfigError("encoder: ff_dim must be positive");
  if (max_length < 2) throw ConfigError("encoder: max_length must be at least 2");
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ConfigError("encoder: dropout must lie in [0, 1)");
  }
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = nlohmann::json{{"layers", c.layers},     {"heads", c.heads},
                     {"dim", c.dim},           {"ff_dim", c.ff_dim},
                     {"max_length", c.max_length}, {"dropout", c.dropout}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  static const char* const kKeys[] = {"layers", "heads",      "dim",
                                      "ff_dim", "max_length", "dropout"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      throw ConfigError("encoder: unknown key '" + key + "'");
    }
  }
  EncoderConfig d;
  c.layers = j.value("layers", d.layers);
  c.heads = j.value("heads", d.heads);
  c.dim = j.value("dim", d.dim);
  c.ff_dim = j.value("ff_dim", d.ff_dim);
  c.max_length = j.value("max_length", d.max_length);
  c.dropout = j.value("dropout", d.dropout);
}

std::vector<std::size_t> flatten_account(const corpus::AccountCorpus& account,
                                         std::size_t max_length,
                                         std::size_t pad_to) {
  if (max_length < 1) throw DomainError("flatten_account: max_length is zero");
  const std::size_t fit = (max_length - 1) / corpus::kWordsPerSentence;
  const auto& s = account.sentences;
  const std::size_t first = s.size() > fit ? s.size() - fit : 0;
  std::vector<std::size_t> out;
  out.reserve(std::max(pad_to, 1 + (s.size() - first) * corpus::kWordsPerSentence));
  out.push_back(Vocabulary::kCls);
  for (std::size_t i = first; i < s.size(); ++i) {
    out.insert(out.end(), s[i].words.begin(), s[i].words.end());
  }
  if (out.size() < pad_to) out.resize(pad_to, Vocabulary::kPad);
  return out;
}

MaskedBatch apply_mlm_mask(std::span<const std::size_t> seq, double rate,
                           std::size_t vocab_size, Rng& rng) {
  if (!(rate > 0.0 && rate < 1.0)) {
    throw DomainError("apply_mlm_mask: rate must lie in (0, 1)");
  }
  MaskedBatch b;
  b.input.assign(seq.begin(), seq.end());
  b.attend.resize(seq.size());
  const bool can_swap = vocab_size > Vocabulary::kReserved;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    b.attend[i] = seq[i] != Vocabulary::kPad;
    if (Vocabulary::is_reserved(seq[i])) continue;
    if (!rng.bernoulli(rate)) continue;
    b.positions.push_back(i);
    b.originals.push_back(seq[i]);
    const double r = rng.uniform();
    if (r < 0.8) {
      b.input[i] = Vocabulary::kMask;
    } else if (r < 0.9 && can_swap) {
      b.input[i] = Vocabulary::kReserved + rng.below(vocab_size - Vocabulary::kReserved);
    }
  }
  return b;
}

MaskedBatch apply_mlm_mask(std::span<const std::size_t> seq, double rate,
                           std::size_t vocab_size, std::uint64_t seed) {
  Rng rng(seed);
  return apply_mlm_mask(seq, rate, vocab_size, rng);
}

Tensor masked_nll(const Tensor& logits, std::span<const std::size_t> targets) {
  if (targets.empty()) throw DomainError("masked_nll: no masked positions");
  return nn::neg(nn::mean(nn::pick(nn::log_softmax(logits), targets)));
}

Encoder::Encoder(const EncoderConfig& config, std::size_t vocab_size,
                 std::uint64_t seed)
    : config_(config), vocab_size_(vocab_size) {
  config_.validate();
  if (vocab_size <= Vocabulary::kReserved) {
    throw ConfigError("encoder: vocabulary has no transaction words");
  }
  constexpr double kStd = 0.02;
  Rng rng(seed);
  const std::size_t d = config_.dim;
  tok_ = store_.add("tlm.tok", normal_init({vocab_size, d}, kStd, rng));
  pos_ = store_.add("tlm.pos", normal_init({config_.max_length, d}, kStd, rng));
  emb_g_ = store_.add("tlm.emb_ln.gamma", Tensor::full({d}, 1.0));
  emb_b_ = store_.add("tlm.emb_ln.beta", Tensor::zeros({d}));
  for (std::size_t l = 0; l < config_.layers; ++l) {
    blocks_.emplace_back(store_, "tlm.layer" + std::to_string(l), d,
                         config_.heads, config_.ff_dim, rng);
  }
  head_w_ = store_.add("tlm.mlm.dense", normal_init({d, d}, kStd, rng));
  head_b_ = store_.add("tlm.mlm.dense.bias", Tensor::zeros({d}));
  head_g_ = store_.add("tlm.mlm.ln.gamma", Tensor::full({d}, 1.0));
  head_beta_ = store_.add("tlm.mlm.ln.beta", Tensor::zeros({d}));
  out_b_ = store_.add("tlm.mlm.out.bias", Tensor::zeros({vocab_size}));
}

Tensor Encoder::encode(std::span<const std::size_t> ids, Rng* rng,
                       const std::vector<bool>* attend) const {
  const std::size_t len = ids.size();
  if (len == 0) throw DimensionError("encode: empty sequence");
  if (len > config_.max_length) {
    throw DimensionError("encode: sequence length " + std::to_string(len) +
                         " exceeds max_length " +
                         std::to_string(config_.max_length));
  }
  for (auto id : ids) {
    if (id >= vocab_size_) {
      throw DomainError("encode: token id " + std::to_string(id) +
                        " outside vocabulary of size " +
                        std::to_string(vocab_size_));
    }
  }
  Tensor bias;
  if (attend) {
    if (attend->size() != len) throw DimensionError("encode: attend length differs");
    bool any_hidden = false;
    for (bool a : *attend) any_hidden = any_hidden || !a;
    if (any_hidden) {
      std::vector<double> b(len * len, 0.0);
      for (std::size_t r = 0; r < len; ++r) {
        for (std::size_t c = 0; c < len; ++c) {
          if (!(*attend)[c]) b[r * len + c] = -1e9;
        }
      }
      bias = Tensor::from({len, len}, std::move(b));
    }
  }
  const double rate = rng ? config_.dropout : 0.0;
  Tensor x = nn::add(nn::embedding(tok_, ids), nn::slice_rows(pos_, 0, len));
  x = nn::layer_norm(x, emb_g_, emb_b_);
  if (rate > 0.0) x = nn::dropout(x, rate, *rng);
  for (const auto& block : blocks_) x = block.forward(x, config_.dropout, rng, bias);
  return x;
}

Tensor Encoder::mlm_logits(const Tensor& hidden,
                           std::span<const std::size_t> positions) const {
  Tensor h = nn::gather_rows(hidden, positions);
  h = nn::gelu(nn::add_row(nn::matmul(h, head_w_), head_b_));
  h = nn::layer_norm(h, head_g_, head_beta_);
  return nn::add_row(nn::matmul(h, nn::transpose(tok_)), out_b_);
}

Tensor Encoder::mlm_loss(const MaskedBatch& batch, Rng* rng) const {
  if (batch.positions.empty()) {
    throw DomainError("mlm_loss: batch has no masked positions; resample");
  }
  const Tensor hidden = encode(batch.input, rng, &batch.attend);
  return masked_nll(mlm_logits(hidden, batch.positions), batch.originals);
}

namespace {

constexpr int kMaskRetries = 64;

// Masks until at least one position is selected; empty when the sequence has
// nothing maskable.
MaskedBatch mask_nonempty(std::span<const std::size_t> seq, double rate,
                          std::size_t vocab_size, Rng& rng) {
  MaskedBatch b;
  for (int i = 0; i < kMaskRetries; ++i) {
    b = apply_mlm_mask(seq, rate, vocab_size, rng);
    if (!b.positions.empty()) break;
  }
  return b;
}

std::vector<std::vector<std::size_t>> flatten_all(
    const Encoder& encoder, std::span<const corpus::AccountCorpus> accounts) {
  std::vector<std::vector<std::size_t>> seqs;
  for (const auto& a : accounts) {
    auto s = flatten_account(a, encoder.config().max_length);
    if (s.size() > 1) seqs.push_back(std::move(s));
  }
  return seqs;
}

void write_log(std::ostream* out, const EpochLog& e) {
  if (!out) return;
  nlohmann::ordered_json j{{"epoch", e.epoch},
                           {"split", e.split},
                           {"loss", e.loss},
                           {"elapsed_ms", e.elapsed_ms}};
  *out << j.dump() << '\n';
  out->flush();
}

std::uint64_t eval_seed(std::uint64_t seed) { return seed ^ 0x5eed0fe7a1ULL; }

}  // namespace

MlmScore evaluate_mlm(const Encoder& encoder,
                      std::span<const corpus::AccountCorpus> accounts,
                      double mask_rate, std::uint64_t seed) {
  nn::NoGradGuard no_grad;
  Rng rng(seed);
  double total = 0.0;
  std::size_t correct = 0;
  MlmScore score;
  for (const auto& seq : flatten_all(encoder, accounts)) {
    const MaskedBatch b = mask_nonempty(seq, mask_rate, encoder.vocab_size(), rng);
    if (b.positions.empty()) continue;
    const Tensor hidden = encoder.encode(b.input, nullptr, &b.attend);
    const Tensor logits = encoder.mlm_logits(hidden, b.positions);
    const Tensor lp = nn::log_softmax(logits);
    const std::size_t v = logits.cols();
    auto d = lp.data();
    for (std::size_t i = 0; i < b.positions.size(); ++i) {
      const double* row = d.data() + i * v;
      total -= row[b.originals[i]];
      std::size_t best = 0;
      for (std::size_t c = 1; c < v; ++c) {
        if (row[c] > row[best]) best = c;
      }
      if (best == b.originals[i]) ++correct;
    }
    score.masked += b.positions.size();
  }
  if (score.masked == 0) throw DomainError("evaluate_mlm: nothing to mask");
  score.loss = total / static_cast<double>(score.masked);
  score.accuracy = static_cast<double>(correct) / static_cast<double>(score.masked);
  return score;
}

PretrainResult pretrain(Encoder& encoder,
                        std::span<const corpus::AccountCorpus> accounts,
                        const PretrainOptions& options, std::ostream* log) {
  if (options.batch_size == 0) throw ConfigError("pretrain: batch_size is zero");
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - start)
        .count();
  };
  const auto seqs = flatten_all(encoder, accounts);
  if (seqs.empty()) throw DomainError("pretrain: corpus has no sentences");

  PretrainResult result;
  const MlmScore before =
      evaluate_mlm(encoder, accounts, options.mask_rate, eval_seed(options.seed));
  result.initial_loss = before.loss;
  result.initial_accuracy = before.accuracy;
  result.log.push_back({0, "eval", before.loss, elapsed()});
  write_log(log, result.log.back());

  auto& store = encoder.parameters();
  std::vector<nn::Parameter*> params;
  for (auto& p : store.all()) params.push_back(&p);
  nn::Adam adam(params, options.adam);

  Rng master(options.seed);
  std::vector<std::size_t> order(seqs.size());
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    Rng rng = master.fork();
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += options.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + options.batch_size);
      std::vector<MaskedBatch> masked;
      std::size_t total = 0;
      for (std::size_t i = b0; i < b1; ++i) {
        masked.push_back(
            mask_nonempty(seqs[order[i]], options.mask_rate, encoder.vocab_size(), rng));
        total += masked.back().positions.size();
      }
      if (total == 0) continue;
      store.zero_grad();
      double batch_loss = 0.0;
      for (const auto& m : masked) {
        if (m.positions.empty()) continue;
        const double w = static_cast<double>(m.positions.size()) /
                         static_cast<double>(total);
        const Tensor loss = nn::scale(encoder.mlm_loss(m, &rng), w);
        const double value = loss.item();
        if (!std::isfinite(value)) {
          std::ostringstream msg;
          msg << "pretrain: non-finite MLM loss at epoch " << epoch
              << "; lower the learning rate (currently " << options.adam.lr
              << ")";
          throw NumericalError(msg.str());
        }
        loss.backward();
        batch_loss += value;
      }
      adam.step();
      epoch_loss += batch_loss;
      ++batches;
    }
    result.log.push_back({epoch, "train", epoch_loss / static_cast<double>(batches),
                          elapsed()});
    write_log(log, result.log.back());
  }

  const MlmScore after =
      evaluate_mlm(encoder, accounts, options.mask_rate, eval_seed(options.seed));
  result.final_loss = after.loss;
  result.final_accuracy = after.accuracy;
  result.log.push_back({options.epochs, "eval", after.loss, elapsed()});
  write_log(log, result.log.back());
  result.optimizer = adam.state();
  return result;
}

namespace {
constexpr const char* kEncoderKind = "tlm-encoder";
}

void save_encoder(const std::filesystem::path& path, const Encoder& encoder,
                  const Vocabulary& vocab, const nn::AdamState* optimizer) {
  if (vocab.size() != encoder.vocab_size()) {
    throw ConfigError("save_encoder: vocabulary size differs from the encoder");
  }
  nn::Checkpoint ckpt;
  ckpt.hyperparameters = {{"kind", kEncoderKind},
                          {"encoder", encoder.config()},
                          {"vocab_size", vocab.size()},
                          {"vocab_fingerprint", vocab.fingerprint()}};
  ckpt.tensors = nn::snapshot(encoder.parameters());
  if (optimizer && !optimizer->m.empty()) {
    ckpt.hyperparameters["adam_step"] = optimizer->step;
    const auto& params = encoder.parameters().all();
    for (std::size_t i = 0; i < params.size() && i < optimizer->m.size(); ++i) {
      const auto& shape = params[i].tensor.shape();
      ckpt.tensors.push_back({"adam.m." + params[i].name,
                              Tensor::from(shape, optimizer->m[i])});
      ckpt.tensors.push_back({"adam.v." + params[i].name,
                              Tensor::from(shape, optimizer->v[i])});
    }
  }
  nn::save_checkpoint(path, ckpt);
}

Encoder load_encoder(const std::filesystem::path& path, const Vocabulary& vocab) {
  const nn::Checkpoint ckpt = nn::load_checkpoint(path);
  const auto& hp = ckpt.hyperparameters;
  if (hp.value("kind", std::string()) != kEncoderKind) {
    throw ConfigError(path.string() + ": not an encoder checkpoint");
  }
  if (hp.at("vocab_size").get<std::size_t>() != vocab.size() ||
      hp.at("vocab_fingerprint").get<std::uint64_t>() != vocab.fingerprint()) {
    throw ConfigError(path.string() +
                      ": vocabulary mismatch between corpus and checkpoint");
  }
  Encoder encoder(hp.at("encoder").get<EncoderConfig>(), vocab.size(), 0);
  nn::restore(encoder.parameters(), ckpt);
  return encoder;
}

SemanticEmbedding semantic_embeddings(const Encoder& encoder,
                                      const corpus::AccountCorpus& account) {
  nn::NoGradGuard no_grad;
  const auto ids = flatten_account(account, encoder.config().max_length);
  SemanticEmbedding out;
  out.tokens = encoder.encode(ids);
  out.pooled = nn::slice_rows(out.tokens, 0, 1);
  return out;
}

}  // namespace tlmg::tlm
