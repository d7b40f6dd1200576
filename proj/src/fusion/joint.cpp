#include "tlmg/fusion/joint.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "tlmg/error.hpp"
#include "tlmg/numerics/checkpoint.hpp"
#include "tlmg/numerics/ops.hpp"

namespace tlmg::fusion {

using corpus::Label;
using nn::Tensor;

std::string to_string(LambdaConvention c) {
  return c == LambdaConvention::eq15 ? "eq15" : "prose";
}

LambdaConvention parse_convention(const std::string& text) {
  if (text == "eq15") return LambdaConvention::eq15;
  if (text == "prose") return LambdaConvention::prose;
  throw ConfigError("unknown lambda convention '" + text + "'");
}

std::string to_string(LossKind k) { return k == LossKind::two_term ? "two-term" : "standard"; }

LossKind parse_loss(const std::string& text) {
  if (text == "two-term") return LossKind::two_term;
  if (text == "standard") return LossKind::standard;
  throw ConfigError("unknown loss '" + text + "'");
}

void JointConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("joint: lambda must lie in [0, 1]");
  if (man_layers == 0) throw ConfigError("joint: man_layers must be positive");
  if (man_heads == 0 || man_dim == 0 || man_dim % man_heads != 0) {
    throw ConfigError("joint: man_dim must be a positive multiple of man_heads");
  }
  if (man_ff_dim == 0 || tasg_hidden == 0 || tasg_dim == 0 || gcn_hidden == 0) {
    throw ConfigError("joint: layer widths must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("joint: dropout must lie in [0, 1)");
  if (batch_size < 2) throw ConfigError("joint: batch_size must be at least 2");
  if (!(adam.lr > 0.0)) throw ConfigError("joint: learning rate must be positive");
}

void to_json(nlohmann::json& j, const JointConfig& c) {
  j = nlohmann::json{{"lambda", c.lambda},
                     {"lambda_convention", to_string(c.convention)},
                     {"man_layers", c.man_layers},
                     {"man_heads", c.man_heads},
                     {"man_dim", c.man_dim},
                     {"man_ff_dim", c.man_ff_dim},
                     {"dropout", c.dropout},
                     {"tasg_hidden", c.tasg_hidden},
                     {"tasg_dim", c.tasg_dim},
                     {"gcn_hidden", c.gcn_hidden},
                     {"batch_size", c.batch_size},
                     {"lr", c.adam.lr},
                     {"epochs", c.epochs},
                     {"freeze_tlm", c.freeze_tlm},
                     {"loss", to_string(c.loss)},
                     {"select_best", c.select_best}};
}

void from_json(const nlohmann::json& j, JointConfig& c) {
  const nlohmann::json defaults = JointConfig{};
  for (const auto& [key, _] : j.items()) {
    if (!defaults.contains(key)) throw ConfigError("joint: unknown key '" + key + "'");
  }
  JointConfig d;
  c.lambda = j.value("lambda", d.lambda);
  c.convention = parse_convention(j.value("lambda_convention", to_string(d.convention)));
  c.man_layers = j.value("man_layers", d.man_layers);
  c.man_heads = j.value("man_heads", d.man_heads);
  c.man_dim = j.value("man_dim", d.man_dim);
  c.man_ff_dim = j.value("man_ff_dim", d.man_ff_dim);
  c.dropout = j.value("dropout", d.dropout);
  c.tasg_hidden = j.value("tasg_hidden", d.tasg_hidden);
  c.tasg_dim = j.value("tasg_dim", d.tasg_dim);
  c.gcn_hidden = j.value("gcn_hidden", d.gcn_hidden);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.adam = d.adam;
  c.adam.lr = j.value("lr", d.adam.lr);
  c.epochs = j.value("epochs", d.epochs);
  c.freeze_tlm = j.value("freeze_tlm", d.freeze_tlm);
  c.loss = parse_loss(j.value("loss", to_string(d.loss)));
  c.select_best = j.value("select_best", d.select_best);
}

Tensor joint_predict(const Tensor& z_gcn, const Tensor& z_man, double lambda,
                     LambdaConvention convention) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw DomainError("joint_predict: lambda must lie in [0, 1]");
  }
  if (z_gcn.shape() != z_man.shape()) {
    throw DimensionError("joint_predict: branch outputs differ in shape");
  }
  const double w = convention == LambdaConvention::eq15 ? lambda : 1.0 - lambda;
  return nn::add(nn::scale(z_gcn, w), nn::scale(z_man, 1.0 - w));
}

Tensor cross_entropy(const Tensor& pred, std::span<const std::size_t> labels, LossKind kind) {
  if (pred.dim() != 2 || pred.cols() != 2 || pred.rows() != labels.size()) {
    throw DimensionError("cross_entropy: expected [" + std::to_string(labels.size()) +
                         ", 2] probabilities");
  }
  constexpr double kFloor = 1e-12;
  const Tensor p = nn::clamp(pred, kFloor, 1.0 - kFloor);
  const double n = static_cast<double>(labels.size());
  if (kind == LossKind::standard) {
    return nn::scale(nn::sum(nn::pick(nn::log(p), labels)), -1.0 / n);
  }
  std::vector<double> y(pred.size(), 0.0), not_y(pred.size(), 1.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 1) throw DomainError("cross_entropy: label outside {0, 1}");
    y[i * 2 + labels[i]] = 1.0;
    not_y[i * 2 + labels[i]] = 0.0;
  }
  const Tensor yt = Tensor::from(pred.shape(), std::move(y));
  const Tensor nyt = Tensor::from(pred.shape(), std::move(not_y));
  const Tensor terms = nn::add(nn::mul(yt, nn::log(p)),
                               nn::mul(nyt, nn::log(nn::add_scalar(nn::neg(p), 1.0))));
  return nn::scale(nn::sum(terms), -1.0 / n);
}

Tensor fuse(const Tensor& semantic, const Tensor& similarity,
            std::span<const std::size_t> ids) {
  if (semantic.dim() != 2 || semantic.rows() != ids.size()) {
    throw DimensionError("fuse: semantic rows do not match the token count");
  }
  if (!similarity.defined()) return semantic;
  return nn::hcat({semantic, nn::embedding(similarity, ids)});
}

// ---------------------------------------------------------------- registry

EmbeddingRegistry::EmbeddingRegistry(std::vector<std::string> accounts, std::size_t dim)
    : accounts_(std::move(accounts)),
      dim_(dim),
      matrix_(Tensor::zeros({accounts_.size(), dim})),
      staleness_(accounts_.size(), 0) {}

std::span<const double> EmbeddingRegistry::row(std::size_t r) const {
  if (r >= size()) throw DomainError("registry: row out of range");
  return matrix_.data().subspan(r * dim_, dim_);
}

void EmbeddingRegistry::write(std::size_t r, std::span<const double> values) {
  if (r >= size()) throw DomainError("registry: row out of range");
  if (values.size() != dim_) throw DimensionError("registry: row width mismatch");
  std::copy(values.begin(), values.end(), matrix_.mutable_data().begin() + r * dim_);
  staleness_[r] = 0;
}

void EmbeddingRegistry::tick() {
  for (auto& s : staleness_) ++s;
}

// ---------------------------------------------------------------- split

Split stratified_split(std::span<const Label> labels, std::uint64_t seed,
                       double train_fraction, double validation_fraction) {
  if (!(train_fraction > 0 && validation_fraction >= 0 &&
        train_fraction + validation_fraction < 1.0)) {
    throw ConfigError("split: fractions must be positive and sum below 1");
  }
  Rng rng(seed);
  Split s;
  for (Label cls : {Label::phisher, Label::normal}) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) rows.push_back(i);
    }
    rng.shuffle(rows);
    const auto n = static_cast<double>(rows.size());
    const auto n_train = static_cast<std::size_t>(std::llround(n * train_fraction));
    const auto n_val = static_cast<std::size_t>(std::llround(n * validation_fraction));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto& dst = i < n_train ? s.train : i < n_train + n_val ? s.validation : s.test;
      dst.push_back(rows[i]);
    }
  }
  for (auto* part : {&s.train, &s.validation, &s.test}) std::sort(part->begin(), part->end());
  return s;
}

// ---------------------------------------------------------------- model

JointModel::JointModel(tlm::Encoder& encoder, std::span<const corpus::AccountCorpus> accounts,
                       const aig::AccountGraph& graph, const tasg::VocabGraph* tasg,
                       bool weighted_aig, const JointConfig& config, std::uint64_t seed)
    : encoder_(encoder),
      config_(config),
      graph_(graph),
      tasg_(tasg),
      weighted_(weighted_aig),
      seed_(seed) {
  config_.validate();
  std::map<std::string, const corpus::AccountCorpus*> by_name;
  for (const auto& a : accounts) by_name[a.account] = &a;
  const corpus::AccountCorpus empty;
  for (const auto& name : graph.accounts()) {
    auto it = by_name.find(name);
    const auto& a = it == by_name.end() ? empty : *it->second;
    rows_.push_back(tlm::flatten_account(a, encoder.config().max_length));
    labels_.push_back(it == by_name.end() ? Label::unlabeled : a.label);
  }
  if (config_.freeze_tlm) {
    nn::NoGradGuard no_grad;
    for (const auto& ids : rows_) frozen_semantic_.push_back(encoder_.encode(ids));
  }

  Rng rng(seed);
  const std::size_t d = encoder.config().dim, m = config_.man_dim;
  std::size_t d_g = 0;
  if (tasg_) {
    if (tasg_->vocab_size != encoder.vocab_size()) {
      throw ConfigError("joint: TASG vocabulary differs from the encoder's");
    }
    d_g = config_.tasg_dim;
    tasg_adjacency_ = tasg_->normalized_adjacency();
    tasg_gcn_ = tasg::SimilarityGcn(store_, "tasg", tasg_->node_count(), config_.tasg_hidden,
                                    d_g, rng);
    const auto connected = tasg_->connected_words();
    std::vector<double> mask(tasg_->vocab_size * d_g, 0.0);
    for (std::size_t w = corpus::Vocabulary::kReserved; w < tasg_->vocab_size; ++w) {
      if (connected[w]) std::fill_n(mask.begin() + w * d_g, d_g, 1.0);
    }
    word_mask_ = Tensor::from({tasg_->vocab_size, d_g}, std::move(mask));
  }
  constexpr double kStd = 0.02;
  proj_w_ = store_.add("fusion.proj", tlm::normal_init({d + d_g, m}, kStd, rng));
  proj_b_ = store_.add("fusion.proj.bias", Tensor::zeros({m}));
  for (std::size_t l = 0; l < config_.man_layers; ++l) {
    blocks_.emplace_back(store_, "man.layer" + std::to_string(l), m, config_.man_heads,
                         config_.man_ff_dim, rng);
  }
  head_w_ = store_.add("man.head", tlm::normal_init({m, 2}, kStd, rng));
  head_b_ = store_.add("man.head.bias", Tensor::zeros({2}));
  gcn_w1_ = store_.add("aig.w1", tasg::glorot(m, config_.gcn_hidden, rng));
  gcn_w2_ = store_.add("aig.w2", tasg::glorot(config_.gcn_hidden, 2, rng));
  registry_ = EmbeddingRegistry(graph.accounts(), m);
}

Tensor JointModel::similarity_table() const {
  if (!tasg_) return Tensor();
  const Tensor nodes = tasg_gcn_.forward(tasg_adjacency_);
  return nn::mul(nn::slice_rows(nodes, 0, tasg_->vocab_size), word_mask_);
}

Tensor JointModel::semantic(std::size_t row, Rng* rng) const {
  if (config_.freeze_tlm) return frozen_semantic_.at(row);
  return encoder_.encode(rows_.at(row), rng);
}

Tensor JointModel::fused(std::size_t row, const Tensor& table, Rng* rng) const {
  const Tensor x = fuse(semantic(row, rng), table, rows_.at(row));
  return nn::add_row(nn::matmul(x, proj_w_), proj_b_);
}

AccountOutput JointModel::man_forward(const Tensor& projected, Rng* rng) const {
  Tensor x = projected;
  for (const auto& block : blocks_) x = block.forward(x, config_.dropout, rng);
  AccountOutput out;
  out.pooled = nn::slice_rows(x, 0, 1);
  out.z_man = nn::softmax(nn::add_row(nn::matmul(out.pooled, head_w_), head_b_), 1);
  return out;
}

AccountOutput JointModel::account_forward(std::size_t row, const Tensor& table,
                                          Rng* rng) const {
  return man_forward(fused(row, table, rng), rng);
}

Tensor JointModel::gcn_probabilities(const Tensor& x) const {
  return nn::softmax(
      aig::gcn_forward(graph_.normalized_adjacency(weighted_), x, gcn_w1_, gcn_w2_), 1);
}

namespace {

std::size_t class_index(Label l) {
  if (l == Label::unlabeled) throw DomainError("joint: unlabelled account in a batch");
  return l == Label::phisher ? kPhisher : kNormal;
}

}  // namespace

StepOutput JointModel::batch_loss(std::span<const std::size_t> rows, Rng* rng) const {
  if (rows.empty()) throw DomainError("joint: empty batch");
  const Tensor table = similarity_table();
  StepOutput out;
  std::vector<Tensor> z_man;
  std::vector<std::size_t> y;
  for (auto r : rows) {
    auto a = account_forward(r, table, rng);
    out.pooled.push_back(a.pooled);
    z_man.push_back(a.z_man);
    y.push_back(class_index(labels_.at(r)));
  }
  const Tensor x = nn::override_rows(registry_.matrix(), rows, out.pooled);
  const Tensor z_gcn = nn::gather_rows(gcn_probabilities(x), rows);
  out.pred = joint_predict(z_gcn, nn::vcat(z_man), config_.lambda, config_.convention);
  out.loss = cross_entropy(out.pred, y, config_.loss);
  return out;
}

void JointModel::initialize_registry() {
  nn::NoGradGuard no_grad;
  const Tensor table = similarity_table();
  for (std::size_t r = 0; r < size(); ++r) {
    registry_.write(r, account_forward(r, table, nullptr).pooled.data());
  }
}

std::vector<nn::Parameter*> JointModel::trainable() {
  std::vector<nn::Parameter*> out;
  for (auto& p : store_.all()) out.push_back(&p);
  if (!config_.freeze_tlm) {
    for (auto& p : encoder_.parameters().all()) {
      if (p.name.rfind("tlm.mlm.", 0) != 0) out.push_back(&p);
    }
  }
  return out;
}

double JointModel::train_step(std::span<const std::size_t> rows, Rng& rng) {
  std::vector<std::size_t> batch;
  for (auto r : rows) {
    if (labels_.at(r) == Label::unlabeled) {
      std::cerr << "warning: skipping unlabelled account " << graph_.accounts()[r] << '\n';
      continue;
    }
    batch.push_back(r);
  }
  if (batch.empty()) return 0.0;
  if (!adam_) adam_.emplace(trainable(), config_.adam);
  adam_->zero_grad();
  const StepOutput out = batch_loss(batch, &rng);
  const double loss = out.loss.item();
  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << "joint training: non-finite loss; lower the learning rate (currently "
        << config_.adam.lr << ")";
    throw NumericalError(msg.str());
  }
  out.loss.backward();
  adam_->step();
  registry_.tick();
  for (std::size_t i = 0; i < batch.size(); ++i) registry_.write(batch[i], out.pooled[i].data());
  return loss;
}

Predictions JointModel::predict() const {
  nn::NoGradGuard no_grad;
  const Tensor table = similarity_table();
  std::vector<Tensor> pooled, z_man;
  for (std::size_t r = 0; r < size(); ++r) {
    auto a = account_forward(r, table, nullptr);
    pooled.push_back(a.pooled);
    z_man.push_back(a.z_man);
  }
  const Tensor z_gcn = gcn_probabilities(nn::vcat(pooled));
  const Tensor pred = joint_predict(z_gcn, nn::vcat(z_man), config_.lambda, config_.convention);
  Predictions p;
  for (std::size_t r = 0; r < size(); ++r) {
    p.phisher.push_back(pred.at(r, kPhisher));
    const std::size_t y[] = {labels_[r] == Label::phisher ? kPhisher : kNormal};
    p.loss.push_back(labels_[r] == Label::unlabeled
                         ? 0.0
                         : cross_entropy(nn::slice_rows(pred, r, r + 1), y, config_.loss).item());
  }
  return p;
}

EvalReport JointModel::evaluate_rows(const Predictions& p,
                                     std::span<const std::size_t> rows) const {
  std::vector<double> prob;
  // std::vector<bool> is not contiguous, so the flags live in a plain array.
  auto truth = std::make_unique<bool[]>(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    prob.push_back(p.phisher.at(rows[i]));
    truth[i] = labels_.at(rows[i]) == Label::phisher;
  }
  EvalReport r = evaluate(prob, std::span<const bool>(truth.get(), rows.size()));
  r.lambda = config_.lambda;
  return r;
}

namespace {

// Endless reshuffled pass over one class; `take` never repeats a row
// within a call.
class Cycle {
 public:
  Cycle(std::vector<std::size_t> items, Rng& rng) : items_(std::move(items)) {
    rng.shuffle(items_);
  }
  void take(std::size_t k, Rng& rng, std::vector<std::size_t>& out) {
    if (k >= items_.size()) {
      out.insert(out.end(), items_.begin(), items_.end());
      return;
    }
    if (pos_ + k > items_.size()) {
      rng.shuffle(items_);
      pos_ = 0;
    }
    out.insert(out.end(), items_.begin() + pos_, items_.begin() + pos_ + k);
    pos_ += k;
  }
  bool empty() const { return items_.empty(); }

 private:
  std::vector<std::size_t> items_;
  std::size_t pos_ = 0;
};

void write_log(std::ostream* out, const tlm::EpochLog& e) {
  if (!out) return;
  *out << nlohmann::ordered_json{{"epoch", e.epoch},
                                 {"split", e.split},
                                 {"loss", e.loss},
                                 {"elapsed_ms", e.elapsed_ms}}
              .dump()
       << '\n';
  out->flush();
}

double mean_loss(const Predictions& p, std::span<const std::size_t> rows) {
  if (rows.empty()) return 0.0;
  double s = 0.0;
  for (auto r : rows) s += p.loss[r];
  return s / static_cast<double>(rows.size());
}

}  // namespace

JointResult JointModel::train(const Split& split, std::ostream* log) {
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
  };
  std::vector<std::size_t> phishers, normals;
  for (auto r : split.train) {
    if (labels_.at(r) == Label::phisher) phishers.push_back(r);
    if (labels_.at(r) == Label::normal) normals.push_back(r);
  }
  if (phishers.empty() || normals.empty()) {
    throw DomainError("joint: training split needs both classes");
  }
  initialize_registry();
  adam_.emplace(trainable(), config_.adam);

  Rng rng(seed_ ^ 0x6a6f696e74ULL);
  Cycle pos(phishers, rng), neg(normals, rng);
  const std::size_t half = config_.batch_size / 2;
  const std::size_t steps =
      (split.train.size() + config_.batch_size - 1) / config_.batch_size;

  JointResult result;
  double best_f1 = -1.0;
  std::vector<std::vector<double>> best;
  auto params = trainable();
  auto keep_best = [&] {
    best.clear();
    for (auto* p : params) best.emplace_back(p->tensor.data().begin(), p->tensor.data().end());
  };

  for (std::size_t epoch = 1; epoch <= config_.epochs; ++epoch) {
    double total = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      std::vector<std::size_t> batch;
      pos.take(half, rng, batch);
      neg.take(config_.batch_size - half, rng, batch);
      std::sort(batch.begin(), batch.end());
      total += train_step(batch, rng);
    }
    result.log.push_back({epoch, "train", total / static_cast<double>(steps), elapsed()});
    write_log(log, result.log.back());

    if (config_.select_best || epoch == config_.epochs) {
      const Predictions p = predict();
      const EvalReport val = evaluate_rows(p, split.validation);
      result.log.push_back({epoch, "validation", mean_loss(p, split.validation), elapsed()});
      write_log(log, result.log.back());
      if (config_.select_best && val.f1 > best_f1) {
        best_f1 = val.f1;
        result.best_epoch = epoch;
        keep_best();
      }
    }
  }
  if (config_.select_best && !best.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      std::copy(best[i].begin(), best[i].end(), params[i]->tensor.mutable_data().begin());
    }
  } else {
    result.best_epoch = config_.epochs;
  }
  const Predictions p = predict();
  result.test = evaluate_rows(p, split.test);
  result.validation = evaluate_rows(p, split.validation);
  return result;
}

void JointModel::save(const std::filesystem::path& path, const nlohmann::json& extra) const {
  nn::Checkpoint ckpt;
  ckpt.hyperparameters = {{"kind", "joint"},
                          {"joint", config_},
                          {"encoder", encoder_.config()},
                          {"extra", extra}};
  ckpt.tensors = nn::snapshot(store_);
  for (auto& t : nn::snapshot(encoder_.parameters())) ckpt.tensors.push_back(std::move(t));
  nn::save_checkpoint(path, ckpt);
}

void JointModel::load(const std::filesystem::path& path) {
  const nn::Checkpoint ckpt = nn::load_checkpoint(path);
  if (ckpt.hyperparameters.value("kind", std::string()) != "joint") {
    throw ConfigError(path.string() + ": not a joint checkpoint");
  }
  nn::restore(store_, ckpt);
  nn::restore(encoder_.parameters(), ckpt);
  if (config_.freeze_tlm) {
    nn::NoGradGuard no_grad;
    frozen_semantic_.clear();
    for (const auto& ids : rows_) frozen_semantic_.push_back(encoder_.encode(ids));
  }
}

}  // namespace tlmg::fusion
