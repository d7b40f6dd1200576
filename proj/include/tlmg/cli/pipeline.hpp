#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tlmg/corpus/corpus.hpp"
#include "tlmg/fusion/joint.hpp"
#include "tlmg/fusion/metrics.hpp"
#include "tlmg/synth/synth.hpp"
#include "tlmg/tasg/tasg.hpp"
#include "tlmg/tlm/encoder.hpp"

namespace tlmg::cli {

struct PretrainSettings {
  std::size_t epochs = 20;
  double lr = 1e-5;
  std::size_t batch_size = 16;
  double mask_rate = 0.15;
};

struct SweepSettings {
  std::vector<double> lambdas{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<double> thetas{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
};

/// Everything a run depends on. Serialises to one JSON document; unknown
/// keys are rejected with ConfigError.
struct RunConfig {
  std::filesystem::path transactions = "data/transactions.csv";
  std::filesystem::path labels = "data/labels.csv";
  std::filesystem::path workdir = "work";
  std::string dataset = "synthetic";
  std::uint64_t seed = 42;

  corpus::IngestOptions corpus{};
  synth::SynthOptions synth{};
  tlm::EncoderConfig encoder{};
  PretrainSettings pretrain{};
  // "off" disables the similarity graph.
  std::string tasg_mode = "tfidf";
  double theta = 0.2;
  bool weighted_aig = true;
  fusion::JointConfig joint{};
  double train_fraction = 0.7;
  double validation_fraction = 0.15;
  SweepSettings sweep{};

  void validate() const;
  bool tasg_enabled() const { return tasg_mode != "off"; }

  nlohmann::ordered_json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  // Missing file -> MissingArtifactError; malformed -> ConfigError.
  static RunConfig load(const std::filesystem::path& path);
};

/// Fixed artifact locations under the work directory.
struct Workdir {
  std::filesystem::path root;

  std::filesystem::path corpus() const { return root / "corpus" / "corpus.jsonl"; }
  std::filesystem::path vocab() const { return root / "corpus" / "vocab.json"; }
  std::filesystem::path tasg_nodes() const { return root / "graphs" / "tasg_nodes.jsonl"; }
  std::filesystem::path tasg_edges() const { return root / "graphs" / "tasg_edges.jsonl"; }
  std::filesystem::path aig_nodes() const { return root / "graphs" / "aig_nodes.json"; }
  std::filesystem::path aig_edges() const { return root / "graphs" / "aig_edges.jsonl"; }
  std::filesystem::path graph_manifest() const { return root / "graphs" / "manifest.json"; }
  std::filesystem::path tlm_checkpoint() const { return root / "checkpoints" / "tlm.ckpt"; }
  std::filesystem::path joint_checkpoint() const { return root / "checkpoints" / "joint.ckpt"; }
  std::filesystem::path pretrain_log() const { return root / "reports" / "pretrain_log.jsonl"; }
  std::filesystem::path pretrain_report() const { return root / "reports" / "pretrain.json"; }
  std::filesystem::path train_log() const { return root / "reports" / "train_log.jsonl"; }
  std::filesystem::path eval_report() const { return root / "reports" / "eval.json"; }
  std::filesystem::path sweep_csv(const std::string& parameter) const {
    return root / "reports" / ("sweep_" + parameter + ".csv");
  }
};

void run_synth(const RunConfig& config);
// Returns the number of accounts written.
std::size_t run_ingest(const RunConfig& config);
tlm::PretrainResult run_pretrain(const RunConfig& config);
void run_build_graphs(const RunConfig& config);
fusion::EvalReport run_train(const RunConfig& config);
fusion::EvalReport run_eval(const RunConfig& config);
/// `parameter` is "lambda" or "theta"; one retraining per grid value.
std::vector<fusion::SweepRow> run_sweep(const RunConfig& config, const std::string& parameter);

}  // namespace tlmg::cli
