// tlmg: command-line driver for the transaction language model + graph
// pipeline. Every command reads one JSON run config (defaults when
// --config is absent) and per-command flag overrides.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <malloc.h>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tlmg/cli/pipeline.hpp"
#include "tlmg/error.hpp"

namespace {

namespace fs = std::filesystem;
using tlmg::cli::RunConfig;

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kBadConfig = 2;
constexpr int kMissingArtifact = 3;
constexpr int kNumerical = 4;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  std::optional<double> theta;
  std::optional<std::string> tasg_mode;
  std::optional<std::string> weighted_aig;
  std::optional<std::string> convention;
  std::optional<std::string> workdir;
  std::optional<std::size_t> accounts;
  std::optional<double> phisher_fraction;
  bool elevated = false;
  std::string grid = "lambda";
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Run config JSON");
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--lambda", o.lambda, "Interpolation weight in [0, 1]");
  cmd->add_option("--theta", o.theta, "TASG edge threshold in [0, 1)");
  cmd->add_option("--tasg-mode", o.tasg_mode, "npmi | tfidf | npmi-tfidf | off")
      ->check(CLI::IsMember({"npmi", "tfidf", "npmi-tfidf", "off"}));
  cmd->add_option("--weighted-aig", o.weighted_aig, "true | false")
      ->check(CLI::IsMember({"true", "false"}));
  cmd->add_option("--lambda-convention", o.convention, "eq15 | prose")
      ->check(CLI::IsMember({"eq15", "prose"}));
  cmd->add_option("--workdir", o.workdir, "Work directory");
}

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : RunConfig::load(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.lambda) c.joint.lambda = *o.lambda;
  if (o.theta) c.theta = *o.theta;
  if (o.tasg_mode) c.tasg_mode = *o.tasg_mode;
  if (o.weighted_aig) c.weighted_aig = *o.weighted_aig == "true";
  if (o.convention) c.joint.convention = tlmg::fusion::parse_convention(*o.convention);
  if (o.workdir) c.workdir = *o.workdir;
  if (o.accounts) c.synth.accounts = *o.accounts;
  if (o.phisher_fraction) c.synth.phisher_fraction = *o.phisher_fraction;
  if (o.elevated) c.synth.elevated_phisher_pairs = true;
  c.synth.seed = c.seed;
  c.validate();
  return c;
}

void save_resolved(const RunConfig& c) {
  fs::create_directories(c.workdir);
  std::ofstream out(c.workdir / "config.json");
  out << c.to_json().dump(2) << '\n';
}

void print_report(const tlmg::fusion::EvalReport& r) {
  std::cout << r.to_json().dump(2) << '\n';
}

int run(const std::string& command, const Overrides& o) {
  const RunConfig c = resolve(o);
  if (command != "synth") save_resolved(c);
  if (command == "synth") {
    tlmg::cli::run_synth(c);
    std::cout << "wrote " << c.transactions.string() << " and " << c.labels.string() << '\n';
  } else if (command == "ingest") {
    const auto n = tlmg::cli::run_ingest(c);
    std::cout << "ingested " << n << " accounts into " << (c.workdir / "corpus").string() << '\n';
  } else if (command == "pretrain") {
    const auto r = tlmg::cli::run_pretrain(c);
    std::cout << "MLM loss " << r.initial_loss << " -> " << r.final_loss << ", top-1 accuracy "
              << r.final_accuracy << '\n';
  } else if (command == "build-graphs") {
    tlmg::cli::run_build_graphs(c);
    std::cout << "wrote graphs to " << (c.workdir / "graphs").string() << '\n';
  } else if (command == "train") {
    print_report(tlmg::cli::run_train(c));
  } else if (command == "eval") {
    print_report(tlmg::cli::run_eval(c));
  } else if (command == "sweep") {
    const auto rows = tlmg::cli::run_sweep(c, o.grid);
    std::cout << "wrote " << rows.size() << " rows to "
              << (c.workdir / "reports" / ("sweep_" + o.grid + ".csv")).string() << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  // Keep large tensor buffers on the heap instead of fresh mmaps per op.
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
  CLI::App app{"Transaction language model and graph pipeline for phishing detection"};
  app.require_subcommand(1);
  Overrides o;
  std::string command;
  for (const char* name : {"ingest", "synth", "pretrain", "build-graphs", "train", "eval", "sweep"}) {
    auto* cmd = app.add_subcommand(name);
    add_common(cmd, o);
    cmd->callback([&command, name] { command = name; });
    if (std::string(name) == "synth") {
      cmd->add_option("--accounts", o.accounts, "Number of accounts");
      cmd->add_option("--phisher-fraction", o.phisher_fraction, "Share of phishers in (0, 1)");
      cmd->add_flag("--elevated-phisher-pairs", o.elevated,
                    "Repeat transfers between phishers");
    }
    if (std::string(name) == "sweep") {
      cmd->add_option("--grid", o.grid, "lambda | theta")->check(CLI::IsMember({"lambda", "theta"}));
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadConfig;
  }
  try {
    return run(command, o);
  } catch (const tlmg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kBadConfig;
  } catch (const tlmg::MissingArtifactError& e) {
    std::cerr << "missing artifact: " << e.artifact() << '\n';
    return kMissingArtifact;
  } catch (const tlmg::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
