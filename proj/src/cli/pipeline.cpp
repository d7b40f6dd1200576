#include "tlmg/cli/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <optional>

#include "tlmg/aig/aig.hpp"
#include "tlmg/error.hpp"

namespace tlmg::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& section) {
  if (!j.is_object()) throw ConfigError("config: '" + section + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; })) {
      throw ConfigError("config: unknown key '" + section + "." + key + "'");
    }
  }
}

const json& section(const json& j, const char* name) {
  static const json kEmpty = json::object();
  return j.contains(name) ? j.at(name) : kEmpty;
}

}  // namespace

void RunConfig::validate() const {
  encoder.validate();
  joint.validate();
  if (corpus.max_transactions == 0) throw ConfigError("config: max_transactions must be positive");
  if (1 + corpus.max_transactions * corpus::kWordsPerSentence > encoder.max_length) {
    throw ConfigError("config: encoder max_length " + std::to_string(encoder.max_length) +
                      " cannot hold " + std::to_string(corpus.max_transactions) +
                      " transactions");
  }
  if (tasg_mode != "off") tasg::parse_mode(tasg_mode);
  if (!(theta >= 0.0 && theta < 1.0)) throw ConfigError("config: theta must lie in [0, 1)");
  if (!(synth.phisher_fraction > 0.0 && synth.phisher_fraction < 1.0)) {
    throw ConfigError("config: synth.phisher_fraction must lie in (0, 1)");
  }
  if (!(train_fraction > 0.0 && validation_fraction >= 0.0 &&
        train_fraction + validation_fraction < 1.0)) {
    throw ConfigError("config: split fractions must be positive and sum below 1");
  }
  if (pretrain.batch_size == 0 || !(pretrain.lr > 0.0)) {
    throw ConfigError("config: pretrain batch_size and lr must be positive");
  }
  if (!(pretrain.mask_rate > 0.0 && pretrain.mask_rate < 1.0)) {
    throw ConfigError("config: pretrain.mask_rate must lie in (0, 1)");
  }
  for (double l : sweep.lambdas) {
    if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("config: sweep lambda outside [0, 1]");
  }
  for (double t : sweep.thetas) {
    if (!(t >= 0.0 && t < 1.0)) throw ConfigError("config: sweep theta outside [0, 1)");
  }
}

ordered_json RunConfig::to_json() const {
  ordered_json j;
  j["paths"] = {{"transactions", transactions.string()},
                {"labels", labels.string()},
                {"workdir", workdir.string()}};
  j["dataset"] = dataset;
  j["seed"] = seed;
  j["corpus"] = {{"max_transactions", corpus.max_transactions},
                 {"include_unlabeled", corpus.include_unlabeled}};
  j["synth"] = {{"accounts", synth.accounts},
                {"phisher_fraction", synth.phisher_fraction},
                {"elevated_phisher_pairs", synth.elevated_phisher_pairs}};
  j["encoder"] = json(encoder);
  j["pretrain"] = {{"epochs", pretrain.epochs},
                   {"lr", pretrain.lr},
                   {"batch_size", pretrain.batch_size},
                   {"mask_rate", pretrain.mask_rate}};
  j["tasg"] = {{"mode", tasg_mode}, {"theta", theta}};
  j["aig"] = {{"weighted", weighted_aig}};
  j["joint"] = json(joint);
  j["split"] = {{"train", train_fraction}, {"validation", validation_fraction}};
  j["sweep"] = {{"lambdas", sweep.lambdas}, {"thetas", sweep.thetas}};
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  try {
    check_keys(j,
               {"paths", "dataset", "seed", "corpus", "synth", "encoder", "pretrain", "tasg",
                "aig", "joint", "split", "sweep"},
               "");
    const auto& paths = section(j, "paths");
    check_keys(paths, {"transactions", "labels", "workdir"}, "paths");
    c.transactions = paths.value("transactions", c.transactions.string());
    c.labels = paths.value("labels", c.labels.string());
    c.workdir = paths.value("workdir", c.workdir.string());
    c.dataset = j.value("dataset", c.dataset);
    c.seed = j.value("seed", c.seed);

    const auto& cor = section(j, "corpus");
    check_keys(cor, {"max_transactions", "include_unlabeled"}, "corpus");
    c.corpus.max_transactions = cor.value("max_transactions", c.corpus.max_transactions);
    c.corpus.include_unlabeled = cor.value("include_unlabeled", c.corpus.include_unlabeled);

    const auto& syn = section(j, "synth");
    check_keys(syn, {"accounts", "phisher_fraction", "elevated_phisher_pairs"}, "synth");
    c.synth.accounts = syn.value("accounts", c.synth.accounts);
    c.synth.phisher_fraction = syn.value("phisher_fraction", c.synth.phisher_fraction);
    c.synth.elevated_phisher_pairs =
        syn.value("elevated_phisher_pairs", c.synth.elevated_phisher_pairs);

    c.encoder = section(j, "encoder").get<tlm::EncoderConfig>();

    const auto& pre = section(j, "pretrain");
    check_keys(pre, {"epochs", "lr", "batch_size", "mask_rate"}, "pretrain");
    c.pretrain.epochs = pre.value("epochs", c.pretrain.epochs);
    c.pretrain.lr = pre.value("lr", c.pretrain.lr);
    c.pretrain.batch_size = pre.value("batch_size", c.pretrain.batch_size);
    c.pretrain.mask_rate = pre.value("mask_rate", c.pretrain.mask_rate);

    const auto& ta = section(j, "tasg");
    check_keys(ta, {"mode", "theta"}, "tasg");
    c.tasg_mode = ta.value("mode", c.tasg_mode);
    c.theta = ta.value("theta", c.theta);

    const auto& ai = section(j, "aig");
    check_keys(ai, {"weighted"}, "aig");
    c.weighted_aig = ai.value("weighted", c.weighted_aig);

    c.joint = section(j, "joint").get<fusion::JointConfig>();

    const auto& sp = section(j, "split");
    check_keys(sp, {"train", "validation"}, "split");
    c.train_fraction = sp.value("train", c.train_fraction);
    c.validation_fraction = sp.value("validation", c.validation_fraction);

    const auto& sw = section(j, "sweep");
    check_keys(sw, {"lambdas", "thetas"}, "sweep");
    c.sweep.lambdas = sw.value("lambdas", c.sweep.lambdas);
    c.sweep.thetas = sw.value("thetas", c.sweep.thetas);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.synth.seed = c.seed;
  c.validate();
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError(path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

// ---------------------------------------------------------------- stages

namespace {

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_json(const fs::path& path, const ordered_json& j) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

struct Inputs {
  std::vector<corpus::AccountCorpus> accounts;
  corpus::Vocabulary vocab;
};

Inputs load_corpus(const Workdir& wd) {
  Inputs in;
  in.accounts = corpus::read_corpus(wd.corpus());
  in.vocab = corpus::read_vocabulary(wd.vocab());
  return in;
}

struct Graphs {
  std::optional<tasg::VocabGraph> tasg;
  aig::AccountGraph aig;
};

Graphs load_graphs(const RunConfig& c, const Workdir& wd, const corpus::Vocabulary& vocab) {
  std::ifstream in(wd.graph_manifest());
  if (!in) throw MissingArtifactError(wd.graph_manifest().string());
  const json m = json::parse(in);
  if (m.at("tasg_mode") != c.tasg_mode || m.at("theta").get<double>() != c.theta) {
    throw ConfigError("graphs were built with TASG mode " + m.at("tasg_mode").dump() +
                      " and theta " + m.at("theta").dump() + "; rerun build-graphs");
  }
  if (m.at("vocab_fingerprint").get<std::uint64_t>() != vocab.fingerprint()) {
    throw ConfigError("graphs were built from a different corpus; rerun build-graphs");
  }
  Graphs g;
  g.aig = aig::read_graph(wd.aig_nodes(), wd.aig_edges());
  if (c.tasg_enabled()) {
    g.tasg = tasg::read_graph(wd.tasg_nodes(), wd.tasg_edges(), tasg::parse_mode(c.tasg_mode),
                              c.theta);
  }
  return g;
}

fusion::EvalReport stamp(fusion::EvalReport r, const RunConfig& c) {
  r.dataset = c.dataset;
  r.seed = c.seed;
  r.lambda = c.joint.lambda;
  r.theta = c.theta;
  r.mode = c.tasg_mode;
  return r;
}

ordered_json report_json(const fusion::EvalReport& r) { return r.to_json(); }

// Trains one joint model from the pretrained encoder and returns the test
// report; saves the model and the log when paths are given.
fusion::EvalReport train_once(const RunConfig& c, const Workdir& wd, const Inputs& in,
                              const aig::AccountGraph& graph, const tasg::VocabGraph* vocab_graph,
                              const fs::path* checkpoint, const fs::path* log_path) {
  tlm::Encoder encoder = tlm::load_encoder(wd.tlm_checkpoint(), in.vocab);
  fusion::JointModel model(encoder, in.accounts, graph, vocab_graph, c.weighted_aig, c.joint,
                           c.seed);
  const auto split =
      fusion::stratified_split(model.labels(), c.seed, c.train_fraction, c.validation_fraction);
  std::ofstream log;
  if (log_path) {
    ensure_parent(*log_path);
    log.open(*log_path);
  }
  const auto result = model.train(split, log_path ? &log : nullptr);
  if (checkpoint) {
    ensure_parent(*checkpoint);
    model.save(*checkpoint, {{"best_epoch", result.best_epoch}});
  }
  return stamp(result.test, c);
}

}  // namespace

void run_synth(const RunConfig& c) {
  auto options = c.synth;
  options.seed = c.seed;
  const auto data = synth::generate(options);
  ensure_parent(c.transactions);
  ensure_parent(c.labels);
  synth::write_transfers(c.transactions, data.transfers);
  synth::write_labels(c.labels, data.labels);
}

std::size_t run_ingest(const RunConfig& c) {
  const Workdir wd{c.workdir};
  const auto histories = corpus::ingest(c.transactions, c.labels, c.corpus);
  const auto tokenized = corpus::build_sentences(histories);
  ensure_parent(wd.corpus());
  corpus::write_corpus(wd.corpus(), tokenized.accounts);
  corpus::write_vocabulary(wd.vocab(), tokenized.vocab);
  return tokenized.accounts.size();
}

tlm::PretrainResult run_pretrain(const RunConfig& c) {
  const Workdir wd{c.workdir};
  const Inputs in = load_corpus(wd);
  tlm::Encoder encoder(c.encoder, in.vocab.size(), c.seed);
  tlm::PretrainOptions o;
  o.epochs = c.pretrain.epochs;
  o.adam.lr = c.pretrain.lr;
  o.batch_size = c.pretrain.batch_size;
  o.mask_rate = c.pretrain.mask_rate;
  o.seed = c.seed;
  ensure_parent(wd.pretrain_log());
  std::ofstream log(wd.pretrain_log());
  const auto result = tlm::pretrain(encoder, in.accounts, o, &log);
  ensure_parent(wd.tlm_checkpoint());
  tlm::save_encoder(wd.tlm_checkpoint(), encoder, in.vocab, &result.optimizer);
  write_json(wd.pretrain_report(),
             {{"vocab_size", in.vocab.size()},
              {"epochs", c.pretrain.epochs},
              {"initial_loss", result.initial_loss},
              {"final_loss", result.final_loss},
              {"initial_accuracy", result.initial_accuracy},
              {"final_accuracy", result.final_accuracy}});
  return result;
}

void run_build_graphs(const RunConfig& c) {
  const Workdir wd{c.workdir};
  const Inputs in = load_corpus(wd);
  const auto transfers = corpus::read_transfers(c.transactions);
  std::vector<std::string> nodes;
  for (const auto& a : in.accounts) nodes.push_back(a.account);
  const auto graph = aig::build_account_graph(transfers, &nodes);
  fs::create_directories(wd.root / "graphs");
  aig::write_nodes(wd.aig_nodes(), graph);
  aig::write_edges(wd.aig_edges(), graph);
  if (c.tasg_enabled()) {
    const auto g =
        tasg::build_graph(in.accounts, in.vocab.size(), tasg::parse_mode(c.tasg_mode), c.theta);
    tasg::write_nodes(wd.tasg_nodes(), g, in.vocab);
    tasg::write_edges(wd.tasg_edges(), g);
  }
  write_json(wd.graph_manifest(), {{"tasg_mode", c.tasg_mode},
                                   {"theta", c.theta},
                                   {"vocab_fingerprint", in.vocab.fingerprint()},
                                   {"accounts", graph.size()},
                                   {"aig_edges", graph.edges().size()}});
}

fusion::EvalReport run_train(const RunConfig& c) {
  const Workdir wd{c.workdir};
  const Inputs in = load_corpus(wd);
  const Graphs g = load_graphs(c, wd, in.vocab);
  const fs::path ckpt = wd.joint_checkpoint(), log = wd.train_log();
  const auto report =
      train_once(c, wd, in, g.aig, g.tasg ? &*g.tasg : nullptr, &ckpt, &log);
  write_json(wd.eval_report(), report_json(report));
  return report;
}

fusion::EvalReport run_eval(const RunConfig& c) {
  const Workdir wd{c.workdir};
  const Inputs in = load_corpus(wd);
  const Graphs g = load_graphs(c, wd, in.vocab);
  if (!fs::exists(wd.joint_checkpoint())) {
    throw MissingArtifactError(wd.joint_checkpoint().string());
  }
  tlm::Encoder encoder = tlm::load_encoder(wd.tlm_checkpoint(), in.vocab);
  fusion::JointModel model(encoder, in.accounts, g.aig, g.tasg ? &*g.tasg : nullptr,
                           c.weighted_aig, c.joint, c.seed);
  model.load(wd.joint_checkpoint());
  const auto split =
      fusion::stratified_split(model.labels(), c.seed, c.train_fraction, c.validation_fraction);
  const auto report = stamp(model.evaluate_rows(model.predict(), split.test), c);
  write_json(wd.eval_report(), report_json(report));
  return report;
}

std::vector<fusion::SweepRow> run_sweep(const RunConfig& c, const std::string& parameter) {
  if (parameter != "lambda" && parameter != "theta") {
    throw ConfigError("sweep: parameter must be 'lambda' or 'theta'");
  }
  const Workdir wd{c.workdir};
  const Inputs in = load_corpus(wd);
  std::vector<fusion::SweepRow> rows;
  if (parameter == "lambda") {
    const Graphs g = load_graphs(c, wd, in.vocab);
    for (double lambda : c.sweep.lambdas) {
      RunConfig run = c;
      run.joint.lambda = lambda;
      rows.push_back({lambda, train_once(run, wd, in, g.aig, g.tasg ? &*g.tasg : nullptr,
                                         nullptr, nullptr)});
    }
  } else {
    if (!c.tasg_enabled()) throw ConfigError("sweep: theta sweep needs a TASG mode");
    const auto graph = aig::read_graph(wd.aig_nodes(), wd.aig_edges());
    for (double theta : c.sweep.thetas) {
      RunConfig run = c;
      run.theta = theta;
      const auto vg =
          tasg::build_graph(in.accounts, in.vocab.size(), tasg::parse_mode(c.tasg_mode), theta);
      rows.push_back({theta, train_once(run, wd, in, graph, &vg, nullptr, nullptr)});
    }
  }
  ensure_parent(wd.sweep_csv(parameter));
  fusion::write_sweep_csv(wd.sweep_csv(parameter), parameter, rows);
  return rows;
}

}  // namespace tlmg::cli
