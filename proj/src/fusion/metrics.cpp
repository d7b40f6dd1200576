#include "tlmg/fusion/metrics.hpp"

#include <fstream>
#include <iomanip>

#include "tlmg/error.hpp"

namespace tlmg::fusion {

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

void fill_metrics(EvalReport& r) {
  r.undefined.clear();
  auto ratio = [&](std::size_t num, std::size_t den, const char* name) {
    if (den == 0) {
      r.undefined.emplace_back(name);
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  r.precision = ratio(r.tp, r.tp + r.fp, "precision");
  r.recall = ratio(r.tp, r.tp + r.fn, "recall");
  if (r.precision + r.recall == 0.0) r.undefined.emplace_back("f1");
  r.f1 = f1_score(r.precision, r.recall);
  const double tnr = ratio(r.tn, r.tn + r.fp, "specificity");
  r.b_acc = (r.recall + tnr) / 2.0;
}

EvalReport evaluate(std::span<const double> phisher_probability,
                    std::span<const bool> is_phisher) {
  if (phisher_probability.size() != is_phisher.size()) {
    throw DimensionError("evaluate: " + std::to_string(phisher_probability.size()) +
                         " predictions for " + std::to_string(is_phisher.size()) +
                         " labels");
  }
  EvalReport r;
  for (std::size_t i = 0; i < is_phisher.size(); ++i) {
    const bool predicted = phisher_probability[i] > 0.5;
    if (predicted && is_phisher[i]) {
      ++r.tp;
    } else if (predicted) {
      ++r.fp;
    } else if (is_phisher[i]) {
      ++r.fn;
    } else {
      ++r.tn;
    }
  }
  fill_metrics(r);
  return r;
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j{{"dataset", dataset},
                           {"seed", seed},
                           {"lambda", lambda},
                           {"theta", theta},
                           {"mode", mode},
                           {"precision", precision},
                           {"recall", recall},
                           {"f1", f1},
                           {"b_acc", b_acc},
                           {"confusion", {{"tp", tp}, {"fp", fp}, {"tn", tn}, {"fn", fn}}}};
  if (!undefined.empty()) j["undefined"] = undefined;
  return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  r.dataset = j.at("dataset").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.lambda = j.at("lambda").get<double>();
  r.theta = j.at("theta").get<double>();
  r.mode = j.at("mode").get<std::string>();
  const auto& c = j.at("confusion");
  r.tp = c.at("tp");
  r.fp = c.at("fp");
  r.tn = c.at("tn");
  r.fn = c.at("fn");
  fill_metrics(r);
  return r;
}

void write_sweep_csv(const std::filesystem::path& path, const std::string& parameter,
                     std::span<const SweepRow> rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << parameter << ",precision,recall,f1,b_acc,tp,fp,tn,fn\n";
  out << std::setprecision(12);
  for (const auto& row : rows) {
    const auto& r = row.report;
    out << row.value << ',' << r.precision << ',' << r.recall << ',' << r.f1 << ','
        << r.b_acc << ',' << r.tp << ',' << r.fp << ',' << r.tn << ',' << r.fn << '\n';
  }
}

}  // namespace tlmg::fusion
