#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace tlmg::fusion {

/// Binary classification report; phisher is the positive class.
struct EvalReport {
  std::string dataset;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  double theta = 0.0;
  std::string mode;

  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double b_acc = 0.0;
  // Metrics whose denominator was zero and were reported as 0.
  std::vector<std::string> undefined;

  nlohmann::ordered_json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

/// 2PR / (P + R); 0 when P + R is 0.
double f1_score(double precision, double recall);

/// Confusion counts and metrics at threshold 0.5: an account is predicted
/// phisher when its phisher probability exceeds 0.5.
EvalReport evaluate(std::span<const double> phisher_probability,
                    std::span<const bool> is_phisher);
/// Metrics recomputed from the confusion counts already in `report`.
void fill_metrics(EvalReport& report);

struct SweepRow {
  double value = 0.0;
  EvalReport report;
};

/// CSV with header `<parameter>,precision,recall,f1,b_acc,tp,fp,tn,fn`.
void write_sweep_csv(const std::filesystem::path& path, const std::string& parameter,
                     std::span<const SweepRow> rows);

}  // namespace tlmg::fusion
