#include "tlmg/synth/synth.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "tlmg/error.hpp"
#include "tlmg/numerics/random.hpp"

namespace tlmg::synth {

using corpus::Label;
using corpus::Transfer;

namespace {

constexpr std::int64_t kStart = 1'600'000'000;
constexpr std::int64_t kDay = 86'400;
constexpr double kWeiPerEth = 1e18;

std::string address(Rng& rng) {
  static const char* const kHex = "0123456789abcdef";
  std::string a = "0x";
  for (int i = 0; i < 40; ++i) a += kHex[rng.below(16)];
  return a;
}

// Whole wei for 10^log10_eth ether.
double wei(double log10_eth) { return std::round(std::pow(10.0, log10_eth) * kWeiPerEth); }

}  // namespace

SynthData generate(const SynthOptions& o) {
  if (!(o.phisher_fraction > 0.0 && o.phisher_fraction < 1.0)) {
    throw ConfigError("synth: phisher fraction must lie in (0, 1)");
  }
  if (o.accounts < 4) throw ConfigError("synth: need at least 4 accounts");
  Rng rng(o.seed);
  const auto n_phish = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(o.phisher_fraction * o.accounts)), 1,
      o.accounts - 1);

  std::vector<std::string> names;
  while (names.size() < o.accounts) {
    auto a = address(rng);
    if (std::find(names.begin(), names.end(), a) == names.end()) names.push_back(a);
  }
  // The first n_phish generated addresses are phishers; addresses are random
  // so this carries no ordering signal.
  std::vector<std::size_t> phishers, normals;
  SynthData out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const bool p = i < n_phish;
    (p ? phishers : normals).push_back(i);
    out.labels[names[i]] = p ? Label::phisher : Label::normal;
  }

  auto emit = [&](std::size_t from, std::size_t to, double log10_eth, std::int64_t t) {
    out.transfers.push_back({names[from], names[to], wei(log10_eth), t});
  };

  // Normal activity: a handful of small transfers spread over ~180 days.
  for (auto a : normals) {
    const std::size_t k = 3 + rng.below(6);
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t to = normals[rng.below(normals.size())];
      if (to == a) continue;
      emit(a, to, rng.uniform(-3.0, 1.5), kStart + static_cast<std::int64_t>(rng.below(180 * kDay)));
    }
  }

  // Phishing campaigns: victims pay in within minutes, then the funds move on
  // to other phishers.
  for (auto p : phishers) {
    std::int64_t t = kStart + static_cast<std::int64_t>(rng.below(170 * kDay));
    const std::size_t victims = 2 + rng.below(3);
    for (std::size_t i = 0; i < victims; ++i) {
      t += 1 + static_cast<std::int64_t>(rng.exponential(600.0));
      emit(normals[rng.below(normals.size())], p, rng.uniform(1.0, 3.0), t);
    }
    if (phishers.size() < 2) continue;
    const std::size_t hops = 4 + rng.below(5);
    for (std::size_t i = 0; i < hops; ++i) {
      std::size_t q = phishers[rng.below(phishers.size())];
      if (q == p) continue;
      const std::size_t repeats = o.elevated_phisher_pairs ? 3 + rng.below(4) : 1;
      for (std::size_t r = 0; r < repeats; ++r) {
        t += 1 + static_cast<std::int64_t>(rng.exponential(300.0));
        emit(p, q, rng.uniform(1.0, 3.0), t);
      }
    }
  }

  std::stable_sort(out.transfers.begin(), out.transfers.end(),
                   [](const Transfer& a, const Transfer& b) { return a.timestamp < b.timestamp; });
  return out;
}

void write_transfers(const std::filesystem::path& path, const std::vector<Transfer>& transfers) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "from,to,value_wei,timestamp\n";
  char value[64];
  for (const auto& t : transfers) {
    std::snprintf(value, sizeof value, "%.0f", t.value_wei);
    out << t.from << ',' << t.to << ',' << value << ',' << t.timestamp << '\n';
  }
}

void write_labels(const std::filesystem::path& path,
                  const std::map<std::string, Label>& labels) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "address,label\n";
  for (const auto& [account, label] : labels) {
    out << account << ',' << corpus::to_string(label) << '\n';
  }
}

}  // namespace tlmg::synth
