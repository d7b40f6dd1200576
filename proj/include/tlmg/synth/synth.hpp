#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tlmg/corpus/corpus.hpp"

namespace tlmg::synth {

struct SynthOptions {
  std::size_t accounts = 1000;
  double phisher_fraction = 0.1;
  std::uint64_t seed = 42;
  // Repeat phisher-to-phisher transfers so such pairs carry larger counts.
  bool elevated_phisher_pairs = false;
};

struct SynthData {
  std::vector<corpus::Transfer> transfers;  // ascending timestamp
  std::map<std::string, corpus::Label> labels;
};

/// Labelled transfer log with planted signal. Phishers collect large
/// amounts from normal accounts in short bursts and pass funds among
/// themselves; normal accounts send small, spread-out amounts.
/// Throws ConfigError unless 0 < phisher_fraction < 1.
SynthData generate(const SynthOptions& options);

// `from,to,value_wei,timestamp` and `address,label` files.
void write_transfers(const std::filesystem::path& path,
                     const std::vector<corpus::Transfer>& transfers);
void write_labels(const std::filesystem::path& path,
                  const std::map<std::string, corpus::Label>& labels);

}  // namespace tlmg::synth
