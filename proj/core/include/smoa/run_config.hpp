#pragma once

#include <string>
#include <vector>

#include "smoa/data.hpp"
#include "smoa/encoder.hpp"
#include "smoa/training.hpp"

namespace smoa {

// Plain-text experiment description: one `key = value` per line, '#' starts
// a comment. Unknown or duplicate keys are config errors naming the key.
// See configs/ for the full key set.
struct RunConfig {
  ModelConfig model;  // n_classes/seed filled in when the run resolves data
  TrainConfig train;
  std::string init_from;                // checkpoint path for backbone init
  SyntheticTaskConfig data;
  std::vector<std::string> data_paths;  // dataset prefixes; empty = synthesize
  std::string out_dir = "out";
  uint64_t seed = 42;
  std::string bench_variants;  // semicolon-separated PETL descriptors
  std::string sweep_mode;      // budget | adapters | slots
  std::string sweep_grid;      // comma list; slots mode uses N/p pairs
  int64_t sweep_budget = 0;    // 0: take the base config's own PETL budget

  // FNV-1a of the canonical serialization below; recorded in every CSV.
  uint64_t hash() const;
  // Effective settings, one per line, fixed key order.
  std::string canonical_text() const;
};

RunConfig parse_run_config(const std::string& path);
RunConfig parse_run_config_text(const std::string& text);

// Descriptor grammar: none | single(r=24) | dense(N=14,r=1) | soft(N=14,p=1,r=1).
// Omitted arguments default to 1. Keys are case-insensitive.
PetlSpec parse_petl(const std::string& descriptor);
std::string petl_to_string(const PetlSpec& spec);

}  // namespace smoa
