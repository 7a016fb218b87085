#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smoa/data.hpp"
#include "smoa/encoder.hpp"
#include "smoa/run_config.hpp"

namespace smoa::tools {

// Parsed command line, shared by every subcommand; unset optionals keep the
// config file's values.
struct CliOptions {
  std::string config_path;
  std::string out_dir;        // --out
  bool has_seed = false;
  uint64_t seed = 0;          // --seed
  int64_t steps = 50;         // --steps (benchmark)
  int64_t warmup = 10;        // --warmup (benchmark)
  std::string layers = "all"; // --layers (analyze selector)
  std::string mode;           // --mode (sweep)
};

// Config file plus command-line overrides applied on top.
RunConfig load_config(const CliOptions& opt);

struct TaskData {
  std::string name;
  Dataset train, test;
};

// Datasets for the run: each data.path prefix loads <prefix>.train.smds and
// <prefix>.test.smds; with no paths one task is synthesized from data.*.
std::vector<TaskData> resolve_tasks(const RunConfig& cfg);

Model build_model(const RunConfig& cfg, int64_t n_classes);

// Subcommand bodies. Each returns the process exit code; config problems are
// thrown as ConfigError and mapped to exit code 2 in main.
int cmd_train(const CliOptions& opt);
int cmd_benchmark(const CliOptions& opt);
int cmd_gradcheck(const CliOptions& opt);
int cmd_sweep(const CliOptions& opt);
int cmd_analyze(const CliOptions& opt);
int cmd_paramcount(const CliOptions& opt);
int cmd_gen_data(const CliOptions& opt);

}  // namespace smoa::tools
