#pragma once

#include <unordered_map>
#include <vector>

#include "smoa/encoder.hpp"

namespace smoa {

struct TrainConfig {
  int64_t epochs = 30;
  int64_t batch = 16;
  double lr_max = 5e-3;
  double lr_min = 0.0;
  double weight_decay = 0.1;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  int64_t eval_every = 5;  // epochs between test evaluations; 0 = final only
  uint64_t seed = 42;
  void validate() const;
};

// lr_min + 0.5*(lr_max - lr_min)*(1 + cos(pi*step/total_steps)).
// step past total_steps clamps to lr_min and warns once per process.
double cosine_lr(int64_t step, int64_t total_steps, double lr_max, double lr_min);

// Decoupled-weight-decay Adam over the trainable registry entries. Decay
// applies to matrices (rank >= 2) only, never biases or gains. Parameters the
// last backward never reached are left untouched.
class AdamW {
 public:
  AdamW(double beta1, double beta2, double eps, double weight_decay);
  void step(ParamRegistry& reg, double lr);
  int64_t steps() const { return t_; }

 private:
  struct Slot {
    std::vector<double> m, v;
  };
  double beta1_, beta2_, eps_, wd_;
  int64_t t_ = 0;
  std::unordered_map<std::string, Slot> slots_;
};

struct TrainLogRow {
  bool is_eval = false;
  int64_t step = 0;       // optimizer steps completed so far
  double loss = 0.0;      // step rows only
  double lr = 0.0;        // step rows only
  double step_ms = 0.0;   // step rows only
  double accuracy = 0.0;  // eval rows only
};

struct TrainResult {
  std::vector<TrainLogRow> rows;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double mean_step_ms = 0.0;
  double median_step_ms = 0.0;
  int64_t steps = 0;
};

// Deterministic given (model seed, cfg.seed, data): per-epoch seeded
// shuffling, full pass over train per epoch, cosine schedule over all steps.
// Ends with a train-set and test-set evaluation.
TrainResult train_model(Model& model, const Dataset& train, const Dataset& test,
                        const TrainConfig& cfg);

double evaluate_accuracy(Model& model, const Dataset& ds, int64_t batch);

}  // namespace smoa
