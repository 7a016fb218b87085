#include "smoa/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "smoa/ops.hpp"

namespace smoa {

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("train config: epochs must be at least 1");
  if (batch < 1) throw ValidationError("train config: batch must be at least 1");
  if (lr_max < 0.0 || lr_min < 0.0) throw ValidationError("train config: negative learning rate");
  if (lr_min > lr_max) throw ValidationError("train config: lr_min exceeds lr_max");
  if (weight_decay < 0.0) throw ValidationError("train config: negative weight decay");
  if (eval_every < 0) throw ValidationError("train config: negative eval cadence");
}

double cosine_lr(int64_t step, int64_t total_steps, double lr_max, double lr_min) {
  if (total_steps < 1) throw ValidationError("cosine_lr: total_steps must be at least 1");
  if (step < 0) throw ValidationError("cosine_lr: negative step");
  if (lr_min > lr_max) throw ValidationError("cosine_lr: lr_min exceeds lr_max");
  if (step > total_steps) {
    static bool warned = false;
    if (!warned) {
      std::fprintf(stderr, "warning: cosine_lr step %lld past schedule end %lld, clamping\n",
                   static_cast<long long>(step), static_cast<long long>(total_steps));
      warned = true;
    }
    return lr_min;
  }
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(3.141592653589793238462643 * frac));
}

AdamW::AdamW(double beta1, double beta2, double eps, double weight_decay)
    : beta1_(beta1), beta2_(beta2), eps_(eps), wd_(weight_decay) {
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
    throw ValidationError("adamw: betas must lie in [0, 1)");
  if (eps <= 0) throw ValidationError("adamw: eps must be positive");
  if (weight_decay < 0) throw ValidationError("adamw: negative weight decay");
}

void AdamW::step(ParamRegistry& reg, double lr) {
  if (lr < 0) throw ValidationError("adamw: negative learning rate");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (ParamEntry& e : reg) {
    if (!e.trainable) continue;
    std::vector<double>& g = e.tensor.grad_buffer();
    if (g.empty()) continue;  // never reached by backward
    const int64_t n = e.tensor.numel();
    Slot& slot = slots_[e.name];
    if (slot.m.empty()) {
      slot.m.assign(static_cast<size_t>(n), 0.0);
      slot.v.assign(static_cast<size_t>(n), 0.0);
    }
    double* w = e.tensor.data();
    const bool decay = e.tensor.ndim() >= 2 && wd_ > 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const double gi = g[static_cast<size_t>(i)];
      if (!std::isfinite(gi))
        throw NumericError("adamw: non-finite gradient in " + e.name);
      double& m = slot.m[static_cast<size_t>(i)];
      double& v = slot.v[static_cast<size_t>(i)];
      m = beta1_ * m + (1.0 - beta1_) * gi;
      v = beta2_ * v + (1.0 - beta2_) * gi * gi;
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      if (decay) w[i] -= lr * wd_ * w[i];
      w[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

double evaluate_accuracy(Model& model, const Dataset& ds, int64_t batch) {
  if (ds.size() == 0) throw ValidationError("evaluate: empty dataset");
  if (batch < 1) throw ValidationError("evaluate: batch must be at least 1");
  NoGradGuard guard;
  int64_t correct = 0;
  for (int64_t at = 0; at < ds.size(); at += batch) {
    const int64_t take = std::min(batch, ds.size() - at);
    std::vector<const Spectrogram*> ptrs;
    ptrs.reserve(static_cast<size_t>(take));
    for (int64_t i = 0; i < take; ++i)
      ptrs.push_back(&ds.samples[static_cast<size_t>(at + i)]);
    Tensor logits = model.forward(ptrs);
    for (int64_t i = 0; i < take; ++i) {
      const double* row = logits.data() + i * logits.cols();
      int64_t best = 0;
      for (int64_t k = 1; k < logits.cols(); ++k)
        if (row[k] > row[best]) best = k;
      if (best == ds.labels[static_cast<size_t>(at + i)]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

TrainResult train_model(Model& model, const Dataset& train, const Dataset& test,
                        const TrainConfig& cfg) {
  cfg.validate();
  if (train.size() == 0) throw ValidationError("train: empty training dataset");
  if (test.size() == 0) throw ValidationError("train: empty test dataset");

  ParamRegistry& reg = model.params();
  AdamW opt(cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay);

  const int64_t n = train.size();
  const int64_t steps_per_epoch = (n + cfg.batch - 1) / cfg.batch;
  const int64_t total_steps = cfg.epochs * steps_per_epoch;

  TrainResult result;
  result.rows.reserve(static_cast<size_t>(total_steps) + 8);
  std::vector<int64_t> order(static_cast<size_t>(n));
  std::vector<double> step_times;
  step_times.reserve(static_cast<size_t>(total_steps));

  int64_t gstep = 0;
  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle:" + std::to_string(epoch)));
    for (int64_t i = n - 1; i > 0; --i)
      std::swap(order[static_cast<size_t>(i)],
                order[static_cast<size_t>(shuffle_rng.below(static_cast<uint64_t>(i + 1)))]);

    for (int64_t at = 0; at < n; at += cfg.batch) {
      const int64_t take = std::min(cfg.batch, n - at);
      std::vector<const Spectrogram*> ptrs;
      std::vector<int> labels;
      ptrs.reserve(static_cast<size_t>(take));
      labels.reserve(static_cast<size_t>(take));
      for (int64_t i = 0; i < take; ++i) {
        const int64_t idx = order[static_cast<size_t>(at + i)];
        ptrs.push_back(&train.samples[static_cast<size_t>(idx)]);
        labels.push_back(train.labels[static_cast<size_t>(idx)]);
      }

      const auto t0 = std::chrono::steady_clock::now();
      reg.zero_trainable_grads();
      Tensor logits = model.forward(ptrs);
      Tensor loss = cross_entropy(logits, labels);
      const double loss_val = loss.item();
      if (!std::isfinite(loss_val))
        throw NumericError("train: loss is not finite at step " + std::to_string(gstep));
      backward(loss);
      const double lr = cosine_lr(gstep, total_steps, cfg.lr_max, cfg.lr_min);
      opt.step(reg, lr);
      const auto t1 = std::chrono::steady_clock::now();
      const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

      TrainLogRow row;
      row.step = gstep + 1;
      row.loss = loss_val;
      row.lr = lr;
      row.step_ms = ms;
      result.rows.push_back(row);
      step_times.push_back(ms);
      ++gstep;
    }

    if (cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0 && epoch + 1 < cfg.epochs) {
      TrainLogRow row;
      row.is_eval = true;
      row.step = gstep;
      row.accuracy = evaluate_accuracy(model, test, cfg.batch);
      result.rows.push_back(row);
    }
  }

  result.steps = gstep;
  result.train_accuracy = evaluate_accuracy(model, train, cfg.batch);
  result.test_accuracy = evaluate_accuracy(model, test, cfg.batch);
  TrainLogRow final_row;
  final_row.is_eval = true;
  final_row.step = gstep;
  final_row.accuracy = result.test_accuracy;
  result.rows.push_back(final_row);

  if (!step_times.empty()) {
    double sum = 0.0;
    for (double v : step_times) sum += v;
    result.mean_step_ms = sum / static_cast<double>(step_times.size());
    std::vector<double> sorted = step_times;
    std::sort(sorted.begin(), sorted.end());
    const size_t mid = sorted.size() / 2;
    result.median_step_ms =
        sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  }
  return result;
}

}  // namespace smoa
