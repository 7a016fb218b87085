#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "smoa/tensor.hpp"

namespace smoa {

struct ParamEntry {
  std::string name;
  Tensor tensor;
  bool trainable = false;
};

enum class ParamFilter { All, Trainable, Frozen };

// Insertion-ordered named parameter store. Iteration order is the order of
// registration, which also fixes checkpoint layout and optimizer traversal.
class ParamRegistry {
 public:
  Tensor add(std::string name, Tensor t, bool trainable) {
    if (index_.count(name))
      throw ContractError("parameter registered twice: " + name);
    if (!t.defined()) throw ValidationError("parameter " + name + " is undefined");
    index_.emplace(name, entries_.size());
    entries_.push_back(ParamEntry{std::move(name), t, trainable});
    return t;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  ParamEntry& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("unknown parameter: " + name);
    return entries_[it->second];
  }
  const ParamEntry& at(const std::string& name) const {
    return const_cast<ParamRegistry*>(this)->at(name);
  }

  size_t size() const { return entries_.size(); }
  ParamEntry& operator[](size_t i) { return entries_[i]; }
  const ParamEntry& operator[](size_t i) const { return entries_[i]; }

  std::vector<ParamEntry>::iterator begin() { return entries_.begin(); }
  std::vector<ParamEntry>::iterator end() { return entries_.end(); }
  std::vector<ParamEntry>::const_iterator begin() const { return entries_.begin(); }
  std::vector<ParamEntry>::const_iterator end() const { return entries_.end(); }

  int64_t count_scalars(ParamFilter f = ParamFilter::All) const {
    int64_t n = 0;
    for (const ParamEntry& e : entries_)
      if (matches(e, f)) n += e.tensor.numel();
    return n;
  }

  void zero_trainable_grads() {
    for (ParamEntry& e : entries_)
      if (e.trainable) e.tensor.zero_grad();
  }

  // FNV-1a over the selected parameters' value bytes, in registration order.
  uint64_t payload_hash(ParamFilter f = ParamFilter::All) const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const ParamEntry& e : entries_)
      if (matches(e, f))
        h = fnv1a64(e.tensor.data(), sizeof(double) * static_cast<size_t>(e.tensor.numel()), h);
    return h;
  }

 private:
  static bool matches(const ParamEntry& e, ParamFilter f) {
    return f == ParamFilter::All || (f == ParamFilter::Trainable) == e.trainable;
  }

  std::vector<ParamEntry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

// Draws a fresh parameter whose values depend only on (seed, name), never on
// registration order. Keeps shared submodules bit-identical across variants.
inline Tensor make_param(ParamRegistry& reg, const std::string& name, Shape shape, bool trainable,
                         uint64_t seed, double init_std) {
  Tensor t;
  if (init_std == 0.0) {
    t = Tensor::zeros(std::move(shape), trainable);
  } else {
    Rng rng(derive_seed(seed, name));
    t = Tensor::randn(std::move(shape), rng, init_std, trainable);
  }
  return reg.add(name, t, trainable);
}

inline Tensor make_param_const(ParamRegistry& reg, const std::string& name, Shape shape,
                               bool trainable, double fill) {
  return reg.add(name, Tensor::full(std::move(shape), fill, trainable), trainable);
}

}  // namespace smoa
