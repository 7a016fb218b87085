#pragma once

#include <string>
#include <vector>

#include "smoa/data.hpp"
#include "smoa/moa.hpp"
#include "smoa/registry.hpp"

namespace smoa {

enum class Placement { Pfeiffer, Houlsby };
enum class PetlKind { None, Single, DenseMoa, SoftMoa };

struct PetlSpec {
  PetlKind kind = PetlKind::None;
  int64_t r = 1;  // bottleneck width
  int64_t n = 1;  // experts
  int64_t p = 1;  // slots per expert (soft only)
  Activation act = Activation::Gelu;
};

// Frozen-backbone patch encoder: linear patch projection with learned
// positions, pre-norm transformer layers, mean pooling, linear head.
// Adapter modules ride on the residual branches; with Pfeiffer placement one
// module per layer taps the attention input norm, Houlsby adds a second on
// the feed-forward input norm.
struct ModelConfig {
  int64_t d = 64, layers = 4, heads = 4;
  int64_t spec_f = 32, spec_t = 128;
  int64_t patch_f = 8, patch_t = 8;
  int64_t n_classes = 10;
  Placement placement = Placement::Pfeiffer;
  PetlSpec petl;
  bool full_finetune = false;  // true: backbone trains too
  uint64_t seed = 42;

  int64_t tokens() const { return (spec_f / patch_f) * (spec_t / patch_t); }
  int64_t patch_dim() const { return patch_f * patch_t; }
  void validate() const;
};

struct AttentionBlock {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};
struct FeedForward {
  Tensor w1, b1, w2, b2;
};

struct PetlBlock {
  PetlKind kind = PetlKind::None;
  // Exactly one of these is populated for Single / DenseMoa / SoftMoa.
  std::vector<BottleneckAdapter> single;
  std::vector<DenseMoaLayer> dense;
  std::vector<SoftMoaLayer> soft;
  bool active() const { return kind != PetlKind::None; }
  Tensor forward(const Tensor& x_norm, RoutingTrace* trace) const;
};

struct EncoderLayer {
  Tensor ln1_g, ln1_b, ln2_g, ln2_b;
  AttentionBlock attn;
  FeedForward ffn;
  PetlBlock petl_attn, petl_ffn;
};

// Routing snapshots for one sample's forward pass, in block order.
struct TraceBlockRecord {
  int64_t layer = 0;
  std::string block;  // "attn" or "ffn"
  RoutingTrace trace;
};
struct ModelTrace {
  std::vector<TraceBlockRecord> blocks;
};

// Constant [L×patch_dim] token matrix: patches enumerated row-major over the
// (f, t) patch grid, each flattened row-major.
Tensor patchify(const Spectrogram& s, const ModelConfig& cfg);

// When probs_out is given, the per-head [L×L] attention distributions are
// appended to it (detached copies).
Tensor mhsa_forward(const AttentionBlock& attn, const Tensor& x, int64_t heads,
                    std::vector<Matrix>* probs_out = nullptr);

class Model {
 public:
  explicit Model(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  ParamRegistry& params() { return reg_; }
  const ParamRegistry& params() const { return reg_; }

  // Logits [B×n_classes]. When traces is given, one ModelTrace per sample is
  // appended (empty for kinds without routing).
  Tensor forward(const std::vector<const Spectrogram*>& batch,
                 std::vector<ModelTrace>* traces = nullptr);
  Tensor forward_one(const Spectrogram& s, ModelTrace* trace = nullptr);

 private:
  Tensor encode(const Spectrogram& s, ModelTrace* trace);  // pooled [1×d]

  ModelConfig cfg_;
  ParamRegistry reg_;
  Tensor proj_w_, proj_b_, pos_;
  std::vector<EncoderLayer> layers_;
  Tensor head_w_, head_b_;
};

// Name lists by trainable flag, in registration order.
struct ParamPartition {
  std::vector<std::string> frozen, trainable;
};
ParamPartition param_partition(const ParamRegistry& reg);

// Scalar counts by role, derived from registry names and flags: head.* is
// the head, *.petl.* / *.petl2.* are adapter modules, the rest is backbone.
struct ParamCounts {
  int64_t total = 0, trainable = 0, frozen = 0;
  int64_t backbone = 0, petl = 0, head = 0;
  int64_t non_head_trainable = 0;
};
ParamCounts param_counts(const ParamRegistry& reg);

}  // namespace smoa
