#include "smoa/encoder.hpp"

#include <cmath>

#include "smoa/ops.hpp"

namespace smoa {

void ModelConfig::validate() const {
  if (d < 1 || layers < 1 || heads < 1)
    throw ValidationError("model config: d, layers, heads must be positive");
  if (d % heads != 0)
    throw ValidationError("model config: d=" + std::to_string(d) + " not divisible by heads=" +
                          std::to_string(heads));
  if (spec_f < 1 || spec_t < 1 || patch_f < 1 || patch_t < 1)
    throw ValidationError("model config: spectrogram and patch dims must be positive");
  if (spec_f % patch_f != 0 || spec_t % patch_t != 0)
    throw ValidationError("model config: patch " + std::to_string(patch_f) + "x" +
                          std::to_string(patch_t) + " does not divide spectrogram " +
                          std::to_string(spec_f) + "x" + std::to_string(spec_t));
  if (n_classes < 2) throw ValidationError("model config: need at least 2 classes");
  if (petl.kind != PetlKind::None) {
    if (petl.r < 1) throw ValidationError("model config: adapter r must be at least 1");
    if (petl.r > d) throw ValidationError("model config: adapter r exceeds d");
    if (petl.n < 1) throw ValidationError("model config: expert count must be at least 1");
    if (petl.p < 1) throw ValidationError("model config: slots per expert must be at least 1");
  }
}

Tensor patchify(const Spectrogram& s, const ModelConfig& cfg) {
  if (s.f_bins != cfg.spec_f || s.t_frames != cfg.spec_t)
    throw ValidationError("patchify: spectrogram is " + std::to_string(s.f_bins) + "x" +
                          std::to_string(s.t_frames) + ", config expects " +
                          std::to_string(cfg.spec_f) + "x" + std::to_string(cfg.spec_t));
  const int64_t gf = cfg.spec_f / cfg.patch_f;
  const int64_t gt = cfg.spec_t / cfg.patch_t;
  Tensor out = Tensor::zeros({gf * gt, cfg.patch_dim()});
  double* o = out.data();
  for (int64_t pf = 0; pf < gf; ++pf)
    for (int64_t pt = 0; pt < gt; ++pt) {
      double* row = o + (pf * gt + pt) * cfg.patch_dim();
      for (int64_t df = 0; df < cfg.patch_f; ++df)
        for (int64_t dt = 0; dt < cfg.patch_t; ++dt)
          row[df * cfg.patch_t + dt] = s.at(pf * cfg.patch_f + df, pt * cfg.patch_t + dt);
    }
  return out;
}

Tensor mhsa_forward(const AttentionBlock& a, const Tensor& x, int64_t heads,
                    std::vector<Matrix>* probs_out) {
  const int64_t d = x.cols();
  if (heads < 1 || d % heads != 0)
    throw DimensionError("mhsa_forward: d=" + std::to_string(d) + " not divisible by heads=" +
                         std::to_string(heads));
  const int64_t dh = d / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor q = linear(x, a.wq, a.bq);
  Tensor k = linear(x, a.wk, a.bk);
  Tensor v = linear(x, a.wv, a.bv);
  std::vector<Tensor> outs;
  outs.reserve(static_cast<size_t>(heads));
  for (int64_t h = 0; h < heads; ++h) {
    Tensor qh = heads == 1 ? q : slice_cols(q, h * dh, dh);
    Tensor kh = heads == 1 ? k : slice_cols(k, h * dh, dh);
    Tensor vh = heads == 1 ? v : slice_cols(v, h * dh, dh);
    Tensor probs = softmax_rows(scale(matmul(qh, transpose(kh)), sc));
    if (probs_out) probs_out->push_back(probs.to_matrix());
    outs.push_back(matmul(probs, vh));
  }
  Tensor cat = outs.size() == 1 ? outs[0] : concat_cols(outs);
  return linear(cat, a.wo, a.bo);
}

namespace {

Tensor ffn_forward(const FeedForward& f, const Tensor& x) {
  return linear(gelu(linear(x, f.w1, f.b1)), f.w2, f.b2);
}

PetlBlock make_petl(const PetlSpec& spec, int64_t d, const std::string& prefix, uint64_t seed,
                    ParamRegistry& reg) {
  PetlBlock b;
  b.kind = spec.kind;
  switch (spec.kind) {
    case PetlKind::None:
      break;
    case PetlKind::Single:
      b.single.push_back(make_adapter(d, spec.r, spec.act, prefix + ".adapter", seed, reg, true));
      break;
    case PetlKind::DenseMoa:
      b.dense.push_back(make_dense_moa(d, spec.n, spec.r, spec.act, prefix, seed, reg, true));
      break;
    case PetlKind::SoftMoa:
      b.soft.push_back(
          make_soft_moa(d, spec.n, spec.p, spec.r, spec.act, prefix, seed, reg, true));
      break;
  }
  return b;
}

}  // namespace

Tensor PetlBlock::forward(const Tensor& x_norm, RoutingTrace* trace) const {
  switch (kind) {
    case PetlKind::Single:
      return adapter_forward(single[0], x_norm);
    case PetlKind::DenseMoa:
      return dense_moa_forward(dense[0], x_norm, trace);
    case PetlKind::SoftMoa:
      return soft_moa_forward(soft[0], x_norm, trace);
    case PetlKind::None:
      break;
  }
  throw ContractError("PetlBlock::forward called on an inactive block");
}

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const bool full = cfg_.full_finetune;
  const uint64_t seed = cfg_.seed;
  const int64_t d = cfg_.d;

  proj_w_ = make_param(reg_, "patch.proj.weight", {cfg_.patch_dim(), d}, full, seed, 0.02);
  proj_b_ = make_param(reg_, "patch.proj.bias", {d}, full, seed, 0.0);
  pos_ = make_param(reg_, "patch.pos", {cfg_.tokens(), d}, full, seed, 0.02);

  layers_.reserve(static_cast<size_t>(cfg_.layers));
  for (int64_t i = 0; i < cfg_.layers; ++i) {
    const std::string lp = "layers." + std::to_string(i);
    EncoderLayer ly;
    ly.ln1_g = make_param_const(reg_, lp + ".ln1.gamma", {d}, full, 1.0);
    ly.ln1_b = make_param_const(reg_, lp + ".ln1.beta", {d}, full, 0.0);
    ly.attn.wq = make_param(reg_, lp + ".attn.wq", {d, d}, full, seed, 0.02);
    ly.attn.bq = make_param(reg_, lp + ".attn.bq", {d}, full, seed, 0.0);
    ly.attn.wk = make_param(reg_, lp + ".attn.wk", {d, d}, full, seed, 0.02);
    ly.attn.bk = make_param(reg_, lp + ".attn.bk", {d}, full, seed, 0.0);
    ly.attn.wv = make_param(reg_, lp + ".attn.wv", {d, d}, full, seed, 0.02);
    ly.attn.bv = make_param(reg_, lp + ".attn.bv", {d}, full, seed, 0.0);
    ly.attn.wo = make_param(reg_, lp + ".attn.wo", {d, d}, full, seed, 0.02);
    ly.attn.bo = make_param(reg_, lp + ".attn.bo", {d}, full, seed, 0.0);
    ly.ln2_g = make_param_const(reg_, lp + ".ln2.gamma", {d}, full, 1.0);
    ly.ln2_b = make_param_const(reg_, lp + ".ln2.beta", {d}, full, 0.0);
    ly.ffn.w1 = make_param(reg_, lp + ".ffn.w1", {d, 4 * d}, full, seed, 0.02);
    ly.ffn.b1 = make_param(reg_, lp + ".ffn.b1", {4 * d}, full, seed, 0.0);
    ly.ffn.w2 = make_param(reg_, lp + ".ffn.w2", {4 * d, d}, full, seed, 0.02);
    ly.ffn.b2 = make_param(reg_, lp + ".ffn.b2", {d}, full, seed, 0.0);
    ly.petl_attn = make_petl(cfg_.petl, d, lp + ".petl", seed, reg_);
    if (cfg_.placement == Placement::Houlsby)
      ly.petl_ffn = make_petl(cfg_.petl, d, lp + ".petl2", seed, reg_);
    layers_.push_back(std::move(ly));
  }

  head_w_ = make_param(reg_, "head.weight", {d, cfg_.n_classes}, true, seed, 0.02);
  head_b_ = make_param(reg_, "head.bias", {cfg_.n_classes}, true, seed, 0.0);
}

namespace {

RoutingTrace* push_trace(ModelTrace* trace, const PetlBlock& block, int64_t layer,
                         const char* name) {
  if (!trace) return nullptr;
  if (block.kind != PetlKind::DenseMoa && block.kind != PetlKind::SoftMoa) return nullptr;
  trace->blocks.push_back(TraceBlockRecord{layer, name, RoutingTrace{}});
  return &trace->blocks.back().trace;
}

}  // namespace

Tensor Model::encode(const Spectrogram& s, ModelTrace* trace) {
  Tensor x = patchify(s, cfg_);
  x = linear(x, proj_w_, proj_b_);
  x = add(x, pos_);
  for (size_t i = 0; i < layers_.size(); ++i) {
    const EncoderLayer& ly = layers_[i];
    Tensor n1 = layernorm(x, ly.ln1_g, ly.ln1_b);
    Tensor h = add(x, mhsa_forward(ly.attn, n1, cfg_.heads));
    if (ly.petl_attn.active()) {
      RoutingTrace* tr = push_trace(trace, ly.petl_attn, static_cast<int64_t>(i), "attn");
      h = add(h, ly.petl_attn.forward(n1, tr));
    }
    Tensor n2 = layernorm(h, ly.ln2_g, ly.ln2_b);
    Tensor out = add(h, ffn_forward(ly.ffn, n2));
    if (ly.petl_ffn.active()) {
      RoutingTrace* tr = push_trace(trace, ly.petl_ffn, static_cast<int64_t>(i), "ffn");
      out = add(out, ly.petl_ffn.forward(n2, tr));
    }
    x = out;
  }
  return mean_rows(x);
}

Tensor Model::forward(const std::vector<const Spectrogram*>& batch,
                      std::vector<ModelTrace>* traces) {
  if (batch.empty()) throw ValidationError("model forward: empty batch");
  std::vector<Tensor> pooled;
  pooled.reserve(batch.size());
  for (const Spectrogram* sp : batch) {
    if (!sp) throw ValidationError("model forward: null spectrogram");
    ModelTrace* tp = nullptr;
    if (traces) {
      traces->emplace_back();
      tp = &traces->back();
    }
    pooled.push_back(encode(*sp, tp));
  }
  Tensor h = pooled.size() == 1 ? pooled[0] : concat_rows(pooled);
  return linear(h, head_w_, head_b_);
}

Tensor Model::forward_one(const Spectrogram& s, ModelTrace* trace) {
  Tensor pooled = encode(s, trace);
  return linear(pooled, head_w_, head_b_);
}

ParamPartition param_partition(const ParamRegistry& reg) {
  ParamPartition p;
  for (const ParamEntry& e : reg) (e.trainable ? p.trainable : p.frozen).push_back(e.name);
  return p;
}

ParamCounts param_counts(const ParamRegistry& reg) {
  ParamCounts c;
  for (const ParamEntry& e : reg) {
    const int64_t n = e.tensor.numel();
    c.total += n;
    (e.trainable ? c.trainable : c.frozen) += n;
    const bool is_head = e.name.rfind("head.", 0) == 0;
    const bool is_petl =
        e.name.find(".petl.") != std::string::npos || e.name.find(".petl2.") != std::string::npos;
    if (is_head)
      c.head += n;
    else if (is_petl)
      c.petl += n;
    else
      c.backbone += n;
    if (e.trainable && !is_head) c.non_head_trainable += n;
  }
  return c;
}

}  // namespace smoa
