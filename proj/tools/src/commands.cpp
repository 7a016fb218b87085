#include "smoa_tools/commands.hpp"

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "smoa/adapter.hpp"
#include "smoa/checkpoint.hpp"
#include "smoa/common.hpp"
#include "smoa/flops.hpp"
#include "smoa/gradcheck.hpp"
#include "smoa/moa.hpp"
#include "smoa/ops.hpp"
#include "smoa/training.hpp"
#include "smoa_tools/csv.hpp"

namespace fs = std::filesystem;

namespace smoa::tools {

namespace {

std::string basename_of(const std::string& path) {
  const size_t slash = path.find_last_of('/');
  return slash == std::string::npos ? path : path.substr(slash + 1);
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

std::vector<const Spectrogram*> batch_ptrs(const Dataset& ds, int64_t begin, int64_t end) {
  std::vector<const Spectrogram*> out;
  out.reserve(static_cast<size_t>(end - begin));
  for (int64_t i = begin; i < end; ++i) {
    out.push_back(&ds.samples[static_cast<size_t>(i)]);
  }
  return out;
}

int64_t blocks_total(const ModelConfig& mc) {
  return mc.layers * (mc.placement == Placement::Houlsby ? 2 : 1);
}

// Adapter-module scalar count implied by the config, across all blocks.
int64_t petl_formula_count(const ModelConfig& mc) {
  const PetlSpec& s = mc.petl;
  switch (s.kind) {
    case PetlKind::None:
      return 0;
    case PetlKind::Single:
      return blocks_total(mc) * adapter_param_count(mc.d, s.r);
    case PetlKind::DenseMoa:
      return moa_param_count(s.n, 1, s.r, mc.d, blocks_total(mc), false);
    case PetlKind::SoftMoa:
      return moa_param_count(s.n, s.p, s.r, mc.d, blocks_total(mc), true);
  }
  return 0;
}

void check_dims(const RunConfig& cfg, const Dataset& ds, const std::string& what) {
  if (ds.f_bins != cfg.model.spec_f || ds.t_frames != cfg.model.spec_t) {
    throw ConfigError(what + " is " + std::to_string(ds.f_bins) + "x" +
                      std::to_string(ds.t_frames) + " but the model expects " +
                      std::to_string(cfg.model.spec_f) + "x" +
                      std::to_string(cfg.model.spec_t));
  }
}

}  // namespace

RunConfig load_config(const CliOptions& opt) {
  if (opt.config_path.empty()) throw ConfigError("--config is required");
  RunConfig cfg = parse_run_config(opt.config_path);
  if (opt.has_seed) {
    cfg.seed = opt.seed;
    cfg.train.seed = opt.seed;
    cfg.model.seed = opt.seed;
  }
  if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
  if (!opt.mode.empty()) cfg.sweep_mode = opt.mode;
  return cfg;
}

std::vector<TaskData> resolve_tasks(const RunConfig& cfg) {
  std::vector<TaskData> tasks;
  if (cfg.data_paths.empty()) {
    if (cfg.data.f_bins != cfg.model.spec_f || cfg.data.t_frames != cfg.model.spec_t) {
      throw ConfigError("data.f_bins/data.t_frames must match model.spec_f/model.spec_t");
    }
    TaskData t;
    t.name = "synthetic";
    t.train = generate_dataset(cfg.data, cfg.seed, false);
    t.test = generate_dataset(cfg.data, cfg.seed, true);
    tasks.push_back(std::move(t));
    return tasks;
  }
  for (const std::string& prefix : cfg.data_paths) {
    TaskData t;
    t.name = basename_of(prefix);
    t.train = load_dataset(prefix + ".train.smds");
    t.test = load_dataset(prefix + ".test.smds");
    check_dims(cfg, t.train, prefix + ".train.smds");
    check_dims(cfg, t.test, prefix + ".test.smds");
    if (t.train.n_classes != t.test.n_classes) {
      throw ConfigError(prefix + ": train and test class counts differ");
    }
    tasks.push_back(std::move(t));
  }
  return tasks;
}

Model build_model(const RunConfig& cfg, int64_t n_classes) {
  ModelConfig mc = cfg.model;
  mc.n_classes = n_classes;
  mc.seed = cfg.seed;
  mc.validate();
  return Model(mc);
}

int cmd_train(const CliOptions& opt) {
  const RunConfig cfg = load_config(opt);
  cfg.train.validate();
  fs::create_directories(cfg.out_dir);
  const std::string hash = CsvWriter::hex(cfg.hash());
  std::vector<TaskData> tasks = resolve_tasks(cfg);

  CsvWriter summary(cfg.out_dir + "/summary.csv",
                    {"task", "train_accuracy", "test_accuracy", "trainable_params",
                     "non_head_trainable_params", "mean_step_ms", "median_step_ms",
                     "config_hash"});

  double train_acc_sum = 0.0, test_acc_sum = 0.0;
  for (TaskData& task : tasks) {
    Model model = build_model(cfg, task.train.n_classes);
    if (!cfg.init_from.empty()) load_backbone(model.params(), cfg.init_from);

    const TrainResult res = train_model(model, task.train, task.test, cfg.train);

    const std::string task_dir =
        tasks.size() == 1 ? cfg.out_dir : cfg.out_dir + "/" + task.name;
    fs::create_directories(task_dir);

    CsvWriter log(task_dir + "/train_log.csv",
                  {"kind", "step", "loss", "lr", "step_ms", "accuracy", "config_hash"});
    for (const TrainLogRow& r : res.rows) {
      if (r.is_eval) {
        log.row({"eval", CsvWriter::num(r.step), "", "", "", CsvWriter::num(r.accuracy), hash});
      } else {
        log.row({"train", CsvWriter::num(r.step), CsvWriter::num(r.loss),
                 CsvWriter::num(r.lr), CsvWriter::num(r.step_ms), "", hash});
      }
    }
    save_checkpoint(model.params(), task_dir + "/model.smoa1");

    const ParamCounts pc = param_counts(model.params());
    summary.row({task.name, CsvWriter::num(res.train_accuracy),
                 CsvWriter::num(res.test_accuracy), CsvWriter::num(pc.trainable),
                 CsvWriter::num(pc.non_head_trainable), CsvWriter::num(res.mean_step_ms),
                 CsvWriter::num(res.median_step_ms), hash});
    train_acc_sum += res.train_accuracy;
    test_acc_sum += res.test_accuracy;
    std::printf("%s: train acc %.4f, test acc %.4f, %lld trainable params, %.2f ms/step median\n",
                task.name.c_str(), res.train_accuracy, res.test_accuracy,
                static_cast<long long>(pc.trainable), res.median_step_ms);
  }

  if (tasks.size() > 1) {
    const double n = static_cast<double>(tasks.size());
    summary.row({"avg", CsvWriter::num(train_acc_sum / n), CsvWriter::num(test_acc_sum / n),
                 "", "", "", "", hash});
    std::printf("avg: train acc %.4f, test acc %.4f over %zu tasks\n",
                train_acc_sum / n, test_acc_sum / n, tasks.size());
  }
  std::printf("outputs in %s\n", cfg.out_dir.c_str());
  return 0;
}

int cmd_benchmark(const CliOptions& opt) {
  const RunConfig cfg = load_config(opt);
  if (opt.steps < 20) throw ConfigError("benchmark needs --steps >= 20");
  if (opt.warmup < 5) throw ConfigError("benchmark needs --warmup >= 5");
  fs::create_directories(cfg.out_dir);
  const std::string hash = CsvWriter::hex(cfg.hash());

  std::string variants_text = cfg.bench_variants;
  if (variants_text.empty()) {
    variants_text = "single(r=24);dense(N=14,r=1);soft(N=14,p=1,r=1)";
  }
  std::vector<PetlSpec> variants;
  std::vector<std::string> names;
  {
    std::string cur;
    std::istringstream in(variants_text);
    while (std::getline(in, cur, ';')) {
      if (cur.find_first_not_of(" \t") == std::string::npos) continue;
      PetlSpec spec = parse_petl(cur);
      spec.act = cfg.model.petl.act;
      variants.push_back(spec);
      names.push_back(petl_to_string(spec));
    }
  }
  if (variants.empty()) throw ConfigError("bench.variants lists no variants");

  // One fixed batch, identical across variants.
  SyntheticTaskConfig data_cfg = cfg.data;
  const int64_t batch = cfg.train.batch;
  data_cfg.train_per_class = (batch + data_cfg.n_classes - 1) / data_cfg.n_classes;
  data_cfg.test_per_class = 1;
  if (data_cfg.f_bins != cfg.model.spec_f || data_cfg.t_frames != cfg.model.spec_t) {
    throw ConfigError("data.f_bins/data.t_frames must match model.spec_f/model.spec_t");
  }
  const Dataset ds = generate_dataset(data_cfg, cfg.seed, false);
  const int64_t bsz = std::min<int64_t>(batch, ds.size());
  const std::vector<const Spectrogram*> ptrs = batch_ptrs(ds, 0, bsz);
  const std::vector<int> labels(ds.labels.begin(), ds.labels.begin() + bsz);

  CsvWriter csv(cfg.out_dir + "/bench.csv",
                {"variant", "tokens", "d", "steps", "warmup", "median_ms", "mean_ms",
                 "stddev_ms", "min_ms", "max_ms", "half_median_gap_ms", "fwd_macs",
                 "adapter_rows", "adapter_path_macs", "trainable_params", "config_hash"});

  const int64_t L = cfg.model.tokens();
  std::vector<double> medians(variants.size(), 0.0);
  std::printf("%-26s %10s %10s %10s %12s\n", "variant", "median_ms", "mean_ms", "stddev",
              "trainable");

  for (size_t vi = 0; vi < variants.size(); ++vi) {
    RunConfig vcfg = cfg;
    vcfg.model.petl = variants[vi];
    Model model = build_model(vcfg, ds.n_classes);
    if (!cfg.init_from.empty()) load_backbone(model.params(), cfg.init_from);
    AdamW adam(cfg.train.beta1, cfg.train.beta2, cfg.train.adam_eps, cfg.train.weight_decay);
    const double lr = cfg.train.lr_max;

    uint64_t fwd_macs = 0, arows = 0;
    auto run_step = [&](bool measure) {
      model.params().zero_trainable_grads();
      if (measure) {
        reset_mac_count();
        reset_adapter_rows_count();
      }
      Tensor logits = model.forward(ptrs);
      if (measure) {
        fwd_macs = mac_count();
        arows = adapter_rows_count();
      }
      Tensor loss = cross_entropy(logits, labels);
      backward(loss);
      adam.step(model.params(), lr);
    };

    for (int64_t i = 0; i < opt.warmup; ++i) run_step(i + 1 == opt.warmup);

    std::vector<double> ms(static_cast<size_t>(opt.steps), 0.0);
    for (int64_t i = 0; i < opt.steps; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      run_step(false);
      const auto t1 = std::chrono::steady_clock::now();
      ms[static_cast<size_t>(i)] =
          std::chrono::duration<double, std::milli>(t1 - t0).count();
    }

    const double med = median_of(ms);
    const std::vector<double> first(ms.begin(), ms.begin() + ms.size() / 2);
    const std::vector<double> second(ms.begin() + ms.size() / 2, ms.end());
    const double gap = std::fabs(median_of(first) - median_of(second));
    if (med < 1.0) {
      std::fprintf(stderr,
                   "warning: %s median step %.3f ms is within timer resolution noise\n",
                   names[vi].c_str(), med);
    }

    const ModelConfig& mc = model.config();
    uint64_t adapter_macs = 0;
    if (mc.petl.kind == PetlKind::DenseMoa || mc.petl.kind == PetlKind::SoftMoa) {
      adapter_macs = static_cast<uint64_t>(blocks_total(mc)) *
                     flop_model(L, mc.d, mc.petl.r, mc.petl.n, mc.petl.p, mc.petl.kind).total();
    } else if (mc.petl.kind == PetlKind::Single) {
      adapter_macs = static_cast<uint64_t>(blocks_total(mc)) *
                     static_cast<uint64_t>(2 * L * mc.d * mc.petl.r);
    }
    const ParamCounts pc = param_counts(model.params());

    csv.row({names[vi], CsvWriter::num(L), CsvWriter::num(mc.d), CsvWriter::num(opt.steps),
             CsvWriter::num(opt.warmup), CsvWriter::num(med), CsvWriter::num(mean_of(ms)),
             CsvWriter::num(stddev_of(ms)),
             CsvWriter::num(*std::min_element(ms.begin(), ms.end())),
             CsvWriter::num(*std::max_element(ms.begin(), ms.end())), CsvWriter::num(gap),
             CsvWriter::num(fwd_macs), CsvWriter::num(arows), CsvWriter::num(adapter_macs),
             CsvWriter::num(pc.trainable), hash});
    medians[vi] = med;
    std::printf("%-26s %10.3f %10.3f %10.3f %12lld\n", names[vi].c_str(), med, mean_of(ms),
                stddev_of(ms), static_cast<long long>(pc.trainable));
  }

  for (size_t i = 0; i < variants.size(); ++i) {
    if (variants[i].kind != PetlKind::Single) continue;
    for (size_t j = 0; j < variants.size(); ++j) {
      if (j == i || medians[i] <= 0.0) continue;
      std::printf("%s / %s median ratio: %.3f\n", names[j].c_str(), names[i].c_str(),
                  medians[j] / medians[i]);
    }
    break;
  }
  std::printf("report: %s/bench.csv\n", cfg.out_dir.c_str());
  return 0;
}

int cmd_gradcheck(const CliOptions& opt) {
  const RunConfig cfg = load_config(opt);
  const std::string hash = CsvWriter::hex(cfg.hash());

  SyntheticTaskConfig data_cfg = cfg.data;
  data_cfg.train_per_class = 1;
  data_cfg.test_per_class = 1;
  if (data_cfg.f_bins != cfg.model.spec_f || data_cfg.t_frames != cfg.model.spec_t) {
    throw ConfigError("data.f_bins/data.t_frames must match model.spec_f/model.spec_t");
  }
  const Dataset ds = generate_dataset(data_cfg, cfg.seed, false);
  const int64_t bsz = std::min<int64_t>(ds.size(), 2);
  const std::vector<const Spectrogram*> ptrs = batch_ptrs(ds, 0, bsz);
  const std::vector<int> labels(ds.labels.begin(), ds.labels.begin() + bsz);

  Model model = build_model(cfg, ds.n_classes);
  if (!cfg.init_from.empty()) load_backbone(model.params(), cfg.init_from);
  const int64_t trainable = model.params().count_scalars(ParamFilter::Trainable);
  if (trainable > 10000) {
    throw ConfigError("gradcheck config has " + std::to_string(trainable) +
                      " trainable scalars; limit is 10000, use a smaller model");
  }

  auto make_loss = [&]() { return cross_entropy(model.forward(ptrs), labels); };
  const GradcheckReport report = gradcheck(make_loss, model.params());

  if (!cfg.out_dir.empty() && !opt.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    CsvWriter csv(cfg.out_dir + "/gradcheck.csv",
                  {"param", "max_abs_diff", "max_rel_err", "pass", "config_hash"});
    for (const GradcheckParamResult& p : report.params) {
      csv.row({p.name, CsvWriter::num(p.max_abs_diff), CsvWriter::num(p.max_rel_err),
               p.pass ? "1" : "0", hash});
    }
  }

  double worst = 0.0;
  std::string worst_name = "-";
  for (const GradcheckParamResult& p : report.params) {
    if (p.max_rel_err > worst) {
      worst = p.max_rel_err;
      worst_name = p.name;
    }
    if (!p.pass) {
      std::printf("FAIL %-40s max rel err %.3e\n", p.name.c_str(), p.max_rel_err);
    }
  }
  std::printf("gradcheck: %s (%lld scalars over %zu parameters, tol %.1e, worst %.3e at %s)\n",
              report.pass ? "PASS" : "FAIL", static_cast<long long>(report.scalars_checked),
              report.params.size(), report.tolerance, worst, worst_name.c_str());
  return report.pass ? 0 : 1;
}

int cmd_paramcount(const CliOptions& opt) {
  const RunConfig cfg = load_config(opt);
  const std::string hash = CsvWriter::hex(cfg.hash());

  Model model = build_model(cfg, cfg.data.n_classes);
  const ParamCounts pc = param_counts(model.params());
  const ModelConfig& mc = model.config();
  const int64_t formula = petl_formula_count(mc);
  if (formula != pc.petl) {
    throw ContractError("adapter count formula disagrees with registry: " +
                        std::to_string(formula) + " vs " + std::to_string(pc.petl));
  }

  std::printf("model: d=%lld layers=%lld heads=%lld tokens=%lld classes=%lld petl=%s %s\n",
              static_cast<long long>(mc.d), static_cast<long long>(mc.layers),
              static_cast<long long>(mc.heads), static_cast<long long>(mc.tokens()),
              static_cast<long long>(mc.n_classes), petl_to_string(mc.petl).c_str(),
              mc.placement == Placement::Houlsby ? "houlsby" : "pfeiffer");
  std::printf("%-22s %12lld\n", "total", static_cast<long long>(pc.total));
  std::printf("%-22s %12lld\n", "trainable", static_cast<long long>(pc.trainable));
  std::printf("%-22s %12lld\n", "frozen", static_cast<long long>(pc.frozen));
  std::printf("%-22s %12lld\n", "backbone", static_cast<long long>(pc.backbone));
  std::printf("%-22s %12lld\n", "adapters", static_cast<long long>(pc.petl));
  std::printf("%-22s %12lld\n", "head", static_cast<long long>(pc.head));
  std::printf("%-22s %12lld\n", "non-head trainable", static_cast<long long>(pc.non_head_trainable));

  if (!opt.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    CsvWriter csv(cfg.out_dir + "/paramcount.csv",
                  {"d", "layers", "petl", "total", "trainable", "frozen", "backbone",
                   "adapters", "head", "non_head_trainable", "config_hash"});
    csv.row({CsvWriter::num(mc.d), CsvWriter::num(mc.layers), petl_to_string(mc.petl),
             CsvWriter::num(pc.total), CsvWriter::num(pc.trainable), CsvWriter::num(pc.frozen),
             CsvWriter::num(pc.backbone), CsvWriter::num(pc.petl), CsvWriter::num(pc.head),
             CsvWriter::num(pc.non_head_trainable), hash});
    std::printf("report: %s/paramcount.csv\n", cfg.out_dir.c_str());
  }
  return 0;
}

int cmd_gen_data(const CliOptions& opt) {
  const RunConfig cfg = load_config(opt);
  const std::string prefix =
      !opt.out_dir.empty() ? opt.out_dir : cfg.out_dir + "/data";
  const fs::path parent = fs::path(prefix).parent_path();
  if (!parent.empty()) fs::create_directories(parent);

  const Dataset train = generate_dataset(cfg.data, cfg.seed, false);
  const Dataset test = generate_dataset(cfg.data, cfg.seed, true);
  save_dataset(train, prefix + ".train.smds");
  save_dataset(test, prefix + ".test.smds");
  std::printf("wrote %s.train.smds (%lld samples) and %s.test.smds (%lld samples), "
              "%lld classes, %lldx%lld\n",
              prefix.c_str(), static_cast<long long>(train.size()), prefix.c_str(),
              static_cast<long long>(test.size()), static_cast<long long>(train.n_classes),
              static_cast<long long>(train.f_bins), static_cast<long long>(train.t_frames));
  return 0;
}

namespace {

// Layer selector: "all" or a comma list of layer indices.
std::vector<int64_t> parse_layer_selector(const std::string& text, int64_t layers) {
  std::vector<int64_t> out;
  std::string t = text.empty() ? "all" : text;
  if (t == "all") {
    for (int64_t i = 0; i < layers; ++i) out.push_back(i);
    return out;
  }
  std::istringstream in(t);
  std::string part;
  while (std::getline(in, part, ',')) {
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(part.c_str(), &end, 10);
    if (errno != 0 || end != part.c_str() + part.size() || part.empty()) {
      throw ConfigError("--layers: expected 'all' or a comma list of indices, got '" +
                        part + "'");
    }
    if (v < 0 || v >= layers) {
      throw ConfigError("--layers: index " + std::to_string(v) + " outside 0.." +
                        std::to_string(layers - 1));
    }
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("--layers: empty selector");
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

int cmd_analyze(const CliOptions& opt) {
  const RunConfig cfg = load_config(opt);
  if (cfg.model.petl.kind != PetlKind::SoftMoa) {
    throw ConfigError("analyze requires a soft mixture model (model.petl = soft(...))");
  }
  fs::create_directories(cfg.out_dir);
  const std::string hash = CsvWriter::hex(cfg.hash());

  std::vector<TaskData> tasks = resolve_tasks(cfg);
  if (tasks.size() != 1) {
    throw ConfigError("analyze expects a single dataset; got " +
                      std::to_string(tasks.size()));
  }
  const Dataset& test = tasks[0].test;

  Model model = build_model(cfg, test.n_classes);
  if (!cfg.init_from.empty()) {
    load_checkpoint(model.params(), cfg.init_from);
  }

  const std::vector<int64_t> sel = parse_layer_selector(opt.layers, cfg.model.layers);
  const std::set<int64_t> selected(sel.begin(), sel.end());

  // Traced forward over the whole test set.
  std::vector<ModelTrace> traces;
  traces.reserve(static_cast<size_t>(test.size()));
  {
    NoGradGuard ng;
    const int64_t batch = std::max<int64_t>(1, cfg.train.batch);
    for (int64_t b = 0; b < test.size(); b += batch) {
      const int64_t e = std::min<int64_t>(b + batch, test.size());
      model.forward(batch_ptrs(test, b, e), &traces);
    }
  }
  if (traces.empty() || traces[0].blocks.empty()) {
    throw ValidationError("analyze: traced forward produced no routing records");
  }

  const int64_t p = cfg.model.petl.p;
  const int64_t n = cfg.model.petl.n;
  const size_t n_blocks = traces[0].blocks.size();

  // Mean contribution per expert for each traced block, over all samples.
  CsvWriter contrib(cfg.out_dir + "/contributions.csv",
                    {"layer", "block", "expert", "mean_contribution", "config_hash"});
  std::vector<double> cross(static_cast<size_t>(n), 0.0);
  int64_t cross_blocks = 0;
  double min_contrib = 1.0;
  for (size_t bi = 0; bi < n_blocks; ++bi) {
    const int64_t layer = traces[0].blocks[bi].layer;
    if (!selected.count(layer)) continue;
    std::vector<double> acc(static_cast<size_t>(n), 0.0);
    for (const ModelTrace& t : traces) {
      const std::vector<double> c = expert_contribution(t.blocks[bi].trace, p);
      for (size_t i = 0; i < c.size(); ++i) acc[i] += c[i];
    }
    for (double& a : acc) a /= static_cast<double>(traces.size());
    for (size_t i = 0; i < acc.size(); ++i) {
      contrib.row({CsvWriter::num(layer), traces[0].blocks[bi].block, CsvWriter::num(int64_t(i)),
                   CsvWriter::num(acc[i]), hash});
      cross[i] += acc[i];
      min_contrib = std::min(min_contrib, acc[i]);
    }
    ++cross_blocks;
  }
  if (cross_blocks == 0) throw ConfigError("--layers selects no traced blocks");
  for (size_t i = 0; i < cross.size(); ++i) {
    contrib.row({"all", "mean", CsvWriter::num(int64_t(i)),
                 CsvWriter::num(cross[i] / static_cast<double>(cross_blocks)), hash});
  }

  // Per-class table from the deepest selected block.
  size_t designated = 0;
  for (size_t bi = 0; bi < n_blocks; ++bi) {
    if (selected.count(traces[0].blocks[bi].layer)) designated = bi;
  }
  std::vector<RoutingTrace> block_traces;
  block_traces.reserve(traces.size());
  for (const ModelTrace& t : traces) block_traces.push_back(t.blocks[designated].trace);
  const ClassContribution cc =
      per_class_contribution(block_traces, test.labels, p, test.n_classes);

  CsvWriter per_class(cfg.out_dir + "/class_contributions.csv",
                      {"expert", "class", "mean_contribution", "present", "config_hash"});
  for (int64_t i = 0; i < cc.table.rows; ++i) {
    for (int64_t k = 0; k < cc.table.cols; ++k) {
      per_class.row({CsvWriter::num(i), CsvWriter::num(k), CsvWriter::num(cc.table.at(i, k)),
                     cc.class_present[static_cast<size_t>(k)] ? "1" : "0", hash});
    }
  }

  std::printf("analyze: %zu samples, %lld experts, p=%lld, %lld blocks selected\n",
              traces.size(), static_cast<long long>(n), static_cast<long long>(p),
              static_cast<long long>(cross_blocks));
  std::printf("minimum per-layer expert contribution: %.6f\n", min_contrib);
  std::printf("reports: %s/contributions.csv, %s/class_contributions.csv\n",
              cfg.out_dir.c_str(), cfg.out_dir.c_str());
  return 0;
}

int cmd_sweep(const CliOptions& opt) {
  const RunConfig cfg = load_config(opt);
  cfg.train.validate();
  fs::create_directories(cfg.out_dir);
  const std::string hash = CsvWriter::hex(cfg.hash());
  const std::string mode = cfg.sweep_mode.empty() ? "budget" : cfg.sweep_mode;

  std::vector<TaskData> tasks = resolve_tasks(cfg);
  if (tasks.size() != 1) {
    throw ConfigError("sweep expects a single dataset; got " + std::to_string(tasks.size()));
  }
  const TaskData& task = tasks[0];

  const int64_t d = cfg.model.d;
  const int64_t blocks = blocks_total(cfg.model);

  struct Point {
    std::string setting;
    PetlSpec spec;
    bool infeasible = false;
  };
  std::vector<Point> points;

  auto grid_items = [&]() {
    std::vector<std::string> items;
    std::istringstream in(cfg.sweep_grid);
    std::string part;
    while (std::getline(in, part, ',')) {
      const size_t a = part.find_first_not_of(" \t");
      if (a == std::string::npos) continue;
      const size_t b = part.find_last_not_of(" \t");
      items.push_back(part.substr(a, b - a + 1));
    }
    return items;
  };
  auto to_int = [](const std::string& s) {
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (errno != 0 || end != s.c_str() + s.size() || s.empty() || v < 1) {
      throw ConfigError("sweep.grid: expected positive integer, got '" + s + "'");
    }
    return static_cast<int64_t>(v);
  };

  // Non-head trainable budget the grid points are matched to.
  const int64_t budget =
      cfg.sweep_budget > 0 ? cfg.sweep_budget : petl_formula_count(cfg.model);

  // Nearest integer bottleneck width hitting the budget for a mixture shape;
  // 0 when no r >= 1 fits the adapter invariants.
  auto solve_r = [&](int64_t n, int64_t p, bool soft) -> int64_t {
    const double per_block = static_cast<double>(budget) / static_cast<double>(blocks);
    const double routing = static_cast<double>(d * n * (soft ? p : 1));
    const double fixed = routing + static_cast<double>(n * d);  // up-proj biases
    const double per_r = static_cast<double>(n * (2 * d + 1));
    const int64_t r = std::llround((per_block - fixed) / per_r);
    if (r < 1 || r > d) return 0;
    return r;
  };

  if (mode == "budget") {
    std::string grid_text = cfg.sweep_grid;
    if (grid_text.empty()) {
      throw ConfigError("sweep budget mode needs sweep.grid (r or N values)");
    }
    for (const std::string& item : grid_items()) {
      const int64_t v = to_int(item);
      Point pt;
      pt.spec = cfg.model.petl;
      if (pt.spec.kind == PetlKind::Single) {
        pt.spec.r = v;
        pt.setting = "r=" + item;
      } else if (pt.spec.kind == PetlKind::DenseMoa || pt.spec.kind == PetlKind::SoftMoa) {
        pt.spec.n = v;
        pt.setting = "N=" + item;
      } else {
        throw ConfigError("sweep needs an adapter variant in model.petl");
      }
      points.push_back(pt);
    }
  } else if (mode == "adapters") {
    if (cfg.model.petl.kind != PetlKind::DenseMoa && cfg.model.petl.kind != PetlKind::SoftMoa) {
      throw ConfigError("sweep adapters mode needs a mixture variant in model.petl");
    }
    std::string grid_text = cfg.sweep_grid.empty() ? "2,4,7,14" : cfg.sweep_grid;
    std::istringstream in(grid_text);
    std::string part;
    while (std::getline(in, part, ',')) {
      const size_t a = part.find_first_not_of(" \t");
      if (a == std::string::npos) continue;
      const size_t b = part.find_last_not_of(" \t");
      part = part.substr(a, b - a + 1);
      const int64_t n = to_int(part);
      Point pt;
      pt.spec = cfg.model.petl;
      pt.spec.n = n;
      const int64_t r = solve_r(n, pt.spec.p, pt.spec.kind == PetlKind::SoftMoa);
      pt.setting = "N=" + part;
      if (r == 0) {
        pt.infeasible = true;
      } else {
        pt.spec.r = r;
      }
      points.push_back(pt);
    }
  } else if (mode == "slots") {
    if (cfg.model.petl.kind != PetlKind::SoftMoa) {
      throw ConfigError("sweep slots mode needs model.petl = soft(...)");
    }
    std::string grid_text =
        cfg.sweep_grid.empty() ? "2/14,4/6,6/4,8/3,12/2,24/1" : cfg.sweep_grid;
    std::istringstream in(grid_text);
    std::string part;
    while (std::getline(in, part, ',')) {
      const size_t a = part.find_first_not_of(" \t");
      if (a == std::string::npos) continue;
      const size_t b = part.find_last_not_of(" \t");
      part = part.substr(a, b - a + 1);
      const size_t slash = part.find('/');
      if (slash == std::string::npos) {
        throw ConfigError("sweep.grid slots entries are N/p pairs, got '" + part + "'");
      }
      Point pt;
      pt.spec = cfg.model.petl;
      pt.spec.n = to_int(part.substr(0, slash));
      pt.spec.p = to_int(part.substr(slash + 1));
      pt.setting = part;
      const int64_t r = solve_r(pt.spec.n, pt.spec.p, true);
      if (r == 0) {
        pt.infeasible = true;
      } else {
        pt.spec.r = r;
      }
      points.push_back(pt);
    }
  } else {
    throw ConfigError("sweep mode must be budget, adapters, or slots");
  }
  if (points.empty()) throw ConfigError("sweep.grid is empty");

  CsvWriter csv(cfg.out_dir + "/sweep.csv",
                {"mode", "setting", "variant", "n", "p", "r", "trainable_params",
                 "non_head_trainable_params", "infeasible", "test_accuracy",
                 "median_step_ms", "config_hash"});

  std::printf("sweep %s: budget %lld non-head scalars, %zu points\n", mode.c_str(),
              static_cast<long long>(budget), points.size());
  for (const Point& pt : points) {
    if (pt.infeasible) {
      csv.row({mode, pt.setting, "", CsvWriter::num(pt.spec.n),
               CsvWriter::num(pt.spec.p), "", "", "", "1", "", "", hash});
      std::printf("%-10s infeasible: no r >= 1 fits the budget\n", pt.setting.c_str());
      continue;
    }
    RunConfig pcfg = cfg;
    pcfg.model.petl = pt.spec;
    Model model = build_model(pcfg, task.train.n_classes);
    if (!cfg.init_from.empty()) load_backbone(model.params(), cfg.init_from);
    const TrainResult res = train_model(model, task.train, task.test, cfg.train);
    const ParamCounts pc = param_counts(model.params());
    csv.row({mode, pt.setting, petl_to_string(pt.spec), CsvWriter::num(pt.spec.n),
             CsvWriter::num(pt.spec.p), CsvWriter::num(pt.spec.r), CsvWriter::num(pc.trainable),
             CsvWriter::num(pc.non_head_trainable), "0", CsvWriter::num(res.test_accuracy),
             CsvWriter::num(res.median_step_ms), hash});
    std::printf("%-10s %-22s non-head %8lld  test acc %.4f  %.2f ms/step\n",
                pt.setting.c_str(), petl_to_string(pt.spec).c_str(),
                static_cast<long long>(pc.non_head_trainable), res.test_accuracy,
                res.median_step_ms);
  }
  std::printf("report: %s/sweep.csv\n", cfg.out_dir.c_str());
  return 0;
}

}  // namespace smoa::tools
