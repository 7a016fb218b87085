#include "smoa/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "smoa/common.hpp"

namespace smoa {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0;
  size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

int64_t parse_i64(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(value.c_str(), &end, 10);
  if (errno != 0 || end != value.c_str() + value.size() || value.empty()) {
    throw ConfigError("config key '" + key + "': expected integer, got '" +
                      value + "'");
  }
  return static_cast<int64_t>(v);
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
  const int64_t v = parse_i64(key, value);
  if (v < 0) {
    throw ConfigError("config key '" + key + "': expected non-negative value");
  }
  return static_cast<uint64_t>(v);
}

double parse_f64(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (errno != 0 || end != value.c_str() + value.size() || value.empty()) {
    throw ConfigError("config key '" + key + "': expected number, got '" +
                      value + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace

PetlSpec parse_petl(const std::string& descriptor) {
  const std::string text = trim(descriptor);
  if (text.empty()) throw ConfigError("empty adapter descriptor");

  std::string name = text;
  std::string args;
  const size_t open = text.find('(');
  if (open != std::string::npos) {
    if (text.back() != ')') {
      throw ConfigError("adapter descriptor '" + text +
                        "': missing closing ')'");
    }
    name = trim(text.substr(0, open));
    args = text.substr(open + 1, text.size() - open - 2);
  }
  name = lower(name);

  PetlSpec spec;
  if (name == "none") {
    spec.kind = PetlKind::None;
  } else if (name == "single") {
    spec.kind = PetlKind::Single;
  } else if (name == "dense") {
    spec.kind = PetlKind::DenseMoa;
  } else if (name == "soft") {
    spec.kind = PetlKind::SoftMoa;
  } else {
    throw ConfigError("adapter descriptor '" + text + "': unknown kind '" +
                      name + "'");
  }

  if (spec.kind == PetlKind::None) {
    if (!trim(args).empty()) {
      throw ConfigError("adapter descriptor 'none' takes no arguments");
    }
    return spec;
  }

  if (!trim(args).empty()) {
    for (const std::string& part : split(args, ',')) {
      const size_t eq = part.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("adapter descriptor '" + text +
                          "': expected key=value, got '" + part + "'");
      }
      const std::string key = lower(trim(part.substr(0, eq)));
      const int64_t value = parse_i64("petl." + key, trim(part.substr(eq + 1)));
      if (key == "r") {
        spec.r = value;
      } else if (key == "n") {
        spec.n = value;
      } else if (key == "p") {
        spec.p = value;
      } else {
        throw ConfigError("adapter descriptor '" + text +
                          "': unknown argument '" + key + "'");
      }
    }
  }

  if (spec.r < 1 || spec.n < 1 || spec.p < 1) {
    throw ConfigError("adapter descriptor '" + text +
                      "': r, N, p must be at least 1");
  }
  if (spec.kind == PetlKind::Single && (spec.n != 1 || spec.p != 1)) {
    throw ConfigError("adapter descriptor '" + text +
                      "': single takes only r");
  }
  if (spec.kind == PetlKind::DenseMoa && spec.p != 1) {
    throw ConfigError("adapter descriptor '" + text +
                      "': dense takes only N and r");
  }
  return spec;
}

std::string petl_to_string(const PetlSpec& spec) {
  std::ostringstream os;
  switch (spec.kind) {
    case PetlKind::None:
      return "none";
    case PetlKind::Single:
      os << "single(r=" << spec.r << ")";
      break;
    case PetlKind::DenseMoa:
      os << "dense(N=" << spec.n << ",r=" << spec.r << ")";
      break;
    case PetlKind::SoftMoa:
      os << "soft(N=" << spec.n << ",p=" << spec.p << ",r=" << spec.r << ")";
      break;
  }
  return os.str();
}

RunConfig parse_run_config_text(const std::string& text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": empty key");
    }
    if (!seen.insert(key).second) {
      throw ConfigError("duplicate config key '" + key + "'");
    }

    if (key == "model.d") {
      cfg.model.d = parse_i64(key, value);
    } else if (key == "model.layers") {
      cfg.model.layers = parse_i64(key, value);
    } else if (key == "model.heads") {
      cfg.model.heads = parse_i64(key, value);
    } else if (key == "model.spec_f") {
      cfg.model.spec_f = parse_i64(key, value);
    } else if (key == "model.spec_t") {
      cfg.model.spec_t = parse_i64(key, value);
    } else if (key == "model.patch_f") {
      cfg.model.patch_f = parse_i64(key, value);
    } else if (key == "model.patch_t") {
      cfg.model.patch_t = parse_i64(key, value);
    } else if (key == "model.placement") {
      const std::string v = lower(value);
      if (v == "pfeiffer") {
        cfg.model.placement = Placement::Pfeiffer;
      } else if (v == "houlsby") {
        cfg.model.placement = Placement::Houlsby;
      } else {
        throw ConfigError(
            "config key 'model.placement': expected pfeiffer or houlsby");
      }
    } else if (key == "model.petl") {
      cfg.model.petl = parse_petl(value);
    } else if (key == "model.activation") {
      const std::string v = lower(value);
      if (v == "gelu") {
        cfg.model.petl.act = Activation::Gelu;
      } else if (v == "relu") {
        cfg.model.petl.act = Activation::Relu;
      } else {
        throw ConfigError(
            "config key 'model.activation': expected gelu or relu");
      }
    } else if (key == "train.mode") {
      const std::string v = lower(value);
      if (v == "petl") {
        cfg.model.full_finetune = false;
      } else if (v == "full") {
        cfg.model.full_finetune = true;
      } else {
        throw ConfigError("config key 'train.mode': expected petl or full");
      }
    } else if (key == "train.epochs") {
      cfg.train.epochs = parse_i64(key, value);
    } else if (key == "train.batch") {
      cfg.train.batch = parse_i64(key, value);
    } else if (key == "train.lr_max") {
      cfg.train.lr_max = parse_f64(key, value);
    } else if (key == "train.lr_min") {
      cfg.train.lr_min = parse_f64(key, value);
    } else if (key == "train.weight_decay") {
      cfg.train.weight_decay = parse_f64(key, value);
    } else if (key == "train.eval_every") {
      cfg.train.eval_every = parse_i64(key, value);
    } else if (key == "train.init_from") {
      cfg.init_from = value;
    } else if (key == "data.path") {
      if (!value.empty()) cfg.data_paths = split(value, ',');
    } else if (key == "data.classes") {
      cfg.data.n_classes = parse_i64(key, value);
    } else if (key == "data.f_bins") {
      cfg.data.f_bins = parse_i64(key, value);
    } else if (key == "data.t_frames") {
      cfg.data.t_frames = parse_i64(key, value);
    } else if (key == "data.train_per_class") {
      cfg.data.train_per_class = parse_i64(key, value);
    } else if (key == "data.test_per_class") {
      cfg.data.test_per_class = parse_i64(key, value);
    } else if (key == "data.noise_sigma") {
      cfg.data.noise_sigma = parse_f64(key, value);
    } else if (key == "data.pattern_seed") {
      cfg.data.pattern_seed = parse_u64(key, value);
    } else if (key == "seed") {
      cfg.seed = parse_u64(key, value);
    } else if (key == "out") {
      cfg.out_dir = value;
    } else if (key == "bench.variants") {
      cfg.bench_variants = value;
    } else if (key == "sweep.mode") {
      const std::string v = lower(value);
      if (v != "budget" && v != "adapters" && v != "slots") {
        throw ConfigError(
            "config key 'sweep.mode': expected budget, adapters, or slots");
      }
      cfg.sweep_mode = v;
    } else if (key == "sweep.grid") {
      cfg.sweep_grid = value;
    } else if (key == "sweep.budget") {
      cfg.sweep_budget = parse_i64(key, value);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }

  cfg.train.seed = cfg.seed;
  cfg.model.seed = cfg.seed;
  return cfg;
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config_text(buf.str());
}

std::string RunConfig::canonical_text() const {
  std::ostringstream os;
  os << "model.d=" << model.d << "\n";
  os << "model.layers=" << model.layers << "\n";
  os << "model.heads=" << model.heads << "\n";
  os << "model.spec_f=" << model.spec_f << "\n";
  os << "model.spec_t=" << model.spec_t << "\n";
  os << "model.patch_f=" << model.patch_f << "\n";
  os << "model.patch_t=" << model.patch_t << "\n";
  os << "model.placement="
     << (model.placement == Placement::Houlsby ? "houlsby" : "pfeiffer")
     << "\n";
  os << "model.petl=" << petl_to_string(model.petl) << "\n";
  os << "model.activation="
     << (model.petl.act == Activation::Relu ? "relu" : "gelu") << "\n";
  os << "train.mode=" << (model.full_finetune ? "full" : "petl") << "\n";
  os << "train.epochs=" << train.epochs << "\n";
  os << "train.batch=" << train.batch << "\n";
  os << "train.lr_max=" << train.lr_max << "\n";
  os << "train.lr_min=" << train.lr_min << "\n";
  os << "train.weight_decay=" << train.weight_decay << "\n";
  os << "train.eval_every=" << train.eval_every << "\n";
  os << "train.init_from=" << init_from << "\n";
  os << "data.path=";
  for (size_t i = 0; i < data_paths.size(); ++i) {
    if (i) os << ",";
    os << data_paths[i];
  }
  os << "\n";
  os << "data.classes=" << data.n_classes << "\n";
  os << "data.f_bins=" << data.f_bins << "\n";
  os << "data.t_frames=" << data.t_frames << "\n";
  os << "data.train_per_class=" << data.train_per_class << "\n";
  os << "data.test_per_class=" << data.test_per_class << "\n";
  os << "data.noise_sigma=" << data.noise_sigma << "\n";
  os << "data.pattern_seed=" << data.pattern_seed << "\n";
  os << "seed=" << seed << "\n";
  os << "bench.variants=" << bench_variants << "\n";
  os << "sweep.mode=" << sweep_mode << "\n";
  os << "sweep.grid=" << sweep_grid << "\n";
  os << "sweep.budget=" << sweep_budget << "\n";
  return os.str();
}

uint64_t RunConfig::hash() const {
  return fnv1a64(canonical_text());
}

}  // namespace smoa
