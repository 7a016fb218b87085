#include "smoa/data.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace smoa {

namespace {

constexpr char kMagic[5] = {'S', 'M', 'D', 'S', '1'};

void check_task_config(const SyntheticTaskConfig& cfg) {
  if (cfg.n_classes < 2) throw ValidationError("synthetic task: need at least 2 classes");
  if (cfg.f_bins < 1 || cfg.t_frames < 1)
    throw ValidationError("synthetic task: spectrogram dimensions must be positive");
  if (cfg.train_per_class < 1 || cfg.test_per_class < 0)
    throw ValidationError("synthetic task: bad samples-per-class");
  if (cfg.noise_sigma < 0.0) throw ValidationError("synthetic task: negative noise_sigma");
}

bool same_pattern(const ClassPattern& a, const ClassPattern& b) {
  if (a.blobs.size() != b.blobs.size() || a.chirps.size() != b.chirps.size()) return false;
  for (size_t i = 0; i < a.blobs.size(); ++i)
    if (std::memcmp(&a.blobs[i], &b.blobs[i], sizeof(Blob)) != 0) return false;
  for (size_t i = 0; i < a.chirps.size(); ++i)
    if (std::memcmp(&a.chirps[i], &b.chirps[i], sizeof(Chirp)) != 0) return false;
  return true;
}

}  // namespace

std::vector<ClassPattern> class_patterns(const SyntheticTaskConfig& cfg) {
  check_task_config(cfg);
  const double fb = static_cast<double>(cfg.f_bins);
  const double tf = static_cast<double>(cfg.t_frames);
  std::vector<ClassPattern> pats;
  pats.reserve(static_cast<size_t>(cfg.n_classes));
  for (int64_t c = 0; c < cfg.n_classes; ++c) {
    Rng rng(derive_seed(cfg.pattern_seed, "pattern:" + std::to_string(c)));
    ClassPattern pat;
    const int64_t n_blobs = 2 + static_cast<int64_t>(rng.below(3));
    const int64_t n_chirps = static_cast<int64_t>(rng.below(3));
    for (int64_t i = 0; i < n_blobs; ++i) {
      Blob b;
      b.cf = rng.uniform(0.1, 0.9) * fb;
      b.ct = rng.uniform(0.1, 0.9) * tf;
      b.sf = rng.uniform(0.05, 0.15) * fb;
      b.st = rng.uniform(0.05, 0.20) * tf;
      b.amp = rng.uniform(0.8, 1.6);
      pat.blobs.push_back(b);
    }
    for (int64_t i = 0; i < n_chirps; ++i) {
      Chirp ch;
      ch.f0 = rng.uniform(0.1, 0.7) * fb;
      ch.slope = rng.uniform(-0.5, 0.5) * fb / tf;
      ch.width = rng.uniform(0.03, 0.08) * fb;
      ch.amp = rng.uniform(0.5, 1.2);
      pat.chirps.push_back(ch);
    }
    pats.push_back(std::move(pat));
  }
  for (size_t i = 0; i < pats.size(); ++i)
    for (size_t j = i + 1; j < pats.size(); ++j)
      if (same_pattern(pats[i], pats[j]))
        throw ContractError("synthetic task: classes " + std::to_string(i) + " and " +
                            std::to_string(j) + " drew identical patterns");
  return pats;
}

Spectrogram render_pattern(const ClassPattern& pat, int64_t f_bins, int64_t t_frames,
                           double noise_sigma, Rng& rng) {
  Spectrogram s(f_bins, t_frames);
  for (int64_t f = 0; f < f_bins; ++f) {
    const double fd = static_cast<double>(f);
    for (int64_t t = 0; t < t_frames; ++t) {
      const double td = static_cast<double>(t);
      double val = 0.0;
      for (const Blob& b : pat.blobs) {
        const double df = (fd - b.cf) / b.sf;
        const double dt = (td - b.ct) / b.st;
        val += b.amp * std::exp(-0.5 * (df * df + dt * dt));
      }
      for (const Chirp& ch : pat.chirps) {
        const double df = (fd - (ch.f0 + ch.slope * td)) / ch.width;
        val += ch.amp * std::exp(-0.5 * df * df);
      }
      if (noise_sigma > 0.0) val += noise_sigma * rng.normal();
      // Quantize so that the f32 file format preserves samples exactly.
      s.at(f, t) = static_cast<double>(static_cast<float>(val));
    }
  }
  return s;
}

Dataset generate_dataset(const SyntheticTaskConfig& cfg, uint64_t seed, bool test_split) {
  check_task_config(cfg);
  const std::vector<ClassPattern> pats = class_patterns(cfg);
  const int64_t per_class = test_split ? cfg.test_per_class : cfg.train_per_class;
  const char* tag = test_split ? "test" : "train";

  Dataset ds;
  ds.n_classes = cfg.n_classes;
  ds.f_bins = cfg.f_bins;
  ds.t_frames = cfg.t_frames;
  for (int64_t c = 0; c < cfg.n_classes; ++c) {
    for (int64_t k = 0; k < per_class; ++k) {
      Rng rng(derive_seed(seed, std::string(tag) + ":" + std::to_string(c) + ":" +
                                    std::to_string(k)));
      ds.samples.push_back(
          render_pattern(pats[static_cast<size_t>(c)], cfg.f_bins, cfg.t_frames,
                         cfg.noise_sigma, rng));
      ds.labels.push_back(static_cast<int>(c));
    }
  }
  return ds;
}

namespace {

void put_u32(std::ofstream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::ifstream& in, uint64_t& offset, const char* what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4)
    throw FormatError(std::string("dataset file truncated reading ") + what, offset);
  offset += 4;
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
  if (ds.size() == 0) throw ValidationError("save_dataset: empty dataset");
  if (ds.samples.size() != ds.labels.size())
    throw ContractError("save_dataset: sample/label count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("save_dataset: cannot open " + path);
  out.write(kMagic, 5);
  put_u32(out, static_cast<uint32_t>(ds.size()));
  put_u32(out, static_cast<uint32_t>(ds.n_classes));
  put_u32(out, static_cast<uint32_t>(ds.f_bins));
  put_u32(out, static_cast<uint32_t>(ds.t_frames));
  std::vector<float> buf(static_cast<size_t>(ds.f_bins * ds.t_frames));
  for (int64_t i = 0; i < ds.size(); ++i) {
    const Spectrogram& s = ds.samples[static_cast<size_t>(i)];
    if (s.f_bins != ds.f_bins || s.t_frames != ds.t_frames)
      throw ContractError("save_dataset: sample " + std::to_string(i) + " has wrong shape");
    put_u32(out, static_cast<uint32_t>(ds.labels[static_cast<size_t>(i)]));
    for (size_t j = 0; j < buf.size(); ++j) buf[j] = static_cast<float>(s.v[j]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!out) throw ValidationError("save_dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("load_dataset: cannot open " + path);
  uint64_t offset = 0;

  char magic[5];
  in.read(magic, 5);
  if (in.gcount() != 5 || std::memcmp(magic, kMagic, 5) != 0)
    throw FormatError("dataset file has bad magic", 0);
  offset += 5;

  const uint32_t n_samples = get_u32(in, offset, "sample count");
  const uint32_t n_classes = get_u32(in, offset, "class count");
  const uint32_t f_bins = get_u32(in, offset, "f_bins");
  const uint32_t t_frames = get_u32(in, offset, "t_frames");
  if (n_samples == 0) throw FormatError("dataset file declares zero samples", 5);
  if (n_classes == 0) throw FormatError("dataset file declares zero classes", 9);
  if (f_bins == 0 || t_frames == 0)
    throw FormatError("dataset file declares an empty spectrogram shape", 13);

  Dataset ds;
  ds.n_classes = n_classes;
  ds.f_bins = f_bins;
  ds.t_frames = t_frames;
  const size_t plane = static_cast<size_t>(f_bins) * static_cast<size_t>(t_frames);
  std::vector<float> buf(plane);
  for (uint32_t i = 0; i < n_samples; ++i) {
    const uint64_t label_offset = offset;
    const uint32_t label = get_u32(in, offset, "sample label");
    if (label >= n_classes)
      throw FormatError("sample " + std::to_string(i) + " has label " + std::to_string(label) +
                            " but the file declares " + std::to_string(n_classes) + " classes",
                        label_offset);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(plane * sizeof(float)));
    if (static_cast<size_t>(in.gcount()) != plane * sizeof(float))
      throw FormatError("dataset file truncated in sample " + std::to_string(i) + " values",
                        offset + static_cast<uint64_t>(in.gcount()));
    offset += plane * sizeof(float);
    Spectrogram s(f_bins, t_frames);
    for (size_t j = 0; j < plane; ++j) s.v[j] = static_cast<double>(buf[j]);
    ds.samples.push_back(std::move(s));
    ds.labels.push_back(static_cast<int>(label));
  }
  if (in.peek() != std::ifstream::traits_type::eof())
    throw FormatError("dataset file has trailing bytes", offset);
  return ds;
}

}  // namespace smoa
