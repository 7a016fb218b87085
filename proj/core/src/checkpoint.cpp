#include "smoa/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

namespace smoa {

namespace {

constexpr char kMagic[5] = {'S', 'M', 'O', 'A', '1'};

struct ManifestEntry {
  std::string name;
  bool trainable = false;
  Shape shape;
  uint64_t payload_offset = 0;  // bytes from file start
};

void put_u16(std::ofstream& out, uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ofstream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

struct Reader {
  std::ifstream in;
  uint64_t offset = 0;
  uint64_t file_size = 0;

  void measure() {
    in.seekg(0, std::ios::end);
    file_size = static_cast<uint64_t>(in.tellg());
    in.seekg(0, std::ios::beg);
  }

  void read_raw(void* dst, size_t n, const char* what) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in.gcount()) != n)
      throw FormatError(std::string("checkpoint truncated reading ") + what,
                        offset + static_cast<uint64_t>(in.gcount()));
    offset += n;
  }
  uint16_t u16(const char* what) {
    unsigned char b[2];
    read_raw(b, 2, what);
    return static_cast<uint16_t>(b[0] | b[1] << 8);
  }
  uint32_t u32(const char* what) {
    unsigned char b[4];
    read_raw(b, 4, what);
    return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
           static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
  }
};

std::vector<ManifestEntry> read_manifest(Reader& r) {
  char magic[5];
  r.read_raw(magic, 5, "magic");
  if (std::memcmp(magic, kMagic, 5) != 0) throw FormatError("checkpoint has bad magic", 0);
  const uint32_t count = r.u32("entry count");

  std::vector<ManifestEntry> entries;
  entries.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    ManifestEntry e;
    const uint16_t name_len = r.u16("name length");
    if (name_len == 0) throw FormatError("checkpoint entry has empty name", r.offset - 2);
    e.name.resize(name_len);
    r.read_raw(e.name.data(), name_len, "name");
    unsigned char flags[2];
    r.read_raw(flags, 2, "entry flags");
    if (flags[0] > 1)
      throw FormatError("checkpoint entry " + e.name + " has bad trainable flag", r.offset - 2);
    e.trainable = flags[0] == 1;
    const int rank = flags[1];
    for (int k = 0; k < rank; ++k) {
      const uint32_t extent = r.u32("shape extent");
      if (extent == 0)
        throw FormatError("checkpoint entry " + e.name + " has zero extent", r.offset - 4);
      e.shape.push_back(static_cast<int64_t>(extent));
    }
    entries.push_back(std::move(e));
  }
  uint64_t at = r.offset;
  for (ManifestEntry& e : entries) {
    e.payload_offset = at;
    at += sizeof(double) * static_cast<uint64_t>(shape_numel(e.shape));
  }
  return entries;
}

void read_payload_into(Reader& r, const ManifestEntry& e, Tensor t) {
  if (t.shape() != e.shape)
    throw ValidationError("checkpoint entry " + e.name + " has shape " + shape_str(e.shape) +
                          ", model expects " + shape_str(t.shape()));
  r.read_raw(t.data(), sizeof(double) * static_cast<size_t>(t.numel()), e.name.c_str());
}

void skip_payload(Reader& r, const ManifestEntry& e) {
  const uint64_t n = sizeof(double) * static_cast<uint64_t>(shape_numel(e.shape));
  if (r.offset + n > r.file_size)
    throw FormatError("checkpoint truncated in payload of " + e.name, r.file_size);
  r.in.seekg(static_cast<std::streamoff>(n), std::ios::cur);
  if (!r.in) throw FormatError("checkpoint truncated in payload of " + e.name, r.offset);
  r.offset += n;
}

void check_eof(Reader& r) {
  if (r.in.peek() != std::ifstream::traits_type::eof())
    throw FormatError("checkpoint has trailing bytes", r.offset);
}

}  // namespace

void save_checkpoint(const ParamRegistry& reg, const std::string& path) {
  if (reg.size() == 0) throw ValidationError("save_checkpoint: empty registry");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("save_checkpoint: cannot open " + path);
  out.write(kMagic, 5);
  put_u32(out, static_cast<uint32_t>(reg.size()));
  for (const ParamEntry& e : reg) {
    if (e.name.size() > 0xffff)
      throw ValidationError("save_checkpoint: parameter name too long: " + e.name);
    put_u16(out, static_cast<uint16_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    const unsigned char flags[2] = {static_cast<unsigned char>(e.trainable ? 1 : 0),
                                    static_cast<unsigned char>(e.tensor.ndim())};
    out.write(reinterpret_cast<const char*>(flags), 2);
    for (int64_t ext : e.tensor.shape()) put_u32(out, static_cast<uint32_t>(ext));
  }
  for (const ParamEntry& e : reg)
    out.write(reinterpret_cast<const char*>(e.tensor.data()),
              static_cast<std::streamsize>(sizeof(double) * e.tensor.numel()));
  if (!out) throw ValidationError("save_checkpoint: write failed for " + path);
}

void load_checkpoint(ParamRegistry& reg, const std::string& path) {
  Reader r;
  r.in.open(path, std::ios::binary);
  if (!r.in) throw ValidationError("load_checkpoint: cannot open " + path);
  r.measure();
  const std::vector<ManifestEntry> entries = read_manifest(r);

  if (entries.size() != reg.size())
    throw ValidationError("load_checkpoint: file holds " + std::to_string(entries.size()) +
                          " parameters, model has " + std::to_string(reg.size()));
  for (const ManifestEntry& e : entries) {
    if (!reg.contains(e.name))
      throw ValidationError("load_checkpoint: model has no parameter " + e.name);
    read_payload_into(r, e, reg.at(e.name).tensor);
  }
  check_eof(r);
}

void load_backbone(ParamRegistry& reg, const std::string& path) {
  Reader r;
  r.in.open(path, std::ios::binary);
  if (!r.in) throw ValidationError("load_backbone: cannot open " + path);
  r.measure();
  const std::vector<ManifestEntry> entries = read_manifest(r);

  std::map<std::string, const ManifestEntry*> by_name;
  for (const ManifestEntry& e : entries) by_name[e.name] = &e;

  std::vector<std::string> missing;
  for (const ParamEntry& pe : reg) {
    if (pe.name.rfind("head.", 0) == 0) continue;
    if (!by_name.count(pe.name)) {
      if (!pe.trainable) missing.push_back(pe.name);
    }
  }
  if (!missing.empty())
    throw ValidationError("load_backbone: file does not cover frozen parameter " + missing[0] +
                          (missing.size() > 1
                               ? " (and " + std::to_string(missing.size() - 1) + " more)"
                               : ""));

  for (const ManifestEntry& e : entries) {
    const bool wanted = e.name.rfind("head.", 0) != 0 && reg.contains(e.name);
    if (wanted)
      read_payload_into(r, e, reg.at(e.name).tensor);
    else
      skip_payload(r, e);
  }
  check_eof(r);
}

}  // namespace smoa
