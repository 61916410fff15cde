#include "adakd/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

namespace adakd {

namespace {

constexpr char kMagic[8] = {'A', 'D', 'K', 'D', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ostream& out, uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_str(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void read_raw(std::istream& in, void* dst, size_t bytes) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(bytes));
  if (static_cast<size_t>(in.gcount()) != bytes) {
    throw std::runtime_error("load_checkpoint: truncated file");
  }
}

uint32_t read_u32(std::istream& in) {
  uint32_t v;
  read_raw(in, &v, sizeof(v));
  return v;
}

uint64_t read_u64(std::istream& in) {
  uint64_t v;
  read_raw(in, &v, sizeof(v));
  return v;
}

std::string read_str(std::istream& in) {
  const uint32_t n = read_u32(in);
  if (n > (1u << 20)) {
    throw std::runtime_error("load_checkpoint: implausible string length");
  }
  std::string s(n, '\0');
  read_raw(in, s.data(), n);
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const TinyTransformerLM& model,
                     const CheckpointMeta& meta) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("save_checkpoint: cannot open " + tmp);
    }
    out.write(kMagic, sizeof(kMagic));
    write_u32(out, kVersion);
    const ModelSpec& s = model.spec();
    write_u32(out, static_cast<uint32_t>(s.vocab_size));
    write_u32(out, static_cast<uint32_t>(s.context_length));
    write_u32(out, static_cast<uint32_t>(s.layer_count));
    write_u32(out, static_cast<uint32_t>(s.head_count));
    write_u32(out, static_cast<uint32_t>(s.model_width));
    write_u64(out, meta.config_hash);
    write_str(out, meta.note);
    write_u32(out, static_cast<uint32_t>(model.parameters().size()));
    for (const auto& [name, tensor] : model.parameters()) {
      write_str(out, name);
      const Mat& v = tensor.value();
      write_u32(out, static_cast<uint32_t>(v.rows()));
      write_u32(out, static_cast<uint32_t>(v.cols()));
      out.write(reinterpret_cast<const char*>(v.data()),
                static_cast<std::streamsize>(sizeof(double) * v.size()));
    }
    if (!out) {
      throw std::runtime_error("save_checkpoint: write failed for " + tmp);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("save_checkpoint: cannot move " + tmp + " to " +
                             path + ": " + ec.message());
  }
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);

  char magic[8];
  read_raw(in, magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("load_checkpoint: " + path +
                             " is not a checkpoint file (bad magic)");
  }
  const uint32_t version = read_u32(in);
  if (version != kVersion) {
    throw std::runtime_error("load_checkpoint: unsupported version " +
                             std::to_string(version));
  }

  ModelSpec spec;
  spec.vocab_size = static_cast<int>(read_u32(in));
  spec.context_length = static_cast<int>(read_u32(in));
  spec.layer_count = static_cast<int>(read_u32(in));
  spec.head_count = static_cast<int>(read_u32(in));
  spec.model_width = static_cast<int>(read_u32(in));

  CheckpointMeta meta;
  meta.config_hash = read_u64(in);
  meta.note = read_str(in);

  const uint32_t param_count = read_u32(in);
  std::map<std::string, Mat> stored;
  for (uint32_t i = 0; i < param_count; ++i) {
    const std::string name = read_str(in);
    const uint32_t rows = read_u32(in);
    const uint32_t cols = read_u32(in);
    Mat m(rows, cols);
    read_raw(in, m.data(), sizeof(double) * m.size());
    if (!stored.emplace(name, std::move(m)).second) {
      throw std::runtime_error("load_checkpoint: duplicate parameter " + name);
    }
  }

  Rng init_rng(0);  // values are overwritten below
  LoadedCheckpoint result{TinyTransformerLM(spec, init_rng), meta};
  if (stored.size() != result.model.parameters().size()) {
    throw std::runtime_error(
        "load_checkpoint: parameter count does not match the architecture");
  }
  for (auto& [name, tensor] : result.model.parameters()) {
    auto it = stored.find(name);
    if (it == stored.end()) {
      throw std::runtime_error("load_checkpoint: missing parameter " + name);
    }
    Mat& v = tensor.value_mut();
    if (it->second.rows() != v.rows() || it->second.cols() != v.cols()) {
      throw std::runtime_error("load_checkpoint: shape mismatch for " + name);
    }
    v = it->second;
  }
  return result;
}

}  // namespace adakd
