#include "harness/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "model/config.hpp"

namespace dtg::harness {

namespace {

constexpr char kMagic[8] = {'D', 'T', 'G', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void write_doubles(std::ostream& out, const std::vector<double>& v) {
  write_u64(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
std::string read_string(std::istream& in) {
  const std::uint64_t n = read_u64(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}
std::vector<double> read_doubles(std::istream& in) {
  const std::uint64_t n = read_u64(in);
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint: " + tmp);
    out.write(kMagic, sizeof kMagic);
    write_u32(out, kVersion);
    write_string(out, ckpt.config_json);
    const auto& entries = ckpt.params.store.entries();
    write_u32(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& [name, e] : entries) {
      write_string(out, name);
      write_u32(out, static_cast<std::uint32_t>(e.value.shape.size()));
      for (int d : e.value.shape) write_u32(out, static_cast<std::uint32_t>(d));
      write_doubles(out, e.value.values);
      write_doubles(out, e.m.values);
      write_doubles(out, e.v.values);
    }
    write_u64(out, static_cast<std::uint64_t>(ckpt.params.store.step_count()));
    write_string(out, ckpt.rng_state);
    write_u32(out, static_cast<std::uint32_t>(ckpt.progress.stage));
    write_u32(out, static_cast<std::uint32_t>(ckpt.progress.epoch_in_stage));
    if (!out) throw Error("checkpoint write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw Error("cannot move checkpoint into place: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw Error("not a checkpoint file: " + path);
  const std::uint32_t version = read_u32(in);
  if (version != kVersion)
    throw Error("checkpoint version mismatch: found " + std::to_string(version));

  Checkpoint ckpt;
  ckpt.config_json = read_string(in);
  const model::RunConfig cfg = model::RunConfig::from_json(ckpt.config_json);
  ckpt.params.cfg = cfg.model;

  const std::uint32_t count = read_u32(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = read_string(in);
    const std::uint32_t rank = read_u32(in);
    std::vector<int> shape(rank);
    for (std::uint32_t r = 0; r < rank; ++r) shape[r] = static_cast<int>(read_u32(in));
    diff::Tensor value;
    value.shape = shape;
    value.values = read_doubles(in);
    if (value.values.size() != diff::shape_size(shape))
      throw Error("checkpoint corrupt: size mismatch in " + name);
    diff::Tensor& created = ckpt.params.store.create(name, std::move(value));
    (void)created;
    auto& e = ckpt.params.store.at(name);
    e.m.values = read_doubles(in);
    e.v.values = read_doubles(in);
    e.m.shape = shape;
    e.v.shape = shape;
  }
  ckpt.params.store.set_step_count(static_cast<long>(read_u64(in)));
  ckpt.rng_state = read_string(in);
  ckpt.progress.stage = static_cast<int>(read_u32(in));
  ckpt.progress.epoch_in_stage = static_cast<int>(read_u32(in));
  if (!in) throw Error("checkpoint truncated: " + path);
  return ckpt;
}

}  // namespace dtg::harness
