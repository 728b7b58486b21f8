#include "relsem/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "relsem/error.hpp"

namespace relsem {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'R', 'S', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_str(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_floats(std::ostream& out, const std::vector<float>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("checkpoint truncated");
  return v;
}

std::string get_str(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  if (n > (1u << 26)) throw FormatError("checkpoint string length implausible");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), n)) throw FormatError("checkpoint truncated");
  return s;
}

void get_floats(std::istream& in, std::vector<float>& v) {
  if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float))))
    throw FormatError("checkpoint payload truncated");
}

}  // namespace

void save_checkpoint(std::ostream& out, const Model& model, const CheckpointMeta& meta, const AdamW* optimizer) {
  out.write(kMagic, sizeof kMagic);
  put(out, kVersion);
  put<std::uint64_t>(out, model.config().hash());
  put_str(out, model.config().to_text());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    put_str(out, k);
    put_str(out, v);
  }
  const auto& params = model.parameters();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put_str(out, p.name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.tensor.ndim()));
    for (int d : p.tensor.shape()) put<std::int32_t>(out, d);
  }
  for (const auto& p : params) put_floats(out, p.tensor.node()->value);
  put<std::uint8_t>(out, optimizer ? 1 : 0);
  if (optimizer) {
    const AdamW& opt = *optimizer;
    put<std::int64_t>(out, opt.steps());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(opt.first_moments().size()));
    for (const auto& m : opt.first_moments()) put_floats(out, m);
    for (const auto& v : opt.second_moments()) put_floats(out, v);
  }
  if (!out) throw IoError("failed writing checkpoint");
}

Checkpoint load_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw FormatError("not a relsem checkpoint");
  if (get<std::uint32_t>(in) != kVersion) throw FormatError("unsupported checkpoint version");
  const auto hash = get<std::uint64_t>(in);
  const auto config = ModelConfig::from_text(get_str(in));
  if (config.hash() != hash) throw FormatError("checkpoint config hash mismatch");

  CheckpointMeta meta;
  const auto n_meta = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    auto k = get_str(in);
    meta[k] = get_str(in);
  }

  Checkpoint ck{Model(config, 0), std::move(meta), std::nullopt};
  auto& params = ck.model.parameters();
  const auto n_tensors = get<std::uint32_t>(in);
  if (n_tensors != params.size())
    throw FormatError("checkpoint has " + std::to_string(n_tensors) + " tensors, model expects " +
                      std::to_string(params.size()));
  for (auto& p : params) {
    const auto name = get_str(in);
    const auto nd = get<std::uint32_t>(in);
    Shape shape;
    for (std::uint32_t i = 0; i < nd; ++i) shape.push_back(get<std::int32_t>(in));
    if (name != p.name || shape != p.tensor.shape())
      throw FormatError("checkpoint tensor " + name + shape_str(shape) + " does not match " + p.name +
                        shape_str(p.tensor.shape()));
  }
  for (auto& p : params) get_floats(in, p.tensor.storage());
  if (ck.model.parameter_count() != expected_parameter_count(config))
    throw FormatError("parameter count does not match the configuration");

  if (get<std::uint8_t>(in) == 1) {
    AdamW opt;
    opt.set_steps(get<std::int64_t>(in));
    const auto n = get<std::uint32_t>(in);
    if (n != params.size()) throw FormatError("optimizer state does not match parameters");
    auto& m = opt.first_moments();
    auto& v = opt.second_moments();
    for (const auto& p : params) m.emplace_back(static_cast<std::size_t>(p.tensor.numel()));
    for (const auto& p : params) v.emplace_back(static_cast<std::size_t>(p.tensor.numel()));
    for (auto& x : m) get_floats(in, x);
    for (auto& x : v) get_floats(in, x);
    ck.optimizer = std::move(opt);
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const CheckpointMeta& meta,
                     const AdamW* optimizer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  save_checkpoint(out, model, meta, optimizer);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return load_checkpoint(in);
}

}  // namespace relsem
