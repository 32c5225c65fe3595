#include "specalign/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace specalign {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'D', 'T'};
constexpr std::uint8_t kMaxRank = 8;
constexpr std::uint64_t kMaxElements = 1ULL << 31;

void write_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <class T>
void write_le(std::ostream& out, T value) {
  unsigned char buf[sizeof(T)];
  std::uint64_t bits;
  if constexpr (sizeof(T) == 8 && std::is_floating_point_v<T>) {
    std::memcpy(&bits, &value, 8);
  } else {
    bits = static_cast<std::uint64_t>(value);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  write_bytes(out, buf, sizeof(T));
}

void read_bytes(std::istream& in, void* p, std::size_t n) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw IoError("checkpoint: truncated file");
}

template <class T>
T read_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  read_bytes(in, buf, sizeof(T));
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  if constexpr (sizeof(T) == 8 && std::is_floating_point_v<T>) {
    T value;
    std::memcpy(&value, &bits, 8);
    return value;
  } else {
    return static_cast<T>(bits);
  }
}

}  // namespace

void Checkpoint::put(std::string name, Tensor value) {
  tensors.emplace_back(std::move(name), std::move(value));
}

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

const Tensor& Checkpoint::require(const std::string& name) const {
  const Tensor* t = find(name);
  if (!t) throw IoError("checkpoint: missing tensor " + name);
  return *t;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("checkpoint: cannot open " + path + " for writing");
  write_bytes(out, kMagic, 4);
  write_le<std::uint32_t>(out, kCheckpointVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, tensor] : ckpt.tensors) {
    if (name.size() > 0xFFFF) throw IoError("checkpoint: tensor name too long");
    if (tensor.rank() > kMaxRank) throw IoError("checkpoint: dimension overflow");
    write_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    write_bytes(out, name.data(), name.size());
    write_le<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.rank()));
    for (std::size_t d : tensor.dims()) write_le<std::uint64_t>(out, d);
    for (double v : tensor.data()) write_le<double>(out, v);
  }
  if (!out) throw IoError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path);
  char magic[4];
  read_bytes(in, magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw IoError("checkpoint: magic mismatch");
  std::uint32_t version = read_le<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  std::uint32_t count = read_le<std::uint32_t>(in);
  Checkpoint ckpt;
  for (std::uint32_t t = 0; t < count; ++t) {
    std::uint16_t name_len = read_le<std::uint16_t>(in);
    std::string name(name_len, '\0');
    read_bytes(in, name.data(), name_len);
    std::uint8_t rank = read_le<std::uint8_t>(in);
    if (rank > kMaxRank) throw IoError("checkpoint: dimension overflow");
    std::vector<std::size_t> dims(rank);
    std::uint64_t numel = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      std::uint64_t extent = read_le<std::uint64_t>(in);
      if (extent == 0 || extent > kMaxElements) throw IoError("checkpoint: dimension overflow");
      numel *= extent;
      if (numel > kMaxElements) throw IoError("checkpoint: dimension overflow");
      dims[d] = static_cast<std::size_t>(extent);
    }
    std::vector<double> data(static_cast<std::size_t>(numel));
    for (double& v : data) v = read_le<double>(in);
    ckpt.put(std::move(name), Tensor::from(std::move(dims), std::move(data)));
  }
  return ckpt;
}

void pack_net(Checkpoint& ckpt, const std::string& prefix, const NetSpec& spec, const Graph& g) {
  std::vector<double> meta{
      static_cast<double>(static_cast<int>(spec.kind)),
      static_cast<double>(spec.latent),
      static_cast<double>(spec.image_side),
      static_cast<double>(spec.flat_dim),
      static_cast<double>(spec.conv_features),
      spec.leak_init,
      spec.prelu_offset,
      spec.squash_output ? 1.0 : 0.0,
      static_cast<double>(spec.hidden.size()),
  };
  for (std::size_t w : spec.hidden) meta.push_back(static_cast<double>(w));
  std::size_t meta_len = meta.size();
  ckpt.put(prefix + "/arch", Tensor::from({meta_len}, std::move(meta)));
  for (const ParamView& p : g.parameters()) ckpt.put(prefix + "/" + p.name, *p.value);
}

std::pair<NetSpec, Graph> unpack_net(const Checkpoint& ckpt, const std::string& prefix) {
  const Tensor& meta = ckpt.require(prefix + "/arch");
  NetSpec spec;
  spec.kind = static_cast<NetKind>(static_cast<int>(meta[0]));
  spec.latent = static_cast<std::size_t>(meta[1]);
  spec.image_side = static_cast<std::size_t>(meta[2]);
  spec.flat_dim = static_cast<std::size_t>(meta[3]);
  spec.conv_features = static_cast<std::size_t>(meta[4]);
  spec.leak_init = meta[5];
  spec.prelu_offset = meta[6];
  spec.squash_output = meta[7] != 0.0;
  std::size_t nh = static_cast<std::size_t>(meta[8]);
  spec.hidden.clear();
  for (std::size_t i = 0; i < nh; ++i)
    spec.hidden.push_back(static_cast<std::size_t>(meta[9 + i]));
  Graph g = build_net(spec, 0);
  for (ParamRef p : g.parameters()) {
    const Tensor& stored = ckpt.require(prefix + "/" + p.name);
    if (!stored.same_dims(*p.value)) throw IoError("checkpoint: stored shape mismatch for " + p.name);
    *p.value = stored;
  }
  return {spec, std::move(g)};
}

void pack_optimizer(Checkpoint& ckpt, const std::string& prefix, const OptimizerState& state) {
  pack_scalar(ckpt, prefix + "/steps", static_cast<double>(state.step_count));
  for (std::size_t i = 0; i < state.acc1.size(); ++i)
    ckpt.put(prefix + "/acc1/" + std::to_string(i), state.acc1[i]);
  for (std::size_t i = 0; i < state.acc2.size(); ++i)
    ckpt.put(prefix + "/acc2/" + std::to_string(i), state.acc2[i]);
}

void unpack_optimizer(const Checkpoint& ckpt, const std::string& prefix, OptimizerState& state) {
  state.step_count = static_cast<long>(unpack_scalar(ckpt, prefix + "/steps"));
  for (std::size_t i = 0; i < state.acc1.size(); ++i)
    state.acc1[i] = ckpt.require(prefix + "/acc1/" + std::to_string(i));
  for (std::size_t i = 0; i < state.acc2.size(); ++i)
    state.acc2[i] = ckpt.require(prefix + "/acc2/" + std::to_string(i));
}

void pack_scalar(Checkpoint& ckpt, const std::string& name, double value) {
  ckpt.put(name, Tensor::from({1}, {value}));
}

double unpack_scalar(const Checkpoint& ckpt, const std::string& name) {
  return ckpt.require(name)[0];
}

}  // namespace specalign
