#include "glyphner/checkpoint.hpp"

#include <set>

#include "glyphner/binary_io.hpp"
#include "glyphner/errors.hpp"

namespace glyphner::ckpt {
namespace {

constexpr std::string_view kMagic = "GTCK";
constexpr std::uint32_t kMaxRank = 8;

}  // namespace

std::uint64_t digest(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

const nd::Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

const nd::Tensor& Checkpoint::at(const std::string& name) const {
  if (const auto* t = find(name)) return *t;
  throw FormatError(FormatFault::kMismatch, "checkpoint has no tensor named '" + name + "'");
}

std::vector<std::uint8_t> encode(const Checkpoint& ckpt) {
  io::ByteWriter w;
  w.tag(kMagic);
  w.u32(kVersion);
  w.u64(ckpt.config_digest());
  w.str(ckpt.config);
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) w.u64(e);
    for (double v : t.data()) w.f64(v);
  }
  return w.buffer();
}

Checkpoint decode(std::span<const std::uint8_t> data, const std::string& source) {
  io::ByteReader r(data, source);
  r.expect_tag(kMagic);
  if (const auto v = r.u32(); v != kVersion) {
    throw FormatError(FormatFault::kBadVersion, source + ": unsupported checkpoint version " + std::to_string(v));
  }
  const auto stored_digest = r.u64();
  Checkpoint c;
  c.config = r.str();
  if (c.config_digest() != stored_digest) {
    throw FormatError(FormatFault::kMismatch, source + ": config digest does not match the stored config");
  }
  const auto count = r.u32();
  std::set<std::string> names;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name = r.str();
    if (!names.insert(name).second) throw FormatError(FormatFault::kDuplicateKey, source + ": duplicate tensor " + name);
    const auto rank = r.u32();
    if (rank == 0 || rank > kMaxRank) {
      throw FormatError(FormatFault::kBadValue, source + ": tensor " + name + " has rank " + std::to_string(rank));
    }
    nd::Shape shape(rank);
    std::size_t n = 1;
    for (auto& e : shape) {
      e = r.u64();
      if (e == 0 || n > r.remaining() / e) {
        throw FormatError(FormatFault::kTruncated, source + ": tensor " + name + " extends past the end");
      }
      n *= e;
    }
    if (n * 8 > r.remaining()) throw FormatError(FormatFault::kTruncated, source + ": tensor " + name + " is cut short");
    std::vector<double> values(n);
    for (auto& v : values) v = r.f64();
    c.tensors.emplace_back(std::move(name), nd::Tensor(std::move(shape), std::move(values)));
  }
  if (r.remaining() != 0) {
    throw FormatError(FormatFault::kMismatch, source + ": " + std::to_string(r.remaining()) + " trailing bytes");
  }
  return c;
}

void save(const Checkpoint& ckpt, const std::filesystem::path& path) { io::write_file(path, encode(ckpt)); }

Checkpoint load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path.string());
  return decode(io::read_file(path), path.string());
}

void add_params(Checkpoint& ckpt, const nd::ParameterSet& params) {
  for (const auto& p : params.items()) ckpt.tensors.emplace_back(p.name, p.var.value());
}

void restore_params(const Checkpoint& ckpt, nd::ParameterSet& params) {
  for (auto& p : params.items()) {
    const auto& t = ckpt.at(p.name);
    if (t.shape() != p.var.shape()) {
      throw FormatError(FormatFault::kMismatch, "checkpoint tensor " + p.name + " has shape " +
                                                    nd::shape_string(t.shape()) + ", model expects " +
                                                    nd::shape_string(p.var.shape()));
    }
    p.var.mutable_value() = t;
  }
}

}  // namespace glyphner::ckpt
