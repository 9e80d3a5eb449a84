#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "glyphner/params.hpp"

namespace glyphner::ckpt {

inline constexpr std::uint32_t kVersion = 1;

// 64-bit FNV-1a.
std::uint64_t digest(std::string_view text);

// Layout (little-endian):
//   "GTCK" | u32 version | u64 digest(config) | u32 len + config text |
//   u32 record count | per record: u32 len + name, u32 rank,
//   rank x u64 extents, 64-bit reals.
struct Checkpoint {
  std::string config;
  std::vector<std::pair<std::string, nd::Tensor>> tensors;

  std::uint64_t config_digest() const { return digest(config); }
  // Throws FormatError(kMismatch) when the name is absent.
  const nd::Tensor& at(const std::string& name) const;
  const nd::Tensor* find(const std::string& name) const;
};

std::vector<std::uint8_t> encode(const Checkpoint& ckpt);
// Throws FormatError on bad magic, version, digest, truncation or trailing bytes.
Checkpoint decode(std::span<const std::uint8_t> data, const std::string& source = "<memory>");
void save(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load(const std::filesystem::path& path);

// Appends every parameter value of `params` under its name.
void add_params(Checkpoint& ckpt, const nd::ParameterSet& params);
// Copies stored values into `params` by name. Every parameter must be present
// with a matching shape (FormatError kMismatch).
void restore_params(const Checkpoint& ckpt, nd::ParameterSet& params);

}  // namespace glyphner::ckpt
