#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "glyphner/autograd.hpp"

namespace glyphner::nd {

// Decides whether decoupled weight decay applies: only kWeight parameters decay.
enum class ParamKind : std::uint8_t { kWeight, kBias, kNorm };

struct Parameter {
  std::string name;
  ParamKind kind = ParamKind::kWeight;
  Var var;
};

// Ordered, name-addressable collection of trainable leaves. Order is the
// insertion order and is what checkpoints serialize.
class ParameterSet {
 public:
  // Throws ConfigError on duplicate names.
  Var& add(std::string name, ParamKind kind, Tensor init);

  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Var& at(const std::string& name);
  const Var& at(const std::string& name) const;

  std::vector<Parameter>& items() noexcept { return items_; }
  const std::vector<Parameter>& items() const noexcept { return items_; }
  std::size_t size() const noexcept { return items_.size(); }

  void zero_grad();
  // Appends every parameter of `other` with `prefix` prepended to its name.
  void append(const ParameterSet& other, const std::string& prefix = {});

 private:
  std::vector<Parameter> items_;
};

// Normal(0, std) redrawn until |x| <= 2 std.
Tensor truncated_normal(const Shape& shape, double stddev, std::mt19937_64& rng);
// He-style init: truncated normal with std = sqrt(2 / fan_in).
Tensor he_normal(const Shape& shape, std::size_t fan_in, std::mt19937_64& rng);
// Row-orthonormal (rows <= cols) or column-orthonormal (rows > cols) matrix,
// via Gram-Schmidt on a Gaussian draw.
Tensor orthogonal(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

}  // namespace glyphner::nd
