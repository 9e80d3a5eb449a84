#include "glyphner/params.hpp"

#include <cmath>

#include "glyphner/errors.hpp"

namespace glyphner::nd {

Var& ParameterSet::add(std::string name, ParamKind kind, Tensor init) {
  if (find(name)) throw ConfigError("duplicate parameter name: " + name);
  items_.push_back(Parameter{std::move(name), kind, Var::leaf(std::move(init))});
  return items_.back().var;
}

Parameter* ParameterSet::find(const std::string& name) {
  for (auto& p : items_)
    if (p.name == name) return &p;
  return nullptr;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : items_)
    if (p.name == name) return &p;
  return nullptr;
}

Var& ParameterSet::at(const std::string& name) {
  auto* p = find(name);
  if (!p) throw ConfigError("unknown parameter: " + name);
  return p->var;
}

const Var& ParameterSet::at(const std::string& name) const {
  const auto* p = find(name);
  if (!p) throw ConfigError("unknown parameter: " + name);
  return p->var;
}

void ParameterSet::zero_grad() {
  for (auto& p : items_) p.var.zero_grad();
}

void ParameterSet::append(const ParameterSet& other, const std::string& prefix) {
  for (const auto& p : other.items_) {
    if (find(prefix + p.name)) throw ConfigError("duplicate parameter name: " + prefix + p.name);
    items_.push_back(Parameter{prefix + p.name, p.kind, p.var});
  }
}

Tensor truncated_normal(const Shape& shape, double stddev, std::mt19937_64& rng) {
  Tensor t(shape);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : t.data()) {
    double z;
    do {
      z = normal(rng);
    } while (std::abs(z) > 2.0);
    v = z * stddev;
  }
  return t;
}

Tensor he_normal(const Shape& shape, std::size_t fan_in, std::mt19937_64& rng) {
  return truncated_normal(shape, std::sqrt(2.0 / static_cast<double>(fan_in)), rng);
}

Tensor orthogonal(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  // Orthonormalize along the shorter side.
  const bool by_rows = rows <= cols;
  const std::size_t count = by_rows ? rows : cols;
  const std::size_t len = by_rows ? cols : rows;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> basis;
  basis.reserve(count);
  while (basis.size() < count) {
    std::vector<double> v(len);
    for (auto& x : v) x = normal(rng);
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& b : basis) {
        double dot = 0.0;
        for (std::size_t i = 0; i < len; ++i) dot += v[i] * b[i];
        for (std::size_t i = 0; i < len; ++i) v[i] -= dot * b[i];
      }
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-8) continue;
    for (auto& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  Tensor out({rows, cols});
  for (std::size_t a = 0; a < count; ++a)
    for (std::size_t i = 0; i < len; ++i) {
      if (by_rows)
        out[a * cols + i] = basis[a][i];
      else
        out[i * cols + a] = basis[a][i];
    }
  return out;
}

}  // namespace glyphner::nd
