#include "glyphner/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "glyphner/errors.hpp"

namespace glyphner::crf {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxOraclePaths = 1'000'000;

double log_sum_exp(std::span<const double> v) {
  const double m = *std::ranges::max_element(v);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

void check_transitions(std::size_t num_tags, const nd::Tensor& transitions) {
  if (transitions.rank() != 2 || transitions.dim(0) != num_tags + 2 || transitions.dim(1) != num_tags + 2) {
    throw ShapeError("CRF transitions must be [" + std::to_string(num_tags + 2) + "," + std::to_string(num_tags + 2) +
                     "], got " + nd::shape_string(transitions.shape()));
  }
}

std::vector<std::size_t> active_positions(std::size_t length, std::span<const std::uint8_t> mask) {
  if (!mask.empty() && mask.size() != length) {
    throw ShapeError("CRF mask has " + std::to_string(mask.size()) + " entries for " + std::to_string(length) +
                     " positions");
  }
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < length; ++t)
    if (mask.empty() || mask[t]) out.push_back(t);
  return out;
}

// Row-major [n, L] table of log forward (alpha) or backward (beta) values.
struct Tables {
  std::vector<double> alpha;
  std::vector<double> beta;
  double log_z = 0.0;
};

Tables forward_backward(const nd::Tensor& em, const nd::Tensor& tr, const std::vector<std::size_t>& pos, bool with_beta) {
  const std::size_t L = em.dim(1), n = pos.size(), W = L + 2;
  const std::size_t S = start_index(L), E = stop_index(L);
  Tables tb;
  tb.alpha.assign(n * L, 0.0);
  std::vector<double> buf(L);
  for (std::size_t j = 0; j < L; ++j) tb.alpha[j] = tr[S * W + j] + em[pos[0] * L + j];
  for (std::size_t k = 1; k < n; ++k) {
    for (std::size_t j = 0; j < L; ++j) {
      for (std::size_t i = 0; i < L; ++i) buf[i] = tb.alpha[(k - 1) * L + i] + tr[i * W + j];
      tb.alpha[k * L + j] = log_sum_exp(buf) + em[pos[k] * L + j];
    }
  }
  for (std::size_t i = 0; i < L; ++i) buf[i] = tb.alpha[(n - 1) * L + i] + tr[i * W + E];
  tb.log_z = log_sum_exp(buf);
  if (!with_beta) return tb;
  tb.beta.assign(n * L, 0.0);
  for (std::size_t i = 0; i < L; ++i) tb.beta[(n - 1) * L + i] = tr[i * W + E];
  for (std::size_t k = n - 1; k-- > 0;) {
    for (std::size_t i = 0; i < L; ++i) {
      for (std::size_t j = 0; j < L; ++j) buf[j] = tr[i * W + j] + em[pos[k + 1] * L + j] + tb.beta[(k + 1) * L + j];
      tb.beta[k * L + i] = log_sum_exp(buf);
    }
  }
  return tb;
}

void check_gold(std::span<const std::size_t> gold, std::size_t n, std::size_t L) {
  if (gold.size() != n) {
    throw ShapeError("gold path has " + std::to_string(gold.size()) + " tags for " + std::to_string(n) +
                     " active positions");
  }
  for (auto g : gold)
    if (g >= L) throw ConfigError("gold tag index " + std::to_string(g) + " outside a tag set of " + std::to_string(L));
}

double score_of(const nd::Tensor& em, const nd::Tensor& tr, const std::vector<std::size_t>& pos,
                std::span<const std::size_t> path) {
  const std::size_t L = em.dim(1), W = L + 2;
  double s = tr[start_index(L) * W + path[0]];
  for (std::size_t k = 0; k < pos.size(); ++k) {
    s += em[pos[k] * L + path[k]];
    if (k > 0) s += tr[path[k - 1] * W + path[k]];
  }
  return s + tr[path.back() * W + stop_index(L)];
}

}  // namespace

std::vector<std::size_t> TagLattice::active() const { return active_positions(length(), mask); }

double path_score(const TagLattice& lattice, const nd::Tensor& transitions, std::span<const std::size_t> path) {
  check_transitions(lattice.num_tags(), transitions);
  const auto pos = lattice.active();
  check_gold(path, pos.size(), lattice.num_tags());
  if (pos.empty()) throw ShapeError("CRF lattice has no active positions");
  return score_of(lattice.emissions, transitions, pos, path);
}

double log_partition(const TagLattice& lattice, const nd::Tensor& transitions) {
  check_transitions(lattice.num_tags(), transitions);
  const auto pos = lattice.active();
  if (pos.empty()) throw ShapeError("CRF lattice has no active positions");
  return forward_backward(lattice.emissions, transitions, pos, false).log_z;
}

Decoded decode(const TagLattice& lattice, const nd::Tensor& transitions) {
  check_transitions(lattice.num_tags(), transitions);
  const auto pos = lattice.active();
  if (pos.empty()) throw ShapeError("CRF lattice has no active positions");
  const auto& em = lattice.emissions;
  const auto& tr = transitions;
  const std::size_t L = lattice.num_tags(), n = pos.size(), W = L + 2;
  std::vector<double> delta(n * L);
  std::vector<std::size_t> back(n * L, 0);
  for (std::size_t j = 0; j < L; ++j) delta[j] = tr[start_index(L) * W + j] + em[pos[0] * L + j];
  for (std::size_t k = 1; k < n; ++k) {
    for (std::size_t j = 0; j < L; ++j) {
      std::size_t arg = 0;
      double best = delta[(k - 1) * L] + tr[j];
      for (std::size_t i = 1; i < L; ++i) {
        const double v = delta[(k - 1) * L + i] + tr[i * W + j];
        if (v > best) best = v, arg = i;
      }
      delta[k * L + j] = best + em[pos[k] * L + j];
      back[k * L + j] = arg;
    }
  }
  Decoded d;
  std::size_t last = 0;
  d.score = delta[(n - 1) * L] + tr[stop_index(L)];
  for (std::size_t j = 1; j < L; ++j) {
    const double v = delta[(n - 1) * L + j] + tr[j * W + stop_index(L)];
    if (v > d.score) d.score = v, last = j;
  }
  d.path.assign(n, 0);
  d.path[n - 1] = last;
  for (std::size_t k = n - 1; k > 0; --k) d.path[k - 1] = back[k * L + d.path[k]];
  return d;
}

OracleResult brute_oracle(const TagLattice& lattice, const nd::Tensor& transitions) {
  check_transitions(lattice.num_tags(), transitions);
  const auto pos = lattice.active();
  if (pos.empty()) throw ShapeError("CRF lattice has no active positions");
  const std::size_t L = lattice.num_tags(), n = pos.size();
  std::size_t total = 1;
  for (std::size_t k = 0; k < n; ++k) {
    if (total > kMaxOraclePaths / L) throw ConfigError("brute-force CRF oracle limited to 10^6 paths");
    total *= L;
  }
  std::vector<double> scores;
  scores.reserve(total);
  std::vector<std::size_t> path(n, 0);
  OracleResult r;
  r.best.score = kNegInf;
  for (std::size_t c = 0; c < total; ++c) {
    const double s = score_of(lattice.emissions, transitions, pos, path);
    scores.push_back(s);
    if (s > r.best.score) r.best = {path, s};
    for (std::size_t k = n; k-- > 0;) {  // odometer, last position fastest
      if (++path[k] < L) break;
      path[k] = 0;
    }
  }
  r.log_z = log_sum_exp(scores);
  return r;
}

nd::Var nll(const nd::Var& emissions, const nd::Var& transitions, std::span<const std::size_t> gold,
            std::span<const std::uint8_t> mask) {
  const auto& em = emissions.value();
  const auto& tr = transitions.value();
  if (em.rank() != 2) throw ShapeError("CRF emissions must be [T,L], got " + nd::shape_string(em.shape()));
  const std::size_t L = em.dim(1);
  check_transitions(L, tr);
  auto pos = active_positions(em.dim(0), mask);
  if (pos.empty()) throw ShapeError("CRF lattice has no active positions");
  check_gold(gold, pos.size(), L);
  std::vector<std::size_t> g(gold.begin(), gold.end());

  auto tb = forward_backward(em, tr, pos, true);
  // log Z >= score(gold) exactly; clamp the rounding residue of a dominant
  // path (NaN passes through).
  double loss = tb.log_z - score_of(em, tr, pos, g);
  if (loss < 0.0) loss = 0.0;

  return nd::make_result(
      nd::Tensor::scalar(loss), {emissions, transitions},
      [pos = std::move(pos), g = std::move(g), tb = std::move(tb), L](nd::Node& self) {
        const double up = self.grad[0];
        const auto& e = self.inputs[0]->value;
        const auto& t = self.inputs[1]->value;
        const std::size_t n = pos.size(), W = L + 2, S = start_index(L), E = stop_index(L);
        auto node_marginal = [&](std::size_t k, std::size_t j) {
          return std::exp(tb.alpha[k * L + j] + tb.beta[k * L + j] - tb.log_z);
        };
        if (auto* ge = self.input_grad(0)) {
          for (std::size_t k = 0; k < n; ++k) {
            for (std::size_t j = 0; j < L; ++j) (*ge)[pos[k] * L + j] += up * node_marginal(k, j);
            (*ge)[pos[k] * L + g[k]] -= up;
          }
        }
        if (auto* gt = self.input_grad(1)) {
          for (std::size_t j = 0; j < L; ++j) {
            (*gt)[S * W + j] += up * node_marginal(0, j);
            (*gt)[j * W + E] += up * node_marginal(n - 1, j);
          }
          (*gt)[S * W + g[0]] -= up;
          (*gt)[g[n - 1] * W + E] -= up;
          for (std::size_t k = 1; k < n; ++k) {
            for (std::size_t i = 0; i < L; ++i) {
              const double a = tb.alpha[(k - 1) * L + i];
              for (std::size_t j = 0; j < L; ++j) {
                (*gt)[i * W + j] +=
                    up * std::exp(a + t[i * W + j] + e[pos[k] * L + j] + tb.beta[k * L + j] - tb.log_z);
              }
            }
            (*gt)[g[k - 1] * W + g[k]] -= up;
          }
        }
      });
}

}  // namespace glyphner::crf
