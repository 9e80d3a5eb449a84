#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "glyphner/autograd.hpp"

namespace glyphner::crf {

// Transition matrices are [L+2, L+2] with START = L and STOP = L+1;
// entry (i, j) scores moving from tag i to tag j. Entries into START and out
// of STOP exist as storage only and are never read.
inline std::size_t start_index(std::size_t num_tags) noexcept { return num_tags; }
inline std::size_t stop_index(std::size_t num_tags) noexcept { return num_tags + 1; }

// Emission scores [T, L] plus an optional mask (empty = every position
// active). Masked positions are skipped entirely.
struct TagLattice {
  nd::Tensor emissions;
  std::vector<std::uint8_t> mask;

  std::size_t length() const { return emissions.dim(0); }
  std::size_t num_tags() const { return emissions.dim(1); }
  std::vector<std::size_t> active() const;
};

struct Decoded {
  std::vector<std::size_t> path;  // one tag per active position
  double score = 0.0;
};

struct OracleResult {
  double log_z = 0.0;
  Decoded best;
};

// Unnormalized score of `path` over the active positions.
double path_score(const TagLattice& lattice, const nd::Tensor& transitions, std::span<const std::size_t> path);
// Forward algorithm in log space.
double log_partition(const TagLattice& lattice, const nd::Tensor& transitions);
// Viterbi; ties go to the lowest tag index at every backpointer and at the end.
Decoded decode(const TagLattice& lattice, const nd::Tensor& transitions);
// Exhaustive enumeration of all L^T paths. Throws ConfigError past 10^6 paths.
OracleResult brute_oracle(const TagLattice& lattice, const nd::Tensor& transitions);

// log Z - score(gold), differentiable in both emissions [T,L] and
// transitions. `gold` has one tag per active position; throws ShapeError on
// a length mismatch and ConfigError for a tag outside the tag set.
nd::Var nll(const nd::Var& emissions, const nd::Var& transitions, std::span<const std::size_t> gold,
            std::span<const std::uint8_t> mask = {});

}  // namespace glyphner::crf
