#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "glyphner/autograd.hpp"

namespace glyphner::nd {

// Max over checked coordinates of
//   |analytic - central_difference| / max(1, |central_difference|).
// `f` must be deterministic (reseed any dropout inside it) and scalar-valued.
double grad_check(const std::function<Var(const Var&)>& f, const Tensor& point, double eps = 1e-5);

// Checks d(loss)/d(leaf) for several trainable leaves at once, perturbing
// their values in place (restored afterwards). When `max_coords_per_leaf` is
// nonzero, a deterministic stride sample of that many coordinates per leaf is
// checked instead of all of them.
double grad_check_leaves(const std::function<Var()>& loss, std::vector<Var> leaves, double eps = 1e-5,
                         std::size_t max_coords_per_leaf = 0);

}  // namespace glyphner::nd
