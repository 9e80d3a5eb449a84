#include "glyphner/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace glyphner::nd {

double grad_check(const std::function<Var(const Var&)>& f, const Tensor& point, double eps) {
  auto x = Var::leaf(point);
  return grad_check_leaves([&] { return f(x); }, {x}, eps);
}

double grad_check_leaves(const std::function<Var()>& loss, std::vector<Var> leaves, double eps,
                         std::size_t max_coords_per_leaf) {
  for (auto& leaf : leaves) leaf.zero_grad();
  backward(loss());
  std::vector<Tensor> analytic;
  analytic.reserve(leaves.size());
  for (auto& leaf : leaves) analytic.push_back(leaf.has_grad() ? leaf.grad() : Tensor(leaf.shape(), 0.0));

  double worst = 0.0;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    auto& value = leaves[l].mutable_value();
    const std::size_t n = value.size();
    const std::size_t step =
        (max_coords_per_leaf == 0 || n <= max_coords_per_leaf) ? 1 : (n + max_coords_per_leaf - 1) / max_coords_per_leaf;
    for (std::size_t i = 0; i < n; i += step) {
      const double saved = value[i];
      value[i] = saved + eps;
      const double up = loss().value().item();
      value[i] = saved - eps;
      const double down = loss().value().item();
      value[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = std::abs(analytic[l][i] - numeric) / std::max(1.0, std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  for (auto& leaf : leaves) leaf.zero_grad();
  return worst;
}

}  // namespace glyphner::nd
