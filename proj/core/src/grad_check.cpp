#include "voxelpipe/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "voxelpipe/errors.hpp"

namespace voxelpipe {

GradCheckResult check_gradients(const std::function<double()>& loss,
                                const std::vector<std::pair<std::string, Tensor64*>>& tensors,
                                double h, std::int64_t max_probes) {
  GradCheckResult result;
  for (const auto& [name, t] : tensors) {
    if (t->grad.size() != t->data.size()) {
      throw InvariantError("check_gradients: tensor " + name + " has no analytic gradient");
    }
    const std::int64_t n = t->numel();
    const std::int64_t stride =
        max_probes > 0 && n > max_probes ? (n + max_probes - 1) / max_probes : 1;
    for (std::int64_t i = 0; i < n; i += stride) {
      const double saved = t->data[i];
      const double step = h * std::max(1.0, std::abs(saved));
      t->data[i] = saved + step;
      const double lp = loss();
      t->data[i] = saved - step;
      const double lm = loss();
      t->data[i] = saved;
      const double numeric = (lp - lm) / (2.0 * step);
      const double analytic = t->grad[i];
      const double abs_err = std::abs(numeric - analytic);
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      const double rel_err = abs_err / denom;
      result.max_abs_err = std::max(result.max_abs_err, abs_err);
      if (rel_err > result.max_rel_err) {
        result.max_rel_err = rel_err;
        result.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace voxelpipe
