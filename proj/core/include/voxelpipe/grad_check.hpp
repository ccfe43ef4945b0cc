#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "voxelpipe/tensor.hpp"

namespace voxelpipe {

struct GradCheckResult {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::string worst;  // "tensor_name[i]" of the worst relative error

  bool pass(double tol) const { return max_rel_err <= tol; }
};

// Central finite differences against analytic gradients already stored in
// each tensor's grad buffer. `loss` re-evaluates the scalar objective from
// the tensors' current data. Step per element is h * max(1, |value|).
// `max_probes` > 0 checks an evenly strided subset of large tensors.
GradCheckResult check_gradients(const std::function<double()>& loss,
                                const std::vector<std::pair<std::string, Tensor64*>>& tensors,
                                double h = 1e-6, std::int64_t max_probes = 0);

}  // namespace voxelpipe
