#pragma once

#include <functional>
#include <vector>

#include "alix/tensor.hpp"

namespace alix {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double autodiff = 0.0;
  double numeric = 0.0;
};

/// Compares reverse-mode gradients of the scalar `fn()` against central
/// differences for every element of every tensor in `inputs` (which `fn`
/// must read). Relative error is |ad - fd| / max(|fd|, 1e-8). `fn` must be
/// deterministic; hold any internal RNG fixed. Throws NumericError if a
/// probe evaluates to a non-finite value.
GradCheckResult grad_check_detailed(const std::function<Tensor()>& fn, std::vector<Tensor> inputs,
                                    double eps = 1e-5);

double grad_check(const std::function<Tensor()>& fn, std::vector<Tensor> inputs, double eps = 1e-5);

}  // namespace alix
