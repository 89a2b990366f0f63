#include "alix/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "alix/errors.hpp"

namespace alix {

namespace {

double evaluate(const std::function<Tensor()>& fn) {
  NoGradGuard guard;
  const double v = fn().item();
  if (!std::isfinite(v)) throw NumericError("grad_check: non-finite function value");
  return v;
}

}  // namespace

GradCheckResult grad_check_detailed(const std::function<Tensor()>& fn, std::vector<Tensor> inputs, double eps) {
  std::vector<bool> saved_flags;
  for (auto& t : inputs) {
    saved_flags.push_back(t.requires_grad());
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Tensor loss = fn();
  if (!std::isfinite(loss.item())) throw NumericError("grad_check: non-finite loss");

  std::vector<std::vector<double>> analytic;
  if (loss.requires_grad()) {
    backward(loss);
    for (auto& t : inputs) {
      auto g = t.grad();
      analytic.emplace_back(g.begin(), g.end());
      if (analytic.back().empty()) analytic.back().assign(t.numel(), 0.0);
    }
  } else {
    // Function does not depend on any input.
    for (auto& t : inputs) analytic.emplace_back(t.numel(), 0.0);
  }

  GradCheckResult result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto values = inputs[k].values_mut();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + eps;
      const double fp = evaluate(fn);
      values[i] = orig - eps;
      const double fm = evaluate(fn);
      values[i] = orig;
      const double fd = (fp - fm) / (2.0 * eps);
      const double ad = analytic[k][i];
      const double rel = std::abs(ad - fd) / std::max(std::abs(fd), 1e-8);
      if (rel > result.max_relative_error) result = {rel, k, i, ad, fd};
    }
  }
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    inputs[k].zero_grad();
    inputs[k].set_requires_grad(saved_flags[k]);
  }
  return result;
}

double grad_check(const std::function<Tensor()>& fn, std::vector<Tensor> inputs, double eps) {
  return grad_check_detailed(fn, std::move(inputs), eps).max_relative_error;
}

}  // namespace alix
