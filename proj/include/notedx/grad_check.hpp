#pragma once

#include <functional>
#include <span>
#include <vector>

namespace notedx::nn {

/// One block of differentiable values and the analytic gradient computed for
/// them. The checker perturbs `values` in place and restores it afterwards.
struct GradBlock {
  std::span<double> values;
  std::span<const double> analytic;
};

struct GradCheckOptions {
  double step = 1e-5;
  /// Denominator floor for the relative error, so entries whose true
  /// gradient is ~0 are compared on an absolute scale.
  double floor = 1e-3;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_block = 0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Central-difference check of every entry of every block against its
/// analytic gradient. `loss` must recompute the scalar objective from the
/// current contents of the blocks.
GradCheckResult grad_check(const std::function<double()>& loss, std::span<const GradBlock> blocks,
                           GradCheckOptions options = {});

double relative_error(double analytic, double numeric, double floor);

}  // namespace notedx::nn
