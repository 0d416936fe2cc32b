#include "notedx/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "notedx/error.hpp"

namespace notedx::nn {

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

GradCheckResult grad_check(const std::function<double()>& loss, std::span<const GradBlock> blocks,
                           GradCheckOptions options) {
  GradCheckResult result;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const GradBlock& block = blocks[b];
    require(block.values.size() == block.analytic.size(), ErrorCode::ShapeMismatch,
            "gradient block sizes differ");
    for (std::size_t i = 0; i < block.values.size(); ++i) {
      const double saved = block.values[i];
      block.values[i] = saved + options.step;
      const double plus = loss();
      block.values[i] = saved - options.step;
      const double minus = loss();
      block.values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double err = relative_error(block.analytic[i], numeric, options.floor);
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_block = b;
        result.worst_index = i;
      }
      ++result.checked;
    }
  }
  return result;
}

}  // namespace notedx::nn
