#pragma once

#include "mosaic/common.hpp"

#include <functional>
#include <vector>

namespace mosaic {

// Compares analytic gradients against central finite differences.
struct GradCheckResult {
  double max_rel_error = 0.0;
  int worst_coordinate = -1;
  bool all_finite = true;  // false when f was non-finite near the point

  bool ok(double tol) const { return all_finite && max_rel_error < tol; }
};

using ScalarFn = std::function<double(const Vector&)>;
using GradFn = std::function<Vector(const Vector&)>;

// Checks every coordinate. Relative error is
// |analytic - numeric| / max(1, |analytic|, |numeric|).
GradCheckResult grad_check(const ScalarFn& f, const GradFn& analytic,
                           const Vector& point, double step);

// Checks only the listed coordinates (for large parameter vectors).
GradCheckResult grad_check(const ScalarFn& f, const GradFn& analytic,
                           const Vector& point, double step,
                           const std::vector<int>& coordinates);

}  // namespace mosaic
