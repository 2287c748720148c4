#include "mosaic/grad_check.hpp"

#include <cmath>
#include <numeric>

namespace mosaic {

GradCheckResult grad_check(const ScalarFn& f, const GradFn& analytic,
                           const Vector& point, double step,
                           const std::vector<int>& coordinates) {
  require(step > 0.0, "grad_check: step must be positive");
  GradCheckResult result;
  Vector g = analytic(point);
  require(g.size() == point.size(), "grad_check: gradient size mismatch");
  Vector x = point;
  for (int c : coordinates) {
    require(c >= 0 && c < point.size(), "grad_check: coordinate out of range");
    double keep = x(c);
    x(c) = keep + step;
    double fp = f(x);
    x(c) = keep - step;
    double fm = f(x);
    x(c) = keep;
    if (!std::isfinite(fp) || !std::isfinite(fm) || !std::isfinite(g(c))) {
      result.all_finite = false;
      result.worst_coordinate = c;
      result.max_rel_error = std::numeric_limits<double>::infinity();
      return result;
    }
    double numeric = (fp - fm) / (2.0 * step);
    double denom = std::max({1.0, std::abs(g(c)), std::abs(numeric)});
    double rel = std::abs(g(c) - numeric) / denom;
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_coordinate = c;
    }
  }
  return result;
}

GradCheckResult grad_check(const ScalarFn& f, const GradFn& analytic,
                           const Vector& point, double step) {
  std::vector<int> all(static_cast<size_t>(point.size()));
  std::iota(all.begin(), all.end(), 0);
  return grad_check(f, analytic, point, step, all);
}

}  // namespace mosaic
