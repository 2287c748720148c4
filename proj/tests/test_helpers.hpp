#pragma once

#include "mosaic/common.hpp"
#include "mosaic/tape.hpp"

#include <functional>

namespace mosaic::testing {

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols,
                            double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

inline RowVector random_unit_row(Rng& rng, Eigen::Index d) {
  RowVector v = random_matrix(rng, 1, d).row(0);
  while (v.norm() < 1e-8) v = random_matrix(rng, 1, d).row(0);
  return v / v.norm();
}

inline Matrix random_unit_rows(Rng& rng, Eigen::Index n, Eigen::Index d) {
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) m.row(i) = random_unit_row(rng, d);
  return m;
}

// Fixed pseudo-random projection of a node to a scalar; `seed`, not the
// rng state, determines the projection so repeated evaluations of one
// probe function see the same scalar map.
inline Var project(Tape& t, Var y, std::uint64_t seed) {
  Rng r(seed);
  Matrix c = random_matrix(r, y.rows(), y.cols());
  return sum_all(hadamard(y, t.constant(c)));
}

// Central-difference check of a scalar built from one tape input. The
// expression is evaluated from scratch at each probe point.
inline double fd_max_rel_error(
    const std::function<Var(Tape&, Var)>& scalar_of,
    const Matrix& x0, double step = 1e-5) {
  auto eval = [&](const Matrix& x) {
    Tape t(false);
    Var in = t.leaf(x, false);
    return scalar_of(t, in).scalar();
  };
  Tape t;
  Var in = t.leaf(x0, true);
  Var out = scalar_of(t, in);
  t.backward(out);
  Matrix g = t.grad_of(in);

  double worst = 0.0;
  Matrix x = x0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      double keep = x(i, j);
      x(i, j) = keep + step;
      double fp = eval(x);
      x(i, j) = keep - step;
      double fm = eval(x);
      x(i, j) = keep;
      double numeric = (fp - fm) / (2 * step);
      double denom = std::max({1.0, std::abs(numeric), std::abs(g(i, j))});
      worst = std::max(worst, std::abs(numeric - g(i, j)) / denom);
    }
  }
  return worst;
}

}  // namespace mosaic::testing
