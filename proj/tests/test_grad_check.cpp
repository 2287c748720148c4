#include <doctest.h>

#include "mosaic/grad_check.hpp"

#include <cmath>

using namespace mosaic;

TEST_CASE("grad_check: quadratic and linear forms are exact to roundoff") {
  Matrix a(3, 3);
  a << 2, 1, 0, 1, 3, 1, 0, 1, 4;
  ScalarFn quad = [&](const Vector& x) { return 0.5 * x.dot(a * x); };
  GradFn quad_grad = [&](const Vector& x) { return Vector(a * x); };
  Vector p(3);
  p << 0.3, -1.2, 0.7;
  auto r = grad_check(quad, quad_grad, p, 1e-5);
  CHECK(r.all_finite);
  CHECK(r.max_rel_error < 1e-10);

  Vector c(3);
  c << 1.5, -2.0, 0.25;
  ScalarFn lin = [&](const Vector& x) { return c.dot(x); };
  GradFn lin_grad = [&](const Vector&) { return c; };
  auto r2 = grad_check(lin, lin_grad, p, 1e-5);
  CHECK(r2.max_rel_error < 1e-10);
}

TEST_CASE("grad_check: detects a wrong gradient") {
  ScalarFn f = [](const Vector& x) { return x(0) * x(0); };
  GradFn wrong = [](const Vector& x) {
    Vector g(1);
    g(0) = 3.0 * x(0);  // should be 2 x
    return g;
  };
  Vector p(1);
  p << 1.0;
  CHECK(grad_check(f, wrong, p, 1e-5).max_rel_error > 0.3);
}

TEST_CASE("grad_check: non-finite values are a reported failure, not NaN") {
  ScalarFn f = [](const Vector& x) {
    return x(0) > 0.5 ? std::numeric_limits<double>::quiet_NaN() : x(0);
  };
  GradFn g = [](const Vector&) {
    Vector v(1);
    v(0) = 1.0;
    return v;
  };
  Vector p(1);
  p << 0.5;
  auto r = grad_check(f, g, p, 1e-3);
  CHECK_FALSE(r.all_finite);
  CHECK_FALSE(r.ok(1e-4));
}

TEST_CASE("grad_check: coordinate subset and contract checks") {
  ScalarFn f = [](const Vector& x) { return x.squaredNorm(); };
  GradFn g = [](const Vector& x) { return Vector(2.0 * x); };
  Vector p = Vector::LinSpaced(10, -1.0, 1.0);
  auto r = grad_check(f, g, p, 1e-5, {0, 4, 9});
  CHECK(r.max_rel_error < 1e-9);
  CHECK_THROWS_AS(grad_check(f, g, p, 0.0), ContractViolation);
  CHECK_THROWS_AS(grad_check(f, g, p, 1e-5, {17}), ContractViolation);
}
