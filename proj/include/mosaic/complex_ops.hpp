#pragma once

#include "mosaic/tape.hpp"

#include <complex>

namespace mosaic {

// Complex values are carried as (re, im) pairs of equal-shape real blocks so
// the real-valued tape differentiates through them directly.
struct ComplexMatrix {
  Matrix re, im;

  ComplexMatrix() = default;
  ComplexMatrix(Matrix r, Matrix i);

  Eigen::Index rows() const { return re.rows(); }
  Eigen::Index cols() const { return re.cols(); }

  static ComplexMatrix zero(Eigen::Index rows, Eigen::Index cols);
};

using ComplexDense = Eigen::MatrixXcd;

ComplexMatrix from_dense(const ComplexDense& z);
ComplexDense to_dense(const ComplexMatrix& z);

// Tape-side pair of handles.
struct CVar {
  Var re, im;
};

CVar make_cvar(Tape& t, const ComplexMatrix& z, bool requires_grad = false);

CVar cadd(CVar a, CVar b);
CVar csub(CVar a, CVar b);
CVar cmul(CVar a, CVar b);  // elementwise complex product

// Hermitian inner product sum_i conj(a_i) * b_i of two equal-shape blocks,
// returned as a complex 1x1 pair.
CVar hermitian_dot(CVar a, CVar b);

// Elementwise modulus |z|; real-valued.
Var cabs(CVar a);

// Rows of x (D x n complex) mapped through W (m x n complex): row t of the
// result is (W * x_t)^T.
CVar cmatmul_rows(CVar x, CVar w);

// Plain (tape-free) counterparts used by datasets and evaluation.
ComplexMatrix cadd(const ComplexMatrix& a, const ComplexMatrix& b);
ComplexMatrix cmul(const ComplexMatrix& a, const ComplexMatrix& b);
std::complex<double> hermitian_dot(const ComplexMatrix& a,
                                   const ComplexMatrix& b);
Matrix cabs(const ComplexMatrix& a);

}  // namespace mosaic
