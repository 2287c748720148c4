#include "mosaic/complex_ops.hpp"

namespace mosaic {

ComplexMatrix::ComplexMatrix(Matrix r, Matrix i)
    : re(std::move(r)), im(std::move(i)) {
  require(re.rows() == im.rows() && re.cols() == im.cols(),
          "ComplexMatrix: re and im must have identical shape");
}

ComplexMatrix ComplexMatrix::zero(Eigen::Index rows, Eigen::Index cols) {
  return ComplexMatrix(Matrix::Zero(rows, cols), Matrix::Zero(rows, cols));
}

ComplexMatrix from_dense(const ComplexDense& z) {
  return ComplexMatrix(z.real(), z.imag());
}

ComplexDense to_dense(const ComplexMatrix& z) {
  ComplexDense out(z.rows(), z.cols());
  out.real() = z.re;
  out.imag() = z.im;
  return out;
}

CVar make_cvar(Tape& t, const ComplexMatrix& z, bool requires_grad) {
  return CVar{t.leaf(z.re, requires_grad), t.leaf(z.im, requires_grad)};
}

namespace {

void check_cshape(const CVar& a, const char* op) {
  require(a.re.rows() == a.im.rows() && a.re.cols() == a.im.cols(),
          std::string(op) + ": re/im shape mismatch");
}

}  // namespace

CVar cadd(CVar a, CVar b) {
  check_cshape(a, "cadd");
  check_cshape(b, "cadd");
  return CVar{add(a.re, b.re), add(a.im, b.im)};
}

CVar csub(CVar a, CVar b) { return CVar{sub(a.re, b.re), sub(a.im, b.im)}; }

CVar cmul(CVar a, CVar b) {
  check_cshape(a, "cmul");
  check_cshape(b, "cmul");
  return CVar{sub(hadamard(a.re, b.re), hadamard(a.im, b.im)),
              add(hadamard(a.re, b.im), hadamard(a.im, b.re))};
}

CVar hermitian_dot(CVar a, CVar b) {
  check_cshape(a, "hermitian_dot");
  check_cshape(b, "hermitian_dot");
  require(a.re.rows() == b.re.rows() && a.re.cols() == b.re.cols(),
          "hermitian_dot: shape mismatch");
  // conj(a) . b = (ar.br + ai.bi) + i (ar.bi - ai.br)
  Var re = add(sum_all(hadamard(a.re, b.re)), sum_all(hadamard(a.im, b.im)));
  Var im = sub(sum_all(hadamard(a.re, b.im)), sum_all(hadamard(a.im, b.re)));
  return CVar{re, im};
}

Var cabs(CVar a) {
  check_cshape(a, "cabs");
  return sqrt_elem(add(hadamard(a.re, a.re), hadamard(a.im, a.im)));
}

CVar cmatmul_rows(CVar x, CVar w) {
  check_cshape(x, "cmatmul_rows");
  check_cshape(w, "cmatmul_rows");
  require(x.re.cols() == w.re.cols(), "cmatmul_rows: dimension mismatch");
  // (W x)_re = Wre xre - Wim xim; row layout uses X * W^T.
  Var re = sub(matmul_nt(x.re, w.re), matmul_nt(x.im, w.im));
  Var im = add(matmul_nt(x.re, w.im), matmul_nt(x.im, w.re));
  return CVar{re, im};
}

ComplexMatrix cadd(const ComplexMatrix& a, const ComplexMatrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "cadd: shape mismatch");
  return ComplexMatrix(a.re + b.re, a.im + b.im);
}

ComplexMatrix cmul(const ComplexMatrix& a, const ComplexMatrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "cmul: shape mismatch");
  return ComplexMatrix(a.re.cwiseProduct(b.re) - a.im.cwiseProduct(b.im),
                       a.re.cwiseProduct(b.im) + a.im.cwiseProduct(b.re));
}

std::complex<double> hermitian_dot(const ComplexMatrix& a,
                                   const ComplexMatrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          "hermitian_dot: shape mismatch");
  double re = a.re.cwiseProduct(b.re).sum() + a.im.cwiseProduct(b.im).sum();
  double im = a.re.cwiseProduct(b.im).sum() - a.im.cwiseProduct(b.re).sum();
  return {re, im};
}

Matrix cabs(const ComplexMatrix& a) {
  return (a.re.array().square() + a.im.array().square()).sqrt().matrix();
}

}  // namespace mosaic
