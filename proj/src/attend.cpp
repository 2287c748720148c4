#include "mosaic/attend.hpp"

#include <cmath>

namespace mosaic {

namespace {

void check_attend_shapes(Eigen::Index qd, const Matrix& keys,
                         const Matrix& values, double beta) {
  require(keys.rows() == values.rows(),
          "attend: keys/values count mismatch");
  require(keys.rows() == 0 || keys.cols() == qd,
          "attend: query/key dimension mismatch");
  require(beta >= 0.0, "attend: beta must be nonnegative");
}

}  // namespace

RowVector attend_weights(const RowVector& query, const Matrix& keys,
                         double beta) {
  require(keys.rows() >= 1, "attend_weights: empty memory");
  require(keys.cols() == query.cols(), "attend: query/key dimension mismatch");
  Eigen::ArrayXd logits = beta * (keys * query.transpose()).array();
  Eigen::ArrayXd e = (logits - logits.maxCoeff()).exp();
  return (e / e.sum()).matrix().transpose();
}

RowVector attend(const RowVector& query, const Matrix& keys,
                 const Matrix& values, double beta) {
  check_attend_shapes(query.cols(), keys, values, beta);
  if (keys.rows() == 0) return RowVector::Zero(values.cols());
  return attend_weights(query, keys, beta) * values;
}

RowVector attend_distance_form(const RowVector& query, const Matrix& keys,
                               const Matrix& values, double beta) {
  check_attend_shapes(query.cols(), keys, values, beta);
  require(keys.rows() >= 1, "attend_distance_form: empty memory");
  Eigen::ArrayXd d2 =
      (keys.rowwise() - query).rowwise().squaredNorm().array();
  Eigen::ArrayXd logits = -beta * d2;
  Eigen::ArrayXd e = (logits - logits.maxCoeff()).exp();
  return ((e / e.sum()).matrix().transpose() * values);
}

Var attend(Var query, Var keys, Var values, Var beta) {
  require(query.rows() == 1, "attend: query must be a single row");
  require(keys.value().rows() == values.value().rows(),
          "attend: keys/values count mismatch");
  Tape& t = query.tape();
  if (keys.rows() == 0)
    return t.constant(Matrix::Zero(1, values.cols()));
  require(keys.cols() == query.cols(), "attend: query/key dimension mismatch");
  Var logits = scale_by(matmul_nt(query, keys), beta);  // 1 x n
  Var w = softmax_rows(logits);
  return matmul(w, values);
}

Var attend_distance_form(Var query, Var keys, Var values, Var beta) {
  require(query.rows() == 1, "attend_distance_form: query must be a single row");
  require(keys.rows() >= 1, "attend_distance_form: empty memory");
  require(keys.cols() == query.cols(),
          "attend_distance_form: query/key dimension mismatch");
  require(keys.value().rows() == values.value().rows(),
          "attend_distance_form: keys/values count mismatch");
  Tape& t = query.tape();
  Eigen::Index n = keys.rows();
  // -|q - k_i|^2 = 2 q.k_i - q.q - k_i.k_i
  Var qk = matmul_nt(query, keys);                        // 1 x n
  Var qq = matmul_nt(query, query);                       // 1 x 1
  Var kk = transpose(matmul_nt(hadamard(keys, keys),
                               t.constant(Matrix::Ones(1, keys.cols()))));
  Var qq_row = scale_by(t.constant(Matrix::Ones(1, n)), qq);
  Var neg_d2 = sub(scale(qk, 2.0), add(qq_row, kk));
  Var w = softmax_rows(scale_by(neg_d2, beta));
  return matmul(w, values);
}

}  // namespace mosaic
