#include "mosaic/memory_units.hpp"

#include <cmath>

namespace mosaic {

void ContextualUnitParams::validate() const {
  require(lambda_phi >= 0.0 && lambda_phi < 1.0,
          "ContextualUnitParams: lambda_phi must lie in [0, 1)");
  require(lambda_psi >= 0.0,
          "ContextualUnitParams: lambda_psi must be nonnegative");
  require(beta >= 0.0, "ContextualUnitParams: beta must be nonnegative");
  require(w_phi.cols() == w_psi.cols(),
          "ContextualUnitParams: projections disagree on input dim");
}

void PersistentUnitParams::validate() const {
  require(stored_keys.rows() >= 1,
          "PersistentUnitParams: at least one stored pair required");
  require(stored_keys.rows() == stored_values.rows(),
          "PersistentUnitParams: stored keys/values row count mismatch");
  require(stored_keys.cols() == w_phi.rows(),
          "PersistentUnitParams: stored key dim does not match extractor");
  require(beta >= 0.0, "PersistentUnitParams: beta must be nonnegative");
}

MemoryState::MemoryState(Eigen::Index capacity, Eigen::Index d_k,
                         Eigen::Index d_v)
    : keys(Matrix::Zero(capacity, d_k)), values(Matrix::Zero(capacity, d_v)) {}

void MemoryState::append(const RowVector& key, const RowVector& value) {
  require(size_ < keys.rows(), "MemoryState: capacity exceeded");
  keys.row(size_) = key;
  values.row(size_) = value;
  ++size_;
}

namespace {

RowVector norm_row(const RowVector& v) {
  return v / std::max(v.norm(), kNormEps);
}

}  // namespace

Matrix extract_keys(const Matrix& x, const ContextualUnitParams& p) {
  require(x.rows() >= 1, "extract_keys: need at least one input");
  p.validate();
  Matrix proj = x * p.w_phi.transpose();
  Matrix keys(proj.rows(), proj.cols());
  RowVector kbar = RowVector::Zero(proj.cols());
  for (Eigen::Index t = 0; t < proj.rows(); ++t) {
    kbar = proj.row(t) + p.lambda_phi * kbar;
    keys.row(t) = norm_row(kbar);
  }
  return keys;
}

Matrix extract_values(const Matrix& x, const ContextualUnitParams& p) {
  require(x.rows() >= 2, "extract_values: need at least two inputs");
  p.validate();
  Matrix proj = x * p.w_psi.transpose();
  Matrix values(proj.rows() - 1, proj.cols());
  for (Eigen::Index t = 0; t + 1 < proj.rows(); ++t)
    values.row(t) = norm_row(proj.row(t) + p.lambda_psi * proj.row(t + 1));
  return values;
}

Matrix contextual_forward(const Matrix& x, const ContextualUnitParams& p) {
  ContextualUnitStream stream(p, x.rows());
  Matrix y(x.rows(), p.w_psi.rows());
  for (Eigen::Index t = 0; t < x.rows(); ++t) y.row(t) = stream.step(x.row(t));
  return y;
}

Matrix persistent_forward(const Matrix& x, const PersistentUnitParams& p) {
  p.validate();
  ContextualUnitParams extractor;
  extractor.w_phi = p.w_phi;
  extractor.w_psi = p.w_phi;  // unused
  extractor.lambda_phi = p.lambda_phi;
  extractor.beta = p.beta;
  Matrix queries = extract_keys(x, extractor);
  Matrix y(x.rows(), p.stored_values.cols());
  for (Eigen::Index t = 0; t < x.rows(); ++t)
    y.row(t) = attend(queries.row(t), p.stored_keys, p.stored_values, p.beta);
  return y;
}

ContextualUnitStream::ContextualUnitStream(const ContextualUnitParams& p,
                                           Eigen::Index capacity)
    : params_(p),
      memory_(capacity, p.w_phi.rows(), p.w_psi.rows()),
      kbar_prev_(RowVector::Zero(p.w_phi.rows())),
      pending_key_(RowVector::Zero(p.w_phi.rows())),
      pending_vtilde_(RowVector::Zero(p.w_psi.rows())) {
  params_.validate();
}

void ContextualUnitStream::reset() {
  kbar_prev_.setZero();
  has_pending_ = false;
  memory_ = MemoryState(memory_.capacity(), params_.w_phi.rows(),
                        params_.w_psi.rows());
}

RowVector ContextualUnitStream::step(const RowVector& x) {
  RowVector vtilde = x * params_.w_psi.transpose();
  if (has_pending_) {
    // x is x_T: the pair for T-1 is now complete
    RowVector value = norm_row(pending_vtilde_ + params_.lambda_psi * vtilde);
    memory_.append(pending_key_, value);
  }
  kbar_prev_ = x * params_.w_phi.transpose() + params_.lambda_phi * kbar_prev_;
  RowVector key = norm_row(kbar_prev_);
  RowVector y = attend(key, memory_.key_rows(), memory_.value_rows(),
                       params_.beta);
  pending_key_ = key;
  pending_vtilde_ = vtilde;
  has_pending_ = true;
  return y;
}

// ---------------------------------------------------------------------------
// tape composites
// ---------------------------------------------------------------------------

Var contextual_keys_op(Var x_proj, Var lambda_phi) {
  return row_normalize(leaky_average_rows(x_proj, lambda_phi), kNormEps);
}

Var contextual_values_op(Var x_proj, Var lambda_psi) {
  Var peeked = add(x_proj, scale_by(shift_rows_up(x_proj), lambda_psi));
  return row_normalize(peeked, kNormEps);
}

Var contextual_attention_op(Var keys, Var values, Var beta,
                            Matrix* capture_weights) {
  Var scores = scale_by(matmul_nt(keys, keys), beta);
  Var w = masked_softmax_rows(scores, AttnMask::kStrictLower);
  if (capture_weights) *capture_weights = w.value();
  return matmul(w, values);
}

Var persistent_attention_op(Var queries, Var stored_keys, Var stored_values,
                            Var beta, Matrix* capture_weights) {
  require(stored_keys.rows() >= 1,
          "persistent_attention_op: empty stored memory");
  Var scores = scale_by(matmul_nt(queries, stored_keys), beta);
  Var w = softmax_rows(scores);
  if (capture_weights) *capture_weights = w.value();
  return matmul(w, stored_values);
}

// ---------------------------------------------------------------------------
// moons extractors
// ---------------------------------------------------------------------------

void check_moons_head_count(int n_heads) {
  require(n_heads == 1 || n_heads == 3,
          "moons: head count must divide the 3 complex coordinates");
}

MoonsFeatures moons_linear_extractors(CVar x, CVar w_phi, CVar w_psi) {
  require(x.re.cols() == 3, "moons_linear_extractors: inputs must be C^3");
  CVar keys = cmatmul_rows(x, w_phi);
  CVar x_next{shift_rows_up(x.re), shift_rows_up(x.im)};
  CVar values = cmatmul_rows(x_next, w_psi);
  return MoonsFeatures{keys, values};
}

}  // namespace mosaic
