#include "mosaic/moons.hpp"

#include <cmath>

namespace mosaic {

namespace {

Matrix random_init(Rng& rng, double scale) {
  Matrix m(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = scale * rng.normal();
  return m;
}

}  // namespace

MoonsModel::MoonsModel(int n_heads)
    : n_heads_(n_heads),
      phi_re_("w_phi.re", Matrix::Zero(3, 3)),
      phi_im_("w_phi.im", Matrix::Zero(3, 3)),
      psi_re_("w_psi.re", Matrix::Zero(3, 3)),
      psi_im_("w_psi.im", Matrix::Zero(3, 3)),
      z_re_("w_z.re", Matrix::Zero(3, 3)),
      z_im_("w_z.im", Matrix::Zero(3, 3)) {
  check_moons_head_count(n_heads);
}

MoonsModel::MoonsModel(int n_heads, std::uint64_t seed, double init_scale)
    : MoonsModel(n_heads) {
  Rng rng(derive_seed(seed, "moons.init"));
  phi_re_.value = random_init(rng, init_scale);
  phi_im_.value = random_init(rng, init_scale);
  psi_re_.value = random_init(rng, init_scale);
  psi_im_.value = random_init(rng, init_scale);
  z_re_.value = random_init(rng, init_scale);
  z_im_.value = random_init(rng, init_scale);
}

MoonsModel MoonsModel::identity(int n_heads) {
  MoonsModel m(n_heads);
  m.phi_re_.value = Matrix::Identity(3, 3);
  m.psi_re_.value = Matrix::Identity(3, 3);
  m.z_re_.value = Matrix::Identity(3, 3);
  return m;
}

std::vector<Parameter*> MoonsModel::parameters() {
  return {&phi_re_, &phi_im_, &psi_re_, &psi_im_, &z_re_, &z_im_};
}

std::vector<const Parameter*> MoonsModel::parameters() const {
  return {&phi_re_, &phi_im_, &psi_re_, &psi_im_, &z_re_, &z_im_};
}

void MoonsModel::refresh_views() const {
  view_phi_ = ComplexMatrix(phi_re_.value, phi_im_.value);
  view_psi_ = ComplexMatrix(psi_re_.value, psi_im_.value);
  view_z_ = ComplexMatrix(z_re_.value, z_im_.value);
}

CVar MoonsModel::forward(Tape& t, const ComplexDense& x) const {
  require(x.cols() == 3, "MoonsModel::forward: observations must be C^3");
  require(x.rows() >= 1, "MoonsModel::forward: empty sequence");

  CVar X{t.constant(x.real()), t.constant(x.imag())};
  CVar w_phi{t.param(phi_re_), t.param(phi_im_)};
  CVar w_psi{t.param(psi_re_), t.param(psi_im_)};
  CVar w_z{t.param(z_re_), t.param(z_im_)};

  MoonsFeatures f = moons_linear_extractors(X, w_phi, w_psi);

  int w = head_width();
  std::vector<Var> y_re_parts, y_im_parts;
  for (int h = 0; h < n_heads_; ++h) {
    Var k_re = slice_cols(f.keys.re, h * w, w);
    Var k_im = slice_cols(f.keys.im, h * w, w);
    // logits are Re of the Hermitian product of stacked head coordinates
    Var scores = gram_pair_scaled(k_re, k_im, kBeta);
    Var weights = masked_softmax_rows(scores, AttnMask::kStrictLower);
    y_re_parts.push_back(matmul(weights, slice_cols(f.values.re, h * w, w)));
    y_im_parts.push_back(matmul(weights, slice_cols(f.values.im, h * w, w)));
  }
  CVar y{n_heads_ == 1 ? y_re_parts[0] : concat_cols(y_re_parts),
         n_heads_ == 1 ? y_im_parts[0] : concat_cols(y_im_parts)};
  return cmatmul_rows(y, w_z);
}

// ---------------------------------------------------------------------------
// incremental evaluator
// ---------------------------------------------------------------------------

MoonsPredictor::MoonsPredictor(const MoonsModel& model, Eigen::Index capacity)
    : n_heads_(model.n_heads()),
      keys_(Eigen::MatrixXcd::Zero(capacity, 3)),
      values_(Eigen::MatrixXcd::Zero(capacity, 3)) {
  const ComplexMatrix& phi = model.w_phi();
  const ComplexMatrix& psi = model.w_psi();
  const ComplexMatrix& z = model.w_z();
  w_phi_.real() = phi.re;
  w_phi_.imag() = phi.im;
  w_psi_.real() = psi.re;
  w_psi_.imag() = psi.im;
  w_z_.real() = z.re;
  w_z_.imag() = z.im;
}

MoonsPredictor::Checkpoint MoonsPredictor::save() const {
  return Checkpoint{size_, has_pending_, pending_key_};
}

void MoonsPredictor::restore(const Checkpoint& c) {
  require(c.size <= size_, "MoonsPredictor::restore: checkpoint from the future");
  size_ = c.size;
  has_pending_ = c.has_pending;
  pending_key_ = c.pending_key;
}

void MoonsPredictor::reset() {
  size_ = 0;
  has_pending_ = false;
}

Eigen::Vector3cd MoonsPredictor::step(const Eigen::Vector3cd& x) {
  if (has_pending_) {
    require(size_ < keys_.rows(), "MoonsPredictor: capacity exceeded");
    keys_.row(size_) = pending_key_.transpose();
    values_.row(size_) = (w_psi_ * x).transpose();
    ++size_;
  }
  Eigen::Vector3cd k = w_phi_ * x;
  Eigen::Vector3cd y = Eigen::Vector3cd::Zero();
  if (size_ > 0) {
    int w = 3 / n_heads_;
    for (int h = 0; h < n_heads_; ++h) {
      auto mem = keys_.block(0, h * w, size_, w);
      Eigen::ArrayXd logits =
          MoonsModel::kBeta *
          (mem * k.segment(h * w, w).conjugate()).real().array();
      Eigen::ArrayXd e = (logits - logits.maxCoeff()).exp();
      Eigen::VectorXd weights = (e / e.sum()).matrix();
      y.segment(h * w, w) =
          values_.block(0, h * w, size_, w).transpose() *
          weights.cast<std::complex<double>>();
    }
  }
  pending_key_ = k;
  has_pending_ = true;
  return w_z_ * y;
}

}  // namespace mosaic
