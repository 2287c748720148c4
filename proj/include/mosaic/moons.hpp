#pragma once

#include "mosaic/datasets.hpp"
#include "mosaic/memory_units.hpp"
#include "mosaic/tape.hpp"

namespace mosaic {

// Single-layer network for the three-moons task: linear complex key/value
// extraction, per-head kernel retrieval over the strict past with fixed
// bandwidth, and a complex combining matrix. 3x3x2x3 = 54 trainable reals
// for either head count.
class MoonsModel {
 public:
  static constexpr double kBeta = 50.0;  // fixed, not trainable

  MoonsModel(int n_heads, std::uint64_t seed, double init_scale = 0.25);

  // W_phi = W_psi = W_z = I: the analytic disentangled predictor.
  static MoonsModel identity(int n_heads);

  int n_heads() const { return n_heads_; }
  int head_width() const { return 3 / n_heads_; }

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  // Predictions z_1..z_D (row T estimates x_{T+1}); z_1 = 0 from the empty
  // memories.
  CVar forward(Tape& t, const ComplexDense& x) const;

  const ComplexMatrix& w_phi() const { refresh_views(); return view_phi_; }
  const ComplexMatrix& w_psi() const { refresh_views(); return view_psi_; }
  const ComplexMatrix& w_z() const { refresh_views(); return view_z_; }

 private:
  explicit MoonsModel(int n_heads);
  void refresh_views() const;

  int n_heads_;
  Parameter phi_re_, phi_im_, psi_re_, psi_im_, z_re_, z_im_;
  // value-only copies for tape-free consumers; refreshed on access
  mutable ComplexMatrix view_phi_, view_psi_, view_z_;
};

// Incremental tape-free evaluator for rollouts: feed an observation (true
// or fed-back prediction), get the estimate of the next one. Appended
// pairs can be rolled back so one pass over a sequence serves every
// context length.
class MoonsPredictor {
 public:
  MoonsPredictor(const MoonsModel& model, Eigen::Index capacity);

  // Feeds x_T; returns z_T. Completes the pending pair first, exactly like
  // the unrolled shifted-mask attention.
  Eigen::Vector3cd step(const Eigen::Vector3cd& x);

  struct Checkpoint {
    Eigen::Index size;
    bool has_pending;
    Eigen::Vector3cd pending_key;
  };
  Checkpoint save() const;
  void restore(const Checkpoint& c);
  void reset();
  Eigen::Index memory_size() const { return size_; }

 private:
  Eigen::Matrix3cd w_phi_, w_psi_, w_z_;
  int n_heads_;
  Eigen::MatrixXcd keys_, values_;  // capacity x 3, stacked heads
  Eigen::Vector3cd pending_key_;
  bool has_pending_ = false;
  Eigen::Index size_ = 0;
};

}  // namespace mosaic
