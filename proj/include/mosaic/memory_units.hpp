#pragma once

#include "mosaic/attend.hpp"
#include "mosaic/complex_ops.hpp"
#include "mosaic/tape.hpp"

namespace mosaic {

inline constexpr double kNormEps = 1e-12;

// Contextual memory unit weights. Keys are a normalized leaky average of
// projected inputs; values peek one step ahead:
//   kbar_T = W_phi x_T + lambda_phi kbar_{T-1},  k_T = Norm(kbar_T)
//   vbar_T = W_psi x_T + lambda_psi W_psi x_{T+1},  v_T = Norm(vbar_T)
// Projections are stored as (output dim x input dim); rows of a sequence
// matrix map through W^T.
struct ContextualUnitParams {
  Matrix w_phi;             // d_k x d_in
  Matrix w_psi;             // d_v x d_in
  double lambda_phi = 0.0;  // in [0, 1)
  double lambda_psi = 0.0;  // >= 0
  double beta = 1.0;        // >= 0; the kernel is a flat average at 0

  void validate() const;
};

// Persistent memory unit: a fixed array of stored pairs plus a key
// extractor. Stored contents never change during a forward pass.
struct PersistentUnitParams {
  Matrix w_phi;          // d_k x d_in
  Matrix stored_keys;    // N_m x d_k
  Matrix stored_values;  // N_m x d_v
  double lambda_phi = 0.0;  // key extractor leak, off by default
  double beta = 1.0;

  void validate() const;
};

// Pairs accumulated while scanning one sequence. The pair (k_T, v_T) is
// complete only once x_{T+1} is revealed, so after processing x_1..x_T the
// store holds exactly max(0, T-1) pairs.
struct MemoryState {
  Matrix keys;    // capacity x d_k, first `size` rows valid
  Matrix values;  // capacity x d_v

  MemoryState(Eigen::Index capacity, Eigen::Index d_k, Eigen::Index d_v);
  void append(const RowVector& key, const RowVector& value);
  Eigen::Index size() const { return size_; }
  Eigen::Index capacity() const { return keys.rows(); }

  Eigen::Block<const Matrix> key_rows() const {
    return keys.topRows(size_);
  }
  Eigen::Block<const Matrix> value_rows() const {
    return values.topRows(size_);
  }

 private:
  Eigen::Index size_ = 0;
};

// --- whole-sequence unit semantics (plain, tape-free) ---

// Unit-norm keys k_1..k_D for inputs given as rows of x (D x d_in).
Matrix extract_keys(const Matrix& x, const ContextualUnitParams& p);

// Values v_1..v_{D-1}; none is produced for T = D since x_{D+1} is unknown.
Matrix extract_values(const Matrix& x, const ContextualUnitParams& p);

// y_T = attend(k_T, {k_1..k_{T-1}}, {v_1..v_{T-1}}, beta); y_1 = 0.
Matrix contextual_forward(const Matrix& x, const ContextualUnitParams& p);

// y_T = attend(k_T, stored_keys, stored_values, beta).
Matrix persistent_forward(const Matrix& x, const PersistentUnitParams& p);

// Step-wise evaluator maintaining the MemoryState storage discipline; the
// reference implementation the unrolled forms are checked against, and the
// engine behind fast autoregressive rollouts.
class ContextualUnitStream {
 public:
  ContextualUnitStream(const ContextualUnitParams& p, Eigen::Index capacity);

  // Feeds x_T, returns y_T. Completes the pending pair (k_{T-1}, v_{T-1})
  // first, so the memory never sees a value before its peek is revealed.
  RowVector step(const RowVector& x);

  const MemoryState& memory() const { return memory_; }
  void reset();

 private:
  ContextualUnitParams params_;
  MemoryState memory_;
  RowVector kbar_prev_;       // un-normalized leaky average
  RowVector pending_key_;     // k_{T-1}, waiting for x_T
  RowVector pending_vtilde_;  // W_psi x_{T-1}
  bool has_pending_ = false;
};

// --- differentiable composites used by the sequence models ---

// Normalized leaky-average keys; lambda is a 1x1 node.
Var contextual_keys_op(Var x_proj, Var lambda_phi);

// Normalized peeked values from projected inputs; the last row carries no
// peek and is only safe under a strict mask.
Var contextual_values_op(Var x_proj, Var lambda_psi);

// Full contextual unit on projected inputs: shifted-mask attention of the
// keys over the values. beta is a 1x1 node.
Var contextual_attention_op(Var keys, Var values, Var beta,
                            Matrix* capture_weights = nullptr);

// Persistent retrieval for a whole sequence of queries.
Var persistent_attention_op(Var queries, Var stored_keys, Var stored_values,
                            Var beta, Matrix* capture_weights = nullptr);

// --- three-moons extractors (no normalization, no leak) ---

struct MoonsFeatures {
  CVar keys;    // D x 3 complex, k_T = W_phi x_T
  CVar values;  // D x 3 complex, v_T = W_psi x_{T+1}; last row zero/unused
};

MoonsFeatures moons_linear_extractors(CVar x, CVar w_phi, CVar w_psi);

// Head h of n_heads owns complex coordinates [h*3/n, (h+1)*3/n).
void check_moons_head_count(int n_heads);

}  // namespace mosaic
