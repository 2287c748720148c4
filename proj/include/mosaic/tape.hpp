#pragma once

#include "mosaic/common.hpp"

#include <functional>
#include <string>
#include <vector>

namespace mosaic {

// A named trainable weight block. Models own their Parameters; a Tape
// references them so backward() can deposit gradients in place.
struct Parameter {
  std::string name;
  Matrix value;
  mutable Matrix grad;  // scratch accumulator, not logical state

  Parameter(std::string n, Matrix v)
      : name(std::move(n)),
        value(std::move(v)),
        grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() const { grad.setZero(); }
  Eigen::Index size() const { return value.size(); }
};

class Tape;

// Handle to a tape slot. Cheap to copy, owns nothing; valid for the
// lifetime of its Tape.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;  // value of a 1x1 node

  bool defined() const { return tape_ != nullptr; }
  Tape& tape() const;
  int id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Ordered record of primitive operations. Adjoints are replayed in exact
// reverse recording order, which is a topological order by construction.
// One tape serves one forward/backward pass; create a fresh tape per step.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Matrix value);             // never receives gradient
  Var leaf(Matrix value, bool requires_grad = true);
  Var param(const Parameter& p);          // gradient lands in p.grad

  // output must be 1x1; gradients of untouched nodes stay zero.
  void backward(const Var& output);

  // Gradient of a node after backward(); zero matrix if the node was
  // never reached.
  Matrix grad_of(const Var& v) const;

  // --- recording interface used by the op free functions ---
  Var record(Matrix value, std::vector<int> parents, BackwardFn fn);
  bool requires_grad(int id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }
  const Matrix& value_at(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  const Matrix& grad_at(int id) const { return nodes_[static_cast<size_t>(id)].grad; }
  void accumulate(int id, const Eigen::Ref<const Matrix>& g);

 private:
  struct Node {
    Matrix value;
    Matrix grad;              // allocated on first accumulate
    BackwardFn backward;      // null for leaves and grad-free nodes
    const Parameter* bound = nullptr;
    bool requires_grad = false;
    bool touched = false;
  };

  std::vector<Node> nodes_;
  bool grad_enabled_;
  bool backward_done_ = false;
};

inline const Matrix& Var::value() const {
  require(tape_ != nullptr, "Var: use of an undefined handle");
  return tape_->value_at(id_);
}

inline Tape& Var::tape() const {
  require(tape_ != nullptr, "Var: use of an undefined handle");
  return *tape_;
}

// ---------------------------------------------------------------------------
// Primitive operations. Each records its own adjoint rule; shapes are
// validated up front and violations throw ContractViolation.
// ---------------------------------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);          // elementwise product
Var scale(Var a, double c);          // constant scale
Var scale_by(Var a, Var s);          // scale by a 1x1 node
Var matmul(Var a, Var b);            // A * B
Var matmul_nt(Var a, Var b);         // A * B^T
Var matmul_tn(Var a, Var b);         // A^T * B
Var transpose(Var a);

enum class AttnMask { kStrictLower, kLower, kFull };

// Row-wise softmax restricted to the mask; a row with no admissible entry
// becomes all zeros (empty-memory convention). Max-subtracted for stability.
Var masked_softmax_rows(Var logits, AttnMask mask);
Var softmax_rows(Var logits);

// beta * (A A^T + B B^T), fused so long sequences store one score matrix.
Var gram_pair_scaled(Var a, Var b, double beta);

Var row_normalize(Var a, double eps = 1e-12);   // rows to unit norm, guarded
Var leaky_average_rows(Var a, Var lambda);      // out_t = a_t + l * out_{t-1}
Var shift_rows_up(Var a);                       // out_t = a_{t+1}, last row 0
Var layer_norm_rows(Var a, Var gamma, Var beta, double eps = 1e-5);
Var gather_rows(Var table, std::vector<int> idx);
Var add_row_broadcast(Var a, Var row);          // row added to every row of a

Var gelu(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var sqrt_elem(Var a);
Var clip_upper(Var a, double cap);   // min(a, cap); zero gradient when capped

Var sum_all(Var a);                  // 1x1
Var mean_all(Var a);                 // 1x1
Var slice_rows(Var a, int first, int count);
Var slice_cols(Var a, int first, int count);
Var concat_cols(const std::vector<Var>& parts);

// Inverted dropout; rate 0 is the identity. Mask drawn from rng.
Var dropout(Var a, double rate, Rng& rng);

// Mean negative log softmax probability of targets over rows
// [row_first, row_first + row_count); row_count -1 means all rows.
Var softmax_cross_entropy(Var logits, const std::vector<int>& targets,
                          int row_first = 0, int row_count = -1);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(double c, Var a) { return scale(a, c); }

}  // namespace mosaic
