#include "mosaic/tape.hpp"

#include <cmath>
#include <utility>

namespace mosaic {

double Var::scalar() const {
  const Matrix& v = value();
  require(v.rows() == 1 && v.cols() == 1, "Var::scalar: node is not 1x1");
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  return record(std::move(value), {}, nullptr);
}

Var Tape::leaf(Matrix value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad && grad_enabled_;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::param(const Parameter& p) {
  Node n;
  n.value = p.value;
  n.requires_grad = grad_enabled_;
  n.bound = &p;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Matrix value, std::vector<int> parents, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (grad_enabled_) {
    for (int p : parents) {
      require(p >= 0 && p < static_cast<int>(nodes_.size()),
              "Tape::record: parent out of range");
      n.requires_grad |= nodes_[static_cast<size_t>(p)].requires_grad;
    }
    if (n.requires_grad) n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(int id, const Eigen::Ref<const Matrix>& g) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (!n.requires_grad) return;
  require(g.rows() == n.value.rows() && g.cols() == n.value.cols(),
          "Tape::accumulate: gradient shape mismatch");
  if (!n.touched) {
    n.grad = g;
    n.touched = true;
  } else {
    n.grad += g;
  }
}

void Tape::backward(const Var& output) {
  require(output.defined() && &output.tape() == this,
          "Tape::backward: output is not on this tape");
  require(output.rows() == 1 && output.cols() == 1,
          "Tape::backward: output must be a scalar");
  require(grad_enabled_, "Tape::backward: tape was built with grad disabled");
  require(!backward_done_, "Tape::backward: tape already replayed");
  backward_done_ = true;

  accumulate(output.id(), Matrix::Ones(1, 1));
  for (int i = output.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.touched) continue;
    if (n.backward) n.backward(*this, i);
    if (n.bound) n.bound->grad += n.grad;
  }
}

Matrix Tape::grad_of(const Var& v) const {
  require(v.defined() && &v.tape() == this, "Tape::grad_of: foreign handle");
  const Node& n = nodes_[static_cast<size_t>(v.id())];
  if (!n.touched) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

// ---------------------------------------------------------------------------
// helpers
// ---------------------------------------------------------------------------

namespace {

Tape& same_tape(const Var& a, const Var& b, const char* op) {
  Tape& t = a.tape();
  require(&t == &b.tape(), std::string(op) + ": operands on different tapes");
  return t;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          std::string(op) + ": shape mismatch");
}

}  // namespace

// ---------------------------------------------------------------------------
// arithmetic
// ---------------------------------------------------------------------------

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b, "add");
  check_same_shape(a, b, "add");
  int ia = a.id(), ib = b.id();
  return t.record(a.value() + b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad_at(self);
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b, "sub");
  check_same_shape(a, b, "sub");
  int ia = a.id(), ib = b.id();
  return t.record(a.value() - b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad_at(self);
    t.accumulate(ia, g);
    t.accumulate(ib, -g);
  });
}

Var hadamard(Var a, Var b) {
  Tape& t = same_tape(a, b, "hadamard");
  check_same_shape(a, b, "hadamard");
  int ia = a.id(), ib = b.id();
  return t.record(a.value().cwiseProduct(b.value()), {ia, ib},
                  [ia, ib](Tape& t, int self) {
                    const Matrix& g = t.grad_at(self);
                    t.accumulate(ia, g.cwiseProduct(t.value_at(ib)));
                    t.accumulate(ib, g.cwiseProduct(t.value_at(ia)));
                  });
}

Var scale(Var a, double c) {
  Tape& t = a.tape();
  int ia = a.id();
  return t.record(c * a.value(), {ia}, [ia, c](Tape& t, int self) {
    t.accumulate(ia, c * t.grad_at(self));
  });
}

Var scale_by(Var a, Var s) {
  Tape& t = same_tape(a, s, "scale_by");
  require(s.rows() == 1 && s.cols() == 1, "scale_by: scale must be 1x1");
  int ia = a.id(), is = s.id();
  return t.record(s.scalar() * a.value(), {ia, is}, [ia, is](Tape& t, int self) {
    const Matrix& g = t.grad_at(self);
    t.accumulate(ia, t.value_at(is)(0, 0) * g);
    Matrix ds(1, 1);
    ds(0, 0) = g.cwiseProduct(t.value_at(ia)).sum();
    t.accumulate(is, ds);
  });
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul");
  require(a.cols() == b.rows(), "matmul: inner dimension mismatch");
  int ia = a.id(), ib = b.id();
  return t.record(a.value() * b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad_at(self);
    t.accumulate(ia, g * t.value_at(ib).transpose());
    t.accumulate(ib, t.value_at(ia).transpose() * g);
  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul_nt");
  require(a.cols() == b.cols(), "matmul_nt: inner dimension mismatch");
  int ia = a.id(), ib = b.id();
  return t.record(a.value() * b.value().transpose(), {ia, ib},
                  [ia, ib](Tape& t, int self) {
                    const Matrix& g = t.grad_at(self);
                    t.accumulate(ia, g * t.value_at(ib));
                    t.accumulate(ib, g.transpose() * t.value_at(ia));
                  });
}

Var matmul_tn(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul_tn");
  require(a.rows() == b.rows(), "matmul_tn: inner dimension mismatch");
  int ia = a.id(), ib = b.id();
  return t.record(a.value().transpose() * b.value(), {ia, ib},
                  [ia, ib](Tape& t, int self) {
                    const Matrix& g = t.grad_at(self);
                    t.accumulate(ia, t.value_at(ib) * g.transpose());
                    t.accumulate(ib, t.value_at(ia) * g);
                  });
}

Var transpose(Var a) {
  Tape& t = a.tape();
  int ia = a.id();
  return t.record(a.value().transpose(), {ia}, [ia](Tape& t, int self) {
    t.accumulate(ia, t.grad_at(self).transpose());
  });
}

// ---------------------------------------------------------------------------
// softmax family
// ---------------------------------------------------------------------------

namespace {

// first admissible column index is 0; last is row-dependent for the
// triangular masks.
inline Eigen::Index mask_limit(AttnMask mask, Eigen::Index row, Eigen::Index cols) {
  switch (mask) {
    case AttnMask::kStrictLower: return std::min<Eigen::Index>(row, cols);
    case AttnMask::kLower: return std::min<Eigen::Index>(row + 1, cols);
    case AttnMask::kFull: return cols;
  }
  return cols;
}

}  // namespace

Var masked_softmax_rows(Var logits, AttnMask mask) {
  Tape& t = logits.tape();
  const Matrix& x = logits.value();
  Matrix w = Matrix::Zero(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Index n = mask_limit(mask, i, x.cols());
    if (n == 0) continue;
    double m = x.row(i).head(n).maxCoeff();
    Eigen::ArrayXd e = (x.row(i).head(n).array() - m).exp();
    w.row(i).head(n) = (e / e.sum()).matrix();
  }
  int ix = logits.id();
  return t.record(std::move(w), {ix}, [ix, mask](Tape& t, int self) {
    const Matrix& g = t.grad_at(self);
    const Matrix& w = t.value_at(self);
    Matrix dx = Matrix::Zero(g.rows(), g.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      Eigen::Index n = mask_limit(mask, i, g.cols());
      if (n == 0) continue;
      double s = g.row(i).head(n).dot(w.row(i).head(n));
      dx.row(i).head(n) =
          w.row(i).head(n).cwiseProduct((g.row(i).head(n).array() - s).matrix());
    }
    t.accumulate(ix, dx);
  });
}

Var softmax_rows(Var logits) {
  return masked_softmax_rows(logits, AttnMask::kFull);
}

Var gram_pair_scaled(Var a, Var b, double beta) {
  Tape& t = same_tape(a, b, "gram_pair_scaled");
  require(a.rows() == b.rows(), "gram_pair_scaled: row count mismatch");
  Matrix val = beta * (a.value() * a.value().transpose() +
                       b.value() * b.value().transpose());
  int ia = a.id(), ib = b.id();
  return t.record(std::move(val), {ia, ib}, [ia, ib, beta](Tape& t, int self) {
    const Matrix& g = t.grad_at(self);
    Matrix sym = beta * (g + g.transpose());
    t.accumulate(ia, sym * t.value_at(ia));
    t.accumulate(ib, sym * t.value_at(ib));
  });
}

// ---------------------------------------------------------------------------
// sequence feature ops
// ---------------------------------------------------------------------------

Var row_normalize(Var a, double eps) {
  Tape& t = a.tape();
  require(eps > 0, "row_normalize: eps must be positive");
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  std::vector<double> norms(static_cast<size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double r = x.row(i).norm();
    norms[static_cast<size_t>(i)] = r;
    out.row(i) = x.row(i) / std::max(r, eps);
  }
  int ia = a.id();
  return t.record(std::move(out), {ia},
                  [ia, eps, norms = std::move(norms)](Tape& t, int self) {
                    const Matrix& g = t.grad_at(self);
                    const Matrix& y = t.value_at(self);
                    Matrix dx(g.rows(), g.cols());
                    for (Eigen::Index i = 0; i < g.rows(); ++i) {
                      double r = norms[static_cast<size_t>(i)];
                      if (r > eps) {
                        double gy = g.row(i).dot(y.row(i));
                        dx.row(i) = (g.row(i) - gy * y.row(i)) / r;
                      } else {
                        dx.row(i) = g.row(i) / eps;
                      }
                    }
                    t.accumulate(ia, dx);
                  });
}

Var leaky_average_rows(Var a, Var lambda) {
  Tape& t = same_tape(a, lambda, "leaky_average_rows");
  require(lambda.rows() == 1 && lambda.cols() == 1,
          "leaky_average_rows: lambda must be 1x1");
  const Matrix& x = a.value();
  double lam = lambda.scalar();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (i == 0)
      out.row(i) = x.row(i);
    else
      out.row(i) = x.row(i) + lam * out.row(i - 1);
  }
  int ia = a.id(), il = lambda.id();
  return t.record(std::move(out), {ia, il}, [ia, il](Tape& t, int self) {
    const Matrix& g = t.grad_at(self);
    const Matrix& out = t.value_at(self);
    double lam = t.value_at(il)(0, 0);
    Matrix h(g.rows(), g.cols());
    double dlam = 0.0;
    for (Eigen::Index i = g.rows() - 1; i >= 0; --i) {
      h.row(i) = g.row(i);
      if (i + 1 < g.rows()) h.row(i) += lam * h.row(i + 1);
      if (i > 0) dlam += h.row(i).dot(out.row(i - 1));
    }
    t.accumulate(ia, h);
    Matrix dl(1, 1);
    dl(0, 0) = dlam;
    t.accumulate(il, dl);
  });
}

Var shift_rows_up(Var a) {
  Tape& t = a.tape();
  const Matrix& x = a.value();
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  if (x.rows() > 1) out.topRows(x.rows() - 1) = x.bottomRows(x.rows() - 1);
  int ia = a.id();
  return t.record(std::move(out), {ia}, [ia](Tape& t, int self) {
    const Matrix& g = t.grad_at(self);
    Matrix dx = Matrix::Zero(g.rows(), g.cols());
    if (g.rows() > 1) dx.bottomRows(g.rows() - 1) = g.topRows(g.rows() - 1);
    t.accumulate(ia, dx);
  });
}

Var layer_norm_rows(Var a, Var gamma, Var beta, double eps) {
  Tape& t = same_tape(a, gamma, "layer_norm_rows");
  same_tape(a, beta, "layer_norm_rows");
  require(gamma.rows() == 1 && gamma.cols() == a.cols(),
          "layer_norm_rows: gamma shape");
  require(beta.rows() == 1 && beta.cols() == a.cols(),
          "layer_norm_rows: beta shape");
  const Matrix& x = a.value();
  Eigen::Index d = x.cols();
  Matrix xhat(x.rows(), d);
  std::vector<double> inv_sigma(static_cast<size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mu = x.row(i).mean();
    Eigen::RowVectorXd c = x.row(i).array() - mu;
    double var = c.squaredNorm() / static_cast<double>(d);
    double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[static_cast<size_t>(i)] = is;
    xhat.row(i) = c * is;
  }
  Matrix out(x.rows(), d);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    out.row(i) = xhat.row(i).cwiseProduct(gamma.value().row(0)) +
                 beta.value().row(0);
  int ia = a.id(), ig = gamma.id(), ib = beta.id();
  return t.record(std::move(out), {ia, ig, ib},
                  [ia, ig, ib, xhat = std::move(xhat),
                   inv_sigma = std::move(inv_sigma)](Tape& t, int self) {
                    const Matrix& g = t.grad_at(self);
                    const Matrix& gam = t.value_at(ig);
                    Eigen::Index d = g.cols();
                    Matrix dx(g.rows(), d);
                    Matrix dgamma = Matrix::Zero(1, d);
                    Matrix dbeta = Matrix::Zero(1, d);
                    for (Eigen::Index i = 0; i < g.rows(); ++i) {
                      Eigen::RowVectorXd dxh =
                          g.row(i).cwiseProduct(gam.row(0));
                      double m1 = dxh.mean();
                      double m2 = dxh.cwiseProduct(xhat.row(i)).mean();
                      dx.row(i) = inv_sigma[static_cast<size_t>(i)] *
                                  (dxh.array() - m1 - xhat.row(i).array() * m2)
                                      .matrix();
                      dgamma.row(0) += g.row(i).cwiseProduct(xhat.row(i));
                      dbeta.row(0) += g.row(i);
                    }
                    t.accumulate(ia, dx);
                    t.accumulate(ig, dgamma);
                    t.accumulate(ib, dbeta);
                  });
}

Var gather_rows(Var table, std::vector<int> idx) {
  Tape& t = table.tape();
  const Matrix& x = table.value();
  Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] >= 0 && idx[i] < x.rows(), "gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
  }
  int it = table.id();
  return t.record(std::move(out), {it},
                  [it, idx = std::move(idx)](Tape& t, int self) {
                    const Matrix& g = t.grad_at(self);
                    const Matrix& x = t.value_at(it);
                    Matrix dx = Matrix::Zero(x.rows(), x.cols());
                    for (size_t i = 0; i < idx.size(); ++i)
                      dx.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
                    t.accumulate(it, dx);
                  });
}

Var add_row_broadcast(Var a, Var row) {
  Tape& t = same_tape(a, row, "add_row_broadcast");
  require(row.rows() == 1 && row.cols() == a.cols(),
          "add_row_broadcast: row shape mismatch");
  int ia = a.id(), ir = row.id();
  Matrix out = a.value().rowwise() + row.value().row(0);
  return t.record(std::move(out), {ia, ir}, [ia, ir](Tape& t, int self) {
    const Matrix& g = t.grad_at(self);
    t.accumulate(ia, g);
    t.accumulate(ir, g.colwise().sum());
  });
}

// ---------------------------------------------------------------------------
// pointwise nonlinearities
// ---------------------------------------------------------------------------

Var gelu(Var a) {
  Tape& t = a.tape();
  const Matrix& x = a.value();
  Matrix out = x.unaryExpr([](double v) {
    return 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2));
  });
  int ia = a.id();
  return t.record(std::move(out), {ia}, [ia](Tape& t, int self) {
    const Matrix& g = t.grad_at(self);
    const Matrix& x = t.value_at(ia);
    Matrix d = x.unaryExpr([](double v) {
      double cdf = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
      double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * M_PI);
      return cdf + v * pdf;
    });
    t.accumulate(ia, g.cwiseProduct(d));
  });
}

Var sigmoid(Var a) {
  Tape& t = a.tape();
  Matrix out = a.value().unaryExpr([](double v) {
    return v >= 0 ? 1.0 / (1.0 + std::exp(-v))
                  : std::exp(v) / (1.0 + std::exp(v));
  });
  int ia = a.id();
  return t.record(std::move(out), {ia}, [ia](Tape& t, int self) {
    const Matrix& y = t.value_at(self);
    Matrix d = y.cwiseProduct(Matrix::Ones(y.rows(), y.cols()) - y);
    t.accumulate(ia, t.grad_at(self).cwiseProduct(d));
  });
}

Var softplus(Var a) {
  Tape& t = a.tape();
  Matrix out = a.value().unaryExpr([](double v) {
    return v > 30.0 ? v : std::log1p(std::exp(v));
  });
  int ia = a.id();
  return t.record(std::move(out), {ia}, [ia](Tape& t, int self) {
    const Matrix& x = t.value_at(ia);
    Matrix d = x.unaryExpr([](double v) {
      return v >= 0 ? 1.0 / (1.0 + std::exp(-v))
                    : std::exp(v) / (1.0 + std::exp(v));
    });
    t.accumulate(ia, t.grad_at(self).cwiseProduct(d));
  });
}

Var sqrt_elem(Var a) {
  Tape& t = a.tape();
  require((a.value().array() >= 0.0).all(), "sqrt_elem: negative input");
  Matrix out = a.value().cwiseSqrt();
  int ia = a.id();
  return t.record(std::move(out), {ia}, [ia](Tape& t, int self) {
    const Matrix& y = t.value_at(self);
    Matrix d = y.unaryExpr([](double v) { return 0.5 / std::max(v, 1e-300); });
    t.accumulate(ia, t.grad_at(self).cwiseProduct(d));
  });
}

Var clip_upper(Var a, double cap) {
  Tape& t = a.tape();
  Matrix out = a.value().cwiseMin(cap);
  int ia = a.id();
  return t.record(std::move(out), {ia}, [ia, cap](Tape& t, int self) {
    const Matrix& x = t.value_at(ia);
    Matrix pass = (x.array() < cap).cast<double>().matrix();
    t.accumulate(ia, t.grad_at(self).cwiseProduct(pass));
  });
}

// ---------------------------------------------------------------------------
// reductions and reshapes
// ---------------------------------------------------------------------------

Var sum_all(Var a) {
  Tape& t = a.tape();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  int ia = a.id();
  return t.record(std::move(out), {ia}, [ia](Tape& t, int self) {
    const Matrix& x = t.value_at(ia);
    t.accumulate(ia, t.grad_at(self)(0, 0) *
                         Matrix::Ones(x.rows(), x.cols()));
  });
}

Var mean_all(Var a) {
  double n = static_cast<double>(a.value().size());
  require(n > 0, "mean_all: empty matrix");
  return scale(sum_all(a), 1.0 / n);
}

Var slice_rows(Var a, int first, int count) {
  Tape& t = a.tape();
  require(first >= 0 && count >= 0 && first + count <= a.rows(),
          "slice_rows: range out of bounds");
  Matrix out = a.value().middleRows(first, count);
  int ia = a.id();
  return t.record(std::move(out), {ia}, [ia, first, count](Tape& t, int self) {
    const Matrix& x = t.value_at(ia);
    Matrix dx = Matrix::Zero(x.rows(), x.cols());
    dx.middleRows(first, count) = t.grad_at(self);
    t.accumulate(ia, dx);
  });
}

Var slice_cols(Var a, int first, int count) {
  Tape& t = a.tape();
  require(first >= 0 && count >= 0 && first + count <= a.cols(),
          "slice_cols: range out of bounds");
  Matrix out = a.value().middleCols(first, count);
  int ia = a.id();
  return t.record(std::move(out), {ia}, [ia, first, count](Tape& t, int self) {
    const Matrix& x = t.value_at(ia);
    Matrix dx = Matrix::Zero(x.rows(), x.cols());
    dx.middleCols(first, count) = t.grad_at(self);
    t.accumulate(ia, dx);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: no parts");
  Tape& t = parts[0].tape();
  Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> widths;
  for (const Var& p : parts) {
    require(&p.tape() == &t, "concat_cols: operands on different tapes");
    require(p.rows() == rows, "concat_cols: row count mismatch");
    ids.push_back(p.id());
    widths.push_back(p.cols());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return t.record(std::move(out), ids,
                  [ids, widths](Tape& t, int self) {
                    const Matrix& g = t.grad_at(self);
                    Eigen::Index at = 0;
                    for (size_t i = 0; i < ids.size(); ++i) {
                      t.accumulate(ids[i], g.middleCols(at, widths[i]));
                      at += widths[i];
                    }
                  });
}

Var dropout(Var a, double rate, Rng& rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0,1)");
  if (rate == 0.0) return a;
  Tape& t = a.tape();
  const Matrix& x = a.value();
  Matrix mask(x.rows(), x.cols());
  double keep = 1.0 - rate;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      mask(i, j) = rng.uniform() < keep ? 1.0 / keep : 0.0;
  int ia = a.id();
  Matrix out = x.cwiseProduct(mask);  // before the capture moves the mask
  return t.record(std::move(out), {ia},
                  [ia, mask = std::move(mask)](Tape& t, int self) {
                    t.accumulate(ia, t.grad_at(self).cwiseProduct(mask));
                  });
}

Var softmax_cross_entropy(Var logits, const std::vector<int>& targets,
                          int row_first, int row_count) {
  Tape& t = logits.tape();
  const Matrix& x = logits.value();
  if (row_count < 0) row_count = static_cast<int>(x.rows()) - row_first;
  require(row_first >= 0 && row_first + row_count <= x.rows(),
          "softmax_cross_entropy: row range out of bounds");
  require(static_cast<int>(targets.size()) == row_count,
          "softmax_cross_entropy: target count mismatch");
  require(row_count > 0, "softmax_cross_entropy: empty row range");
  double loss = 0.0;
  for (int i = 0; i < row_count; ++i) {
    int target = targets[static_cast<size_t>(i)];
    require(target >= 0 && target < x.cols(),
            "softmax_cross_entropy: target id out of vocabulary");
    Eigen::Index r = row_first + i;
    double m = x.row(r).maxCoeff();
    double lse = m + std::log((x.row(r).array() - m).exp().sum());
    loss += lse - x(r, target);
  }
  Matrix out(1, 1);
  out(0, 0) = loss / row_count;
  int ix = logits.id();
  std::vector<int> tgt = targets;
  return t.record(std::move(out), {ix},
                  [ix, tgt = std::move(tgt), row_first,
                   row_count](Tape& t, int self) {
                    double g = t.grad_at(self)(0, 0) / row_count;
                    const Matrix& x = t.value_at(ix);
                    Matrix dx = Matrix::Zero(x.rows(), x.cols());
                    for (int i = 0; i < row_count; ++i) {
                      Eigen::Index r = row_first + i;
                      double m = x.row(r).maxCoeff();
                      Eigen::ArrayXd e = (x.row(r).array() - m).exp();
                      dx.row(r) = (e / e.sum()).matrix() * g;
                      dx(r, tgt[static_cast<size_t>(i)]) -= g;
                    }
                    t.accumulate(ix, dx);
                  });
}

}  // namespace mosaic
