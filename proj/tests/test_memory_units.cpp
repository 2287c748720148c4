#include <doctest.h>

#include "mosaic/memory_units.hpp"
#include "test_helpers.hpp"

#include <cmath>

using namespace mosaic;
using mosaic::testing::random_matrix;
using mosaic::testing::random_unit_rows;

namespace {

ContextualUnitParams random_unit(Rng& rng, int d_in, int d_k, int d_v) {
  ContextualUnitParams p;
  p.w_phi = random_matrix(rng, d_k, d_in);
  p.w_psi = random_matrix(rng, d_v, d_in);
  p.lambda_phi = rng.uniform(0.0, 0.95);
  p.lambda_psi = rng.uniform(0.0, 1.5);
  p.beta = rng.uniform(0.1, 8.0);
  return p;
}

}  // namespace

TEST_CASE("extract_keys: no leak reduces to normalized projection") {
  Rng rng(21);
  ContextualUnitParams p = random_unit(rng, 4, 3, 3);
  p.lambda_phi = 0.0;
  Matrix x = random_matrix(rng, 6, 4);
  Matrix keys = extract_keys(x, p);
  for (int t = 0; t < 6; ++t) {
    RowVector proj = x.row(t) * p.w_phi.transpose();
    RowVector expect = proj / std::max(proj.norm(), kNormEps);
    CHECK((keys.row(t) - expect).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("leaky average at full retention is a running sum (pre-norm)") {
  // scalar inputs (1,1,1) accumulate to (1,2,3)
  Tape t;
  Matrix ones = Matrix::Ones(3, 1);
  Var out = leaky_average_rows(t.constant(ones),
                               t.constant(Matrix::Constant(1, 1, 1.0)));
  CHECK(out.value()(0, 0) == 1.0);
  CHECK(out.value()(1, 0) == 2.0);
  CHECK(out.value()(2, 0) == 3.0);
}

TEST_CASE("extract_keys matches the discounted-sum closed form") {
  Rng rng(22);
  ContextualUnitParams p = random_unit(rng, 5, 4, 4);
  Matrix x = random_matrix(rng, 9, 5);
  Matrix keys = extract_keys(x, p);
  for (int T = 0; T < 9; ++T) {
    RowVector kbar = RowVector::Zero(4);
    for (int s = 0; s <= T; ++s)
      kbar += std::pow(p.lambda_phi, T - s) *
              (x.row(s) * p.w_phi.transpose());
    RowVector expect = kbar / std::max(kbar.norm(), kNormEps);
    CHECK((keys.row(T) - expect).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(keys.row(T).norm() - 1.0) < 1e-12);
  }
}

TEST_CASE("extract_keys: zero-norm rows stay finite under the epsilon guard") {
  ContextualUnitParams p;
  p.w_phi = Matrix::Identity(2, 2);
  p.w_psi = Matrix::Identity(2, 2);
  Matrix x = Matrix::Zero(3, 2);
  Matrix keys = extract_keys(x, p);
  CHECK(keys.allFinite());
  CHECK(keys.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("extract_values: peek semantics") {
  Rng rng(23);
  ContextualUnitParams p = random_unit(rng, 4, 3, 3);

  SUBCASE("no peek weight reduces to normalized projection") {
    p.lambda_psi = 0.0;
    Matrix x = random_matrix(rng, 5, 4);
    Matrix values = extract_values(x, p);
    CHECK(values.rows() == 4);  // one fewer than inputs
    for (int t = 0; t < 4; ++t) {
      RowVector proj = x.row(t) * p.w_psi.transpose();
      CHECK((values.row(t) - proj / proj.norm()).cwiseAbs().maxCoeff() <
            1e-14);
    }
  }

  SUBCASE("identity extractor on two inputs sums them, one value produced") {
    ContextualUnitParams q;
    q.w_phi = Matrix::Identity(3, 3);
    q.w_psi = Matrix::Identity(3, 3);
    q.lambda_psi = 1.0;
    Matrix x = random_matrix(rng, 2, 3);
    Matrix values = extract_values(x, q);
    CHECK(values.rows() == 1);
    RowVector vbar = x.row(0) + x.row(1);
    CHECK((values.row(0) - vbar / vbar.norm()).cwiseAbs().maxCoeff() < 1e-14);
  }

  SUBCASE("v_T depends only on x_T and x_{T+1}") {
    Matrix x = random_matrix(rng, 8, 4);
    Matrix values = extract_values(x, p);
    Matrix x2 = x;
    x2.row(5) += random_matrix(rng, 1, 4);  // perturb x_{T+2} for T = 3
    Matrix values2 = extract_values(x2, p);
    CHECK((values.row(3) - values2.row(3)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("contextual_forward: empty memory and causality") {
  Rng rng(24);
  ContextualUnitParams p = random_unit(rng, 4, 3, 3);

  Matrix one = random_matrix(rng, 1, 4);
  Matrix y1 = contextual_forward(one, p);
  CHECK(y1.rows() == 1);
  CHECK(y1.cwiseAbs().maxCoeff() == 0.0);

  Matrix x = random_matrix(rng, 12, 4);
  Matrix y = contextual_forward(x, p);
  Matrix x2 = x;
  for (int t = 5; t < 12; ++t) x2.row(t) += random_matrix(rng, 1, 4);
  Matrix y2 = contextual_forward(x2, p);
  for (int t = 0; t < 5; ++t)
    CHECK((y.row(t) - y2.row(t)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("moons-style unit recalls a period-2 sequence one step ahead") {
  // unit-modulus complex scalars as 2-d rows; a and b a quarter turn apart.
  // Keys are the observations, values peek one step (identity weights, no
  // leak, no convolution), so retrieval predicts the next observation.
  auto obs = [](double theta) {
    RowVector r(2);
    r << std::cos(theta), std::sin(theta);
    return r;
  };
  double ta = 0.4, tb = ta + M_PI_2;
  int D = 8;
  Matrix x(D, 2);
  for (int t = 0; t < D; ++t) x.row(t) = obs(t % 2 == 0 ? ta : tb);
  double beta = 50.0;

  Tape t(false);
  Var keys = t.constant(x);
  Var values = shift_rows_up(t.constant(x));
  Var y = contextual_attention_op(keys, values,
                                  t.constant(Matrix::Constant(1, 1, beta)));

  // hand-unrolled retrieval for T = 3 (0-based 2): pairs are
  // (x1, x2), (x2, x3); query x3 = x1
  {
    double l1 = beta * x.row(2).dot(x.row(0));
    double l2 = beta * x.row(2).dot(x.row(1));
    double m = std::max(l1, l2);
    double w1 = std::exp(l1 - m), w2 = std::exp(l2 - m);
    RowVector expect = (w1 * x.row(1) + w2 * x.row(2)) / (w1 + w2);
    CHECK((y.value().row(2) - expect).cwiseAbs().maxCoeff() < 1e-12);
  }
  // from T = 3 on, outputs approach the true next observation
  for (int s = 2; s < D - 1; ++s)
    CHECK((y.value().row(s) - x.row(s + 1)).norm() < 1e-3);
}

TEST_CASE("memory storage discipline: T inputs hold exactly max(0, T-1) pairs") {
  Rng rng(25);
  ContextualUnitParams p = random_unit(rng, 3, 3, 3);
  ContextualUnitStream stream(p, 16);
  CHECK(stream.memory().size() == 0);
  for (int t = 1; t <= 10; ++t) {
    stream.step(random_matrix(rng, 1, 3).row(0));
    CHECK(stream.memory().size() == t - 1);
  }
  stream.reset();
  CHECK(stream.memory().size() == 0);
}

TEST_CASE("no future leak: y_1..y_T invariant under suffix perturbations") {
  Rng rng(26);
  for (int trial = 0; trial < 50; ++trial) {
    ContextualUnitParams p = random_unit(rng, 4, 3, 2);
    int D = 6 + rng.uniform_int(10);
    int T = 1 + rng.uniform_int(D - 1);
    Matrix x = random_matrix(rng, D, 4);
    Matrix y = contextual_forward(x, p);
    Matrix x2 = x;
    for (int t = T; t < D; ++t) x2.row(t) = random_matrix(rng, 1, 4);
    Matrix y2 = contextual_forward(x2, p);
    for (int t = 0; t < T; ++t)
      CHECK((y.row(t) - y2.row(t)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("exact recall with frozen identity extractors") {
  Rng rng(27);
  int d = 4, D = 12;
  ContextualUnitParams p;
  p.w_phi = Matrix::Identity(d, d);
  p.w_psi = Matrix::Identity(d, d);
  p.beta = 50.0;
  double delta = 0.5;

  // unit keys with pairwise distance >= delta, one early key repeated last
  Matrix x;
  for (;;) {
    x = random_unit_rows(rng, D, d);
    x.row(D - 1) = x.row(2);
    bool ok = true;
    for (int i = 0; i < D - 1 && ok; ++i)
      for (int j = i + 1; j < D - 1; ++j)
        if ((x.row(i) - x.row(j)).norm() < delta) {
          ok = false;
          break;
        }
    if (ok) break;
  }
  Matrix y = contextual_forward(x, p);
  // query at the last step matches x.row(2) exactly; retrieval should
  // return that pair's stored value
  Matrix values = extract_values(x, p);
  RowVector target = values.row(2);
  double bound = 1.0 * D * std::exp(-p.beta * delta * delta / 2.0);
  CHECK((y.row(D - 1) - target).norm() < bound);
}

TEST_CASE("persistent unit: trivial retrievals") {
  Rng rng(28);
  PersistentUnitParams p;
  p.w_phi = random_matrix(rng, 3, 4);
  p.stored_keys = random_unit_rows(rng, 1, 3);
  p.stored_values = random_matrix(rng, 1, 2);
  Matrix x = random_matrix(rng, 5, 4);
  Matrix y = persistent_forward(x, p);
  for (int t = 0; t < 5; ++t)
    CHECK((y.row(t) - p.stored_values.row(0)).cwiseAbs().maxCoeff() < 1e-14);

  p.stored_keys = random_unit_rows(rng, 6, 3);
  p.stored_values = random_matrix(rng, 6, 2);
  p.beta = 0.0;
  y = persistent_forward(x, p);
  RowVector mean = p.stored_values.colwise().mean();
  for (int t = 0; t < 5; ++t)
    CHECK((y.row(t) - mean).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("persistent unit: orthogonal stored keys give the softmax weights") {
  PersistentUnitParams p;
  p.w_phi = Matrix::Identity(2, 2);
  p.stored_keys = Matrix::Identity(2, 2);
  p.stored_values = Matrix(2, 1);
  p.stored_values << 1.0, 3.0;
  p.beta = 1.0;
  Matrix x(1, 2);
  x << 1.0, 0.0;  // query equals the first stored key
  double w1 = std::exp(1.0) / (std::exp(1.0) + 1.0);
  double expect = w1 * 1.0 + (1.0 - w1) * 3.0;
  CHECK(persistent_forward(x, p)(0, 0) ==
        doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("persistent unit equals a softmax-hidden-layer network") {
  Rng rng(29);
  PersistentUnitParams p;
  p.w_phi = random_matrix(rng, 3, 5);
  p.stored_keys = random_unit_rows(rng, 7, 3);
  p.stored_values = random_matrix(rng, 7, 4);
  p.beta = 2.3;
  Matrix x = random_matrix(rng, 6, 5);
  Matrix y = persistent_forward(x, p);

  // direct single-hidden-layer form: hidden = softmax(beta * K q), output
  // = V^T hidden
  for (int t = 0; t < 6; ++t) {
    RowVector q = x.row(t) * p.w_phi.transpose();
    q /= std::max(q.norm(), kNormEps);
    Eigen::VectorXd logits = p.beta * (p.stored_keys * q.transpose());
    Eigen::ArrayXd e = (logits.array() - logits.maxCoeff()).exp();
    Eigen::VectorXd hidden = (e / e.sum()).matrix();
    RowVector direct = (p.stored_values.transpose() * hidden).transpose();
    CHECK((y.row(t) - direct).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("tape composites agree with the stream reference") {
  Rng rng(30);
  for (int trial = 0; trial < 20; ++trial) {
    int d_in = 3 + rng.uniform_int(3);
    int d_k = 2 + rng.uniform_int(3);
    ContextualUnitParams p = random_unit(rng, d_in, d_k, d_k);
    int D = 4 + rng.uniform_int(8);
    Matrix x = random_matrix(rng, D, d_in);

    Tape t(false);
    Var proj_k = t.constant(x * p.w_phi.transpose());
    Var proj_v = t.constant(x * p.w_psi.transpose());
    Var keys = contextual_keys_op(
        proj_k, t.constant(Matrix::Constant(1, 1, p.lambda_phi)));
    Var values = contextual_values_op(
        proj_v, t.constant(Matrix::Constant(1, 1, p.lambda_psi)));
    Var y = contextual_attention_op(
        keys, values, t.constant(Matrix::Constant(1, 1, p.beta)));

    Matrix ref = contextual_forward(x, p);
    CHECK((y.value() - ref).cwiseAbs().maxCoeff() < 1e-12);

    Matrix keys_ref = extract_keys(x, p);
    CHECK((keys.value() - keys_ref).cwiseAbs().maxCoeff() < 1e-12);
    Matrix values_ref = extract_values(x, p);
    CHECK((values.value().topRows(D - 1) - values_ref).cwiseAbs().maxCoeff() <
          1e-12);
  }
}

TEST_CASE("persistent tape composite agrees with persistent_forward") {
  Rng rng(31);
  PersistentUnitParams p;
  p.w_phi = random_matrix(rng, 3, 4);
  p.stored_keys = random_unit_rows(rng, 5, 3);
  p.stored_values = random_matrix(rng, 5, 2);
  p.beta = 1.7;
  Matrix x = random_matrix(rng, 6, 4);

  Tape t(false);
  Var queries = contextual_keys_op(
      t.constant(x * p.w_phi.transpose()),
      t.constant(Matrix::Zero(1, 1)));
  Var y = persistent_attention_op(queries, t.constant(p.stored_keys),
                                  t.constant(p.stored_values),
                                  t.constant(Matrix::Constant(1, 1, p.beta)));
  Matrix ref = persistent_forward(x, p);
  CHECK((y.value() - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("moons extractors are linear, unnormalized, and identity-transparent") {
  Rng rng(32);
  ComplexDense zx = ComplexDense::Random(6, 3);
  Tape t(false);
  CVar x = make_cvar(t, from_dense(zx));
  CVar wi = make_cvar(t, from_dense(ComplexDense::Identity(3, 3)));
  MoonsFeatures f = moons_linear_extractors(x, wi, wi);
  // identity W_phi: keys equal raw observations
  CHECK((f.keys.re.value() - zx.real()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((f.keys.im.value() - zx.imag()).cwiseAbs().maxCoeff() < 1e-14);
  // values peek one step ahead; final row has nothing to peek at
  CHECK((f.values.re.value().topRows(5) - zx.real().bottomRows(5))
            .cwiseAbs()
            .maxCoeff() < 1e-14);
  CHECK(f.values.re.value().row(5).cwiseAbs().maxCoeff() == 0.0);
  check_moons_head_count(1);
  check_moons_head_count(3);
  CHECK_THROWS_AS(check_moons_head_count(2), ContractViolation);
}

TEST_CASE("unit invariants reject bad parameters") {
  ContextualUnitParams p;
  p.w_phi = Matrix::Identity(2, 2);
  p.w_psi = Matrix::Identity(2, 2);
  p.lambda_phi = 1.0;
  CHECK_THROWS_AS(p.validate(), ContractViolation);
  p.lambda_phi = 0.5;
  p.beta = -1.0;
  CHECK_THROWS_AS(p.validate(), ContractViolation);

  PersistentUnitParams q;
  q.w_phi = Matrix::Identity(2, 2);
  q.stored_keys = Matrix(0, 2);
  q.stored_values = Matrix(0, 2);
  CHECK_THROWS_AS(q.validate(), ContractViolation);
}
