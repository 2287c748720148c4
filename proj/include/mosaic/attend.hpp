#pragma once

#include "mosaic/tape.hpp"

namespace mosaic {

// Kernel-smoothing retrieval over stored (key, value) pairs. Queries and
// keys are rows; an empty memory returns the zero row (the output of a unit
// before anything is stored).
//
// attend:               softmax_i(beta * <q, k_i>) weighted value average
// attend_distance_form: Gaussian kernel weights exp(-beta * |q - k_i|^2)
//
// On unit-norm keys and query, attend_distance_form(q,K,V,b) equals
// attend(q,K,V,2b) because |q-k|^2 = 2 - 2 q.k and constants cancel.

RowVector attend(const RowVector& query, const Matrix& keys,
                 const Matrix& values, double beta);

RowVector attend_distance_form(const RowVector& query, const Matrix& keys,
                               const Matrix& values, double beta);

// Softmax weights of attend(), exposed for attention-profile evaluation.
RowVector attend_weights(const RowVector& query, const Matrix& keys,
                         double beta);

// Differentiable composites. query 1 x d, keys n x d, values n x d',
// beta 1 x 1; gradients flow into all four inputs.
Var attend(Var query, Var keys, Var values, Var beta);
Var attend_distance_form(Var query, Var keys, Var values, Var beta);

}  // namespace mosaic
