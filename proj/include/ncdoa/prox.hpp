// SPDX-License-Identifier: Apache-2.0
//
// Closed-form proximal maps and projections. Thresholds follow the
// unweighted squared-distance convention
//     prox(v) = argmin_x  t * h(x) + ||x - v||_F^2,
// so the effective shrinkage is t/2.

#pragma once

#include "ncdoa/types.hpp"

namespace ncdoa {

/// Row-wise group soft-threshold: minimizer of
/// beta_t * sum_i ||G[i,:]||_2 + ||G - Z||_F^2.
CMat prox_group_l12(const CMat& z, double beta_t);

/// In-place variant used inside the solver loops.
void prox_group_l12_inplace(CMat& z, double beta_t);

/// Singular-value soft-threshold by mu_t/2: minimizer of
/// mu_t * ||Z||_* + ||Z - G||_F^2.
/// Works on tall matrices through the eigendecomposition of the small
/// Gram matrix G^H G.
CMat prox_nuclear(const CMat& g, double mu_t);

/// Sets the diagonal to one and leaves the off-diagonal entries untouched.
CMat project_diag_ones(const CMat& v);

/// Nearest Hermitian PSD matrix in Frobenius norm: symmetrize, clamp
/// negative eigenvalues to zero, recompose.
CMat project_psd(const CMat& v);

/// sum_i ||Z[i,:]||_2
double group_l12_norm(const CMat& z);

/// Sum of singular values.
double nuclear_norm(const CMat& z);

}  // namespace ncdoa
