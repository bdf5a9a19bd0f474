// SPDX-License-Identifier: Apache-2.0

#include "ncdoa/prox.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace ncdoa {

void prox_group_l12_inplace(CMat& z, double beta_t) {
    if (!(beta_t >= 0.0)) throw ArgumentError("prox_group_l12: threshold must be >= 0");
    if (beta_t == 0.0) return;
    const double tau = 0.5 * beta_t;
    const RVec norms = z.rowwise().norm();
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double r = norms[i];
        if (r <= tau)
            z.row(i).setZero();
        else
            z.row(i) *= (1.0 - tau / r);  // NaN rows stay NaN
    }
}

CMat prox_group_l12(const CMat& z, double beta_t) {
    CMat out = z;
    prox_group_l12_inplace(out, beta_t);
    return out;
}

CMat prox_nuclear(const CMat& g, double mu_t) {
    if (!(mu_t >= 0.0)) throw ArgumentError("prox_nuclear: threshold must be >= 0");
    if (mu_t == 0.0) return g;
    const double tau = 0.5 * mu_t;
    if (g.cols() > g.rows()) return prox_nuclear(g.adjoint(), mu_t).adjoint();
    // G = U S V^H  =>  G^H G = V S^2 V^H, and the thresholded matrix is
    // U max(S - tau, 0) V^H = G V diag(max(1 - tau/s, 0)) V^H.
    const CMat gram = g.adjoint() * g;
    Eigen::SelfAdjointEigenSolver<CMat> es(gram);
    const RVec& ev = es.eigenvalues();
    RVec shrink(ev.size());
    for (Eigen::Index k = 0; k < ev.size(); ++k) {
        const double s = std::sqrt(std::max(ev[k], 0.0));
        shrink[k] = s > tau ? 1.0 - tau / s : 0.0;
    }
    if (shrink.isZero(0.0)) return CMat::Zero(g.rows(), g.cols());
    const CMat& v = es.eigenvectors();
    return g * (v * shrink.asDiagonal() * v.adjoint());
}

CMat project_diag_ones(const CMat& v) {
    if (v.rows() != v.cols()) throw ArgumentError("project_diag_ones: matrix must be square");
    CMat out = v;
    out.diagonal().setOnes();
    return out;
}

CMat project_psd(const CMat& v) {
    if (v.rows() != v.cols()) throw ArgumentError("project_psd: matrix must be square");
    const CMat h = 0.5 * (v + v.adjoint());
    Eigen::SelfAdjointEigenSolver<CMat> es(h);
    const RVec lam = es.eigenvalues().cwiseMax(0.0);
    const CMat& u = es.eigenvectors();
    CMat out = u * lam.asDiagonal() * u.adjoint();
    // Remove the rounding-level skew left by the recomposition.
    return 0.5 * (out + out.adjoint());
}

double group_l12_norm(const CMat& z) { return z.rowwise().norm().sum(); }

double nuclear_norm(const CMat& z) {
    if (z.size() == 0) return 0.0;
    Eigen::JacobiSVD<CMat> svd(z);
    return svd.singularValues().sum();
}

}  // namespace ncdoa
