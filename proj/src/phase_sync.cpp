// SPDX-License-Identifier: Apache-2.0

#include "ncdoa/phase_sync.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "ncdoa/prox.hpp"

namespace ncdoa {

namespace {

double relative_change(const CMat& now, const CMat& before) {
    const double den = before.norm();
    const double num = (now - before).norm();
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return num / den;
}

void fill_spectrum(SyncResult& res, const CMat& h) {
    const Eigen::Index n = res.v.rows();
    Eigen::SelfAdjointEigenSolver<CMat> es(res.v);
    const RVec& ev = es.eigenvalues();  // ascending
    res.lambda_max = std::max(ev[n - 1], 0.0);
    res.dominant = std::sqrt(res.lambda_max) * es.eigenvectors().col(n - 1);
    if (n == 1 || res.lambda_max == 0.0)
        res.tightness = 0.0;
    else
        res.tightness = std::clamp(ev[n - 2] / res.lambda_max, 0.0, 1.0);
    res.objective = (h * res.v).trace().real();
}

}  // namespace

SyncResult solve_phase_sdp_gram(const CMat& h, const SdpOptions& options) {
    if (h.rows() != h.cols() || h.rows() < 1)
        throw ArgumentError("solve_phase_sdp: H must be square and non-empty");
    if (!(options.rho > 0.0)) throw ArgumentError("solve_phase_sdp: rho must be > 0");
    if (!(options.h_scale > 0.0)) throw ArgumentError("solve_phase_sdp: h_scale must be > 0");
    const Eigen::Index big_l = h.rows();
    SyncResult res;
    if (big_l == 1) {
        res.v = CMat::Ones(1, 1);
        res.converged = true;
        fill_spectrum(res, h);
        return res;
    }

    // The maximizer and the eigenvalue ratio do not depend on the scale of H,
    // but the ADMM step does, so fix the scale.
    const double h_norm = Eigen::SelfAdjointEigenSolver<CMat>(h, Eigen::EigenvaluesOnly)
                              .eigenvalues()
                              .cwiseAbs()
                              .maxCoeff();
    if (h_norm == 0.0) {
        // Every feasible V is optimal. Return the rank-1 point rather than
        // whatever the iteration makes of the random start.
        res.v = CMat::Ones(big_l, big_l);
        res.converged = true;
        fill_spectrum(res, h);
        return res;
    }
    const CMat hs = h * (options.h_scale / h_norm);
    const double rho = options.rho;
    const double step = 1.0 / rho;

    Rng rng(options.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    RVec g0(big_l);
    for (Eigen::Index i = 0; i < big_l; ++i) g0[i] = gauss(rng);
    CMat v = (g0 * g0.transpose()).cast<cplx>();
    CMat v_psd = v;  // the PSD copy, V~
    CMat y = CMat::Zero(big_l, big_l);

    for (int k = 1; k <= options.max_outer; ++k) {
        // V-step: projected gradient on -Tr(HV) + rho ||V - V~ + Y||^2 over diag(V) = 1.
        CMat prev = v;
        for (int q = 1; q <= options.max_inner; ++q) {
            CMat next = prev - step * (-hs + rho * (prev - v_psd + y));
            next.diagonal().setOnes();
            const double r_in = relative_change(next, prev);
            prev.swap(next);
            if (r_in <= options.tol_inner) break;
        }
        v = std::move(prev);
        CMat v_psd_prev = std::move(v_psd);
        v_psd = project_psd(v + y);
        y += v - v_psd;
        if (!v.allFinite() || !v_psd.allFinite() || !y.allFinite())
            throw NumericFailure("solve_phase_sdp: non-finite iterate", k);
        res.outer_iterations = k;
        res.primal_residual = relative_change(v, v_psd);
        res.dual_residual = relative_change(v_psd, v_psd_prev);
        if (res.primal_residual <= options.tol_outer &&
            (!options.dual_stop || res.dual_residual <= options.tol_outer)) {
            res.converged = true;
            break;
        }
    }
    // V~ is PSD but meets diag(V) = 1 only to the stopping tolerance. A
    // diagonal congruence fixes the diagonal exactly and keeps PSD and rank.
    const RVec d = v_psd.diagonal().real();
    if ((d.array() > 0.0).all()) {
        const CVec s = d.cwiseSqrt().cwiseInverse().cast<cplx>();
        v_psd = s.asDiagonal() * v_psd * s.asDiagonal();
        v_psd = 0.5 * (v_psd + v_psd.adjoint());
        v_psd.diagonal().setOnes();
    }
    res.v = std::move(v_psd);
    fill_spectrum(res, h);
    return res;
}

SyncResult solve_phase_sdp(const CMat& z, const SdpOptions& options) {
    if (z.cols() < 1) throw ArgumentError("solve_phase_sdp: Z must have at least one column");
    return solve_phase_sdp_gram(z.adjoint() * z, options);
}

PhaseExtraction extract_phases(const SyncResult& sync) {
    PhaseExtraction out;
    out.tight = sync.tight();
    out.phases.resize(sync.dominant.size());
    for (Eigen::Index l = 0; l < sync.dominant.size(); ++l)
        out.phases[l] = wrap_phase(std::arg(sync.dominant[l]));
    return out;
}

CMat phase_correct(const SnapshotSet& snapshots, const RMat& phases) {
    if (phases.rows() != snapshots.num_subarrays() || phases.cols() != snapshots.num_snapshots())
        throw ArgumentError("phase_correct: phases must be L x N");
    CMat out(snapshots.num_elements(), snapshots.num_snapshots());
    Eigen::Index r = 0;
    for (int l = 0; l < snapshots.num_subarrays(); ++l) {
        const CMat& b = snapshots.block(l);
        for (Eigen::Index t = 0; t < b.cols(); ++t)
            out.col(t).segment(r, b.rows()) = std::polar(1.0, phases(l, t)) * b.col(t);
        r += b.rows();
    }
    return out;
}

}  // namespace ncdoa
