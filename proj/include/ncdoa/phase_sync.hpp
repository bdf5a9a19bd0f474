// SPDX-License-Identifier: Apache-2.0
//
// Per-snapshot sub-array phase estimation from a lifted estimate Z_n:
//
//   maximize Tr(Z^H Z V)  s.t.  diag(V) = 1, V PSD,
//
// the SDP relaxation of max_{|v_l|=1} v^H Z^H Z v. Solved by ADMM that
// alternates a projected-gradient step onto {diag(V) = 1} with a projection
// onto the PSD cone. H is rescaled to a fixed spectral norm before iterating.

#pragma once

#include <cstdint>
#include <vector>

#include "ncdoa/sim.hpp"

namespace ncdoa {

struct SdpOptions {
    double rho = 10.0;
    int max_outer = 250;
    int max_inner = 1000;
    double tol_outer = 5e-6;
    double tol_inner = 5e-6;
    /// Also require ||V~(k) - V~(k-1)|| / ||V~(k-1)|| <= tol_outer before
    /// stopping. Without it small H stalls near the initialization.
    bool dual_stop = true;
    /// H is rescaled to this spectral norm before iterating. Relative to rho
    /// this sets the ADMM step; near 3 rho converges fastest in practice.
    double h_scale = 30.0;
    /// Seed of the Gaussian initialization V0 = g g^T.
    std::uint64_t seed = 0x5eed5eedULL;
};

/// Above this second-to-first eigenvalue ratio the relaxation is not tight.
inline constexpr double kTightnessThreshold = 1e-6;

struct SyncResult {
    CMat v;                  ///< SDP solution, L x L
    double lambda_max = 0;   ///< largest eigenvalue of v
    CVec dominant;           ///< sqrt(lambda_max) times the unit dominant eigenvector
    double tightness = 0.0;  ///< lambda_2 / lambda_1, 0 when L == 1
    int outer_iterations = 0;
    bool converged = false;
    double primal_residual = 0.0;  ///< ||V - V~|| / ||V~|| at exit
    double dual_residual = 0.0;
    double objective = 0.0;  ///< Tr(Z^H Z V)

    bool tight() const { return tightness <= kTightnessThreshold; }
};

/// Solves the phase SDP for one snapshot's lifted matrix (N_theta x L).
SyncResult solve_phase_sdp(const CMat& z, const SdpOptions& options = {});

/// Same problem stated directly on the Hermitian PSD matrix H = Z^H Z.
SyncResult solve_phase_sdp_gram(const CMat& h, const SdpOptions& options = {});

struct PhaseExtraction {
    RVec phases;  ///< angle of each entry of the dominant vector, in (-pi, pi]
    bool tight = true;
};

PhaseExtraction extract_phases(const SyncResult& sync);

/// Phase-corrected full-array observations: column n is the concatenation of
/// exp(+j phi_l(n)) x_l(n) over l. `phases` is L x N.
CMat phase_correct(const SnapshotSet& snapshots, const RMat& phases);

}  // namespace ncdoa
