// SPDX-License-Identifier: Apache-2.0
//
// DOA estimators for non-coherent sub-arrays and their building blocks.
//
//   Proposed1       row norms of the rank-1 approximated lifted estimates
//   Proposed1NoR1   same without the rank-1 step
//   Proposed2       phase synchronization, phase correction, then coherent
//                   MUSIC (N > 1) or l1 sparse recovery (N == 1)
//   SparsityOnly    Proposed1 with (beta, mu) = (1, 0)
//   LowRankOnly     Proposed1 with (beta, mu) = (0, 1)
//   NonCoherentMUSIC  sub-array snapshots pooled as N*L snapshots
//   GenieMUSIC      coherent MUSIC after correcting with the true phases
//                   (reference only; needs ground truth)

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ncdoa/lifted_solver.hpp"
#include "ncdoa/phase_sync.hpp"

namespace ncdoa {

struct Spectrum {
    std::vector<double> angles;  ///< the grid, degrees
    RVec scores;                 ///< nonnegative, one per grid point
};

struct DoaEstimate {
    std::vector<double> angles;  ///< degrees, ordered by decreasing score
    std::vector<int> indices;    ///< grid indices of `angles`
    int fallback_count = 0;      ///< picks that are not local maxima
};

enum class Method {
    Proposed1,
    Proposed1NoR1,
    Proposed2,
    SparsityOnly,
    LowRankOnly,
    NonCoherentMUSIC,
    GenieMUSIC,
};

std::string to_string(Method m);
/// Parses a method name (case-sensitive, as printed by to_string).
std::optional<Method> parse_method(const std::string& name);
std::vector<Method> all_methods();

/// Best rank-1 approximation sigma_1 u_1 v_1^H.
CMat rank1_approx(const CMat& z);

/// xi[i] = sqrt(sum_{n,l} |Z_n[i,l]|^2), with each Z_n replaced by its
/// rank-1 approximation when `use_rank1` is set.
RVec spectrum_proposed1(const std::vector<CMat>& z, bool use_rank1);

/// Q highest local maxima; missing picks are filled with the largest
/// remaining values (ties broken by lowest index).
DoaEstimate pick_peaks(const Spectrum& spectrum, int q);

/// (R + J conj(R) J) / 2 with J the exchange matrix.
CMat forward_backward(const CMat& r);

/// MUSIC pseudo-spectrum 1 / ||E_n^H a(theta)||^2 from an explicit covariance
/// and a matrix of steering vectors (one column per grid point).
RVec music_from_covariance(const CMat& r, const CMat& steering, int q);

/// Coherent MUSIC on full-array snapshots (M x N) with full-array steering.
RVec music_spectrum(const CMat& x, const ArrayGeometry& geometry, const DoaGrid& grid, int q,
                    bool forward_backward_smoothing);

/// MUSIC over the sub-array aperture with all N*L sub-array snapshots pooled
/// into one covariance, forward-backward smoothed.
RVec noncoherent_music(const SnapshotSet& snapshots, const ArrayGeometry& geometry,
                       const DoaGrid& grid, int q);

struct L1Options {
    std::optional<double> lambda;  ///< unset: default_lambda(sigma^2, M)
    int max_iterations = 20000;
    double tolerance = 1e-6;
    /// Cached ||A^H A||; computed by power iteration when unset.
    std::optional<double> gram_norm;
};

struct L1Result {
    CVec s;
    double lambda = 0.0;
    int iterations = 0;
    double objective = 0.0;
};

/// FISTA on lambda ||x - A s||^2 + ||s||_1 with the complex soft threshold.
L1Result l1_single_snapshot(const CVec& x, const CMat& a, double noise_variance,
                            const L1Options& options = {});

/// lambda ||x - A s||^2 + ||s||_1
double l1_objective(const CVec& x, const CMat& a, const CVec& s, double lambda);

struct EstimatorConfig {
    SolverConfig solver;
    SdpOptions sdp;
    L1Options l1;
};

struct PhaseEstimates {
    RMat phases;  ///< L x N
    double max_tightness = 0.0;
    int non_tight = 0;  ///< snapshots whose SDP solution is not rank-1
};

struct EstimateOutput {
    Method method = Method::Proposed1;
    Spectrum spectrum;
    DoaEstimate doa;
    std::optional<PhaseEstimates> phases;
    double seconds = 0.0;  ///< wall time, including any shared solve
};

/// Holds the geometry, grid and dictionary and runs the estimators on
/// snapshot sets. Immutable after construction.
class DoaEstimator {
 public:
    DoaEstimator(ArrayGeometry geometry, DoaGrid grid, EstimatorConfig config = {});

    const ArrayGeometry& geometry() const { return geometry_; }
    const DoaGrid& grid() const { return grid_; }
    const Dictionary& dictionary() const { return dictionary_; }
    const EstimatorConfig& config() const { return config_; }

    /// Runs one method. `true_phases` (L x N) is required by GenieMUSIC only.
    EstimateOutput estimate(Method method, const SnapshotSet& snapshots, int q,
                            const RMat* true_phases = nullptr) const;

    /// Runs several methods on the same snapshots, solving each distinct
    /// lifted program once.
    std::vector<EstimateOutput> estimate_all(std::span<const Method> methods,
                                             const SnapshotSet& snapshots, int q,
                                             const RMat* true_phases = nullptr) const;

    /// Proposed2 second stage on already phase-corrected observations.
    Spectrum coherent_spectrum(const CMat& corrected, double noise_variance, int q) const;

    /// Phase synchronization of every snapshot of a lifted estimate.
    PhaseEstimates synchronize(const LiftedEstimate& lifted) const;

 private:
    Spectrum wrap(RVec scores) const;

    ArrayGeometry geometry_;
    DoaGrid grid_;
    Dictionary dictionary_;
    CMat stacked_;
    double stacked_gram_norm_;
    EstimatorConfig config_;
};

/// Writes "angle_deg,score" rows with a comment header.
void write_spectrum_csv(const std::string& path, const Spectrum& spectrum,
                        const std::string& header_comment);

}  // namespace ncdoa
