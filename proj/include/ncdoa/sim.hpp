// SPDX-License-Identifier: Apache-2.0
//
// Synthetic snapshots from non-coherent sub-arrays: every sub-array sees the
// same sources but with its own random phase offset at every snapshot.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ncdoa/array_model.hpp"

namespace ncdoa {

struct Scenario {
    ArrayGeometry geometry;
    std::vector<double> base_doas;  ///< degrees, length Q
    int snapshots = 1;              ///< N
    double snr_db = 20.0;           ///< per antenna, per source
    double perturbation = 0.1;      ///< width of the uniform DOA jitter, degrees

    int num_sources() const { return static_cast<int>(base_doas.size()); }
    void validate() const;
};

struct GroundTruth {
    std::vector<double> doas;  ///< perturbed DOAs, degrees
    CMat signals;              ///< Q x N
    RMat phases;               ///< L x N, each in [0, 2*pi)
    double noise_variance = 0.0;
};

/// Observations x_l(n). Block l is an M_l x N matrix whose column n is x_l(n).
class SnapshotSet {
 public:
    SnapshotSet() = default;
    SnapshotSet(std::vector<CMat> blocks, double noise_variance);

    int num_subarrays() const { return static_cast<int>(blocks_.size()); }
    int num_snapshots() const { return blocks_.empty() ? 0 : static_cast<int>(blocks_.front().cols()); }
    int num_elements() const;
    double noise_variance() const { return noise_variance_; }

    const CMat& block(int l) const { return blocks_.at(static_cast<std::size_t>(l)); }
    CMat& block(int l) { return blocks_.at(static_cast<std::size_t>(l)); }
    const std::vector<CMat>& blocks() const { return blocks_; }

    /// Plain concatenation of the sub-array blocks (M x N), no phase correction.
    CMat stacked() const;

    /// Throws ArgumentError unless the block sizes match the geometry partition.
    void check_against(const ArrayGeometry& geometry) const;

 private:
    std::vector<CMat> blocks_;
    double noise_variance_ = 0.0;
};

/// sigma^2 = 10^(-SNR/10) for unit per-source power.
double noise_variance_from_snr(double snr_db);

/// Each output angle is drawn from U[base - width/2, base + width/2].
std::vector<double> perturb_doas(const std::vector<double>& base, double width, Rng& rng);

/// Circular complex Gaussian sample with E|z|^2 = variance.
cplx complex_normal(Rng& rng, double variance);

/// Deterministic core of the observation model:
/// x_l(n) = exp(-j phi_l(n)) A_l(doas) s(n) + e_l(n), with e drawn from `rng`.
SnapshotSet synthesize(const ArrayGeometry& geometry, const std::vector<double>& doas,
                       const CMat& signals, const RMat& phases, double noise_variance, Rng& rng);

struct Simulation {
    SnapshotSet snapshots;
    GroundTruth truth;
};

/// Draws perturbed DOAs, unit-power Gaussian signals, uniform phases and noise.
Simulation simulate(const Scenario& scenario, Rng& rng);

// Snapshot dump format (text, one value per row):
//   header lines starting with '#', then "n,l,i,re,im" rows in the order
//   n (snapshot), l (sub-array), i (element within sub-array), all 0-based.
// The truth file holds "doa,<q>,<deg>", "phase,<l>,<n>,<rad>" and
// "signal,<q>,<n>,<re>,<im>" rows. Values are printed with 17 significant
// digits so a reload reproduces them exactly.
void write_snapshots_csv(const std::string& path, const SnapshotSet& snapshots,
                         std::uint64_t seed, const std::string& config_hash);
SnapshotSet read_snapshots_csv(const std::string& path);
void write_truth_csv(const std::string& path, const GroundTruth& truth, std::uint64_t seed,
                     const std::string& config_hash);

}  // namespace ncdoa
