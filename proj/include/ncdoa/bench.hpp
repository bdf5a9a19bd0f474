// SPDX-License-Identifier: Apache-2.0
//
// Monte Carlo engine: DOA and phase RMSE versus SNR for a set of methods.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ncdoa/estimators.hpp"

namespace ncdoa {

struct ExperimentPlan {
    Scenario scenario;  ///< its snr_db is replaced by each entry of snrs_db
    std::vector<double> snrs_db{};
    int trials = 50;
    std::vector<Method> methods{};
    std::uint64_t seed = 1;
    int parallelism = 1;
    DoaGrid grid = DoaGrid::uniform(-45.0, 45.0, 0.1);
    EstimatorConfig estimator{};

    void validate() const;
};

struct ResultRow {
    Method method = Method::Proposed1;
    double snr_db = 0.0;
    double rmse_doa_deg = 0.0;
    std::optional<double> rmse_phase_rad;  ///< methods that estimate phases only
    int n_trials = 0;                      ///< trials that produced an estimate
    int n_failed = 0;                      ///< trials lost to numeric failures
    double mean_time_s = 0.0;
    double max_tightness_ratio = 0.0;
    int tightness_failures = 0;  ///< snapshots whose SDP solution was not rank-1
};

struct ResultTable {
    std::vector<ResultRow> rows;  ///< SNR-major, methods in plan order

    const ResultRow* find(Method method, double snr_db) const;
    int total_failures() const;
};

/// Root mean square DOA error in degrees. Each estimate is paired with its
/// truth by the assignment that minimizes the squared error (Q <= 8).
double rmse_doa(const std::vector<std::vector<double>>& estimates,
                const std::vector<std::vector<double>>& truths);

/// Squared-error sum and term count of one trial, with the same assignment.
std::pair<double, int> doa_squared_error(const std::vector<double>& estimate,
                                         const std::vector<double>& truth);

/// Root mean square phase error in radians. Per snapshot the circular mean of
/// the differences is removed and the residuals are wrapped to (-pi, pi].
/// Each entry is an L x N matrix.
double rmse_phase(const std::vector<RMat>& estimates, const std::vector<RMat>& truths);

std::pair<double, int> phase_squared_error(const RMat& estimate, const RMat& truth);

/// Seed of one trial, derived from the master seed by a counter hash.
std::uint64_t trial_seed(std::uint64_t master, std::size_t snr_index, std::size_t trial);

using ProgressFn = std::function<void(int done, int total)>;

/// Runs every (SNR, trial) pair; results do not depend on `parallelism`
/// except for timings.
ResultTable run_plan(const ExperimentPlan& plan, const ProgressFn& progress = {});

/// CSV with columns method, snr_db, rmse_doa_deg, rmse_phase_rad, n_trials,
/// n_failed, mean_time_s, max_tightness_ratio. `header` lines are written
/// first, each prefixed with "# ".
void write_results_csv(const std::string& path, const ResultTable& table,
                       const std::vector<std::string>& header);

struct Preset {
    std::string name;
    std::string description;
    Scenario scenario;
    std::vector<double> snrs_db{};
    std::vector<Method> methods{};
};

/// fig1, fig2, fig6, fig7, fig8, fig9: 24-element half-wavelength ULA split
/// into 4 sub-arrays of 6.
const std::vector<Preset>& presets();
std::optional<Preset> find_preset(const std::string& name);

}  // namespace ncdoa
