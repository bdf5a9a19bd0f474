// SPDX-License-Identifier: Apache-2.0
//
// INI run configuration for the command-line tool.
//
//   [geometry]  elements, spacing (wavelengths), subarrays (e.g. 6,6,6,6)
//   [scenario]  preset, doas, snapshots, snr_db, perturbation
//   [plan]      snrs_db, trials, methods, seed, parallelism, grid_min, grid_max, grid_step
//   [solver]    beta, mu, rho, lambda, max_outer, max_inner, tol_outer, tol_inner, sdp_rho
//
// A preset fills every field first; keys present in the file override it.

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "ncdoa/bench.hpp"

namespace ncdoa::cli {

struct RunConfig {
    std::string preset;
    ExperimentPlan plan;  ///< plan.scenario.snr_db is the single-run SNR
    std::string out_dir = ".";
    int verbosity = 0;

    /// Resolved settings as sorted key=value lines; the input to hash().
    std::string canonical() const;
    /// FNV-1a 64 of canonical(), as 16 hex digits.
    std::string hash() const;
};

/// Builds a config from a preset (default "fig1" when neither is given) and
/// an optional INI file. Throws IoError for unreadable files and
/// ArgumentError for unknown keys or malformed values.
RunConfig load_run_config(const std::optional<std::string>& ini_path,
                          const std::optional<std::string>& preset);

std::uint64_t fnv1a64(const std::string& text);

}  // namespace ncdoa::cli
