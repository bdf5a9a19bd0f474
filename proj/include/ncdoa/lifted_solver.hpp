// SPDX-License-Identifier: Apache-2.0
//
// Joint row-sparse + low-rank recovery of the lifted matrices Z_n = s(n) p(n)^H
// from non-coherent sub-array snapshots. Minimizes the penalized program
//
//   beta * ||[Z_1..Z_N]||_{1,2} + mu * sum_n ||Z_n||_*
//        + lambda * sum_{n,l} ||x_l(n) - A_l Z_n[:,l]||^2
//
// with an ADMM split G = Z whose G-step is solved by FISTA.
//
// Layout: G, Z and Y are N_theta x (N*L) matrices; column n*L + l (0-based)
// belongs to snapshot n and sub-array l.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ncdoa/array_model.hpp"
#include "ncdoa/sim.hpp"

namespace ncdoa {

struct SolverConfig {
    double beta = 0.1;
    double mu = 0.9;
    /// Data-fit weight. Unset means default_lambda(sigma^2, M).
    std::optional<double> lambda;
    double rho = 10.0;
    /// FISTA step. Unset means default_gamma(lambda, rho, dictionary).
    std::optional<double> gamma;
    int max_outer = 250;
    int max_inner = 1000;
    double tol_outer = 5e-6;
    double tol_inner = 5e-6;
    /// Feasibility constant of the constrained form; used only for reporting.
    double feasibility_c = 2.0;
    /// Record one trace row per outer iteration.
    bool trace = false;

    void validate() const;
};

enum class ExitReason { Converged, IterationCap, ZeroSolution };

std::string to_string(ExitReason r);

struct TraceRow {
    int iteration = 0;
    double objective = 0.0;
    int inner_iterations = 0;
    double r_out = 0.0;
};

struct LiftedEstimate {
    std::vector<CMat> z;  ///< Z_n, each N_theta x L
    double r_out = 0.0;
    double r_in = 0.0;  ///< residual of the last inner solve
    int outer_iterations = 0;
    long total_inner_iterations = 0;
    ExitReason exit_reason = ExitReason::Converged;
    double objective = 0.0;  ///< penalized objective at the returned Z
    double data_residual = 0.0;  ///< sum ||x_l(n) - A_l Z_n[:,l]||^2
    bool feasible = false;  ///< data_residual <= C * N * M * sigma^2
    double lambda = 0.0;
    double gamma = 0.0;
    CMat g;  ///< final split variable, concatenated layout
    CMat y;  ///< final scaled dual, concatenated layout
    std::vector<TraceRow> trace;
};

/// lambda = 1 / (M * sqrt(2 sigma^2 ln(5M))).
double default_lambda(double noise_variance, int num_elements);

/// gamma = 1 / (lambda * max_l ||A_l^H A_l|| + rho).
double default_gamma(double lambda, double rho, const Dictionary& dictionary);

/// Concatenates Z_1..Z_N into the N_theta x (N*L) layout.
CMat concat_blocks(const std::vector<CMat>& z);
/// Splits an N_theta x (N*L) matrix into N blocks of L columns.
std::vector<CMat> split_blocks(const CMat& z, int num_subarrays);

/// lambda * sum ||x - A g||^2 + rho * ||G - Z + Y||_F^2
double smooth_objective(const CMat& g, const CMat& z_prev, const CMat& y_prev,
                        const SnapshotSet& snapshots, const Dictionary& dictionary,
                        double lambda, double rho);

/// Wirtinger gradient of smooth_objective with respect to G (conjugate held
/// constant): column (l,n) is lambda A_l^H (A_l g - x_l(n)) + rho (G - Z + Y).
/// The real-coordinate gradient is twice this.
CMat wirtinger_gradient(const CMat& g, const CMat& z_prev, const CMat& y_prev,
                        const SnapshotSet& snapshots, const Dictionary& dictionary,
                        double lambda, double rho);

/// Sum over (l,n) of ||x_l(n) - A_l g_{l,n}||^2.
double data_misfit(const CMat& g, const SnapshotSet& snapshots, const Dictionary& dictionary);

/// Penalized objective evaluated at a concatenated Z.
double penalized_objective(const CMat& z, const SnapshotSet& snapshots,
                           const Dictionary& dictionary, double beta, double mu, double lambda);

/// Parameters of one G-step.
struct InnerProblem {
    double beta = 0.1;
    double lambda = 1.0;
    double rho = 10.0;
    double gamma = 0.05;
    int max_iterations = 1000;
    double tolerance = 5e-6;
};

struct InnerResult {
    CMat g;
    int iterations = 0;
    double r_in = 0.0;
};

/// FISTA on beta ||G||_{1,2} + smooth_objective(G), warm-started at g_init.
InnerResult fista_inner(const CMat& g_init, const CMat& z_prev, const CMat& y_prev,
                        const SnapshotSet& snapshots, const Dictionary& dictionary,
                        const InnerProblem& problem);

/// G_inner objective: beta ||G||_{1,2} + smooth_objective(G).
double inner_objective(const CMat& g, const CMat& z_prev, const CMat& y_prev,
                       const SnapshotSet& snapshots, const Dictionary& dictionary,
                       const InnerProblem& problem);

/// Runs the integrated ADMM + FISTA scheme from G = Z = Y = 0.
LiftedEstimate solve_lifted(const SnapshotSet& snapshots, const Dictionary& dictionary,
                            const SolverConfig& config);

/// Writes the trace as CSV (iteration,objective,inner_iterations,r_out).
void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace);

}  // namespace ncdoa
