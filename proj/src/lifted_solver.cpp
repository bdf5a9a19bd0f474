// SPDX-License-Identifier: Apache-2.0

#include "ncdoa/lifted_solver.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "ncdoa/prox.hpp"

namespace ncdoa {

void SolverConfig::validate() const {
    if (!(beta >= 0.0) || !(mu >= 0.0)) throw ArgumentError("SolverConfig: beta, mu must be >= 0");
    if (lambda && !(*lambda > 0.0)) throw ArgumentError("SolverConfig: lambda must be > 0");
    if (!(rho > 0.0)) throw ArgumentError("SolverConfig: rho must be > 0");
    if (gamma && !(*gamma > 0.0)) throw ArgumentError("SolverConfig: gamma must be > 0");
    if (max_outer < 1 || max_inner < 1) throw ArgumentError("SolverConfig: iteration caps must be >= 1");
    if (!(tol_outer > 0.0) || !(tol_inner > 0.0))
        throw ArgumentError("SolverConfig: tolerances must be > 0");
}

std::string to_string(ExitReason r) {
    switch (r) {
        case ExitReason::Converged: return "converged";
        case ExitReason::IterationCap: return "iteration_cap";
        case ExitReason::ZeroSolution: return "zero_solution";
    }
    return "unknown";
}

double default_lambda(double noise_variance, int num_elements) {
    if (!(noise_variance > 0.0))
        throw ArgumentError("default_lambda: noise variance must be > 0; set lambda explicitly");
    if (num_elements < 1) throw ArgumentError("default_lambda: M must be >= 1");
    const double m = num_elements;
    return 1.0 / std::sqrt(2.0 * noise_variance * std::log(5.0 * m)) / m;
}

double default_gamma(double lambda, double rho, const Dictionary& dictionary) {
    return 1.0 / (lambda * dictionary.max_gram_norm() + rho);
}

CMat concat_blocks(const std::vector<CMat>& z) {
    if (z.empty()) return {};
    const Eigen::Index cols = z.front().cols();
    CMat out(z.front().rows(), cols * static_cast<Eigen::Index>(z.size()));
    for (std::size_t n = 0; n < z.size(); ++n)
        out.middleCols(static_cast<Eigen::Index>(n) * cols, cols) = z[n];
    return out;
}

std::vector<CMat> split_blocks(const CMat& z, int num_subarrays) {
    if (num_subarrays < 1 || z.cols() % num_subarrays != 0)
        throw ArgumentError("split_blocks: column count is not a multiple of L");
    std::vector<CMat> out;
    for (Eigen::Index c = 0; c < z.cols(); c += num_subarrays)
        out.emplace_back(z.middleCols(c, num_subarrays));
    return out;
}

namespace {

void check_shapes(const CMat& g, const SnapshotSet& snapshots, const Dictionary& dictionary) {
    const int big_l = dictionary.num_subarrays();
    if (snapshots.num_subarrays() != big_l)
        throw ArgumentError("sub-array count differs between snapshots and dictionary");
    if (g.rows() != dictionary.grid_size() || g.cols() != big_l * snapshots.num_snapshots())
        throw ArgumentError("G must be N_theta x (N*L)");
    for (int l = 0; l < big_l; ++l)
        if (snapshots.block(l).rows() != dictionary.block(l).rows())
            throw ArgumentError("sub-array size differs between snapshots and dictionary");
}

using StridedCols = Eigen::Map<CMat, 0, Eigen::OuterStride<>>;
using ConstStridedCols = Eigen::Map<const CMat, 0, Eigen::OuterStride<>>;

// Columns l, l+L, l+2L, ... of a column-major matrix: the N columns of sub-array l.
ConstStridedCols subarray_columns(const CMat& g, int l, int big_l) {
    const Eigen::Index n = g.cols() / big_l;
    return ConstStridedCols(g.data() + l * g.rows(), g.rows(), n,
                            Eigen::OuterStride<>(big_l * g.rows()));
}

StridedCols subarray_columns(CMat& g, int l, int big_l) {
    const Eigen::Index n = g.cols() / big_l;
    return StridedCols(g.data() + l * g.rows(), g.rows(), n, Eigen::OuterStride<>(big_l * g.rows()));
}

// grad(:, cols of l) = lambda * A_l^H (A_l G_l - X_l), for every l.
void data_gradient(const CMat& g, const SnapshotSet& snapshots, const Dictionary& dictionary,
                   double lambda, CMat& grad) {
    const int big_l = dictionary.num_subarrays();
    for (int l = 0; l < big_l; ++l) {
        const CMat& a = dictionary.block(l);
        CMat resid = snapshots.block(l);
        resid.noalias() -= a * subarray_columns(g, l, big_l);
        subarray_columns(grad, l, big_l).noalias() = (-lambda) * (a.adjoint() * resid);
    }
}

}  // namespace

double data_misfit(const CMat& g, const SnapshotSet& snapshots, const Dictionary& dictionary) {
    check_shapes(g, snapshots, dictionary);
    const int big_l = dictionary.num_subarrays();
    double total = 0.0;
    for (int l = 0; l < big_l; ++l)
        total += (dictionary.block(l) * subarray_columns(g, l, big_l) - snapshots.block(l))
                     .squaredNorm();
    return total;
}

double smooth_objective(const CMat& g, const CMat& z_prev, const CMat& y_prev,
                        const SnapshotSet& snapshots, const Dictionary& dictionary,
                        double lambda, double rho) {
    return lambda * data_misfit(g, snapshots, dictionary) + rho * (g - z_prev + y_prev).squaredNorm();
}

CMat wirtinger_gradient(const CMat& g, const CMat& z_prev, const CMat& y_prev,
                        const SnapshotSet& snapshots, const Dictionary& dictionary,
                        double lambda, double rho) {
    check_shapes(g, snapshots, dictionary);
    if (z_prev.rows() != g.rows() || z_prev.cols() != g.cols() || y_prev.rows() != g.rows() ||
        y_prev.cols() != g.cols())
        throw ArgumentError("wirtinger_gradient: Z and Y must match G in shape");
    CMat grad(g.rows(), g.cols());
    data_gradient(g, snapshots, dictionary, lambda, grad);
    grad.noalias() += rho * (g - z_prev + y_prev);
    return grad;
}

double penalized_objective(const CMat& z, const SnapshotSet& snapshots,
                           const Dictionary& dictionary, double beta, double mu, double lambda) {
    double nuc = 0.0;
    if (mu != 0.0)
        for (const auto& zn : split_blocks(z, dictionary.num_subarrays())) nuc += nuclear_norm(zn);
    return beta * group_l12_norm(z) + mu * nuc + lambda * data_misfit(z, snapshots, dictionary);
}

double inner_objective(const CMat& g, const CMat& z_prev, const CMat& y_prev,
                       const SnapshotSet& snapshots, const Dictionary& dictionary,
                       const InnerProblem& problem) {
    return problem.beta * group_l12_norm(g) +
           smooth_objective(g, z_prev, y_prev, snapshots, dictionary, problem.lambda, problem.rho);
}

namespace {

double relative_change(const CMat& now, const CMat& before) {
    const double den = before.norm();
    const double num = (now - before).norm();
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return num / den;
}

}  // namespace

InnerResult fista_inner(const CMat& g_init, const CMat& z_prev, const CMat& y_prev,
                        const SnapshotSet& snapshots, const Dictionary& dictionary,
                        const InnerProblem& problem) {
    check_shapes(g_init, snapshots, dictionary);
    const double gamma = problem.gamma;
    const double threshold = problem.beta * gamma;
    // The rho-term of the gradient does not depend on the data; keep Z - Y.
    const CMat anchor = z_prev - y_prev;

    CMat prev = g_init;  // G~(q-1)
    CMat bar = g_init;   // G-bar(q)
    CMat cur(g_init.rows(), g_init.cols());
    CMat grad(g_init.rows(), g_init.cols());
    double t = 1.0;
    InnerResult res;
    for (int q = 1; q <= problem.max_iterations; ++q) {
        data_gradient(bar, snapshots, dictionary, problem.lambda, grad);
        grad.noalias() += problem.rho * (bar - anchor);
        cur = bar - gamma * grad;
        prox_group_l12_inplace(cur, threshold);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        bar = cur + ((t - 1.0) / t_next) * (cur - prev);
        res.r_in = relative_change(cur, prev);
        res.iterations = q;
        prev.swap(cur);
        t = t_next;
        if (res.r_in <= problem.tolerance) break;
    }
    res.g = std::move(prev);
    return res;
}

LiftedEstimate solve_lifted(const SnapshotSet& snapshots, const Dictionary& dictionary,
                            const SolverConfig& config) {
    config.validate();
    const int big_l = dictionary.num_subarrays();
    const int n = snapshots.num_snapshots();
    const Eigen::Index ntheta = dictionary.grid_size();
    const Eigen::Index cols = static_cast<Eigen::Index>(big_l) * n;

    LiftedEstimate out;
    out.lambda = config.lambda ? *config.lambda
                               : default_lambda(snapshots.noise_variance(), snapshots.num_elements());
    out.gamma = config.gamma ? *config.gamma : default_gamma(out.lambda, config.rho, dictionary);

    InnerProblem inner{config.beta, out.lambda, config.rho, out.gamma, config.max_inner,
                       config.tol_inner};
    const double mu_t = config.mu / config.rho;

    CMat g = CMat::Zero(ntheta, cols);
    CMat z = CMat::Zero(ntheta, cols);
    CMat y = CMat::Zero(ntheta, cols);
    check_shapes(g, snapshots, dictionary);

    out.exit_reason = ExitReason::IterationCap;
    for (int k = 1; k <= config.max_outer; ++k) {
        auto ir = fista_inner(g, z, y, snapshots, dictionary, inner);
        g = std::move(ir.g);
        out.r_in = ir.r_in;
        out.total_inner_iterations += ir.iterations;
        if (!g.allFinite()) throw NumericFailure("solve_lifted: non-finite G", k);

        for (int t = 0; t < n; ++t) {
            const Eigen::Index c0 = static_cast<Eigen::Index>(t) * big_l;
            z.middleCols(c0, big_l) =
                prox_nuclear(g.middleCols(c0, big_l) + y.middleCols(c0, big_l), mu_t);
        }
        y += g - z;
        if (!z.allFinite() || !y.allFinite()) throw NumericFailure("solve_lifted: non-finite Z/Y", k);

        out.outer_iterations = k;
        const double zn = z.norm();
        const double gap = (g - z).norm();
        bool zero = false;
        if (zn == 0.0) {
            zero = gap == 0.0;
            out.r_out = zero ? 0.0 : std::numeric_limits<double>::infinity();
        } else {
            out.r_out = gap / zn;
        }
        if (config.trace) {
            TraceRow row;
            row.iteration = k;
            row.objective = penalized_objective(z, snapshots, dictionary, config.beta, config.mu,
                                                out.lambda);
            row.inner_iterations = ir.iterations;
            row.r_out = out.r_out;
            out.trace.push_back(row);
        }
        if (zero) {
            out.exit_reason = ExitReason::ZeroSolution;
            break;
        }
        if (out.r_out <= config.tol_outer) {
            out.exit_reason = ExitReason::Converged;
            break;
        }
    }

    out.objective = penalized_objective(z, snapshots, dictionary, config.beta, config.mu, out.lambda);
    out.data_residual = data_misfit(z, snapshots, dictionary);
    out.feasible = out.data_residual <=
                   config.feasibility_c * n * snapshots.num_elements() * snapshots.noise_variance();
    if (!std::isfinite(out.objective))
        throw NumericFailure("solve_lifted: non-finite objective", out.outer_iterations);
    out.g = std::move(g);
    out.y = std::move(y);
    out.z = split_blocks(z, big_l);
    return out;
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << std::setprecision(12);
    os << "iteration,objective,inner_iterations,r_out\n";
    for (const auto& r : trace)
        os << r.iteration << ',' << r.objective << ',' << r.inner_iterations << ',' << r.r_out << '\n';
    if (!os) throw IoError("write to '" + path + "' failed");
}

}  // namespace ncdoa
