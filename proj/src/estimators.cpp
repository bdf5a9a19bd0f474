// SPDX-License-Identifier: Apache-2.0

#include "ncdoa/estimators.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace ncdoa {

std::string to_string(Method m) {
    switch (m) {
        case Method::Proposed1: return "Proposed1";
        case Method::Proposed1NoR1: return "Proposed1NoR1";
        case Method::Proposed2: return "Proposed2";
        case Method::SparsityOnly: return "SparsityOnly";
        case Method::LowRankOnly: return "LowRankOnly";
        case Method::NonCoherentMUSIC: return "NonCoherentMUSIC";
        case Method::GenieMUSIC: return "GenieMUSIC";
    }
    return "unknown";
}

std::vector<Method> all_methods() {
    return {Method::Proposed1,   Method::Proposed1NoR1,    Method::Proposed2, Method::SparsityOnly,
            Method::LowRankOnly, Method::NonCoherentMUSIC, Method::GenieMUSIC};
}

std::optional<Method> parse_method(const std::string& name) {
    for (Method m : all_methods())
        if (to_string(m) == name) return m;
    return std::nullopt;
}

CMat rank1_approx(const CMat& z) {
    if (z.size() == 0) return z;
    if (z.cols() > z.rows()) return rank1_approx(z.adjoint()).adjoint();
    // With Z^H Z v1 = s1^2 v1, sigma_1 u_1 = Z v_1, so the approximation is Z v1 v1^H.
    Eigen::SelfAdjointEigenSolver<CMat> es(z.adjoint() * z);
    const Eigen::Index k = z.cols() - 1;
    if (!(es.eigenvalues()[k] > 0.0)) return CMat::Zero(z.rows(), z.cols());
    const CVec v1 = es.eigenvectors().col(k);
    return (z * v1) * v1.adjoint();
}

RVec spectrum_proposed1(const std::vector<CMat>& z, bool use_rank1) {
    if (z.empty()) throw ArgumentError("spectrum_proposed1: no lifted estimates");
    RVec acc = RVec::Zero(z.front().rows());
    for (const auto& zn : z) {
        if (use_rank1)
            acc += rank1_approx(zn).rowwise().squaredNorm();
        else
            acc += zn.rowwise().squaredNorm();
    }
    return acc.cwiseSqrt();
}

DoaEstimate pick_peaks(const Spectrum& spectrum, int q) {
    const auto& s = spectrum.scores;
    const auto n = static_cast<int>(s.size());
    if (q < 1) throw ArgumentError("pick_peaks: Q must be >= 1");
    if (q > n) throw ArgumentError("pick_peaks: Q exceeds the grid size");
    if (static_cast<int>(spectrum.angles.size()) != n)
        throw ArgumentError("pick_peaks: scores and grid differ in length");

    auto by_score = [&](int a, int b) { return s[a] > s[b] || (s[a] == s[b] && a < b); };
    std::vector<int> maxima;
    for (int i = 0; i < n; ++i) {
        const bool left = i == 0 || s[i] > s[i - 1];
        const bool right = i == n - 1 || s[i] > s[i + 1];
        if (left && right) maxima.push_back(i);
    }
    std::sort(maxima.begin(), maxima.end(), by_score);
    if (static_cast<int>(maxima.size()) > q) maxima.resize(static_cast<std::size_t>(q));

    DoaEstimate est;
    est.indices = maxima;
    if (static_cast<int>(est.indices.size()) < q) {
        std::vector<char> taken(static_cast<std::size_t>(n), 0);
        for (int i : est.indices) taken[static_cast<std::size_t>(i)] = 1;
        std::vector<int> rest;
        for (int i = 0; i < n; ++i)
            if (!taken[static_cast<std::size_t>(i)]) rest.push_back(i);
        std::sort(rest.begin(), rest.end(), by_score);
        for (int i : rest) {
            if (static_cast<int>(est.indices.size()) == q) break;
            est.indices.push_back(i);
            ++est.fallback_count;
        }
    }
    for (int i : est.indices) est.angles.push_back(spectrum.angles[static_cast<std::size_t>(i)]);
    return est;
}

CMat forward_backward(const CMat& r) {
    // (J conj(R) J)[i,k] = conj(R[M-1-i, M-1-k])
    const CMat flipped = r.conjugate().reverse();
    return 0.5 * (r + flipped);
}

RVec music_from_covariance(const CMat& r, const CMat& steering, int q) {
    const Eigen::Index m = r.rows();
    if (r.cols() != m) throw ArgumentError("music: covariance must be square");
    if (q < 0 || q >= m) throw ArgumentError("music: need 0 <= Q < M");
    if (steering.rows() != m) throw ArgumentError("music: steering size differs from covariance");
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (r + r.adjoint()));
    // Ascending eigenvalues: the first M - Q eigenvectors span the noise subspace.
    const auto noise = es.eigenvectors().leftCols(m - q);
    const RVec proj = (noise.adjoint() * steering).colwise().squaredNorm().transpose();
    RVec out(proj.size());
    for (Eigen::Index i = 0; i < proj.size(); ++i)
        out[i] = 1.0 / std::max(proj[i], std::numeric_limits<double>::min());
    return out;
}

RVec music_spectrum(const CMat& x, const ArrayGeometry& geometry, const DoaGrid& grid, int q,
                    bool forward_backward_smoothing) {
    if (x.cols() < 1) throw ArgumentError("music_spectrum: need at least one snapshot");
    if (x.rows() != geometry.num_elements())
        throw ArgumentError("music_spectrum: snapshot length differs from array size");
    if (q >= geometry.num_elements()) throw ArgumentError("music_spectrum: need Q < M");
    CMat r = (x * x.adjoint()) / static_cast<double>(x.cols());
    if (forward_backward_smoothing) r = forward_backward(r);
    return music_from_covariance(r, array_manifold(geometry, grid.angles()), q);
}

RVec noncoherent_music(const SnapshotSet& snapshots, const ArrayGeometry& geometry,
                       const DoaGrid& grid, int q) {
    snapshots.check_against(geometry);
    if (!geometry.subarrays_identical())
        throw UnsupportedConfiguration(
            "NonCoherentMUSIC requires sub-arrays with identical element configuration");
    const int m = geometry.subarray_size(0);
    if (q >= m) throw ArgumentError("noncoherent_music: need Q < M_l");
    CMat r = CMat::Zero(m, m);
    for (const auto& b : snapshots.blocks()) r.noalias() += b * b.adjoint();
    r /= static_cast<double>(snapshots.num_snapshots() * snapshots.num_subarrays());
    r = forward_backward(r);
    CMat steering(m, grid.size());
    for (int i = 0; i < grid.size(); ++i) steering.col(i) = steering_vector(geometry, 0, grid[i]);
    return music_from_covariance(r, steering, q);
}

double l1_objective(const CVec& x, const CMat& a, const CVec& s, double lambda) {
    return lambda * (x - a * s).squaredNorm() + s.cwiseAbs().sum();
}

L1Result l1_single_snapshot(const CVec& x, const CMat& a, double noise_variance,
                            const L1Options& options) {
    if (x.size() != a.rows()) throw ArgumentError("l1_single_snapshot: x and A differ in rows");
    L1Result res;
    res.lambda = options.lambda ? *options.lambda
                                : default_lambda(noise_variance, static_cast<int>(a.rows()));
    const double lambda = res.lambda;
    const double lip = lambda * (options.gram_norm ? *options.gram_norm : gram_spectral_norm(a));
    res.s = CVec::Zero(a.cols());
    if (x.isZero(0.0) || lip == 0.0) {
        res.objective = l1_objective(x, a, res.s, lambda);
        return res;
    }
    // Wirtinger gradient lambda A^H (A s - x) with step 1/lip; the soft
    // threshold of the unweighted-distance prox is step/2.
    const double step = 1.0 / lip;
    const double tau = 0.5 * step;
    const CVec ahx = a.adjoint() * x;
    CVec prev = res.s, bar = res.s, cur(a.cols());
    double t = 1.0;
    for (int it = 1; it <= options.max_iterations; ++it) {
        cur = bar - step * lambda * (a.adjoint() * (a * bar) - ahx);
        for (Eigen::Index i = 0; i < cur.size(); ++i) {
            const double mag = std::abs(cur[i]);
            // Written so that a NaN magnitude propagates instead of zeroing.
            cur[i] = mag <= tau ? cplx(0.0, 0.0) : cur[i] * (1.0 - tau / mag);
        }
        // Gradient restart: drop the momentum when it points uphill.
        if ((bar - cur).dot(cur - prev).real() > 0.0) t = 1.0;
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        bar = cur + ((t - 1.0) / t_next) * (cur - prev);
        const double den = prev.norm();
        const double change = (cur - prev).norm();
        prev.swap(cur);
        t = t_next;
        res.iterations = it;
        if (!prev.allFinite()) throw NumericFailure("l1_single_snapshot: non-finite iterate", it);
        if (den > 0.0 && change <= options.tolerance * den) break;
        if (den == 0.0 && change == 0.0) break;
    }
    res.s = std::move(prev);
    res.objective = l1_objective(x, a, res.s, lambda);
    return res;
}

DoaEstimator::DoaEstimator(ArrayGeometry geometry, DoaGrid grid, EstimatorConfig config)
    : geometry_(std::move(geometry)),
      grid_(std::move(grid)),
      dictionary_(build_dictionary(geometry_, grid_)),
      stacked_(dictionary_.stacked()),
      stacked_gram_norm_(gram_spectral_norm(stacked_)),
      config_(std::move(config)) {
    config_.solver.validate();
}

Spectrum DoaEstimator::wrap(RVec scores) const { return {grid_.angles(), std::move(scores)}; }

PhaseEstimates DoaEstimator::synchronize(const LiftedEstimate& lifted) const {
    PhaseEstimates out;
    const auto n = static_cast<Eigen::Index>(lifted.z.size());
    out.phases.resize(geometry_.num_subarrays(), n);
    for (Eigen::Index t = 0; t < n; ++t) {
        SdpOptions opts = config_.sdp;
        opts.seed = config_.sdp.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(t);
        const auto sync = solve_phase_sdp(lifted.z[static_cast<std::size_t>(t)], opts);
        const auto ph = extract_phases(sync);
        out.phases.col(t) = ph.phases;
        out.max_tightness = std::max(out.max_tightness, sync.tightness);
        if (!ph.tight) ++out.non_tight;
    }
    return out;
}

Spectrum DoaEstimator::coherent_spectrum(const CMat& corrected, double noise_variance, int q) const {
    if (corrected.cols() == 1) {
        L1Options opts = config_.l1;
        if (!opts.gram_norm) opts.gram_norm = stacked_gram_norm_;
        const auto res = l1_single_snapshot(corrected.col(0), stacked_, noise_variance, opts);
        return wrap(res.s.cwiseAbs());
    }
    return wrap(music_spectrum(corrected, geometry_, grid_, q, true));
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

SolverConfig solver_for(Method m, const SolverConfig& base) {
    SolverConfig c = base;
    if (m == Method::SparsityOnly) {
        c.beta = 1.0;
        c.mu = 0.0;
    } else if (m == Method::LowRankOnly) {
        c.beta = 0.0;
        c.mu = 1.0;
    }
    return c;
}

bool needs_lifted(Method m) {
    return m != Method::NonCoherentMUSIC && m != Method::GenieMUSIC;
}

}  // namespace

EstimateOutput DoaEstimator::estimate(Method method, const SnapshotSet& snapshots, int q,
                                      const RMat* true_phases) const {
    const Method one[] = {method};
    return std::move(estimate_all(one, snapshots, q, true_phases).front());
}

std::vector<EstimateOutput> DoaEstimator::estimate_all(std::span<const Method> methods,
                                                       const SnapshotSet& snapshots, int q,
                                                       const RMat* true_phases) const {
    snapshots.check_against(geometry_);
    if (q < 1) throw ArgumentError("estimate: Q must be >= 1");

    // One lifted solve per distinct (beta, mu) pair.
    struct Solved {
        LiftedEstimate lifted;
        double seconds = 0.0;
    };
    std::map<std::pair<double, double>, Solved> solved;
    auto lifted_for = [&](Method m) -> const Solved& {
        const SolverConfig cfg = solver_for(m, config_.solver);
        const auto key = std::make_pair(cfg.beta, cfg.mu);
        auto it = solved.find(key);
        if (it == solved.end()) {
            const auto t0 = Clock::now();
            Solved s{solve_lifted(snapshots, dictionary_, cfg), 0.0};
            s.seconds = seconds_since(t0);
            it = solved.emplace(key, std::move(s)).first;
        }
        return it->second;
    };

    std::vector<EstimateOutput> outs;
    for (Method m : methods) {
        EstimateOutput out;
        out.method = m;
        double shared = 0.0;
        const Solved* lifted = nullptr;
        if (needs_lifted(m)) {
            lifted = &lifted_for(m);
            shared = lifted->seconds;
        }
        const auto t0 = Clock::now();
        switch (m) {
            case Method::Proposed1:
            case Method::SparsityOnly:
            case Method::LowRankOnly:
                out.spectrum = wrap(spectrum_proposed1(lifted->lifted.z, true));
                break;
            case Method::Proposed1NoR1:
                out.spectrum = wrap(spectrum_proposed1(lifted->lifted.z, false));
                break;
            case Method::Proposed2: {
                auto ph = synchronize(lifted->lifted);
                const CMat corrected = phase_correct(snapshots, ph.phases);
                out.spectrum = coherent_spectrum(corrected, snapshots.noise_variance(), q);
                out.phases = std::move(ph);
                break;
            }
            case Method::NonCoherentMUSIC:
                out.spectrum = wrap(noncoherent_music(snapshots, geometry_, grid_, q));
                break;
            case Method::GenieMUSIC: {
                if (!true_phases) throw ArgumentError("GenieMUSIC needs the true phases");
                const CMat corrected = phase_correct(snapshots, *true_phases);
                out.spectrum = wrap(music_spectrum(corrected, geometry_, grid_, q, true));
                break;
            }
        }
        if (!out.spectrum.scores.allFinite())
            throw NumericFailure(to_string(m) + ": non-finite spectrum", 0);
        out.doa = pick_peaks(out.spectrum, q);
        out.seconds = shared + seconds_since(t0);
        outs.push_back(std::move(out));
    }
    return outs;
}

void write_spectrum_csv(const std::string& path, const Spectrum& spectrum,
                        const std::string& header_comment) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    std::string line;
    std::istringstream hs(header_comment);
    while (std::getline(hs, line)) os << "# " << line << '\n';
    os << "angle_deg,score\n";
    for (std::size_t i = 0; i < spectrum.angles.size(); ++i)
        os << spectrum.angles[i] << ',' << spectrum.scores[static_cast<Eigen::Index>(i)] << '\n';
    if (!os) throw IoError("write to '" + path + "' failed");
}

}  // namespace ncdoa
