// SPDX-License-Identifier: Apache-2.0

#include "ncdoa/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

namespace ncdoa {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

struct MethodTrial {
    bool ok = false;
    std::vector<double> angles;
    std::optional<RMat> phases;
    double seconds = 0.0;
    double max_tightness = 0.0;
    int non_tight = 0;
};

struct TrialRecord {
    std::vector<double> doas;
    RMat phases;
    std::vector<MethodTrial> methods;
};

MethodTrial to_trial(const EstimateOutput& out) {
    MethodTrial m;
    m.ok = true;
    m.angles = out.doa.angles;
    m.seconds = out.seconds;
    if (out.phases) {
        m.phases = out.phases->phases;
        m.max_tightness = out.phases->max_tightness;
        m.non_tight = out.phases->non_tight;
    }
    return m;
}

TrialRecord run_trial(const ExperimentPlan& plan, const DoaEstimator& estimator,
                      std::size_t snr_index, std::size_t trial) {
    Scenario sc = plan.scenario;
    sc.snr_db = plan.snrs_db[snr_index];
    Rng rng(trial_seed(plan.seed, snr_index, trial));
    const Simulation sim = simulate(sc, rng);
    const int q = sc.num_sources();

    TrialRecord rec;
    rec.doas = sim.truth.doas;
    rec.phases = sim.truth.phases;
    rec.methods.resize(plan.methods.size());
    try {
        const auto outs = estimator.estimate_all(plan.methods, sim.snapshots, q, &sim.truth.phases);
        for (std::size_t i = 0; i < outs.size(); ++i) rec.methods[i] = to_trial(outs[i]);
    } catch (const NumericFailure&) {
        // Find out which methods failed by running them one at a time.
        for (std::size_t i = 0; i < plan.methods.size(); ++i) {
            try {
                rec.methods[i] =
                    to_trial(estimator.estimate(plan.methods[i], sim.snapshots, q, &sim.truth.phases));
            } catch (const NumericFailure&) {
                rec.methods[i] = MethodTrial{};
            }
        }
    }
    return rec;
}

}  // namespace

void ExperimentPlan::validate() const {
    scenario.validate();
    if (trials < 1) throw ArgumentError("plan: trials must be >= 1");
    if (snrs_db.empty()) throw ArgumentError("plan: SNR list is empty");
    for (double s : snrs_db)
        if (!std::isfinite(s)) throw ArgumentError("plan: SNR values must be finite");
    if (methods.empty()) throw ArgumentError("plan: method list is empty");
    if (parallelism < 1) throw ArgumentError("plan: parallelism must be >= 1");
}

const ResultRow* ResultTable::find(Method method, double snr_db) const {
    for (const auto& r : rows)
        if (r.method == method && r.snr_db == snr_db) return &r;
    return nullptr;
}

int ResultTable::total_failures() const {
    int n = 0;
    for (const auto& r : rows) n += r.n_failed;
    return n;
}

std::pair<double, int> doa_squared_error(const std::vector<double>& estimate,
                                         const std::vector<double>& truth) {
    if (estimate.size() != truth.size())
        throw ArgumentError("rmse_doa: estimate and truth differ in the number of sources");
    if (truth.size() > 8) throw ArgumentError("rmse_doa: at most 8 sources are supported");
    std::vector<std::size_t> perm(truth.size());
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double sum = 0.0;
        for (std::size_t i = 0; i < perm.size(); ++i) {
            const double d = estimate[perm[i]] - truth[i];
            sum += d * d;
        }
        best = std::min(best, sum);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return {truth.empty() ? 0.0 : best, static_cast<int>(truth.size())};
}

double rmse_doa(const std::vector<std::vector<double>>& estimates,
                const std::vector<std::vector<double>>& truths) {
    if (estimates.size() != truths.size())
        throw ArgumentError("rmse_doa: estimate and truth lists differ in length");
    double sum = 0.0;
    long count = 0;
    for (std::size_t k = 0; k < truths.size(); ++k) {
        const auto [s, c] = doa_squared_error(estimates[k], truths[k]);
        sum += s;
        count += c;
    }
    return count == 0 ? 0.0 : std::sqrt(sum / static_cast<double>(count));
}

std::pair<double, int> phase_squared_error(const RMat& estimate, const RMat& truth) {
    if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
        throw ArgumentError("rmse_phase: estimate and truth shapes differ");
    double sum = 0.0;
    for (Eigen::Index n = 0; n < truth.cols(); ++n) {
        cplx acc(0.0, 0.0);
        for (Eigen::Index l = 0; l < truth.rows(); ++l)
            acc += std::polar(1.0, estimate(l, n) - truth(l, n));
        const double shift = std::abs(acc) > 0.0 ? std::arg(acc) : 0.0;
        for (Eigen::Index l = 0; l < truth.rows(); ++l) {
            const double r = wrap_phase(estimate(l, n) - truth(l, n) - shift);
            sum += r * r;
        }
    }
    return {sum, static_cast<int>(truth.size())};
}

double rmse_phase(const std::vector<RMat>& estimates, const std::vector<RMat>& truths) {
    if (estimates.size() != truths.size())
        throw ArgumentError("rmse_phase: estimate and truth lists differ in length");
    double sum = 0.0;
    long count = 0;
    for (std::size_t k = 0; k < truths.size(); ++k) {
        const auto [s, c] = phase_squared_error(estimates[k], truths[k]);
        sum += s;
        count += c;
    }
    return count == 0 ? 0.0 : std::sqrt(sum / static_cast<double>(count));
}

std::uint64_t trial_seed(std::uint64_t master, std::size_t snr_index, std::size_t trial) {
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ static_cast<std::uint64_t>(snr_index));
    return splitmix64(h ^ static_cast<std::uint64_t>(trial));
}

ResultTable run_plan(const ExperimentPlan& plan, const ProgressFn& progress) {
    plan.validate();
    const DoaEstimator estimator(plan.scenario.geometry, plan.grid, plan.estimator);
    const std::size_t n_snr = plan.snrs_db.size();
    const auto n_trials = static_cast<std::size_t>(plan.trials);
    const std::size_t total = n_snr * n_trials;

    std::vector<TrialRecord> records(total);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    std::mutex mtx;
    std::exception_ptr error;
    int done = 0;

    auto worker = [&] {
        while (!abort.load()) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= total) return;
            try {
                records[idx] = run_trial(plan, estimator, idx / n_trials, idx % n_trials);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mtx);
                if (!error) error = std::current_exception();
                abort.store(true);
                return;
            }
            std::lock_guard<std::mutex> lock(mtx);
            ++done;
            if (progress) progress(done, static_cast<int>(total));
        }
    };

    const auto workers = static_cast<std::size_t>(std::min<long>(plan.parallelism, static_cast<long>(total)));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);

    ResultTable table;
    for (std::size_t s = 0; s < n_snr; ++s) {
        for (std::size_t m = 0; m < plan.methods.size(); ++m) {
            ResultRow row;
            row.method = plan.methods[m];
            row.snr_db = plan.snrs_db[s];
            double doa_sum = 0.0, phase_sum = 0.0, time_sum = 0.0;
            long doa_count = 0, phase_count = 0;
            for (std::size_t t = 0; t < n_trials; ++t) {
                const TrialRecord& rec = records[s * n_trials + t];
                const MethodTrial& mt = rec.methods[m];
                if (!mt.ok) {
                    ++row.n_failed;
                    continue;
                }
                ++row.n_trials;
                const auto [ds, dc] = doa_squared_error(mt.angles, rec.doas);
                doa_sum += ds;
                doa_count += dc;
                if (mt.phases) {
                    const auto [ps, pc] = phase_squared_error(*mt.phases, rec.phases);
                    phase_sum += ps;
                    phase_count += pc;
                }
                time_sum += mt.seconds;
                row.max_tightness_ratio = std::max(row.max_tightness_ratio, mt.max_tightness);
                row.tightness_failures += mt.non_tight;
            }
            if (row.n_trials > 0) {
                row.rmse_doa_deg = doa_count > 0 ? std::sqrt(doa_sum / static_cast<double>(doa_count)) : 0.0;
                row.mean_time_s = time_sum / row.n_trials;
            } else {
                row.rmse_doa_deg = std::numeric_limits<double>::quiet_NaN();
            }
            if (phase_count > 0) row.rmse_phase_rad = std::sqrt(phase_sum / static_cast<double>(phase_count));
            table.rows.push_back(row);
        }
    }
    return table;
}

void write_results_csv(const std::string& path, const ResultTable& table,
                       const std::vector<std::string>& header) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (const auto& line : header) out << "# " << line << '\n';
    out << "method,snr_db,rmse_doa_deg,rmse_phase_rad,n_trials,n_failed,mean_time_s,max_tightness_ratio\n";
    out << std::setprecision(10);
    for (const auto& r : table.rows) {
        out << to_string(r.method) << ',' << r.snr_db << ',' << r.rmse_doa_deg << ',';
        if (r.rmse_phase_rad) out << *r.rmse_phase_rad;
        out << ',' << r.n_trials << ',' << r.n_failed << ',' << r.mean_time_s << ','
            << r.max_tightness_ratio << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

const std::vector<Preset>& presets() {
    static const std::vector<Preset> all = [] {
        const auto geometry = ArrayGeometry::uniform_linear(24, 0.5, {6, 6, 6, 6});
        const std::vector<double> snrs = {0, 5, 10, 15, 20, 25, 30};
        const std::vector<Method> methods = {Method::Proposed1,    Method::Proposed1NoR1,
                                             Method::Proposed2,    Method::SparsityOnly,
                                             Method::LowRankOnly,  Method::NonCoherentMUSIC};
        const std::vector<double> wide = {-15.0, 0.0, 15.0, 30.0};
        const std::vector<double> close = {-7.5, 0.0, 7.5, 15.0};
        auto make = [&](std::string name, std::string desc, std::vector<double> doas, int n) {
            return Preset{std::move(name), std::move(desc), Scenario{geometry, std::move(doas), n, 20.0, 0.1},
                          snrs, methods};
        };
        return std::vector<Preset>{
            make("fig1", "Q=2 near {0, 15} deg, N=1", {0.0, 15.0}, 1),
            make("fig2", "Q=4 near {-15, 0, 15, 30} deg, N=1", wide, 1),
            make("fig6", "Q=4 near {-15, 0, 15, 30} deg, N=5", wide, 5),
            make("fig7", "Q=4 near {-15, 0, 15, 30} deg, N=25", wide, 25),
            make("fig8", "Q=4 near {-7.5, 0, 7.5, 15} deg, N=5", close, 5),
            make("fig9", "Q=4 near {-7.5, 0, 7.5, 15} deg, N=25", close, 25),
        };
    }();
    return all;
}

std::optional<Preset> find_preset(const std::string& name) {
    for (const auto& p : presets())
        if (p.name == name) return p;
    return std::nullopt;
}

}  // namespace ncdoa
