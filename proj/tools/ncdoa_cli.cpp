// SPDX-License-Identifier: Apache-2.0
//
// ncdoa: simulate, spectrum, bench, presets.
// Exit codes: 0 ok, 1 usage, 2 numeric failure, 3 IO.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <fmt/ranges.h>

#include "run_config.hpp"

using namespace ncdoa;
using ncdoa::cli::RunConfig;

namespace {

enum Exit { kOk = 0, kUsage = 1, kNumeric = 2, kIo = 3 };

struct Flags {
    std::optional<std::string> config;
    std::optional<std::string> preset;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> trials;
    std::optional<int> parallel;
    std::vector<std::string> methods;
    int verbose = 0;
};

RunConfig resolve(const Flags& f) {
    RunConfig cfg = cli::load_run_config(f.config, f.preset);
    if (f.seed) cfg.plan.seed = *f.seed;
    if (f.trials) cfg.plan.trials = *f.trials;
    if (f.parallel) cfg.plan.parallelism = *f.parallel;
    if (!f.methods.empty()) {
        cfg.plan.methods.clear();
        for (const auto& name : f.methods) {
            const auto m = parse_method(name);
            if (!m) {
                std::vector<std::string> names;
                for (Method k : all_methods()) names.push_back(to_string(k));
                throw ArgumentError(fmt::format("unknown method '{}'; choose from {}", name, fmt::join(names, ", ")));
            }
            cfg.plan.methods.push_back(*m);
        }
    }
    if (f.out)
        cfg.out_dir = *f.out;
    else if (const char* env = std::getenv("NCDOA_OUT_DIR"); env && *env)
        cfg.out_dir = env;
    cfg.verbosity = f.verbose;
    return cfg;
}

std::filesystem::path prepare_out(const RunConfig& cfg) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec || !std::filesystem::is_directory(cfg.out_dir))
        throw IoError("cannot create output directory '" + cfg.out_dir + "'");
    return cfg.out_dir;
}

std::vector<std::string> header(const RunConfig& cfg, const std::string& what) {
    return {fmt::format("ncdoa {} preset={}", what, cfg.preset),
            fmt::format("config_hash={} seed={}", cfg.hash(), cfg.plan.seed)};
}

std::string joined(const std::vector<std::string>& lines, const std::string& prefix) {
    std::string out;
    for (const auto& l : lines) out += prefix + l + "\n";
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    os << text;
    if (!os) throw IoError("write to '" + path.string() + "' failed");
}

Simulation simulate_once(const RunConfig& cfg) {
    Rng rng(cfg.plan.seed);
    return simulate(cfg.plan.scenario, rng);
}

int cmd_simulate(const RunConfig& cfg) {
    const auto dir = prepare_out(cfg);
    const auto sim = simulate_once(cfg);
    const auto snaps = dir / "snapshots.csv";
    const auto truth = dir / "truth.csv";
    write_snapshots_csv(snaps.string(), sim.snapshots, cfg.plan.seed, cfg.hash());
    write_truth_csv(truth.string(), sim.truth, cfg.plan.seed, cfg.hash());
    std::cout << snaps.string() << "\n" << truth.string() << "\n";
    return kOk;
}

constexpr const char* kSpectrumPlot = R"(import csv
import glob
import os

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
fig, ax = plt.subplots(figsize=(7, 4))
for path in sorted(glob.glob(os.path.join(here, "spectrum_*.csv"))):
    with open(path) as f:
        rows = list(csv.reader(line for line in f if not line.startswith("#")))[1:]
    ang = [float(r[0]) for r in rows]
    val = [float(r[1]) for r in rows]
    top = max(val) or 1.0
    name = os.path.basename(path)[len("spectrum_"):-len(".csv")]
    ax.plot(ang, [v / top for v in val], label=name)
for d in TRUE_DOAS:
    ax.axvline(d, color="k", linestyle="--", linewidth=0.8)
ax.set_xlabel("angle [deg]")
ax.set_ylabel("normalized spectrum")
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(here, "spectrum.png"), dpi=150)
)";

int cmd_spectrum(const RunConfig& cfg, bool methods_given) {
    const auto dir = prepare_out(cfg);
    const auto sim = simulate_once(cfg);
    const DoaEstimator est(cfg.plan.scenario.geometry, cfg.plan.grid, cfg.plan.estimator);
    const std::vector<Method> methods = methods_given ? cfg.plan.methods : std::vector<Method>{Method::Proposed1};
    const int q = cfg.plan.scenario.num_sources();
    const auto outs = est.estimate_all(methods, sim.snapshots, q, &sim.truth.phases);
    for (const auto& o : outs) {
        auto lines = header(cfg, "spectrum");
        lines.push_back(fmt::format("method={} snr_db={} true_doas={:.6f} estimated={:.4f}", to_string(o.method),
                                    cfg.plan.scenario.snr_db, fmt::join(sim.truth.doas, ","),
                                    fmt::join(o.doa.angles, ",")));
        const auto path = dir / ("spectrum_" + to_string(o.method) + ".csv");
        std::string text;
        for (std::size_t i = 0; i < lines.size(); ++i) text += (i ? "\n" : "") + lines[i];
        write_spectrum_csv(path.string(), o.spectrum, text);
        std::cout << path.string() << "\n";
    }
    std::string script = joined(header(cfg, "spectrum plot"), "# ");
    script += fmt::format("TRUE_DOAS = [{:.6f}]\n", fmt::join(sim.truth.doas, ", "));
    script += kSpectrumPlot;
    write_text(dir / "plot_spectrum.py", script);
    return kOk;
}

constexpr const char* kRmsePlot = R"(import csv
import os
from collections import defaultdict

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(here, "results.csv")) as f:
    rows = list(csv.DictReader(line for line in f if not line.startswith("#")))
doa = defaultdict(list)
phase = defaultdict(list)
for r in rows:
    doa[r["method"]].append((float(r["snr_db"]), float(r["rmse_doa_deg"])))
    if r["rmse_phase_rad"]:
        phase[r["method"]].append((float(r["snr_db"]), float(r["rmse_phase_rad"])))
panels = [("DOA RMSE [deg]", doa)] + ([("phase RMSE [rad]", phase)] if phase else [])
fig, axes = plt.subplots(1, len(panels), figsize=(6 * len(panels), 4), squeeze=False)
for ax, (label, data) in zip(axes[0], panels):
    for name, pts in data.items():
        ax.semilogy([p[0] for p in pts], [p[1] for p in pts], marker="o", label=name)
    ax.set_xlabel("SNR [dB]")
    ax.set_ylabel(label)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(here, "rmse.png"), dpi=150)
)";

int cmd_bench(const RunConfig& cfg) {
    cfg.plan.validate();
    const auto dir = prepare_out(cfg);
    const int total = static_cast<int>(cfg.plan.snrs_db.size()) * cfg.plan.trials;
    ProgressFn progress;
    if (cfg.verbosity > 0)
        progress = [](int done, int all) {
            std::fprintf(stderr, "\r%d/%d trials", done, all);
            if (done == all) std::fputc('\n', stderr);
        };
    const auto table = run_plan(cfg.plan, progress);
    const auto path = dir / "results.csv";
    auto lines = header(cfg, "bench");
    lines.push_back(fmt::format("trials={} snapshots={} sources={}", cfg.plan.trials, cfg.plan.scenario.snapshots,
                                cfg.plan.scenario.num_sources()));
    write_results_csv(path.string(), table, lines);
    write_text(dir / "plot_rmse.py", joined(header(cfg, "bench plot"), "# ") + kRmsePlot);
    std::cout << path.string() << "\n";
    if (table.total_failures() > 0) {
        std::fprintf(stderr, "%d of %d trial-method runs failed numerically\n", table.total_failures(),
                     total * static_cast<int>(cfg.plan.methods.size()));
        return kNumeric;
    }
    return kOk;
}

int cmd_presets() {
    for (const auto& p : presets()) std::cout << fmt::format("{:<6} {}\n", p.name, p.description);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DOA estimation with non-coherent sub-arrays"};
    app.require_subcommand(1);
    Flags f;
    auto add_common = [&f](CLI::App* sub, bool plan_flags) {
        sub->add_option("--config", f.config, "INI config file");
        sub->add_option("--preset", f.preset, "preset scenario (see 'presets')");
        sub->add_option("--seed", f.seed, "master seed");
        sub->add_option("--out", f.out, "output directory (default $NCDOA_OUT_DIR or .)");
        sub->add_option("--method", f.methods, "method name; repeatable");
        sub->add_flag("-v,--verbose", f.verbose, "progress on stderr");
        if (plan_flags) {
            sub->add_option("--trials", f.trials, "trials per SNR")->check(CLI::PositiveNumber);
            sub->add_option("--parallel", f.parallel, "worker threads")->check(CLI::PositiveNumber);
        }
    };
    auto* sim = app.add_subcommand("simulate", "draw one scenario realization and dump it");
    auto* spec = app.add_subcommand("spectrum", "simulate once and write method spectra");
    auto* bench = app.add_subcommand("bench", "Monte Carlo RMSE versus SNR");
    auto* list = app.add_subcommand("presets", "list bundled scenarios");
    add_common(sim, false);
    add_common(spec, false);
    add_common(bench, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (list->parsed()) return cmd_presets();
        const RunConfig cfg = resolve(f);
        if (sim->parsed()) return cmd_simulate(cfg);
        if (spec->parsed()) return cmd_spectrum(cfg, !f.methods.empty());
        if (bench->parsed()) return cmd_bench(cfg);
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kIo;
    } catch (const NumericFailure& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return kNumeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    }
    return kUsage;
}
