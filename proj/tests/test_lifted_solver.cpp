// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ncdoa/estimators.hpp"
#include "ncdoa/lifted_solver.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace ncdoa;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct Tiny {
    ArrayGeometry geometry = ArrayGeometry::uniform_linear(8, 0.5, {4, 4});
    DoaGrid grid = DoaGrid::uniform(-45.0, 45.0, 6.0);
    Dictionary dict = build_dictionary(geometry, grid);
    SnapshotSet snaps;
    std::vector<CMat> x, a;

    Tiny(int n, std::uint64_t seed, double snr_db = 10.0) {
        Rng rng(seed);
        Scenario sc{geometry, {-12.0, 20.0}, n, snr_db, 0.1};
        snaps = simulate(sc, rng).snapshots;
        for (int l = 0; l < 2; ++l) {
            x.push_back(snaps.block(l));
            a.push_back(dict.block(l));
        }
    }
};

// smooth_objective with complex arguments unpacked into real coordinates.
double smooth_at(const CMat& g, const CMat& z, const CMat& y, const Tiny& t, double lambda, double rho) {
    return smooth_objective(g, z, y, t.snaps, t.dict, lambda, rho);
}

}  // namespace

TEST_CASE("default lambda") {
    CHECK_THAT(default_lambda(1.0, 24), WithinRel(1.0 / (24.0 * std::sqrt(2.0 * std::log(120.0))), 1e-14));
    CHECK_THAT(default_lambda(1.0, 24), WithinAbs(0.0134654, 1e-7));
    CHECK_THAT(default_lambda(1.0 / (2.0 * std::log(5.0)), 1), WithinRel(1.0, 1e-14));
    CHECK_THAT(default_lambda(4 * 0.3, 10), WithinRel(default_lambda(0.3, 10) / 2, 1e-14));
    CHECK_THROWS_AS(default_lambda(0.0, 24), ArgumentError);
}

TEST_CASE("default gamma") {
    const auto geo = ArrayGeometry::uniform_linear(24, 0.5, {6, 6, 6, 6});
    const auto dict = build_dictionary(geo, DoaGrid::uniform(-45.0, 45.0, 0.1));
    CHECK_THAT(default_gamma(0.0, 10.0, dict), WithinRel(0.1, 1e-15));
    const double lambda = 0.05;
    const double g = default_gamma(lambda, 10.0, dict);
    CHECK(g <= 1.0 / (lambda * 6 + 10.0));
    double dense = 0.0;
    for (int l = 0; l < 4; ++l) {
        const CMat& a = dict.block(l);
        dense = std::max(dense, Eigen::SelfAdjointEigenSolver<CMat>(a.adjoint() * a).eigenvalues().maxCoeff());
    }
    CHECK(testing::rel_diff(g, 1.0 / (lambda * dense + 10.0)) < 1e-8);
}

TEST_CASE("block layout puts snapshot n, sub-array l in column n*L + l") {
    Rng rng(1);
    std::vector<CMat> z = {testing::random_cmat(rng, 5, 3), testing::random_cmat(rng, 5, 3)};
    const CMat c = concat_blocks(z);
    REQUIRE(c.cols() == 6);
    CHECK(c.col(1 * 3 + 2) == z[1].col(2));
    CHECK(c.col(0 * 3 + 1) == z[0].col(1));
    const auto back = split_blocks(c, 3);
    CHECK(back.size() == 2);
    CHECK(back[1] == z[1]);
}

TEST_CASE("gradient at zero is -lambda A^H x") {
    const Tiny t(2, 3);
    const CMat zero = CMat::Zero(16, 4);
    const double lambda = 0.7;
    const CMat w = wirtinger_gradient(zero, zero, zero, t.snaps, t.dict, lambda, 10.0);
    for (int n = 0; n < 2; ++n)
        for (int l = 0; l < 2; ++l)
            CHECK((w.col(n * 2 + l) + lambda * t.a[l].adjoint() * t.x[l].col(n)).norm() < 1e-13);
}

TEST_CASE("Wirtinger gradient matches central finite differences") {
    Tiny t(2, 4);
    t.grid = DoaGrid::uniform(-40.0, 40.0, 80.0 / 7.0);
    t.dict = build_dictionary(t.geometry, t.grid);
    Rng rng(5);
    const CMat g = testing::random_cmat(rng, 8, 4);
    const CMat z = testing::random_cmat(rng, 8, 4);
    const CMat y = testing::random_cmat(rng, 8, 4, 0.1);
    const double lambda = 0.3, rho = 2.0;
    const CMat w = wirtinger_gradient(g, z, y, t.snaps, t.dict, lambda, rho);
    CMat fd(8, 4);
    const double h = 1e-6;
    for (Eigen::Index j = 0; j < 4; ++j)
        for (Eigen::Index i = 0; i < 8; ++i) {
            CMat gp = g, gm = g;
            gp(i, j) += h;
            gm(i, j) -= h;
            const double dre = (smooth_at(gp, z, y, t, lambda, rho) - smooth_at(gm, z, y, t, lambda, rho)) / (2 * h);
            gp = g;
            gm = g;
            gp(i, j) += cplx(0, h);
            gm(i, j) -= cplx(0, h);
            const double dim = (smooth_at(gp, z, y, t, lambda, rho) - smooth_at(gm, z, y, t, lambda, rho)) / (2 * h);
            fd(i, j) = cplx(dre, dim);
        }
    CHECK((fd - 2.0 * w).norm() / fd.norm() < 1e-5);
}

TEST_CASE("gradient vanishes at the least-squares minimizer") {
    const Tiny t(1, 6);
    Rng rng(7);
    const CMat z = testing::random_cmat(rng, 16, 2);
    const CMat y = testing::random_cmat(rng, 16, 2, 0.1);
    const double lambda = 0.4, rho = 3.0;
    CMat g(16, 2);
    for (int l = 0; l < 2; ++l) {
        const CMat& a = t.a[l];
        const CMat lhs = lambda * a.adjoint() * a + rho * CMat::Identity(16, 16);
        const CVec rhs = lambda * a.adjoint() * t.x[l].col(0) + rho * (z.col(l) - y.col(l));
        g.col(l) = lhs.ldlt().solve(rhs);
    }
    CHECK(wirtinger_gradient(g, z, y, t.snaps, t.dict, lambda, rho).norm() <= 1e-8);
}

TEST_CASE("gradient rejects mismatched shapes") {
    const Tiny t(2, 8);
    const CMat bad = CMat::Zero(16, 3);
    CHECK_THROWS_AS(wirtinger_gradient(bad, bad, bad, t.snaps, t.dict, 1.0, 1.0), ArgumentError);
}

TEST_CASE("inner solve with no sparsity and no data is a pure pull to Z - Y") {
    const Tiny t(2, 9);
    Rng rng(10);
    const CMat z = testing::random_cmat(rng, 16, 4);
    const CMat y = testing::random_cmat(rng, 16, 4, 0.2);
    InnerProblem p{0.0, 0.0, 10.0, 0.1, 1000, 5e-6};
    const auto r = fista_inner(CMat::Zero(16, 4), z, y, t.snaps, t.dict, p);
    CHECK((r.g - (z - y)).norm() <= 1e-5);
}

TEST_CASE("inner solve lowers the objective and agrees with plain proximal gradient") {
    const Tiny t(1, 11);
    Rng rng(12);
    const CMat z = testing::random_cmat(rng, 16, 2, 0.3);
    const CMat y = testing::random_cmat(rng, 16, 2, 0.05);
    const double lambda = default_lambda(t.snaps.noise_variance(), 8);
    const double rho = 10.0;
    InnerProblem p{0.1, lambda, rho, default_gamma(lambda, rho, t.dict), 1000, 5e-6};
    const CMat g0 = CMat::Zero(16, 2);
    const auto r = fista_inner(g0, z, y, t.snaps, t.dict, p);
    const double got = inner_objective(r.g, z, y, t.snaps, t.dict, p);
    CHECK(got <= inner_objective(g0, z, y, t.snaps, t.dict, p));

    const CMat ref = oracle::inner_prox_gradient(g0, z, y, t.x, t.a, 0.1, lambda, rho, 100000);
    const double want = 0.1 * oracle::group_norm(ref) + lambda * oracle::misfit(ref, t.x, t.a) +
                        rho * (ref - z + y).squaredNorm();
    CHECK(testing::rel_diff(got, want) < 1e-6);
}

TEST_CASE("zero observations give the zero solution") {
    std::vector<CMat> blocks = {CMat::Zero(4, 2), CMat::Zero(4, 2)};
    const SnapshotSet snaps(blocks, 0.1);
    const Tiny t(1, 13);
    const auto r = solve_lifted(snaps, t.dict, SolverConfig{});
    for (const auto& z : r.z) CHECK(z.norm() == 0.0);
    CHECK(r.exit_reason == ExitReason::ZeroSolution);
}

TEST_CASE("noiseless on-grid source is found at the right row") {
    const auto geo = ArrayGeometry::uniform_linear(24, 0.5, {6, 6, 6, 6});
    const auto grid = DoaGrid::uniform(-45.0, 45.0, 1.0);
    const auto dict = build_dictionary(geo, grid);
    CMat s(1, 1);
    s(0, 0) = cplx(0.8, 0.6);
    RMat phi(4, 1);
    phi << 0.3, 2.0, 4.1, 5.9;
    Rng rng(14);
    const auto snaps = synthesize(geo, {17.0}, s, phi, 0.0, rng);
    SolverConfig cfg;
    cfg.lambda = default_lambda(1e-6, 24);
    const auto r = solve_lifted(snaps, dict, cfg);
    const RVec xi = spectrum_proposed1(r.z, false);
    Eigen::Index arg = 0;
    xi.maxCoeff(&arg);
    CHECK(arg == grid.nearest_index(17.0));
}

TEST_CASE("solver matches a long Davis-Yin run on a tiny instance") {
    const Tiny t(2, 15);
    const auto r = solve_lifted(t.snaps, t.dict, SolverConfig{});
    const double lambda = default_lambda(t.snaps.noise_variance(), 8);
    const CMat ref = oracle::davis_yin(t.x, t.a, 0.1, 0.9, lambda, 16, 1000000);
    const double want = oracle::penalized(ref, t.x, t.a, 0.1, 0.9, lambda);
    const double got = oracle::penalized(concat_blocks(r.z), t.x, t.a, 0.1, 0.9, lambda);
    CHECK(testing::rel_diff(got, want) < 1e-4);
    CHECK(testing::rel_diff(r.objective, got) < 1e-12);
}

TEST_CASE("stored residual matches the returned iterates") {
    const Tiny t(3, 16);
    const auto r = solve_lifted(t.snaps, t.dict, SolverConfig{});
    const CMat z = concat_blocks(r.z);
    CHECK(testing::rel_diff(r.r_out, (r.g - z).norm() / z.norm()) < 1e-12);
    if (r.exit_reason == ExitReason::Converged) CHECK(r.r_out <= 5e-6);
    else CHECK(r.outer_iterations == 250);
}

TEST_CASE("degenerate weights still converge") {
    const Tiny t(2, 17);
    // Without the row penalty ADMM needs a few hundred outer steps here.
    SolverConfig no_rank;
    no_rank.mu = 0.0;
    no_rank.max_outer = 2000;
    const auto a = solve_lifted(t.snaps, t.dict, no_rank);
    CHECK(a.exit_reason == ExitReason::Converged);
    SolverConfig no_sparse;
    no_sparse.beta = 0.0;
    no_sparse.max_outer = 2000;
    const auto b = solve_lifted(t.snaps, t.dict, no_sparse);
    CHECK(b.exit_reason == ExitReason::Converged);
}

TEST_CASE("a global phase on the data leaves the spectrum unchanged") {
    Tiny t(2, 18);
    const auto r1 = solve_lifted(t.snaps, t.dict, SolverConfig{});
    SnapshotSet rotated = t.snaps;
    for (int l = 0; l < 2; ++l) rotated.block(l) *= std::polar(1.0, 1.234);
    const auto r2 = solve_lifted(rotated, t.dict, SolverConfig{});
    const RVec s1 = spectrum_proposed1(r1.z, false);
    const RVec s2 = spectrum_proposed1(r2.z, false);
    CHECK((s1 - s2).norm() <= 1e-8 * s1.norm());
}

TEST_CASE("non-finite data raise a numeric failure with the iteration") {
    Tiny t(1, 19);
    t.snaps.block(0)(0, 0) = cplx(std::nan(""), 0.0);
    try {
        solve_lifted(t.snaps, t.dict, SolverConfig{});
        FAIL("expected NumericFailure");
    } catch (const NumericFailure& e) {
        CHECK(e.iteration() >= 1);
    }
}

TEST_CASE("config validation") {
    SolverConfig c;
    c.rho = 0.0;
    CHECK_THROWS_AS(c.validate(), ArgumentError);
    c = SolverConfig{};
    c.beta = -1.0;
    CHECK_THROWS_AS(c.validate(), ArgumentError);
    c = SolverConfig{};
    c.max_inner = 0;
    CHECK_THROWS_AS(c.validate(), ArgumentError);
}

TEST_CASE("trace rows and CSV") {
    const Tiny t(1, 20);
    SolverConfig c;
    c.trace = true;
    const auto r = solve_lifted(t.snaps, t.dict, c);
    REQUIRE(static_cast<int>(r.trace.size()) == r.outer_iterations);
    CHECK(r.trace.back().r_out == r.r_out);
    const auto path = (std::filesystem::temp_directory_path() / "ncdoa_trace.csv").string();
    write_trace_csv(path, r.trace);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "iteration,objective,inner_iterations,r_out");
    int rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == r.outer_iterations);
    std::remove(path.c_str());
}
