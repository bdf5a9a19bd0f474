// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ncdoa/estimators.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace ncdoa;

namespace {

Spectrum make_spectrum(std::vector<double> scores) {
    Spectrum s;
    s.scores = Eigen::Map<RVec>(scores.data(), static_cast<Eigen::Index>(scores.size()));
    for (std::size_t i = 0; i < scores.size(); ++i) s.angles.push_back(static_cast<double>(i));
    return s;
}

ArrayGeometry ula24() { return ArrayGeometry::uniform_linear(24, 0.5, {6, 6, 6, 6}); }

CVec soft(const CVec& v, double t) {
    CVec out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double m = std::abs(v[i]);
        out[i] = m > t ? v[i] * (1.0 - t / m) : cplx(0.0, 0.0);
    }
    return out;
}

double median(RVec v) {
    std::vector<double> s(v.data(), v.data() + v.size());
    std::nth_element(s.begin(), s.begin() + static_cast<long>(s.size() / 2), s.end());
    return s[s.size() / 2];
}

}  // namespace

TEST_CASE("rank-1 approximation: fixed points and zero") {
    Rng rng(1);
    const CMat r1 = testing::random_cmat(rng, 16, 1) * testing::random_cmat(rng, 1, 4);
    CHECK((rank1_approx(r1) - r1).norm() <= 1e-10);
    CHECK(rank1_approx(CMat::Zero(16, 4)).norm() == 0.0);
}

TEST_CASE("rank-1 approximation beats random rank-1 candidates") {
    Rng rng(2);
    const CMat z = testing::random_cmat(rng, 16, 4);
    const CMat best = rank1_approx(z);
    const double d = (z - best).norm();
    Eigen::JacobiSVD<CMat> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const CMat u = svd.singularValues()[0] * svd.matrixU().col(0);
    const CMat v = svd.matrixV().col(0).adjoint();
    for (int k = 0; k < 10000; ++k) {
        // Half the candidates are small perturbations of the factors.
        const CMat cand = k % 2 == 0 ? CMat((u + testing::random_cmat(rng, 16, 1, 0.01)) *
                                            (v + testing::random_cmat(rng, 1, 4, 0.01)))
                                     : CMat(testing::random_cmat(rng, 16, 1) * testing::random_cmat(rng, 1, 4));
        CHECK(d <= (z - cand).norm() + 1e-12);
    }
}

TEST_CASE("Proposed1 spectrum: zero, single row, unitary invariance") {
    Rng rng(3);
    CHECK(spectrum_proposed1({CMat::Zero(10, 4)}, true).norm() == 0.0);

    CMat z = CMat::Zero(10, 4);
    z.row(6) = testing::random_cmat(rng, 1, 4);
    const RVec xi = spectrum_proposed1({z, 2.0 * z}, true);
    for (Eigen::Index i = 0; i < 10; ++i) CHECK((i == 6) == (xi[i] > 0.0));

    const std::vector<CMat> zs = {testing::random_cmat(rng, 10, 4), testing::random_cmat(rng, 10, 4)};
    const CMat u = Eigen::HouseholderQR<CMat>(testing::random_cmat(rng, 4, 4)).householderQ();
    const std::vector<CMat> rotated = {zs[0] * u, zs[1] * u};
    CHECK((spectrum_proposed1(zs, true) - spectrum_proposed1(rotated, true)).norm() <= 1e-12);
    CHECK((spectrum_proposed1(zs, false) - spectrum_proposed1(rotated, false)).norm() <= 1e-12);
}

TEST_CASE("with and without rank-1 agree on rank-1 estimates") {
    Rng rng(4);
    std::vector<CMat> zs;
    for (int n = 0; n < 3; ++n) zs.push_back(testing::random_cmat(rng, 12, 1) * testing::random_cmat(rng, 1, 4));
    CHECK((spectrum_proposed1(zs, true) - spectrum_proposed1(zs, false)).norm() <= 1e-10);
}

TEST_CASE("peak picking: isolated spikes sorted by score") {
    const auto e = pick_peaks(make_spectrum({0, 3, 0, 0, 5, 0, 0, 1, 0}), 3);
    CHECK(e.indices == std::vector<int>{4, 1, 7});
    CHECK(e.angles == std::vector<double>{4, 1, 7});
    CHECK(e.fallback_count == 0);
}

TEST_CASE("peak picking: increasing spectrum takes the right endpoint") {
    const auto e = pick_peaks(make_spectrum({1, 2, 3, 4, 5}), 1);
    CHECK(e.indices == std::vector<int>{4});
}

TEST_CASE("peak picking: flat spectrum falls back to lowest indices") {
    const auto e = pick_peaks(make_spectrum({2, 2, 2, 2}), 2);
    CHECK(e.indices == std::vector<int>{0, 1});
    CHECK(e.fallback_count == 2);
}

TEST_CASE("peak picking: fallback fills after the local maxima") {
    const auto e = pick_peaks(make_spectrum({0, 1, 2, 9, 8, 7}), 2);
    CHECK(e.indices == std::vector<int>{3, 4});
    CHECK(e.fallback_count == 1);
    CHECK_THROWS_AS(pick_peaks(make_spectrum({1, 2}), 3), ArgumentError);
    CHECK_THROWS_AS(pick_peaks(make_spectrum({1, 2}), 0), ArgumentError);
}

TEST_CASE("forward-backward covariance is persymmetric") {
    Rng rng(5);
    const CMat x = testing::random_cmat(rng, 6, 9);
    const CMat r = forward_backward(x * x.adjoint() / 9.0);
    const CMat j = CMat::Identity(6, 6).rowwise().reverse();
    CHECK((j * r.conjugate() * j - r).norm() <= 1e-12);
}

TEST_CASE("MUSIC with Q = 0 is flat for isotropic elements") {
    const auto geo = ArrayGeometry::uniform_linear(8, 0.5, {8});
    const auto grid = DoaGrid::uniform(-60.0, 60.0, 1.0);
    CMat steer(8, grid.size());
    for (int i = 0; i < grid.size(); ++i) steer.col(i) = array_steering_vector(geo, grid[i]);
    Rng rng(6);
    const CMat x = testing::random_cmat(rng, 8, 20);
    const RVec xi = music_from_covariance(x * x.adjoint(), steer, 0);
    CHECK((xi.array() - 1.0 / 8.0).abs().maxCoeff() <= 1e-12);
    CHECK_THROWS_AS(music_from_covariance(x * x.adjoint(), steer, 8), ArgumentError);
}

TEST_CASE("MUSIC is invariant to scaling the covariance") {
    Rng rng(7);
    const auto geo = ArrayGeometry::uniform_linear(8, 0.5, {8});
    const auto grid = DoaGrid::uniform(-60.0, 60.0, 1.0);
    CMat steer(8, grid.size());
    for (int i = 0; i < grid.size(); ++i) steer.col(i) = array_steering_vector(geo, grid[i]);
    const CMat x = testing::random_cmat(rng, 8, 20);
    const CMat r = x * x.adjoint();
    const RVec a = music_from_covariance(r, steer, 2);
    const RVec b = music_from_covariance(37.5 * r, steer, 2);
    CHECK((a - b).norm() <= 1e-10 * a.norm());
}

TEST_CASE("coherent MUSIC peaks at the truth on noiseless corrected data") {
    const auto geo = ula24();
    const auto grid = DoaGrid::uniform(-45.0, 45.0, 0.1);
    Scenario sc{geo, {-15.0, 0.0, 15.0, 30.0}, 25, 300.0, 0.0};
    Rng rng(8);
    const auto sim = simulate(sc, rng);
    const CMat corrected = phase_correct(sim.snapshots, sim.truth.phases);
    const RVec xi = music_spectrum(corrected, geo, grid, 4, true);
    const auto e = pick_peaks(Spectrum{grid.angles(), xi}, 4);
    std::vector<int> got = e.indices;
    std::sort(got.begin(), got.end());
    std::vector<int> want;
    for (double d : sc.base_doas) want.push_back(grid.nearest_index(d));
    CHECK(got == want);
    for (int i : want) CHECK(xi[i] >= 1e6 * median(xi));
    CHECK_THROWS_AS(music_spectrum(corrected, geo, grid, 24, true), ArgumentError);
}

TEST_CASE("non-coherent MUSIC: single sub-array equals plain MUSIC") {
    const auto geo = ArrayGeometry::uniform_linear(6, 0.5, {6});
    const auto grid = DoaGrid::uniform(-45.0, 45.0, 0.5);
    Scenario sc{geo, {-10.0, 20.0}, 12, 10.0, 0.1};
    Rng rng(9);
    const auto sim = simulate(sc, rng);
    const RVec a = noncoherent_music(sim.snapshots, geo, grid, 2);
    const RVec b = music_spectrum(sim.snapshots.block(0), geo, grid, 2, true);
    CHECK((a - b).norm() <= 1e-9 * b.norm());
}

TEST_CASE("non-coherent MUSIC ignores per-snapshot phases") {
    const auto geo = ula24();
    const auto grid = DoaGrid::uniform(-45.0, 45.0, 0.5);
    Scenario sc{geo, {-10.0, 20.0}, 3, 10.0, 0.1};
    Rng rng(10);
    const auto sim = simulate(sc, rng);
    SnapshotSet rotated = sim.snapshots;
    for (int l = 0; l < 4; ++l)
        for (Eigen::Index t = 0; t < 3; ++t) rotated.block(l).col(t) *= std::polar(1.0, 0.7 * l + 1.3 * t);
    const RVec a = noncoherent_music(sim.snapshots, geo, grid, 2);
    const RVec b = noncoherent_music(rotated, geo, grid, 2);
    CHECK((a - b).norm() <= 1e-9 * a.norm());
}

TEST_CASE("non-coherent MUSIC finds separated noiseless sources") {
    const auto geo = ula24();
    const auto grid = DoaGrid::uniform(-45.0, 45.0, 0.1);
    Scenario sc{geo, {-20.0, 25.0}, 2, 300.0, 0.0};
    Rng rng(11);
    const auto sim = simulate(sc, rng);
    const auto e = pick_peaks(Spectrum{grid.angles(), noncoherent_music(sim.snapshots, geo, grid, 2)}, 2);
    std::vector<int> got = e.indices;
    std::sort(got.begin(), got.end());
    CHECK(got == std::vector<int>{grid.nearest_index(-20.0), grid.nearest_index(25.0)});
}

TEST_CASE("non-coherent MUSIC rejects mixed sub-arrays") {
    const auto geo = ArrayGeometry::uniform_linear(10, 0.5, {4, 6});
    Scenario sc{geo, {0.0}, 2, 10.0, 0.1};
    Rng rng(12);
    const auto sim = simulate(sc, rng);
    CHECK_THROWS_AS(noncoherent_music(sim.snapshots, geo, DoaGrid::uniform(-10, 10, 1), 1),
                    UnsupportedConfiguration);
}

TEST_CASE("l1: zero data gives zero") {
    Rng rng(13);
    const CMat a = testing::random_cmat(rng, 8, 32);
    const auto r = l1_single_snapshot(CVec::Zero(8), a, 0.1);
    CHECK(r.s.norm() == 0.0);
}

TEST_CASE("l1 objective matches a long proximal-gradient run") {
    Rng rng(14);
    const CMat a = testing::random_cmat(rng, 8, 32);
    const CVec x = testing::random_cmat(rng, 8, 1);
    const double sigma2 = 0.1;
    const auto r = l1_single_snapshot(x, a, sigma2);
    CHECK(r.lambda == default_lambda(sigma2, 8));

    const double lip = 2.0 * r.lambda * oracle::max_gram({a});
    CVec s = CVec::Zero(32);
    for (int k = 0; k < 1000000; ++k) s = soft(s - (2.0 * r.lambda / lip) * (a.adjoint() * (a * s - x)), 1.0 / lip);
    const double want = r.lambda * (x - a * s).squaredNorm() + s.lpNorm<1>();
    CHECK(testing::rel_diff(l1_objective(x, a, r.s, r.lambda), want) < 1e-6);
}

TEST_CASE("l1 finds a single noiseless on-grid source") {
    const auto geo = ula24();
    const auto grid = DoaGrid::uniform(-45.0, 45.0, 0.5);
    const CMat a = build_dictionary(geo, grid).stacked();
    const int k = grid.nearest_index(12.5);
    const CVec x = cplx(0.6, -0.8) * a.col(k);
    const auto r = l1_single_snapshot(x, a, 1e-6);
    Eigen::Index arg = 0;
    r.s.cwiseAbs().maxCoeff(&arg);
    CHECK(arg == k);
}

TEST_CASE("l1 rejects non-finite data") {
    Rng rng(15);
    const CMat a = testing::random_cmat(rng, 8, 32);
    CVec x = testing::random_cmat(rng, 8, 1);
    x[2] = cplx(std::numeric_limits<double>::infinity(), 0.0);
    CHECK_THROWS_AS(l1_single_snapshot(x, a, 0.1), NumericFailure);
}

TEST_CASE("method names round trip") {
    for (Method m : all_methods()) CHECK(parse_method(to_string(m)) == m);
    CHECK_FALSE(parse_method("proposed1").has_value());
}

TEST_CASE("every method returns Q grid angles") {
    const auto geo = ula24();
    const DoaEstimator est(geo, DoaGrid::uniform(-45.0, 45.0, 0.5));
    Scenario sc{geo, {-15.0, 0.0, 15.0, 30.0}, 2, 10.0, 0.1};
    Rng rng(16);
    const auto sim = simulate(sc, rng);
    const auto methods = all_methods();
    const auto outs = est.estimate_all(methods, sim.snapshots, 4, &sim.truth.phases);
    REQUIRE(outs.size() == methods.size());
    for (const auto& o : outs) {
        REQUIRE(o.doa.angles.size() == 4);
        for (std::size_t i = 0; i < 4; ++i) CHECK(est.grid()[o.doa.indices[i]] == o.doa.angles[i]);
        CHECK(o.spectrum.scores.size() == est.grid().size());
        CHECK((o.spectrum.scores.array() >= 0.0).all());
        CHECK(o.phases.has_value() == (o.method == Method::Proposed2));
    }
}

TEST_CASE("batched and single-method runs agree") {
    const auto geo = ula24();
    const DoaEstimator est(geo, DoaGrid::uniform(-45.0, 45.0, 0.5));
    Scenario sc{geo, {-10.0, 12.0}, 1, 10.0, 0.1};
    Rng rng(17);
    const auto sim = simulate(sc, rng);
    const Method ms[] = {Method::Proposed1, Method::Proposed1NoR1, Method::Proposed2};
    const auto all = est.estimate_all(ms, sim.snapshots, 2);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(all[i].spectrum.scores == est.estimate(ms[i], sim.snapshots, 2).spectrum.scores);
}

TEST_CASE("genie MUSIC on noiseless data recovers on-grid truth") {
    const auto geo = ula24();
    const auto grid = DoaGrid::uniform(-45.0, 45.0, 0.1);
    const DoaEstimator est(geo, grid);
    Scenario sc{geo, {-15.0, 0.0, 15.0, 30.0}, 5, 300.0, 0.0};
    Rng rng(18);
    const auto sim = simulate(sc, rng);
    const auto o = est.estimate(Method::GenieMUSIC, sim.snapshots, 4, &sim.truth.phases);
    std::vector<double> got = o.doa.angles;
    std::sort(got.begin(), got.end());
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(got[i] - sc.base_doas[i]) < 1e-9);
    CHECK_THROWS_AS(est.estimate(Method::GenieMUSIC, sim.snapshots, 4), ArgumentError);
}

TEST_CASE("spectra are invariant to a global phase") {
    const auto geo = ula24();
    const DoaEstimator est(geo, DoaGrid::uniform(-45.0, 45.0, 0.5));
    Scenario sc{geo, {-10.0, 12.0}, 2, 10.0, 0.1};
    Rng rng(19);
    const auto sim = simulate(sc, rng);
    SnapshotSet rotated = sim.snapshots;
    for (int l = 0; l < 4; ++l) rotated.block(l) *= std::polar(1.0, -0.9);
    const auto methods = all_methods();
    const auto a = est.estimate_all(methods, sim.snapshots, 2, &sim.truth.phases);
    const auto b = est.estimate_all(methods, rotated, 2, &sim.truth.phases);
    for (std::size_t i = 0; i < a.size(); ++i) {
        INFO(to_string(a[i].method));
        CHECK((a[i].spectrum.scores - b[i].spectrum.scores).norm() <= 1e-6 * a[i].spectrum.scores.norm());
    }
}

TEST_CASE("Proposed2 second stage ignores a common phase per snapshot") {
    const auto geo = ula24();
    const DoaEstimator est(geo, DoaGrid::uniform(-45.0, 45.0, 0.5));
    Rng rng(20);
    for (int n : {1, 6}) {
        Scenario sc{geo, {-15.0, 0.0, 15.0, 30.0}, n, 10.0, 0.1};
        const auto sim = simulate(sc, rng);
        RMat shifted = sim.truth.phases;
        for (int t = 0; t < n; ++t) shifted.col(t).array() += 0.4 + 0.3 * t;
        const auto a = est.coherent_spectrum(phase_correct(sim.snapshots, sim.truth.phases), 0.1, 4);
        const auto b = est.coherent_spectrum(phase_correct(sim.snapshots, shifted), 0.1, 4);
        CHECK(pick_peaks(a, 4).indices == pick_peaks(b, 4).indices);
        CHECK((a.scores - b.scores).norm() <= 1e-6 * a.scores.norm());
    }
}

TEST_CASE("spectrum CSV") {
    const auto path = (std::filesystem::temp_directory_path() / "ncdoa_spectrum.csv").string();
    write_spectrum_csv(path, make_spectrum({1.0, 2.5}), "seed=3");
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "# seed=3");
    std::getline(in, line);
    CHECK(line == "angle_deg,score");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 2);
    std::remove(path.c_str());
    CHECK_THROWS_AS(write_spectrum_csv("/nonexistent/x.csv", make_spectrum({1.0}), ""), IoError);
}
