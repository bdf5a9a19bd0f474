// SPDX-License-Identifier: Apache-2.0

#include "ncdoa/sim.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace ncdoa {

void Scenario::validate() const {
    if (base_doas.empty()) throw ArgumentError("Scenario: need at least one source");
    if (snapshots < 1) throw ArgumentError("Scenario: need at least one snapshot");
    if (!(perturbation >= 0.0)) throw ArgumentError("Scenario: perturbation must be >= 0");
    if (!std::isfinite(snr_db)) throw ArgumentError("Scenario: SNR must be finite");
    for (double d : base_doas)
        if (!std::isfinite(d) || std::abs(d) >= 90.0)
            throw ArgumentError("Scenario: DOAs must lie in (-90, 90) degrees");
}

SnapshotSet::SnapshotSet(std::vector<CMat> blocks, double noise_variance)
    : blocks_(std::move(blocks)), noise_variance_(noise_variance) {
    if (blocks_.empty()) throw ArgumentError("SnapshotSet: no sub-arrays");
    const auto n = blocks_.front().cols();
    for (const auto& b : blocks_)
        if (b.cols() != n || b.rows() < 1)
            throw ArgumentError("SnapshotSet: blocks must share the snapshot count");
    if (!(noise_variance_ >= 0.0)) throw ArgumentError("SnapshotSet: negative noise variance");
}

int SnapshotSet::num_elements() const {
    int m = 0;
    for (const auto& b : blocks_) m += static_cast<int>(b.rows());
    return m;
}

CMat SnapshotSet::stacked() const {
    CMat x(num_elements(), num_snapshots());
    Eigen::Index r = 0;
    for (const auto& b : blocks_) {
        x.middleRows(r, b.rows()) = b;
        r += b.rows();
    }
    return x;
}

void SnapshotSet::check_against(const ArrayGeometry& geometry) const {
    if (num_subarrays() != geometry.num_subarrays())
        throw ArgumentError("SnapshotSet: sub-array count does not match geometry");
    for (int l = 0; l < num_subarrays(); ++l)
        if (block(l).rows() != geometry.subarray_size(l))
            throw ArgumentError("SnapshotSet: sub-array " + std::to_string(l) +
                                " size does not match geometry");
}

double noise_variance_from_snr(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

std::vector<double> perturb_doas(const std::vector<double>& base, double width, Rng& rng) {
    if (!(width >= 0.0)) throw ArgumentError("perturb_doas: width must be >= 0");
    std::vector<double> out(base);
    if (width == 0.0) return out;
    std::uniform_real_distribution<double> u(-0.5 * width, 0.5 * width);
    for (double& d : out) d += u(rng);
    return out;
}

cplx complex_normal(Rng& rng, double variance) {
    std::normal_distribution<double> g(0.0, std::sqrt(0.5 * variance));
    const double re = g(rng);
    const double im = g(rng);
    return {re, im};
}

SnapshotSet synthesize(const ArrayGeometry& geometry, const std::vector<double>& doas,
                       const CMat& signals, const RMat& phases, double noise_variance, Rng& rng) {
    const int big_l = geometry.num_subarrays();
    const auto q = static_cast<Eigen::Index>(doas.size());
    const Eigen::Index n = signals.cols();
    if (signals.rows() != q) throw ArgumentError("synthesize: signals must be Q x N");
    if (phases.rows() != big_l || phases.cols() != n)
        throw ArgumentError("synthesize: phases must be L x N");
    std::vector<CMat> blocks;
    blocks.reserve(static_cast<std::size_t>(big_l));
    for (int l = 0; l < big_l; ++l) {
        CMat a(geometry.subarray_size(l), q);
        for (Eigen::Index k = 0; k < q; ++k)
            a.col(k) = steering_vector(geometry, l, doas[static_cast<std::size_t>(k)]);
        CMat x = a * signals;
        for (Eigen::Index t = 0; t < n; ++t) x.col(t) *= std::polar(1.0, -phases(l, t));
        blocks.push_back(std::move(x));
    }
    if (noise_variance > 0.0) {
        // Noise is drawn snapshot-major so that the stream order does not
        // depend on how sub-arrays are sized.
        for (Eigen::Index t = 0; t < n; ++t)
            for (auto& b : blocks)
                for (Eigen::Index i = 0; i < b.rows(); ++i)
                    b(i, t) += complex_normal(rng, noise_variance);
    }
    return SnapshotSet(std::move(blocks), noise_variance);
}

Simulation simulate(const Scenario& scenario, Rng& rng) {
    scenario.validate();
    const auto& geometry = scenario.geometry;
    const int q = scenario.num_sources();
    const int n = scenario.snapshots;
    GroundTruth truth;
    truth.doas = perturb_doas(scenario.base_doas, scenario.perturbation, rng);
    truth.noise_variance = noise_variance_from_snr(scenario.snr_db);
    truth.signals.resize(q, n);
    for (int t = 0; t < n; ++t)
        for (int k = 0; k < q; ++k) truth.signals(k, t) = complex_normal(rng, 1.0);
    std::uniform_real_distribution<double> uphase(0.0, 2.0 * kPi);
    truth.phases.resize(geometry.num_subarrays(), n);
    for (int t = 0; t < n; ++t)
        for (int l = 0; l < geometry.num_subarrays(); ++l) truth.phases(l, t) = uphase(rng);
    auto snaps = synthesize(geometry, truth.doas, truth.signals, truth.phases,
                            truth.noise_variance, rng);
    return {std::move(snaps), std::move(truth)};
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    return os;
}

void finish(std::ofstream& os, const std::string& path) {
    os.flush();
    if (!os) throw IoError("write to '" + path + "' failed");
}

}  // namespace

void write_snapshots_csv(const std::string& path, const SnapshotSet& snapshots,
                         std::uint64_t seed, const std::string& config_hash) {
    auto os = open_out(path);
    os << "# ncdoa snapshots v1\n";
    os << "# config_hash=" << config_hash << " seed=" << seed << "\n";
    os << "# sigma2=" << snapshots.noise_variance() << " M=" << snapshots.num_elements()
       << " L=" << snapshots.num_subarrays() << " N=" << snapshots.num_snapshots() << "\n";
    os << "# sizes=";
    for (int l = 0; l < snapshots.num_subarrays(); ++l)
        os << (l ? "," : "") << snapshots.block(l).rows();
    os << "\n";
    os << "n,l,i,re,im\n";
    for (int t = 0; t < snapshots.num_snapshots(); ++t)
        for (int l = 0; l < snapshots.num_subarrays(); ++l)
            for (Eigen::Index i = 0; i < snapshots.block(l).rows(); ++i) {
                const cplx v = snapshots.block(l)(i, t);
                os << t << ',' << l << ',' << i << ',' << v.real() << ',' << v.imag() << '\n';
            }
    finish(os, path);
}

SnapshotSet read_snapshots_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path + "' for reading");
    double sigma2 = -1.0;
    int n = -1;
    std::vector<int> sizes;
    std::string line;
    std::vector<CMat> blocks;
    auto fail = [&](const std::string& why) { throw IoError("'" + path + "': " + why); };
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ls(line.substr(1));
            std::string tok;
            while (ls >> tok) {
                const auto eq = tok.find('=');
                if (eq == std::string::npos) continue;
                const auto key = tok.substr(0, eq);
                const auto val = tok.substr(eq + 1);
                if (key == "sigma2") sigma2 = std::stod(val);
                else if (key == "N") n = std::stoi(val);
                else if (key == "sizes") {
                    std::istringstream vs(val);
                    std::string s;
                    while (std::getline(vs, s, ',')) sizes.push_back(std::stoi(s));
                }
            }
            continue;
        }
        if (line.rfind("n,l,i", 0) == 0) {
            if (sizes.empty() || n < 1 || sigma2 < 0.0) fail("missing header fields");
            for (int m : sizes) blocks.emplace_back(CMat::Zero(m, n));
            continue;
        }
        if (blocks.empty()) fail("data before column header");
        std::istringstream ls(line);
        std::string f[5];
        for (auto& s : f)
            if (!std::getline(ls, s, ',')) fail("short row: " + line);
        const int t = std::stoi(f[0]), l = std::stoi(f[1]), i = std::stoi(f[2]);
        if (t < 0 || t >= n || l < 0 || l >= static_cast<int>(blocks.size()) || i < 0 ||
            i >= blocks[static_cast<std::size_t>(l)].rows())
            fail("index out of range: " + line);
        blocks[static_cast<std::size_t>(l)](i, t) = cplx(std::stod(f[3]), std::stod(f[4]));
    }
    if (blocks.empty()) fail("no data");
    return SnapshotSet(std::move(blocks), sigma2);
}

void write_truth_csv(const std::string& path, const GroundTruth& truth, std::uint64_t seed,
                     const std::string& config_hash) {
    auto os = open_out(path);
    os << "# ncdoa truth v1\n";
    os << "# config_hash=" << config_hash << " seed=" << seed << "\n";
    os << "# sigma2=" << truth.noise_variance << " Q=" << truth.doas.size()
       << " L=" << truth.phases.rows() << " N=" << truth.phases.cols() << "\n";
    for (std::size_t q = 0; q < truth.doas.size(); ++q)
        os << "doa," << q << ',' << truth.doas[q] << '\n';
    for (Eigen::Index t = 0; t < truth.phases.cols(); ++t)
        for (Eigen::Index l = 0; l < truth.phases.rows(); ++l)
            os << "phase," << l << ',' << t << ',' << truth.phases(l, t) << '\n';
    for (Eigen::Index t = 0; t < truth.signals.cols(); ++t)
        for (Eigen::Index q = 0; q < truth.signals.rows(); ++q)
            os << "signal," << q << ',' << t << ',' << truth.signals(q, t).real() << ','
               << truth.signals(q, t).imag() << '\n';
    finish(os, path);
}

}  // namespace ncdoa
