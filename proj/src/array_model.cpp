// SPDX-License-Identifier: Apache-2.0

#include "ncdoa/array_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ncdoa {

ArrayGeometry::ArrayGeometry(double wavelength, std::vector<Element> elements,
                             std::vector<int> subarray_sizes)
    : wavelength_(wavelength), elements_(std::move(elements)), sizes_(std::move(subarray_sizes)) {
    if (!(wavelength_ > 0.0) || !std::isfinite(wavelength_))
        throw ArgumentError("ArrayGeometry: wavelength must be positive");
    if (sizes_.empty()) throw ArgumentError("ArrayGeometry: need at least one sub-array");
    int total = 0;
    for (int m : sizes_) {
        if (m < 1) throw ArgumentError("ArrayGeometry: sub-array sizes must be >= 1");
        offsets_.push_back(total);
        total += m;
    }
    if (total != num_elements())
        throw ArgumentError("ArrayGeometry: partition sizes sum to " + std::to_string(total) +
                            " but there are " + std::to_string(num_elements()) + " elements");
}

ArrayGeometry ArrayGeometry::uniform_linear(int count, double spacing,
                                            std::vector<int> subarray_sizes,
                                            double wavelength) {
    if (count < 1) throw ArgumentError("uniform_linear: count must be >= 1");
    std::vector<Element> elems(static_cast<std::size_t>(count));
    const double center = 0.5 * (count - 1);
    for (int i = 0; i < count; ++i)
        elems[static_cast<std::size_t>(i)].x = (i - center) * spacing * wavelength;
    return ArrayGeometry(wavelength, std::move(elems), std::move(subarray_sizes));
}

int ArrayGeometry::subarray_size(int l) const {
    if (l < 0 || l >= num_subarrays())
        throw ArgumentError("sub-array index " + std::to_string(l) + " out of range");
    return sizes_[static_cast<std::size_t>(l)];
}

int ArrayGeometry::subarray_offset(int l) const {
    if (l < 0 || l >= num_subarrays())
        throw ArgumentError("sub-array index " + std::to_string(l) + " out of range");
    return offsets_[static_cast<std::size_t>(l)];
}

ArrayGeometry ArrayGeometry::translated(double dx, double dy) const {
    auto elems = elements_;
    for (auto& e : elems) {
        e.x += dx;
        e.y += dy;
    }
    return ArrayGeometry(wavelength_, std::move(elems), sizes_);
}

bool ArrayGeometry::subarrays_identical(double tol) const {
    const int m0 = sizes_.front();
    for (const auto& e : elements_)
        if (e.pattern) return false;
    for (int l = 1; l < num_subarrays(); ++l) {
        if (sizes_[static_cast<std::size_t>(l)] != m0) return false;
        const auto& ref0 = elements_[static_cast<std::size_t>(offsets_[0])];
        const auto& refl = elements_[static_cast<std::size_t>(offsets_[static_cast<std::size_t>(l)])];
        for (int i = 0; i < m0; ++i) {
            const auto& a = elements_[static_cast<std::size_t>(offsets_[0] + i)];
            const auto& b = elements_[static_cast<std::size_t>(offsets_[static_cast<std::size_t>(l)] + i)];
            const double scale = wavelength_;
            if (std::abs((a.x - ref0.x) - (b.x - refl.x)) > tol * scale ||
                std::abs((a.y - ref0.y) - (b.y - refl.y)) > tol * scale)
                return false;
        }
    }
    return true;
}

DoaGrid::DoaGrid(std::vector<double> angles_deg) : angles_(std::move(angles_deg)) {
    if (angles_.size() < 2) throw ArgumentError("DoaGrid: need at least two angles");
    const double step = angles_[1] - angles_[0];
    if (!(step > 0.0)) throw ArgumentError("DoaGrid: angles must be strictly increasing");
    for (std::size_t i = 1; i < angles_.size(); ++i) {
        const double d = angles_[i] - angles_[i - 1];
        if (!(d > 0.0)) throw ArgumentError("DoaGrid: angles must be strictly increasing");
        if (std::abs(d - step) > 1e-12 * std::max(step, std::abs(angles_[i])))
            throw ArgumentError("DoaGrid: spacing must be uniform");
    }
}

DoaGrid DoaGrid::uniform(double first, double last, double step) {
    if (!(step > 0.0) || !(last > first)) throw ArgumentError("DoaGrid::uniform: bad range");
    const auto n = static_cast<int>(std::llround((last - first) / step)) + 1;
    std::vector<double> a(static_cast<std::size_t>(n));
    // i * step rather than accumulation keeps the points exact to rounding.
    for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] = first + i * step;
    return DoaGrid(std::move(a));
}

int DoaGrid::nearest_index(double theta_deg) const {
    const double pos = (theta_deg - angles_.front()) / spacing();
    const auto i = static_cast<long long>(std::llround(pos));
    return static_cast<int>(std::clamp<long long>(i, 0, size() - 1));
}

Dictionary::Dictionary(std::vector<CMat> blocks, std::vector<double> gram_norms)
    : blocks_(std::move(blocks)), gram_norms_(std::move(gram_norms)) {
    if (blocks_.empty() || blocks_.size() != gram_norms_.size())
        throw ArgumentError("Dictionary: inconsistent blocks/norms");
}

double Dictionary::max_gram_norm() const {
    return *std::max_element(gram_norms_.begin(), gram_norms_.end());
}

CMat Dictionary::stacked() const {
    Eigen::Index rows = 0;
    for (const auto& b : blocks_) rows += b.rows();
    CMat a(rows, grid_size());
    Eigen::Index r = 0;
    for (const auto& b : blocks_) {
        a.middleRows(r, b.rows()) = b;
        r += b.rows();
    }
    return a;
}

CVec steering_vector(const ArrayGeometry& geometry, int l, double theta_deg) {
    if (!std::isfinite(theta_deg)) throw ArgumentError("steering_vector: angle must be finite");
    const int m = geometry.subarray_size(l);
    const int off = geometry.subarray_offset(l);
    const double th = deg_to_rad(theta_deg);
    const double k = 2.0 * kPi / geometry.wavelength();
    const double s = std::sin(th), c = std::cos(th);
    CVec a(m);
    for (int i = 0; i < m; ++i) {
        const auto& e = geometry.elements()[static_cast<std::size_t>(off + i)];
        a[i] = e.gain(theta_deg) * std::polar(1.0, k * (e.x * s + e.y * c));
    }
    return a;
}

CVec array_steering_vector(const ArrayGeometry& geometry, double theta_deg) {
    CVec a(geometry.num_elements());
    for (int l = 0; l < geometry.num_subarrays(); ++l)
        a.segment(geometry.subarray_offset(l), geometry.subarray_size(l)) =
            steering_vector(geometry, l, theta_deg);
    return a;
}

CMat array_manifold(const ArrayGeometry& geometry, const std::vector<double>& thetas_deg) {
    CMat a(geometry.num_elements(), static_cast<Eigen::Index>(thetas_deg.size()));
    for (std::size_t q = 0; q < thetas_deg.size(); ++q)
        a.col(static_cast<Eigen::Index>(q)) = array_steering_vector(geometry, thetas_deg[q]);
    return a;
}

Dictionary build_dictionary(const ArrayGeometry& geometry, const DoaGrid& grid) {
    std::vector<CMat> blocks;
    std::vector<double> norms;
    for (int l = 0; l < geometry.num_subarrays(); ++l) {
        CMat a(geometry.subarray_size(l), grid.size());
        for (int i = 0; i < grid.size(); ++i) a.col(i) = steering_vector(geometry, l, grid[i]);
        norms.push_back(gram_spectral_norm(a));
        blocks.push_back(std::move(a));
    }
    return Dictionary(std::move(blocks), std::move(norms));
}

double spectral_norm(const CMat& h) {
    if (h.rows() != h.cols()) throw ArgumentError("spectral_norm: matrix must be square");
    const Eigen::Index n = h.rows();
    if (n == 0) return 0.0;
    // All-ones start with a small deterministic tilt so that no eigenvector is
    // exactly orthogonal to it for structured inputs.
    CVec v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v[i] = cplx(1.0 + 1e-3 * static_cast<double>(i + 1) / static_cast<double>(n),
                    1e-3 * std::sin(static_cast<double>(i + 1)));
    v.normalize();
    double est = 0.0;
    for (int it = 0; it < 100000; ++it) {
        CVec w = h * v;
        const double rq = v.dot(w).real();
        const double nw = w.norm();
        if (nw == 0.0) return 0.0;
        v = w / nw;
        if (it > 0 && std::abs(rq - est) <= 1e-15 * std::abs(rq)) {
            est = rq;
            break;
        }
        est = rq;
    }
    // Final Rayleigh quotient of the converged vector.
    return std::max(0.0, v.dot(h * v).real());
}

double gram_spectral_norm(const CMat& a) {
    if (a.rows() <= a.cols()) return spectral_norm(a * a.adjoint());
    return spectral_norm(a.adjoint() * a);
}

}  // namespace ncdoa
