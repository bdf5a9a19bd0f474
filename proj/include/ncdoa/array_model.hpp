// SPDX-License-Identifier: Apache-2.0
//
// Planar array geometry partitioned into sub-arrays, steering vectors and
// per-sub-array dictionaries over a DOA grid.

#pragma once

#include <functional>
#include <vector>

#include "ncdoa/types.hpp"

namespace ncdoa {

/// Element gain as a function of the angle in degrees. An empty function
/// means an omnidirectional element (gain 1).
using ElementPattern = std::function<double(double)>;

struct Element {
    double x = 0.0;  ///< meters
    double y = 0.0;  ///< meters
    ElementPattern pattern;

    double gain(double theta_deg) const { return pattern ? pattern(theta_deg) : 1.0; }
};

/// Element positions and patterns, the carrier wavelength, and a partition of
/// the elements into L contiguous sub-arrays of sizes M_1..M_L.
class ArrayGeometry {
 public:
    ArrayGeometry(double wavelength, std::vector<Element> elements,
                  std::vector<int> subarray_sizes);

    /// Uniform linear array along the x-axis centered at the origin.
    /// `spacing` is expressed in wavelengths.
    static ArrayGeometry uniform_linear(int count, double spacing,
                                       std::vector<int> subarray_sizes,
                                       double wavelength = 1.0);

    double wavelength() const { return wavelength_; }
    int num_elements() const { return static_cast<int>(elements_.size()); }
    int num_subarrays() const { return static_cast<int>(sizes_.size()); }
    int subarray_size(int l) const;
    int subarray_offset(int l) const;
    const std::vector<int>& subarray_sizes() const { return sizes_; }
    const std::vector<Element>& elements() const { return elements_; }

    /// Same array shifted by (dx, dy) meters.
    ArrayGeometry translated(double dx, double dy) const;

    /// True when every sub-array has the same element layout relative to its
    /// first element and all elements are omnidirectional.
    bool subarrays_identical(double tol = 1e-12) const;

 private:
    double wavelength_;
    std::vector<Element> elements_;
    std::vector<int> sizes_;
    std::vector<int> offsets_;
};

/// Uniformly spaced, strictly increasing grid of candidate DOAs in degrees.
class DoaGrid {
 public:
    explicit DoaGrid(std::vector<double> angles_deg);

    /// Grid from `first` to `last` inclusive with the given step.
    static DoaGrid uniform(double first, double last, double step);

    int size() const { return static_cast<int>(angles_.size()); }
    double operator[](int i) const { return angles_[static_cast<std::size_t>(i)]; }
    double spacing() const { return angles_[1] - angles_[0]; }
    const std::vector<double>& angles() const { return angles_; }

    /// Index of the grid point nearest to `theta_deg`.
    int nearest_index(double theta_deg) const;

 private:
    std::vector<double> angles_;
};

/// Per-sub-array measurement matrices A_l (M_l x N_theta) with cached
/// spectral norms ||A_l^H A_l||.
class Dictionary {
 public:
    Dictionary(std::vector<CMat> blocks, std::vector<double> gram_norms);

    int num_subarrays() const { return static_cast<int>(blocks_.size()); }
    int grid_size() const { return static_cast<int>(blocks_.front().cols()); }
    const CMat& block(int l) const { return blocks_.at(static_cast<std::size_t>(l)); }
    double gram_norm(int l) const { return gram_norms_.at(static_cast<std::size_t>(l)); }
    double max_gram_norm() const;

    /// Full-array matrix [A_1; ...; A_L] (M x N_theta).
    CMat stacked() const;

 private:
    std::vector<CMat> blocks_;
    std::vector<double> gram_norms_;
};

/// Response of sub-array `l` to a far-field source at `theta_deg`.
CVec steering_vector(const ArrayGeometry& geometry, int l, double theta_deg);

/// Response of the full (coherent) array, sub-arrays stacked in order.
CVec array_steering_vector(const ArrayGeometry& geometry, double theta_deg);

/// Matrix whose columns are full-array steering vectors at the given angles.
CMat array_manifold(const ArrayGeometry& geometry, const std::vector<double>& thetas_deg);

Dictionary build_dictionary(const ArrayGeometry& geometry, const DoaGrid& grid);

/// Largest eigenvalue of a Hermitian PSD matrix by power iteration.
double spectral_norm(const CMat& h);

/// Largest eigenvalue of A^H A, evaluated through the smaller of A^H A and
/// A A^H (they share their nonzero spectrum).
double gram_spectral_norm(const CMat& a);

}  // namespace ncdoa
