#pragma once

#include <optional>
#include <string>
#include <vector>

#include "unmix/tensor.hpp"

namespace unmix {

// H x W x L reflectance image, band index fastest (pixel-interleaved in
// memory; the on-disk format is band-sequential, see bundle_io).
struct HsiCube {
    std::size_t height = 0, width = 0, bands = 0;
    Tensor reflectance;                // [H x W x L]
    std::vector<double> wavelengths;   // micrometers; empty or size L

    std::size_t pixels() const { return height * width; }
    double at(std::size_t r, std::size_t c, std::size_t b) const {
        return reflectance.data[(r * width + c) * bands + b];
    }
    double& at(std::size_t r, std::size_t c, std::size_t b) {
        return reflectance.data[(r * width + c) * bands + b];
    }
    void validate() const;
};

// p spectral signatures, one per row.
struct EndmemberSet {
    Tensor signatures;  // [p x L]

    std::size_t count() const { return signatures.rank() == 2 ? signatures.shape[0] : 0; }
    std::size_t bands() const { return signatures.rank() == 2 ? signatures.shape[1] : 0; }
    const double* row(std::size_t i) const { return signatures.data.data() + i * bands(); }
    void validate() const;
};

// Per-pixel endmember fractions subject to ANC/ASC.
struct AbundanceField {
    std::size_t height = 0, width = 0, endmembers = 0;
    Tensor fractions;  // [H x W x p]

    std::size_t pixels() const { return height * width; }
    double at(std::size_t r, std::size_t c, std::size_t j) const {
        return fractions.data[(r * width + c) * endmembers + j];
    }
    double& at(std::size_t r, std::size_t c, std::size_t j) {
        return fractions.data[(r * width + c) * endmembers + j];
    }
    // ANC exactly, ASC within tol; throws DomainError naming the first bad pixel.
    void validate(double asc_tol = 1e-5) const;
};

struct DatasetBundle {
    std::string name;
    HsiCube cube;
    std::optional<EndmemberSet> gt_endmembers;
    std::optional<AbundanceField> gt_abundances;

    void validate() const;
};

// Column j of the result holds pixel (j / W, j % W): row-major pixel order.
Tensor flatten(const HsiCube& cube);  // [L x n]
HsiCube unflatten(const Tensor& matrix, std::size_t height, std::size_t width);

// Pixel-major counterpart used by the networks: row k holds pixel k's spectrum.
Tensor pixels_as_rows(const HsiCube& cube);  // [n x L]

}  // namespace unmix
