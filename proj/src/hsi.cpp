#include "unmix/hsi.hpp"

#include <cmath>

#include "unmix/errors.hpp"

namespace unmix {

void HsiCube::validate() const {
    if (height == 0 || width == 0) throw FormatError("cube: empty image");
    if (bands < 2) throw FormatError("cube: needs at least 2 bands, got " + std::to_string(bands));
    if (reflectance.shape != std::vector<std::size_t>{height, width, bands})
        throw FormatError("cube: reflectance shape " + reflectance.shape_str() +
                          " does not match header " + std::to_string(height) + "x" +
                          std::to_string(width) + "x" + std::to_string(bands));
    for (std::size_t i = 0; i < reflectance.numel(); ++i)
        if (!std::isfinite(reflectance.data[i]))
            throw FormatError("cube: non-finite value at flat offset " + std::to_string(i));
    if (!wavelengths.empty() && wavelengths.size() != bands)
        throw FormatError("cube: wavelength list length " + std::to_string(wavelengths.size()) +
                          " != bands " + std::to_string(bands));
}

void EndmemberSet::validate() const {
    if (signatures.rank() != 2) throw FormatError("endmembers: expected p x L matrix");
    const std::size_t p = count(), L = bands();
    if (p == 0 || L == 0) throw FormatError("endmembers: empty set");
    for (std::size_t i = 0; i < p; ++i) {
        double norm2 = 0.0;
        for (std::size_t b = 0; b < L; ++b) {
            const double v = row(i)[b];
            if (!std::isfinite(v)) throw FormatError("endmembers: non-finite entry in signature " +
                                                     std::to_string(i));
            if (v < 0.0)
                throw DomainError("endmembers: negative entry in signature " + std::to_string(i));
            norm2 += v * v;
        }
        if (norm2 == 0.0)
            throw DomainError("endmembers: signature " + std::to_string(i) + " has zero norm");
    }
}

void AbundanceField::validate(double asc_tol) const {
    if (fractions.shape != std::vector<std::size_t>{height, width, endmembers})
        throw FormatError("abundances: shape " + fractions.shape_str() + " does not match header");
    const std::size_t n = pixels();
    for (std::size_t k = 0; k < n; ++k) {
        double sum = 0.0;
        for (std::size_t j = 0; j < endmembers; ++j) {
            const double v = fractions.data[k * endmembers + j];
            if (!std::isfinite(v))
                throw FormatError("abundances: non-finite value at pixel " + std::to_string(k));
            if (v < 0.0)
                throw DomainError("abundances: ANC violated at pixel " + std::to_string(k) +
                                  " channel " + std::to_string(j) + " (" + std::to_string(v) + ")");
            sum += v;
        }
        if (std::fabs(sum - 1.0) > asc_tol)
            throw DomainError("abundances: ASC violated at pixel " + std::to_string(k) + " (sum " +
                              std::to_string(sum) + ")");
    }
}

void DatasetBundle::validate() const {
    cube.validate();
    if (gt_endmembers) {
        gt_endmembers->validate();
        if (gt_endmembers->bands() != cube.bands)
            throw FormatError("bundle: ground-truth endmember bands " +
                              std::to_string(gt_endmembers->bands()) + " != cube bands " +
                              std::to_string(cube.bands));
    }
    if (gt_abundances) {
        gt_abundances->validate();
        if (gt_abundances->height != cube.height || gt_abundances->width != cube.width)
            throw FormatError("bundle: ground-truth abundance size mismatch");
        if (gt_endmembers && gt_abundances->endmembers != gt_endmembers->count())
            throw FormatError("bundle: ground-truth endmember counts disagree");
    }
}

Tensor flatten(const HsiCube& cube) {
    const std::size_t n = cube.pixels(), L = cube.bands;
    Tensor out = Tensor::zeros({L, n});
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t b = 0; b < L; ++b) out.data[b * n + k] = cube.reflectance.data[k * L + b];
    return out;
}

HsiCube unflatten(const Tensor& matrix, std::size_t height, std::size_t width) {
    if (matrix.rank() != 2) throw DimensionError("unflatten: expected L x n matrix");
    const std::size_t L = matrix.shape[0], n = matrix.shape[1];
    if (n != height * width)
        throw DimensionError("unflatten: " + std::to_string(n) + " columns != " +
                             std::to_string(height) + "x" + std::to_string(width));
    HsiCube cube;
    cube.height = height;
    cube.width = width;
    cube.bands = L;
    cube.reflectance = Tensor::zeros({height, width, L});
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t b = 0; b < L; ++b) cube.reflectance.data[k * L + b] = matrix.data[b * n + k];
    return cube;
}

Tensor pixels_as_rows(const HsiCube& cube) {
    Tensor out = cube.reflectance;
    out.shape = {cube.pixels(), cube.bands};
    return out;
}

}  // namespace unmix
