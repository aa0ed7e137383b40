#pragma once

#include <vector>

#include "unmix/hsi.hpp"

namespace unmix {

struct FclsResult {
    Tensor abundances;                  // [p x n], ANC exact, ASC renormalized
    std::vector<std::size_t> flagged;   // pixels that fell back to projected LS
};

// Fully constrained least squares per pixel: sum-to-one row augmentation
// (weight delta) followed by active-set nonnegative least squares, then exact
// renormalization. Parallel over pixels.
FclsResult fcls(const Tensor& Y /* L x n */, const EndmemberSet& endmembers, double delta = 1e3);

// Single-pixel solve, exposed for the oracle tests. Returns true when the
// active-set iteration converged within its cap (3p), false on fallback.
bool fcls_pixel(const double* y, std::size_t L, const EndmemberSet& endmembers, double delta,
                double* x_out);

// Serial reference for the batch kernel (identical arithmetic, no OpenMP).
FclsResult fcls_serial(const Tensor& Y, const EndmemberSet& endmembers, double delta = 1e3);

AbundanceField fcls_field(const Tensor& Y, const EndmemberSet& endmembers, std::size_t height,
                          std::size_t width, double delta = 1e3);

}  // namespace unmix
