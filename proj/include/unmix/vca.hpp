#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "unmix/hsi.hpp"

namespace unmix {

struct VcaConfig {
    std::size_t endmembers = 0;
    std::uint64_t seed = 0;
    // bypass the SNR estimation (useful for tests pinning the projection branch)
    std::optional<double> snr_estimate_override;
};

struct VcaResult {
    EndmemberSet endmembers;           // selected columns, clamped to >= 0
    std::vector<std::size_t> indices;  // selected pixel columns of Y
    double snr_estimate = 0.0;
    bool projective = false;           // true: high-SNR branch (d = p)
};

// Vertex component analysis on Y [L x n]: SNR-dependent subspace projection,
// then p rounds of random orthogonal directions picking extreme projections.
VcaResult vca(const Tensor& Y, const VcaConfig& cfg);

}  // namespace unmix
