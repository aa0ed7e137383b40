#pragma once

#include <cstdint>
#include <optional>

#include "unmix/hsi.hpp"

namespace unmix {

struct SynthConfig {
    std::size_t height = 64, width = 64;
    std::size_t endmembers = 5;
    std::size_t bands = 162;
    double sigma_g = 0.25;            // spatial smoothing std, pixels
    std::optional<double> snr_db = 30.0;  // nullopt: noiseless
    double alpha_max = 0.8;           // purity cap
    std::uint64_t seed = 0;

    void validate() const;
};

// p smooth distinct spectra in [0,1]: baseline plus 3-6 Gaussian
// absorption/reflection bumps, regenerated until pairwise SAD >= 0.1 rad.
EndmemberSet gen_endmembers(std::size_t p, std::size_t L, std::uint64_t seed);

// Per-pixel flat Dirichlet, per-channel Gaussian blur, per-pixel renormalize,
// then cap at alpha_max with proportional redistribution and renormalize.
AbundanceField gen_abundances(std::size_t height, std::size_t width, std::size_t p, double sigma_g,
                              double alpha_max, std::uint64_t seed);

// Y = A^T x per pixel plus iid Gaussian noise at the requested SNR (mean
// per-sample signal power convention); noiseless when snr_db is empty.
HsiCube mix_and_noise(const EndmemberSet& endmembers, const AbundanceField& abundances,
                      std::optional<double> snr_db, std::uint64_t seed);

// Full scene: endmembers + abundances + mixed cube, with ground truth attached.
DatasetBundle generate_scene(const SynthConfig& cfg);

}  // namespace unmix
