#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "unmix/hsi.hpp"

namespace unmix {

struct SlicConfig {
    double size_s = 5.0;                        // nominal superpixel size S
    std::optional<std::size_t> target_count;    // Q; when set, S = sqrt(n/Q)
    double compactness = 0.1;                   // m
    int iterations = 10;
    std::uint64_t seed = 0;                     // recorded for provenance; the algorithm is deterministic

    void validate() const;
};

struct Superpixel {
    std::vector<std::size_t> members;  // flat pixel indices (row * W + col), sorted
    std::size_t center = 0;            // member minimizing distance to the coordinate mean
};

struct Segmentation {
    std::size_t height = 0, width = 0;
    std::vector<int> labels;           // H*W, one superpixel id per pixel
    std::vector<Superpixel> superpixels;
    // seed coordinates after gradient perturbation, for diagnostics and the
    // window-limit tests
    std::vector<std::pair<double, double>> initial_seeds;

    std::size_t count() const { return superpixels.size(); }
    void validate() const;  // partition + connectivity + center membership
};

// Compound abundance/spatial distance between pixels i and j of the field:
// sqrt(d_abu^2 + (d_spa/S)^2 m^2) with d_abu the squared euclidean distance
// of the abundance vectors.
double compound_distance(std::size_t i, std::size_t j, const AbundanceField& field, double s,
                         double m);

// The member closest to the coordinate mean; lexicographic (row, col) tie-break.
std::size_t center_pixel(const std::vector<std::size_t>& members, std::size_t width);

// Abundance-driven SLIC with gradient-perturbed grid seeding, windowed
// assignment, and 4-connectivity enforcement.
Segmentation slic_segment(const AbundanceField& field, const SlicConfig& cfg);

}  // namespace unmix
