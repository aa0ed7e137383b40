#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unmix/hsi.hpp"

namespace unmix {

// Minimum-cost assignment on a square cost matrix (Kuhn-Munkres, O(n^3)).
// Returns row_for_col: row_for_col[j] is the row assigned to column j.
std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost);

// Spectral angle between two spectra in radians.
double spectral_angle(const double* a, const double* b, std::size_t L);

// Permutation minimizing total SAD: perm[j] is the estimated endmember index
// matched to ground-truth endmember j.
std::vector<std::size_t> match_endmembers(const EndmemberSet& est, const EndmemberSet& gt);

struct SadMetric {
    std::vector<double> per_endmember;  // radians, in ground-truth order
    double mean = 0.0;
};
SadMetric sad_metric(const EndmemberSet& est, const EndmemberSet& gt,
                     const std::vector<std::size_t>& perm);

struct RmseMetric {
    std::vector<double> per_endmember;  // sqrt(mean over pixels of squared error), gt order
    double mean = 0.0;                  // arithmetic mean of per-endmember values
    double full_vector = 0.0;           // sqrt(mean over pixels of the squared vector error)
};
RmseMetric rmse_metric(const AbundanceField& est, const AbundanceField& gt,
                       const std::vector<std::size_t>& perm);

struct MetricReport {
    std::vector<std::size_t> permutation;
    SadMetric sad;
    RmseMetric rmse;
    bool has_rmse = false;
    std::uint64_t seed = 0;
    std::string config_hash;

    std::string to_json() const;
    std::string to_table() const;  // aligned text table
};

MetricReport evaluate(const EndmemberSet& est_endmembers, const AbundanceField* est_abundances,
                      const EndmemberSet& gt_endmembers, const AbundanceField* gt_abundances,
                      std::uint64_t seed, const std::string& config_hash);

}  // namespace unmix
