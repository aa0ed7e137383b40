#pragma once

#include <string>
#include <vector>

namespace unmix {

struct SuiteEntry {
    std::string name;
    double max_rel_err = 0.0;
    double tol = 1e-4;
    bool pass() const { return max_rel_err < tol; }
};

// Finite-difference verification of every layer op plus both full-loss graphs
// (spatial phase and spectral phase), run at 64-bit with frozen dropout masks
// and eval-mode batch statistics where a full graph is involved.
std::vector<SuiteEntry> gradcheck_suite();

}  // namespace unmix
