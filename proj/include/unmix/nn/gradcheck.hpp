#pragma once

#include <functional>
#include <string>
#include <vector>

#include "unmix/nn/graph.hpp"

namespace unmix::nn {

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    std::size_t elements = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> per_leaf;
    double max_rel_err = 0.0;
    bool pass(double tol) const { return max_rel_err < tol; }
};

// Compares the analytic gradient of a scalar-valued graph against central
// finite differences, element by element, for every listed leaf. The builder
// must be a pure function of the leaf values (freeze dropout masks by
// reseeding inside the builder).
GradCheckReport grad_check(const std::function<Var(const std::vector<Var>&)>& build,
                           const std::vector<Tensor>& leaf_values,
                           const std::vector<std::string>& names, double h = 1e-5);

}  // namespace unmix::nn
