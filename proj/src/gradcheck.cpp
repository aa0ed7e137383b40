#include "unmix/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "unmix/errors.hpp"

namespace unmix::nn {

namespace {

double eval_scalar(const std::function<Var(const std::vector<Var>&)>& build,
                   const std::vector<Tensor>& values) {
    std::vector<Var> leaves;
    leaves.reserve(values.size());
    for (const auto& v : values) leaves.push_back(leaf(v));
    Var root = build(leaves);
    if (root->value.numel() != 1)
        throw ContractViolation("grad_check: graph must produce a scalar");
    return root->value.data[0];
}

}  // namespace

GradCheckReport grad_check(const std::function<Var(const std::vector<Var>&)>& build,
                           const std::vector<Tensor>& leaf_values,
                           const std::vector<std::string>& names, double h) {
    if (leaf_values.size() != names.size())
        throw ContractViolation("grad_check: names/values size mismatch");

    std::vector<Var> leaves;
    for (const auto& v : leaf_values) leaves.push_back(leaf(v));
    Var root = build(leaves);
    backward(root);

    GradCheckReport report;
    std::vector<Tensor> work = leaf_values;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        GradCheckEntry entry;
        entry.name = names[li];
        entry.elements = work[li].numel();
        for (std::size_t i = 0; i < work[li].numel(); ++i) {
            const double saved = work[li].data[i];
            work[li].data[i] = saved + h;
            const double fp = eval_scalar(build, work);
            work[li].data[i] = saved - h;
            const double fm = eval_scalar(build, work);
            work[li].data[i] = saved;
            const double fd = (fp - fm) / (2.0 * h);
            const double an = leaves[li]->grad.data[i];
            const double rel =
                std::fabs(an - fd) / std::max({std::fabs(an), std::fabs(fd), 1e-6});
            entry.max_rel_err = std::max(entry.max_rel_err, rel);
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.per_leaf.push_back(std::move(entry));
    }
    return report;
}

}  // namespace unmix::nn
