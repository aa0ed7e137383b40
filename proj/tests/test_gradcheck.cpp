#include <doctest.h>

#include "unmix/gradcheck_suite.hpp"
#include "unmix/nn/gradcheck.hpp"
#include "unmix/nn/graph.hpp"
#include "unmix/rng.hpp"

using namespace unmix;
using nn::Var;

TEST_CASE("finite differences confirm every layer op and both loss graphs") {
    const auto entries = gradcheck_suite();
    REQUIRE(entries.size() >= 12);
    for (const auto& e : entries) {
        INFO(e.name, " max rel err ", e.max_rel_err);
        CHECK(e.max_rel_err < e.tol);
    }
}

TEST_CASE("a corrupted backward is caught") {
    // an op whose backward deliberately reports half the true gradient
    auto broken_scale = [](const Var& a, double c) {
        auto n = std::make_shared<nn::GradNode>();
        n->value = a->value;
        for (double& v : n->value.data) v *= c;
        n->grad = Tensor::zeros(n->value.shape);
        n->parents = {a};
        n->requires_grad = true;
        nn::GradNode* self = n.get();
        nn::GradNode* pa = a.get();
        n->backward_fn = [self, pa, c] {
            for (std::size_t i = 0; i < self->grad.numel(); ++i)
                pa->grad.data[i] += 0.5 * c * self->grad.data[i];
        };
        return n;
    };
    Rng rng(4);
    Tensor x = Tensor::zeros({5});
    for (double& v : x.data) v = uniform(rng, 0.5, 1.5);
    auto rep = nn::grad_check(
        [&](const std::vector<Var>& leaves) {
            return nn::mean(broken_scale(leaves[0], 2.0));
        },
        {x}, {"x"});
    CHECK(rep.max_rel_err > 0.3);
}
