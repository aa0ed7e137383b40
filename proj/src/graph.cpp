#include "unmix/nn/graph.hpp"

#include <algorithm>
#include <unordered_set>

#include "unmix/errors.hpp"

namespace unmix::nn {

namespace {

Var make_node(Tensor value, std::vector<Var> parents) {
    auto n = std::make_shared<GradNode>();
    n->value = std::move(value);
    n->grad = Tensor::zeros(n->value.shape);
    n->parents = std::move(parents);
    for (const auto& p : n->parents) n->requires_grad = n->requires_grad || p->requires_grad;
    return n;
}

}  // namespace

Var leaf(Tensor value) {
    auto n = std::make_shared<GradNode>();
    n->value = std::move(value);
    n->grad = Tensor::zeros(n->value.shape);
    n->requires_grad = true;
    return n;
}

Var constant(Tensor value) {
    auto n = std::make_shared<GradNode>();
    n->value = std::move(value);
    n->grad = Tensor::zeros(n->value.shape);
    n->requires_grad = false;
    return n;
}

void backward(const Var& root) {
    if (root->value.numel() != 1)
        throw ContractViolation("backward: root must be a scalar, got " + root->value.shape_str());
    // iterative post-order topological sort over parents
    std::vector<GradNode*> order;
    std::unordered_set<GradNode*> visited;
    std::vector<std::pair<GradNode*, std::size_t>> stack{{root.get(), 0}};
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            GradNode* p = node->parents[next++].get();
            if (!visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->grad.data[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn && (*it)->requires_grad) (*it)->backward_fn();
}

Var linear(const Var& x, const Var& W) {
    Var n = make_node(linear_forward(x->value, W->value), {x, W});
    GradNode* self = n.get();
    GradNode* px = x.get();
    GradNode* pw = W.get();
    n->backward_fn = [self, px, pw] {
        linear_backward(px->value, pw->value, self->grad,
                        px->requires_grad ? &px->grad : nullptr,
                        pw->requires_grad ? &pw->grad : nullptr);
    };
    return n;
}

Var conv1d(const Var& x, const Var& kernels) {
    Var n = make_node(conv1d_forward(x->value, kernels->value), {x, kernels});
    GradNode* self = n.get();
    GradNode* px = x.get();
    GradNode* pk = kernels.get();
    n->backward_fn = [self, px, pk] {
        conv1d_backward(px->value, pk->value, self->grad,
                        px->requires_grad ? &px->grad : nullptr,
                        pk->requires_grad ? &pk->grad : nullptr);
    };
    return n;
}

Var maxpool1d(const Var& x) {
    auto argmax = std::make_shared<std::vector<std::size_t>>();
    Var n = make_node(maxpool1d_forward(x->value, argmax.get()), {x});
    GradNode* self = n.get();
    GradNode* px = x.get();
    n->backward_fn = [self, px, argmax] { maxpool1d_backward(*argmax, self->grad, &px->grad); };
    return n;
}

Var relu(const Var& x) {
    Var n = make_node(relu_forward(x->value), {x});
    GradNode* self = n.get();
    GradNode* px = x.get();
    n->backward_fn = [self, px] { relu_backward(px->value, self->grad, &px->grad); };
    return n;
}

Var batchnorm(const Var& x, const Var& gamma, const Var& beta, Tensor* running_mean,
              Tensor* running_var, bool train, double eps, double momentum) {
    auto cache = std::make_shared<BnCache>();
    Var n = make_node(batchnorm_forward(x->value, gamma->value, beta->value, running_mean,
                                        running_var, train, eps, momentum, cache.get()),
                      {x, gamma, beta});
    GradNode* self = n.get();
    GradNode* px = x.get();
    GradNode* pg = gamma.get();
    GradNode* pb = beta.get();
    n->backward_fn = [self, px, pg, pb, cache] {
        batchnorm_backward(*cache, pg->value, self->grad,
                           px->requires_grad ? &px->grad : nullptr,
                           pg->requires_grad ? &pg->grad : nullptr,
                           pb->requires_grad ? &pb->grad : nullptr);
    };
    return n;
}

Var dropout(const Var& x, double rate, Rng& rng, bool train) {
    auto mask = std::make_shared<Tensor>();
    Var n = make_node(dropout_forward(x->value, rate, rng, train, mask.get()), {x});
    GradNode* self = n.get();
    GradNode* px = x.get();
    n->backward_fn = [self, px, mask] { dropout_backward(*mask, self->grad, &px->grad); };
    return n;
}

Var l1_normalize(const Var& x, double eps) {
    auto sums = std::make_shared<Tensor>();
    Var n = make_node(l1_normalize_forward(x->value, eps, sums.get()), {x});
    GradNode* self = n.get();
    GradNode* px = x.get();
    n->backward_fn = [self, px, sums, eps] {
        l1_normalize_backward(self->value, *sums, eps, self->grad, &px->grad);
    };
    return n;
}

Var sad(const Var& y, const Var& yhat, double eps_c) {
    auto cache = std::make_shared<SadCache>();
    Var n = make_node(sad_forward(y->value, yhat->value, eps_c, cache.get()), {y, yhat});
    GradNode* self = n.get();
    GradNode* py = y.get();
    GradNode* ph = yhat.get();
    n->backward_fn = [self, py, ph, cache] {
        sad_backward(py->value, ph->value, *cache, self->grad,
                     py->requires_grad ? &py->grad : nullptr,
                     ph->requires_grad ? &ph->grad : nullptr);
    };
    return n;
}

Var mse(const Var& a, const Var& b) {
    Var n = make_node(mse_forward(a->value, b->value), {a, b});
    GradNode* self = n.get();
    GradNode* pa = a.get();
    GradNode* pb = b.get();
    n->backward_fn = [self, pa, pb] {
        mse_backward(pa->value, pb->value, self->grad.data[0],
                     pa->requires_grad ? &pa->grad : nullptr,
                     pb->requires_grad ? &pb->grad : nullptr);
    };
    return n;
}

Var l_half(const Var& x, double eps_s) {
    Var n = make_node(l_half_forward(x->value, eps_s), {x});
    GradNode* self = n.get();
    GradNode* px = x.get();
    n->backward_fn = [self, px, eps_s] {
        l_half_backward(px->value, eps_s, self->grad, &px->grad);
    };
    return n;
}

Var group_mean(const Var& x, std::vector<std::size_t> sizes) {
    Var n = make_node(group_mean_forward(x->value, sizes), {x});
    GradNode* self = n.get();
    GradNode* px = x.get();
    n->backward_fn = [self, px, sizes = std::move(sizes)] {
        group_mean_backward(sizes, self->grad, &px->grad);
    };
    return n;
}

Var sqdiff(const Var& a, const Var& b) {
    Var n = make_node(sqdiff_forward(a->value, b->value), {a, b});
    GradNode* self = n.get();
    GradNode* pa = a.get();
    GradNode* pb = b.get();
    n->backward_fn = [self, pa, pb] {
        sqdiff_backward(pa->value, pb->value, self->grad,
                        pa->requires_grad ? &pa->grad : nullptr,
                        pb->requires_grad ? &pb->grad : nullptr);
    };
    return n;
}

Var reshape(const Var& x, std::vector<std::size_t> new_shape) {
    if (Tensor::count(new_shape) != x->value.numel())
        throw DimensionError("reshape: element count mismatch");
    Tensor v = x->value;
    v.shape = new_shape;
    Var n = make_node(std::move(v), {x});
    GradNode* self = n.get();
    GradNode* px = x.get();
    n->backward_fn = [self, px] {
        for (std::size_t i = 0; i < self->grad.numel(); ++i) px->grad.data[i] += self->grad.data[i];
    };
    return n;
}

Var add(const Var& a, const Var& b) {
    require_same_shape(a->value, b->value, "add");
    Tensor v = a->value;
    for (std::size_t i = 0; i < v.numel(); ++i) v.data[i] += b->value.data[i];
    Var n = make_node(std::move(v), {a, b});
    GradNode* self = n.get();
    GradNode* pa = a.get();
    GradNode* pb = b.get();
    n->backward_fn = [self, pa, pb] {
        for (std::size_t i = 0; i < self->grad.numel(); ++i) {
            if (pa->requires_grad) pa->grad.data[i] += self->grad.data[i];
            if (pb->requires_grad) pb->grad.data[i] += self->grad.data[i];
        }
    };
    return n;
}

Var scale(const Var& a, double c) {
    Tensor v = a->value;
    for (double& x : v.data) x *= c;
    Var n = make_node(std::move(v), {a});
    GradNode* self = n.get();
    GradNode* pa = a.get();
    n->backward_fn = [self, pa, c] {
        for (std::size_t i = 0; i < self->grad.numel(); ++i)
            pa->grad.data[i] += c * self->grad.data[i];
    };
    return n;
}

Var mean(const Var& v) {
    const std::size_t k = v->value.numel();
    double acc = 0.0;
    for (double x : v->value.data) acc += x;
    Var n = make_node(Tensor::vec({acc / static_cast<double>(k)}), {v});
    GradNode* self = n.get();
    GradNode* pv = v.get();
    n->backward_fn = [self, pv, k] {
        const double g = self->grad.data[0] / static_cast<double>(k);
        for (std::size_t i = 0; i < k; ++i) pv->grad.data[i] += g;
    };
    return n;
}

Var weighted_sum(const Var& v, Tensor weights) {
    require_same_shape(v->value, weights, "weighted_sum");
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.numel(); ++i) acc += v->value.data[i] * weights.data[i];
    Var n = make_node(Tensor::vec({acc}), {v});
    GradNode* self = n.get();
    GradNode* pv = v.get();
    n->backward_fn = [self, pv, w = std::move(weights)] {
        const double g = self->grad.data[0];
        for (std::size_t i = 0; i < w.numel(); ++i) pv->grad.data[i] += g * w.data[i];
    };
    return n;
}

}  // namespace unmix::nn
