#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "unmix/nn/ops.hpp"
#include "unmix/rng.hpp"
#include "unmix/tensor.hpp"

// Reverse-mode differentiation over the layer kernels. Nodes hold the forward
// value, an accumulated gradient of identical shape, and a backward closure
// capturing whatever the kernel saved (masks, pool indices, batch statistics).
namespace unmix::nn {

struct GradNode {
    Tensor value;
    Tensor grad;  // zero-initialized, same shape as value
    std::vector<std::shared_ptr<GradNode>> parents;
    std::function<void()> backward_fn;  // accumulates this->grad into parents
    bool requires_grad = false;
};

using Var = std::shared_ptr<GradNode>;

// A leaf that participates in gradient accumulation (parameters, checked inputs).
Var leaf(Tensor value);
// A leaf treated as a constant (no gradient storage semantics beyond the zeros).
Var constant(Tensor value);

// Reverse accumulation from a scalar root (numel()==1). Seeds d(root)/d(root)=1
// and runs every backward closure once in reverse topological order.
void backward(const Var& root);

Var linear(const Var& x, const Var& W);
Var conv1d(const Var& x, const Var& kernels);
Var maxpool1d(const Var& x);
Var relu(const Var& x);
Var batchnorm(const Var& x, const Var& gamma, const Var& beta, Tensor* running_mean,
              Tensor* running_var, bool train, double eps, double momentum);
Var dropout(const Var& x, double rate, Rng& rng, bool train);
Var l1_normalize(const Var& x, double eps);
Var sad(const Var& y, const Var& yhat, double eps_c);  // per row -> [B]
Var mse(const Var& a, const Var& b);                   // scalar
Var l_half(const Var& x, double eps_s);                // per row -> [B]
Var group_mean(const Var& x, std::vector<std::size_t> sizes);
Var sqdiff(const Var& a, const Var& b);  // per row -> [B]
Var reshape(const Var& x, std::vector<std::size_t> new_shape);

Var add(const Var& a, const Var& b);              // elementwise, same shape
Var scale(const Var& a, double c);                // c * a
Var mean(const Var& v);                           // vector -> scalar
Var weighted_sum(const Var& v, Tensor weights);   // fixed weights -> scalar

}  // namespace unmix::nn
