#pragma once

#include <cstddef>
#include <vector>

#include "unmix/rng.hpp"
#include "unmix/tensor.hpp"

// Layer kernels: pure forward/backward pairs on tensors. The autodiff graph
// (graph.hpp) wraps these; eval-time code calls them directly. Backward
// functions accumulate into their gradient outputs (callers pass zeroed or
// partially accumulated tensors).
//
// Row convention: a 1-d tensor is treated as a single row wherever an op is
// defined per row (linear, l1-normalize, SAD, ...).
namespace unmix::nn {

// y = x . W^T with x [B x in] (or [in]) and W [out x in].
Tensor linear_forward(const Tensor& x, const Tensor& W);
void linear_backward(const Tensor& x, const Tensor& W, const Tensor& gy, Tensor* gx, Tensor* gW);

// Valid cross-correlation, stride 1, no bias: x [Cin x L], k [Cout x Cin x K]
// -> y [Cout x (L-K+1)].
Tensor conv1d_forward(const Tensor& x, const Tensor& kernels);
void conv1d_backward(const Tensor& x, const Tensor& kernels, const Tensor& gy, Tensor* gx,
                     Tensor* gk);

// Max pooling with kernel 2, stride 2; odd trailing element dropped. argmax
// holds the flat index into x of each output's source (first occurrence on
// ties) and routes the backward gradient.
Tensor maxpool1d_forward(const Tensor& x, std::vector<std::size_t>* argmax);
void maxpool1d_backward(const std::vector<std::size_t>& argmax, const Tensor& gy, Tensor* gx);

Tensor relu_forward(const Tensor& x);
void relu_backward(const Tensor& x, const Tensor& gy, Tensor* gx);

struct BnCache {
    Tensor xhat;     // normalized input, same shape as x
    Tensor inv_std;  // per feature
    bool train = true;
};

// X [B x n]; per-feature batch norm. In train mode updates the running stats
// in place (running = momentum * running + (1 - momentum) * batch, biased
// variance) and fills the cache for backward.
Tensor batchnorm_forward(const Tensor& X, const Tensor& gamma, const Tensor& beta,
                         Tensor* running_mean, Tensor* running_var, bool train, double eps,
                         double momentum, BnCache* cache);
void batchnorm_backward(const BnCache& cache, const Tensor& gamma, const Tensor& gy, Tensor* gx,
                        Tensor* ggamma, Tensor* gbeta);

// Inverted dropout. Train: zero with probability rate, scale survivors by
// 1/(1-rate); mask is drawn from rng and returned for backward. Eval:
// identity (mask of ones).
Tensor dropout_forward(const Tensor& x, double rate, Rng& rng, bool train, Tensor* mask);
void dropout_backward(const Tensor& mask, const Tensor& gy, Tensor* gx);

// Per row: y = x / (sum(x) + eps). Intended for nonnegative inputs (after
// ReLU); a zero row maps to a zero row.
Tensor l1_normalize_forward(const Tensor& x, double eps, Tensor* row_sums);
void l1_normalize_backward(const Tensor& y, const Tensor& row_sums, double eps, const Tensor& gy,
                           Tensor* gx);

struct SadCache {
    std::vector<double> cos_raw;     // before clamping
    std::vector<double> cos_clamped;
    std::vector<double> norm_y, norm_yhat, dot;
};

// Spectral angle per row (radians), cosine clamped to [-1+eps_c, 1-eps_c].
// Throws NumericalError on a zero-norm row.
Tensor sad_forward(const Tensor& y, const Tensor& yhat, double eps_c, SadCache* cache);
void sad_backward(const Tensor& y, const Tensor& yhat, const SadCache& cache, const Tensor& gtheta,
                  Tensor* gy, Tensor* gyhat);

// Mean squared error over all elements (scalar, shape {1}).
Tensor mse_forward(const Tensor& a, const Tensor& b);
void mse_backward(const Tensor& a, const Tensor& b, double gout, Tensor* ga, Tensor* gb);

// Smoothed l1/2 sparsity per row: sum(sqrt(x + eps_s)) - p * sqrt(eps_s).
// Requires x >= 0 (DomainError otherwise).
Tensor l_half_forward(const Tensor& x, double eps_s);
void l_half_backward(const Tensor& x, double eps_s, const Tensor& gout, Tensor* gx);

// Mean of contiguous row groups: X [B x p], sizes sum to B -> [Q x p].
Tensor group_mean_forward(const Tensor& x, const std::vector<std::size_t>& sizes);
void group_mean_backward(const std::vector<std::size_t>& sizes, const Tensor& gy, Tensor* gx);

// Squared euclidean distance per row: [B].
Tensor sqdiff_forward(const Tensor& a, const Tensor& b);
void sqdiff_backward(const Tensor& a, const Tensor& b, const Tensor& gout, Tensor* ga, Tensor* gb);

}  // namespace unmix::nn
