#pragma once

#include "unmix/tensor.hpp"

namespace unmix::nn {

// Bias-corrected Adam state for one parameter group.
struct AdamState {
    Tensor m, v;  // first and second moments, shaped like the parameter
    long long t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState for_param(const Tensor& param) {
        AdamState s;
        s.m = Tensor::zeros(param.shape);
        s.v = Tensor::zeros(param.shape);
        return s;
    }
};

// One update step: t += 1, then the standard bias-corrected rule.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double lr);

}  // namespace unmix::nn
