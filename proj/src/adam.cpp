#include "unmix/nn/adam.hpp"

#include <cmath>

#include "unmix/errors.hpp"

namespace unmix::nn {

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double lr) {
    require_same_shape(param, grad, "adam_step");
    require_same_shape(param, state.m, "adam_step");
    if (lr <= 0.0) throw DomainError("adam_step: lr must be positive");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < param.numel(); ++i) {
        const double g = grad.data[i];
        state.m.data[i] = state.beta1 * state.m.data[i] + (1.0 - state.beta1) * g;
        state.v.data[i] = state.beta2 * state.v.data[i] + (1.0 - state.beta2) * g * g;
        const double mhat = state.m.data[i] / bc1;
        const double vhat = state.v.data[i] / bc2;
        param.data[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

}  // namespace unmix::nn
