#include "unmix/nn/ops.hpp"

#include <algorithm>
#include <cmath>

#include "unmix/errors.hpp"
#include "unmix/parallel.hpp"

namespace unmix::nn {

namespace {

// rows/cols with the 1-d-as-row convention
inline std::size_t nrows(const Tensor& t) { return t.rank() >= 2 ? t.shape[0] : 1; }
inline std::size_t ncols(const Tensor& t) { return t.rank() >= 2 ? t.shape[1] : t.shape[0]; }

}  // namespace

Tensor linear_forward(const Tensor& x, const Tensor& W) {
    if (W.rank() != 2) throw DimensionError("linear: weight must be 2-d, got " + W.shape_str());
    const std::size_t B = nrows(x), in = ncols(x);
    const std::size_t out = W.shape[0];
    if (W.shape[1] != in)
        throw DimensionError("linear: input width " + std::to_string(in) +
                             " does not match weight " + W.shape_str());
    Tensor y = x.rank() >= 2 ? Tensor::zeros({B, out}) : Tensor::zeros({out});
    par::parallel_for(B, [&](std::size_t b) {
        const double* xr = x.data.data() + b * in;
        double* yr = y.data.data() + b * out;
        for (std::size_t o = 0; o < out; ++o) {
            const double* wr = W.data.data() + o * in;
            double acc = 0.0;
            for (std::size_t i = 0; i < in; ++i) acc += wr[i] * xr[i];
            yr[o] = acc;
        }
    });
    return y;
}

void linear_backward(const Tensor& x, const Tensor& W, const Tensor& gy, Tensor* gx, Tensor* gW) {
    const std::size_t B = nrows(x), in = ncols(x), out = W.shape[0];
    if (gx) {
        par::parallel_for(B, [&](std::size_t b) {
            const double* gr = gy.data.data() + b * out;
            double* gxr = gx->data.data() + b * in;
            for (std::size_t o = 0; o < out; ++o) {
                const double g = gr[o];
                const double* wr = W.data.data() + o * in;
                for (std::size_t i = 0; i < in; ++i) gxr[i] += g * wr[i];
            }
        });
    }
    if (gW) {
        par::parallel_for(out, [&](std::size_t o) {
            double* gwr = gW->data.data() + o * in;
            for (std::size_t b = 0; b < B; ++b) {
                const double g = gy.data[b * out + o];
                const double* xr = x.data.data() + b * in;
                for (std::size_t i = 0; i < in; ++i) gwr[i] += g * xr[i];
            }
        });
    }
}

Tensor conv1d_forward(const Tensor& x, const Tensor& kernels) {
    if (x.rank() != 2 || kernels.rank() != 3)
        throw DimensionError("conv1d: expected x [Cin x L], kernels [Cout x Cin x K]");
    const std::size_t cin = x.shape[0], L = x.shape[1];
    const std::size_t cout = kernels.shape[0], K = kernels.shape[2];
    if (kernels.shape[1] != cin)
        throw DimensionError("conv1d: kernel input channels " + std::to_string(kernels.shape[1]) +
                             " != " + std::to_string(cin));
    if (L < K)
        throw DimensionError("conv1d: input length " + std::to_string(L) +
                             " shorter than kernel " + std::to_string(K));
    const std::size_t Lo = L - K + 1;
    Tensor y = Tensor::zeros({cout, Lo});
    par::parallel_for(cout, [&](std::size_t co) {
        double* yr = y.data.data() + co * Lo;
        for (std::size_t ci = 0; ci < cin; ++ci) {
            const double* xr = x.data.data() + ci * L;
            const double* kr = kernels.data.data() + (co * cin + ci) * K;
            for (std::size_t t = 0; t < Lo; ++t) {
                double acc = 0.0;
                for (std::size_t j = 0; j < K; ++j) acc += xr[t + j] * kr[j];
                yr[t] += acc;
            }
        }
    });
    return y;
}

void conv1d_backward(const Tensor& x, const Tensor& kernels, const Tensor& gy, Tensor* gx,
                     Tensor* gk) {
    const std::size_t cin = x.shape[0], L = x.shape[1];
    const std::size_t cout = kernels.shape[0], K = kernels.shape[2];
    const std::size_t Lo = L - K + 1;
    if (gx) {
        par::parallel_for(cin, [&](std::size_t ci) {
            double* gxr = gx->data.data() + ci * L;
            for (std::size_t co = 0; co < cout; ++co) {
                const double* gr = gy.data.data() + co * Lo;
                const double* kr = kernels.data.data() + (co * cin + ci) * K;
                for (std::size_t t = 0; t < Lo; ++t) {
                    const double g = gr[t];
                    for (std::size_t j = 0; j < K; ++j) gxr[t + j] += g * kr[j];
                }
            }
        });
    }
    if (gk) {
        par::parallel_for(cout, [&](std::size_t co) {
            const double* gr = gy.data.data() + co * Lo;
            for (std::size_t ci = 0; ci < cin; ++ci) {
                const double* xr = x.data.data() + ci * L;
                double* gkr = gk->data.data() + (co * cin + ci) * K;
                for (std::size_t j = 0; j < K; ++j) {
                    double acc = 0.0;
                    for (std::size_t t = 0; t < Lo; ++t) acc += gr[t] * xr[t + j];
                    gkr[j] += acc;
                }
            }
        });
    }
}

Tensor maxpool1d_forward(const Tensor& x, std::vector<std::size_t>* argmax) {
    if (x.rank() != 2) throw DimensionError("maxpool1d: expected x [C x L]");
    const std::size_t C = x.shape[0], L = x.shape[1];
    if (L < 2) throw DimensionError("maxpool1d: length " + std::to_string(L) + " < 2");
    const std::size_t Lo = L / 2;
    Tensor y = Tensor::zeros({C, Lo});
    argmax->assign(C * Lo, 0);
    for (std::size_t c = 0; c < C; ++c) {
        const double* xr = x.data.data() + c * L;
        for (std::size_t t = 0; t < Lo; ++t) {
            const std::size_t i0 = 2 * t;
            // first occurrence wins ties
            const bool second = xr[i0 + 1] > xr[i0];
            y.data[c * Lo + t] = second ? xr[i0 + 1] : xr[i0];
            (*argmax)[c * Lo + t] = c * L + i0 + (second ? 1 : 0);
        }
    }
    return y;
}

void maxpool1d_backward(const std::vector<std::size_t>& argmax, const Tensor& gy, Tensor* gx) {
    for (std::size_t i = 0; i < argmax.size(); ++i) gx->data[argmax[i]] += gy.data[i];
}

Tensor relu_forward(const Tensor& x) {
    Tensor y = x;
    for (double& v : y.data) v = v > 0.0 ? v : 0.0;
    return y;
}

void relu_backward(const Tensor& x, const Tensor& gy, Tensor* gx) {
    for (std::size_t i = 0; i < x.numel(); ++i)
        if (x.data[i] > 0.0) gx->data[i] += gy.data[i];
}

Tensor batchnorm_forward(const Tensor& X, const Tensor& gamma, const Tensor& beta,
                         Tensor* running_mean, Tensor* running_var, bool train, double eps,
                         double momentum, BnCache* cache) {
    if (X.rank() != 2) throw DimensionError("batchnorm: expected X [B x n]");
    const std::size_t B = X.shape[0], n = X.shape[1];
    if (gamma.numel() != n || beta.numel() != n)
        throw DimensionError("batchnorm: gamma/beta size mismatch");
    Tensor mean = Tensor::zeros({n}), var = Tensor::zeros({n});
    if (train) {
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t j = 0; j < n; ++j) mean.data[j] += X.data[b * n + j];
        for (std::size_t j = 0; j < n; ++j) mean.data[j] /= static_cast<double>(B);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t j = 0; j < n; ++j) {
                const double d = X.data[b * n + j] - mean.data[j];
                var.data[j] += d * d;
            }
        for (std::size_t j = 0; j < n; ++j) var.data[j] /= static_cast<double>(B);
        if (running_mean && running_var) {
            for (std::size_t j = 0; j < n; ++j) {
                running_mean->data[j] = momentum * running_mean->data[j] + (1.0 - momentum) * mean.data[j];
                running_var->data[j] = momentum * running_var->data[j] + (1.0 - momentum) * var.data[j];
            }
        }
    } else {
        mean = *running_mean;
        var = *running_var;
    }
    Tensor inv_std = Tensor::zeros({n});
    for (std::size_t j = 0; j < n; ++j) inv_std.data[j] = 1.0 / std::sqrt(var.data[j] + eps);
    Tensor y = Tensor::zeros({B, n});
    Tensor xhat = Tensor::zeros({B, n});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t j = 0; j < n; ++j) {
            const double xh = (X.data[b * n + j] - mean.data[j]) * inv_std.data[j];
            xhat.data[b * n + j] = xh;
            y.data[b * n + j] = gamma.data[j] * xh + beta.data[j];
        }
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
        cache->train = train;
    }
    return y;
}

void batchnorm_backward(const BnCache& cache, const Tensor& gamma, const Tensor& gy, Tensor* gx,
                        Tensor* ggamma, Tensor* gbeta) {
    const std::size_t B = cache.xhat.shape[0], n = cache.xhat.shape[1];
    std::vector<double> sum_g(n, 0.0), sum_gx(n, 0.0);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t j = 0; j < n; ++j) {
            const double g = gy.data[b * n + j];
            sum_g[j] += g;
            sum_gx[j] += g * cache.xhat.data[b * n + j];
        }
    if (ggamma)
        for (std::size_t j = 0; j < n; ++j) ggamma->data[j] += sum_gx[j];
    if (gbeta)
        for (std::size_t j = 0; j < n; ++j) gbeta->data[j] += sum_g[j];
    if (!gx) return;
    if (cache.train) {
        const double invB = 1.0 / static_cast<double>(B);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t j = 0; j < n; ++j) {
                const double g = gy.data[b * n + j];
                const double xh = cache.xhat.data[b * n + j];
                gx->data[b * n + j] += gamma.data[j] * cache.inv_std.data[j] *
                                       (g - invB * sum_g[j] - invB * xh * sum_gx[j]);
            }
    } else {
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t j = 0; j < n; ++j)
                gx->data[b * n + j] += gy.data[b * n + j] * gamma.data[j] * cache.inv_std.data[j];
    }
}

Tensor dropout_forward(const Tensor& x, double rate, Rng& rng, bool train, Tensor* mask) {
    if (rate < 0.0 || rate >= 1.0)
        throw DomainError("dropout: rate must be in [0,1), got " + std::to_string(rate));
    *mask = Tensor::full(x.shape, 1.0);
    if (train && rate > 0.0) {
        const double keep_scale = 1.0 / (1.0 - rate);
        for (std::size_t i = 0; i < mask->numel(); ++i)
            mask->data[i] = uniform01(rng) < rate ? 0.0 : keep_scale;
    }
    Tensor y = x;
    for (std::size_t i = 0; i < y.numel(); ++i) y.data[i] *= mask->data[i];
    return y;
}

void dropout_backward(const Tensor& mask, const Tensor& gy, Tensor* gx) {
    for (std::size_t i = 0; i < gy.numel(); ++i) gx->data[i] += gy.data[i] * mask.data[i];
}

Tensor l1_normalize_forward(const Tensor& x, double eps, Tensor* row_sums) {
    const std::size_t B = nrows(x), p = ncols(x);
    *row_sums = Tensor::zeros({B});
    Tensor y = x;
    for (std::size_t b = 0; b < B; ++b) {
        double s = 0.0;
        for (std::size_t j = 0; j < p; ++j) s += x.data[b * p + j];
        row_sums->data[b] = s;
        const double denom = s + eps;
        for (std::size_t j = 0; j < p; ++j) y.data[b * p + j] = x.data[b * p + j] / denom;
    }
    return y;
}

void l1_normalize_backward(const Tensor& y, const Tensor& row_sums, double eps, const Tensor& gy,
                           Tensor* gx) {
    const std::size_t B = nrows(y), p = ncols(y);
    for (std::size_t b = 0; b < B; ++b) {
        const double denom = row_sums.data[b] + eps;
        double gdoty = 0.0;
        for (std::size_t j = 0; j < p; ++j) gdoty += gy.data[b * p + j] * y.data[b * p + j];
        for (std::size_t j = 0; j < p; ++j)
            gx->data[b * p + j] += (gy.data[b * p + j] - gdoty) / denom;
    }
}

Tensor sad_forward(const Tensor& y, const Tensor& yhat, double eps_c, SadCache* cache) {
    require_same_shape(y, yhat, "sad");
    const std::size_t B = nrows(y), L = ncols(y);
    Tensor theta = Tensor::zeros({B});
    if (cache) {
        cache->cos_raw.assign(B, 0.0);
        cache->cos_clamped.assign(B, 0.0);
        cache->norm_y.assign(B, 0.0);
        cache->norm_yhat.assign(B, 0.0);
        cache->dot.assign(B, 0.0);
    }
    for (std::size_t b = 0; b < B; ++b) {
        const double* yr = y.data.data() + b * L;
        const double* hr = yhat.data.data() + b * L;
        double dot = 0.0, n1 = 0.0, n2 = 0.0;
        for (std::size_t i = 0; i < L; ++i) {
            dot += yr[i] * hr[i];
            n1 += yr[i] * yr[i];
            n2 += hr[i] * hr[i];
        }
        n1 = std::sqrt(n1);
        n2 = std::sqrt(n2);
        if (n1 == 0.0 || n2 == 0.0)
            throw NumericalError("sad: degenerate input (zero-norm vector at row " +
                                 std::to_string(b) + ")");
        const double c = dot / (n1 * n2);
        const double cc = std::clamp(c, -1.0 + eps_c, 1.0 - eps_c);
        theta.data[b] = std::acos(cc);
        if (cache) {
            cache->cos_raw[b] = c;
            cache->cos_clamped[b] = cc;
            cache->norm_y[b] = n1;
            cache->norm_yhat[b] = n2;
            cache->dot[b] = dot;
        }
    }
    return theta;
}

void sad_backward(const Tensor& y, const Tensor& yhat, const SadCache& cache, const Tensor& gtheta,
                  Tensor* gy, Tensor* gyhat) {
    const std::size_t B = nrows(y), L = ncols(y);
    for (std::size_t b = 0; b < B; ++b) {
        if (cache.cos_raw[b] != cache.cos_clamped[b]) continue;  // clamp region: zero gradient
        const double cc = cache.cos_clamped[b];
        const double dacos = -1.0 / std::sqrt(std::max(1.0 - cc * cc, 1e-300));
        const double g = gtheta.data[b] * dacos;
        const double n1 = cache.norm_y[b], n2 = cache.norm_yhat[b];
        const double* yr = y.data.data() + b * L;
        const double* hr = yhat.data.data() + b * L;
        for (std::size_t i = 0; i < L; ++i) {
            if (gyhat) gyhat->data[b * L + i] += g * (yr[i] / (n1 * n2) - cc * hr[i] / (n2 * n2));
            if (gy) gy->data[b * L + i] += g * (hr[i] / (n1 * n2) - cc * yr[i] / (n1 * n1));
        }
    }
}

Tensor mse_forward(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mse");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return Tensor::vec({acc / static_cast<double>(a.numel())});
}

void mse_backward(const Tensor& a, const Tensor& b, double gout, Tensor* ga, Tensor* gb) {
    const double scale = 2.0 * gout / static_cast<double>(a.numel());
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double d = scale * (a.data[i] - b.data[i]);
        if (ga) ga->data[i] += d;
        if (gb) gb->data[i] -= d;
    }
}

Tensor l_half_forward(const Tensor& x, double eps_s) {
    const std::size_t B = nrows(x), p = ncols(x);
    const double base = std::sqrt(eps_s);
    Tensor out = Tensor::zeros({B});
    for (std::size_t b = 0; b < B; ++b) {
        double acc = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double v = x.data[b * p + j];
            if (v < 0.0)
                throw DomainError("l_half: negative entry " + std::to_string(v));
            acc += std::sqrt(v + eps_s) - base;
        }
        out.data[b] = acc;
    }
    return out;
}

void l_half_backward(const Tensor& x, double eps_s, const Tensor& gout, Tensor* gx) {
    const std::size_t B = nrows(x), p = ncols(x);
    for (std::size_t b = 0; b < B; ++b) {
        const double g = gout.data[b];
        for (std::size_t j = 0; j < p; ++j)
            gx->data[b * p + j] += g * 0.5 / std::sqrt(x.data[b * p + j] + eps_s);
    }
}

Tensor group_mean_forward(const Tensor& x, const std::vector<std::size_t>& sizes) {
    const std::size_t p = ncols(x);
    Tensor y = Tensor::zeros({sizes.size(), p});
    std::size_t row = 0;
    for (std::size_t q = 0; q < sizes.size(); ++q) {
        if (sizes[q] == 0) throw ContractViolation("group_mean: empty group");
        for (std::size_t k = 0; k < sizes[q]; ++k, ++row)
            for (std::size_t j = 0; j < p; ++j) y.data[q * p + j] += x.data[row * p + j];
        for (std::size_t j = 0; j < p; ++j) y.data[q * p + j] /= static_cast<double>(sizes[q]);
    }
    if (row != nrows(x)) throw DimensionError("group_mean: sizes do not cover all rows");
    return y;
}

void group_mean_backward(const std::vector<std::size_t>& sizes, const Tensor& gy, Tensor* gx) {
    const std::size_t p = ncols(gy);
    std::size_t row = 0;
    for (std::size_t q = 0; q < sizes.size(); ++q) {
        const double inv = 1.0 / static_cast<double>(sizes[q]);
        for (std::size_t k = 0; k < sizes[q]; ++k, ++row)
            for (std::size_t j = 0; j < p; ++j) gx->data[row * p + j] += gy.data[q * p + j] * inv;
    }
}

Tensor sqdiff_forward(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sqdiff");
    const std::size_t B = nrows(a), p = ncols(a);
    Tensor out = Tensor::zeros({B});
    for (std::size_t r = 0; r < B; ++r) {
        double acc = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double d = a.data[r * p + j] - b.data[r * p + j];
            acc += d * d;
        }
        out.data[r] = acc;
    }
    return out;
}

void sqdiff_backward(const Tensor& a, const Tensor& b, const Tensor& gout, Tensor* ga, Tensor* gb) {
    const std::size_t B = nrows(a), p = ncols(a);
    for (std::size_t r = 0; r < B; ++r) {
        const double g = 2.0 * gout.data[r];
        for (std::size_t j = 0; j < p; ++j) {
            const double d = g * (a.data[r * p + j] - b.data[r * p + j]);
            if (ga) ga->data[r * p + j] += d;
            if (gb) gb->data[r * p + j] -= d;
        }
    }
}

}  // namespace unmix::nn
