#include "unmix/gradcheck_suite.hpp"

#include <cmath>

#include "unmix/nn/gradcheck.hpp"
#include "unmix/nn/graph.hpp"
#include "unmix/rng.hpp"
#include "unmix/sscu.hpp"
#include "unmix/synth.hpp"

namespace unmix {

namespace {

using nn::Var;

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = uniform(rng, lo, hi);
    return t;
}

// random positive cotangent turning a tensor-valued graph into a scalar
Tensor random_weights(const Tensor& like, Rng& rng) {
    Tensor w = Tensor::zeros({like.numel()});
    for (double& v : w.data) v = uniform(rng, 0.2, 1.0);
    return w;
}

Var as_scalar(const Var& v, const Tensor& w) {
    return nn::weighted_sum(nn::reshape(v, {v->value.numel()}), w);
}

}  // namespace

std::vector<SuiteEntry> gradcheck_suite() {
    std::vector<SuiteEntry> entries;
    Rng rng(20240617);

    {  // dense layer, gradients for input and weight
        Tensor x = random_tensor({5}, rng), W = random_tensor({3, 5}, rng);
        Tensor w = Tensor::vec({0.7, 0.9, 0.4});
        auto rep = nn::grad_check(
            [&](const std::vector<Var>& leaves) {
                return as_scalar(nn::linear(leaves[0], leaves[1]), w);
            },
            {x, W}, {"x", "W"});
        entries.push_back({"dense_forward", rep.max_rel_err, 1e-4});
    }
    {  // conv1d on a 2x20 input with 3x2x5 kernels
        Tensor x = random_tensor({2, 20}, rng), k = random_tensor({3, 2, 5}, rng);
        Tensor w = random_weights(Tensor::zeros({3, 16}), rng);
        auto rep = nn::grad_check(
            [&](const std::vector<Var>& leaves) {
                return as_scalar(nn::conv1d(leaves[0], leaves[1]), w);
            },
            {x, k}, {"x", "kernels"});
        entries.push_back({"conv1d_forward", rep.max_rel_err, 1e-4});
    }
    {  // maxpool (away from ties) composed with conv
        Tensor x = random_tensor({3, 14}, rng);
        Tensor w = random_weights(Tensor::zeros({3, 7}), rng);
        auto rep = nn::grad_check(
            [&](const std::vector<Var>& leaves) {
                return as_scalar(nn::maxpool1d(leaves[0]), w);
            },
            {x}, {"x"});
        entries.push_back({"maxpool1d_forward", rep.max_rel_err, 1e-4});
    }
    {  // relu away from the kink
        Tensor x = random_tensor({12}, rng);
        for (double& v : x.data)
            if (std::fabs(v) < 0.05) v += 0.1;
        Tensor w = random_weights(x, rng);
        auto rep = nn::grad_check(
            [&](const std::vector<Var>& leaves) { return as_scalar(nn::relu(leaves[0]), w); },
            {x}, {"x"});
        entries.push_back({"relu", rep.max_rel_err, 1e-4});
    }
    {  // batch norm, train mode, gradients through the batch statistics
        Tensor x = random_tensor({6, 4}, rng);
        Tensor gamma = random_tensor({4}, rng, 0.5, 1.5);
        Tensor beta = random_tensor({4}, rng, -0.5, 0.5);
        Tensor w = random_weights(x, rng);
        auto rep = nn::grad_check(
            [&](const std::vector<Var>& leaves) {
                Tensor rm = Tensor::zeros({4}), rv = Tensor::full({4}, 1.0);
                return as_scalar(
                    nn::batchnorm(leaves[0], leaves[1], leaves[2], &rm, &rv, true, kBnEps,
                                  kBnMomentum),
                    w);
            },
            {x, gamma, beta}, {"x", "gamma", "beta"});
        entries.push_back({"batchnorm_train", rep.max_rel_err, 1e-4});
    }
    {  // batch norm, eval mode
        Tensor x = random_tensor({5, 3}, rng);
        Tensor gamma = random_tensor({3}, rng, 0.5, 1.5);
        Tensor beta = random_tensor({3}, rng, -0.5, 0.5);
        Tensor rm0 = random_tensor({3}, rng, -0.2, 0.2);
        Tensor rv0 = random_tensor({3}, rng, 0.5, 1.5);
        Tensor w = random_weights(x, rng);
        auto rep = nn::grad_check(
            [&](const std::vector<Var>& leaves) {
                Tensor rm = rm0, rv = rv0;
                return as_scalar(
                    nn::batchnorm(leaves[0], leaves[1], leaves[2], &rm, &rv, false, kBnEps,
                                  kBnMomentum),
                    w);
            },
            {x, gamma, beta}, {"x", "gamma", "beta"});
        entries.push_back({"batchnorm_eval", rep.max_rel_err, 1e-4});
    }
    {  // dropout with the mask frozen by reseeding
        Tensor x = random_tensor({10}, rng);
        Tensor w = random_weights(x, rng);
        auto rep = nn::grad_check(
            [&](const std::vector<Var>& leaves) {
                Rng mask_rng(123);
                return as_scalar(nn::dropout(leaves[0], 0.3, mask_rng, true), w);
            },
            {x}, {"x"});
        entries.push_back({"dropout_frozen", rep.max_rel_err, 1e-4});
    }
    {  // l1 normalization of a positive vector
        Tensor x = random_tensor({6}, rng, 0.1, 1.0);
        Tensor w = random_weights(x, rng);
        auto rep = nn::grad_check(
            [&](const std::vector<Var>& leaves) {
                return as_scalar(nn::l1_normalize(leaves[0], 1e-9), w);
            },
            {x}, {"x"});
        entries.push_back({"l1_normalize", rep.max_rel_err, 1e-4});
    }
    {  // spectral angle, gradient w.r.t. the reconstruction
        Tensor y = random_tensor({8}, rng, 0.2, 1.0);
        Tensor yhat = random_tensor({8}, rng, 0.2, 1.0);
        auto rep = nn::grad_check(
            [&](const std::vector<Var>& leaves) {
                return nn::sad(nn::constant(y), leaves[0], kSadClampEps);
            },
            {yhat}, {"yhat"});
        entries.push_back({"sad", rep.max_rel_err, 1e-4});
    }
    {  // mean squared error (quadratic: central differences are near-exact)
        Tensor a = random_tensor({7}, rng), b = random_tensor({7}, rng);
        auto rep = nn::grad_check(
            [&](const std::vector<Var>& leaves) { return nn::mse(leaves[0], leaves[1]); },
            {a, b}, {"a", "b"});
        entries.push_back({"mse", rep.max_rel_err, 1e-8});
    }
    {  // smoothed l1/2 sparsity term
        Tensor x = random_tensor({6}, rng, 0.05, 1.0);
        auto rep = nn::grad_check(
            [&](const std::vector<Var>& leaves) { return nn::mean(nn::l_half(leaves[0], kLHalfEps)); },
            {x}, {"x"});
        entries.push_back({"l_half", rep.max_rel_err, 1e-4});
    }
    {  // composite: dense -> relu -> sad
        Tensor y = random_tensor({6}, rng, 0.2, 1.0);
        Tensor x = random_tensor({4}, rng, 0.1, 1.0);
        Tensor W = random_tensor({6, 4}, rng, 0.1, 0.9);
        auto rep = nn::grad_check(
            [&](const std::vector<Var>& leaves) {
                Var out = nn::relu(nn::linear(leaves[0], leaves[1]));
                return nn::sad(nn::constant(y), out, kSadClampEps);
            },
            {x, W}, {"x", "W"});
        entries.push_back({"dense_relu_sad", rep.max_rel_err, 1e-4});
    }

    // full-loss graphs on a small synthetic scene (frozen dropout, eval BN)
    const std::size_t L = 66, p = 3;
    EndmemberSet em = gen_endmembers(p, L, 11);
    Rng scene_rng(99);
    auto random_pixel = [&](double purity) {
        std::vector<double> x(p, (1.0 - purity) / static_cast<double>(p - 1));
        x[uniform_index(scene_rng, p)] = purity;
        Tensor y = Tensor::zeros({L});
        for (std::size_t j = 0; j < p; ++j)
            for (std::size_t b = 0; b < L; ++b) y.data[b] += x[j] * em.row(j)[b];
        for (std::size_t b = 0; b < L; ++b) y.data[b] += 0.01 * normal01(scene_rng);
        return y;
    };

    {  // spatial-phase loss: 3 superpixels x 3 pixels
        const std::size_t Q = 3, K = 3;
        Tensor pixels = Tensor::zeros({Q * K, L});
        Tensor centers = Tensor::zeros({Q, L});
        for (std::size_t q = 0; q < Q; ++q) {
            for (std::size_t k = 0; k < K; ++k) {
                const Tensor y = random_pixel(0.7);
                std::copy(y.data.begin(), y.data.end(),
                          pixels.data.begin() + static_cast<long>((q * K + k) * L));
                if (k == 0)
                    std::copy(y.data.begin(), y.data.end(),
                              centers.data.begin() + static_cast<long>(q * L));
            }
        }
        Rng init(5);
        // nonnegative weights keep every hidden channel of every pixel alive,
        // so the superpixel means never collapse to the degenerate-SAD case
        Tensor We = random_tensor({p, L}, init, 0.02, 0.12);
        Tensor gamma = Tensor::full({p}, 1.0), beta = Tensor::full({p}, 0.1);
        Tensor Wd = Tensor::zeros({L, p});
        for (std::size_t b = 0; b < L; ++b)
            for (std::size_t j = 0; j < p; ++j) Wd.data[b * p + j] = em.row(j)[b];
        Tensor x_scae = random_tensor({Q * K, p}, init, 0.0, 0.4);
        const std::vector<std::size_t> sizes(Q, K);
        Tensor w = Tensor::zeros({Q * K});
        for (std::size_t i = 0; i < Q * K; ++i)
            w.data[i] = 1.0 / static_cast<double>(Q * K);
        const Tensor rm0 = Tensor::zeros({p}), rv0 = Tensor::full({p}, 1.0);

        auto rep = nn::grad_check(
            [&](const std::vector<Var>& leaves) {
                Tensor rm = rm0, rv = rv0;
                Rng mask_rng(77);
                Var z = nn::linear(nn::constant(pixels), leaves[0]);
                Var zb = nn::batchnorm(z, leaves[1], leaves[2], &rm, &rv, false, kBnEps,
                                       kBnMomentum);
                Var zd = nn::dropout(zb, 0.1, mask_rng, true);
                Var h = nn::relu(zd);
                Var x = nn::l1_normalize(h, 1e-9);
                Var xc = nn::group_mean(x, sizes);
                Var yc = nn::linear(xc, leaves[3]);
                Var sads = nn::sad(nn::constant(centers), yc, kSadClampEps);
                Var lh = nn::l_half(xc, kLHalfEps);
                Var l_sae = nn::add(nn::mean(sads), nn::scale(nn::mean(lh), 5e-5));
                Var l_col = nn::weighted_sum(nn::sqdiff(x, nn::constant(x_scae)), w);
                return nn::add(l_sae, nn::scale(l_col, 0.5));
            },
            {We, gamma, beta, Wd}, {"W_e", "gamma", "beta", "W_d"});
        entries.push_back({"sae_phase_loss", rep.max_rel_err, 1e-4});
    }

    {  // spectral-phase loss on one pixel through the full conv stack
        const ScaeShape shape = scae_shape(L);
        Rng init(6);
        Tensor conv1 = random_tensor({3, 1, 5}, init, -0.4, 0.4);
        Tensor conv2 = random_tensor({6, 3, 4}, init, -0.3, 0.3);
        Tensor conv3 = random_tensor({12, 6, 5}, init, -0.25, 0.25);
        Tensor conv4 = random_tensor({24, 12, 4}, init, -0.2, 0.2);
        Tensor fc2 = random_tensor({100, shape.flatten}, init, -0.1, 0.1);
        Tensor fc3 = random_tensor({p, 100}, init, 0.0, 0.15);
        Tensor Wd = Tensor::zeros({L, p});
        for (std::size_t b = 0; b < L; ++b)
            for (std::size_t j = 0; j < p; ++j) Wd.data[b * p + j] = em.row(j)[b];
        const Tensor y = random_pixel(0.8);
        Tensor ymat({1, L}, y.data);
        Tensor x_sae = random_tensor({1, p}, init, 0.1, 0.4);

        auto rep = nn::grad_check(
            [&](const std::vector<Var>& leaves) {
                Var cur = nn::constant(ymat);
                cur = nn::maxpool1d(nn::relu(nn::conv1d(cur, leaves[0])));
                cur = nn::maxpool1d(nn::relu(nn::conv1d(cur, leaves[1])));
                cur = nn::maxpool1d(nn::relu(nn::conv1d(cur, leaves[2])));
                cur = nn::maxpool1d(nn::relu(nn::conv1d(cur, leaves[3])));
                cur = nn::reshape(cur, {1, cur->value.numel()});
                cur = nn::relu(nn::linear(cur, leaves[4]));
                cur = nn::relu(nn::linear(cur, leaves[5]));
                Var xk = nn::l1_normalize(cur, 1e-9);
                Var yhat = nn::linear(xk, leaves[6]);
                Var sadk = nn::sad(nn::constant(ymat), yhat, kSadClampEps);
                Var lhk = nn::l_half(xk, kLHalfEps);
                Var sqk = nn::sqdiff(xk, nn::constant(x_sae));
                return nn::add(nn::add(sadk, nn::scale(lhk, 5e-5)), nn::scale(sqk, 0.5));
            },
            {conv1, conv2, conv3, conv4, fc2, fc3, Wd},
            {"conv1", "conv2", "conv3", "conv4", "fc_hidden", "fc_out", "W_d"});
        entries.push_back({"scae_phase_loss", rep.max_rel_err, 1e-4});
    }

    return entries;
}

}  // namespace unmix
