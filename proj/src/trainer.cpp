#include <algorithm>
#include <cmath>
#include <cstring>

#include "unmix/errors.hpp"
#include "unmix/nn/graph.hpp"
#include "unmix/parallel.hpp"
#include "unmix/sscu.hpp"

namespace unmix {

namespace {

using nn::Var;

void check_finite(double v, int epoch, std::size_t batch, const char* term) {
    if (!std::isfinite(v))
        throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(batch) + ", term " + term);
}

void clamp_nonnegative(Tensor& t) {
    for (double& v : t.data) v = v > 0.0 ? v : 0.0;
}

// Bitwise comparison of the decoder as seen through the two stream views.
bool decoder_views_agree(const SscuModel& model) {
    const Tensor& a = model.sae_decoder();
    const Tensor& b = model.scae_decoder();
    if (&a != &b) return false;
    return std::memcmp(a.data.data(), b.data.data(), a.numel() * sizeof(double)) == 0;
}

// Per-thread leaf set for the spectral stream's per-pixel graphs.
struct ScaeLeaves {
    std::array<Var, 4> conv;
    Var fc_hidden, fc_out, decoder;
};

ScaeLeaves make_scae_leaves(const SscuModel& model) {
    ScaeLeaves l;
    for (std::size_t s = 0; s < 4; ++s) l.conv[s] = nn::leaf(model.scae.conv[s]);
    l.fc_hidden = nn::leaf(model.scae.fc_hidden);
    l.fc_out = nn::leaf(model.scae.fc_out);
    l.decoder = nn::leaf(model.decoder_weight);
    return l;
}

struct BatchLosses {
    double l_sae = 0.0, l_scae = 0.0, l_col = 0.0;
    std::size_t skipped = 0;
};

}  // namespace

TrainResult train(SscuModel& model, const HsiCube& cube, const Segmentation& seg) {
    const TrainConfig& cfg = model.config;
    cfg.validate();
    if (cube.bands != model.bands) throw DimensionError("train: cube band count mismatch");
    if (seg.height != cube.height || seg.width != cube.width)
        throw DimensionError("train: segmentation size mismatch");

    const bool parallel_was = par::enabled();
    if (cfg.deterministic) par::set_enabled(false);

    const Tensor rows = pixels_as_rows(cube);
    const std::size_t Q_total = seg.count();
    const std::size_t p = model.endmembers;

    TrainResult result;
    result.trace.reserve(static_cast<std::size_t>(cfg.epochs));

    std::vector<std::size_t> order(Q_total);
    for (std::size_t i = 0; i < Q_total; ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the epoch substream
        Rng shuffle_rng(mix_seed(cfg.seed, 0x0e0c, static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = Q_total; i > 1; --i) {
            const std::size_t j = uniform_index(shuffle_rng, i);
            std::swap(order[i - 1], order[j]);
        }

        // whole superpixels until the member pixels reach the batch size
        std::vector<std::vector<std::size_t>> batches;
        std::vector<std::size_t> current;
        std::size_t pixel_count = 0;
        for (std::size_t id : order) {
            current.push_back(id);
            pixel_count += seg.superpixels[id].members.size();
            if (pixel_count >= static_cast<std::size_t>(cfg.batch_pixels)) {
                batches.push_back(std::move(current));
                current.clear();
                pixel_count = 0;
            }
        }
        if (!current.empty()) batches.push_back(std::move(current));

        EpochStats stats;
        std::size_t counted_batches = 0;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            SuperpixelBatch batch = make_batch(rows, seg, batches[bi]);
            result.skipped += batch.dropped_pixels;
            if (batch.sizes.empty()) continue;
            const std::size_t N = batch.pixel_index.size();
            const std::size_t Q = batch.sizes.size();

            // per-pixel weights of the double average (Eqs. 17/18 structure)
            Tensor w = Tensor::zeros({N});
            {
                std::size_t row = 0;
                for (std::size_t q = 0; q < Q; ++q)
                    for (std::size_t k = 0; k < batch.sizes[q]; ++k, ++row)
                        w.data[row] = 1.0 / (static_cast<double>(Q) *
                                             static_cast<double>(batch.sizes[q]));
            }

            // spectral-stream abundances entering phase A as constants
            const Tensor x_scae_const = scae_encode_batch(model, batch.pixels);

            // ---- phase A: spatial stream + shared decoder ----
            // A superpixel whose mean code collapses to zero (or whose decode
            // degenerates) cannot pass through the SAD loss; such samples are
            // dropped from the batch and the forward is retried. The batch
            // norm running stats are restored before each retry so exactly
            // one update survives.
            BatchLosses losses;
            const Tensor rm_snapshot = model.sae.bn_running_mean;
            const Tensor rv_snapshot = model.sae.bn_running_var;
            Var we = nn::leaf(model.sae.encoder_weight);
            Var gamma = nn::leaf(model.sae.bn_gamma);
            Var beta = nn::leaf(model.sae.bn_beta);
            Var wd_a = nn::leaf(model.decoder_weight);
            Var x_sae, l_sae_v, l_col_v, loss_a;
            bool phase_a_ok = false;
            for (int attempt = 0; attempt < 3 && !phase_a_ok; ++attempt) {
                if (batch.sizes.empty()) break;
                model.sae.bn_running_mean = rm_snapshot;
                model.sae.bn_running_var = rv_snapshot;
                Rng dropout_rng(mix_seed(cfg.seed, 0xd0,
                                         static_cast<std::uint64_t>(epoch) * 1000003 + bi));
                Var z = nn::linear(nn::constant(batch.pixels), we);
                Var zb = nn::batchnorm(z, gamma, beta, &model.sae.bn_running_mean,
                                       &model.sae.bn_running_var, true, kBnEps, kBnMomentum);
                Var zd = nn::dropout(zb, cfg.dropout_rate, dropout_rng, true);
                x_sae = nn::l1_normalize(nn::relu(zd), cfg.l1_eps);

                const std::size_t Qa = batch.sizes.size();
                Tensor xc_probe = nn::group_mean_forward(x_sae->value, batch.sizes);
                if (!xc_probe.all_finite())
                    throw NumericalError("train: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch " + std::to_string(bi) +
                                         ", term SAE forward");
                std::vector<std::size_t> keep_ids;
                for (std::size_t q = 0; q < Qa; ++q) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < p; ++j) s += xc_probe.data[q * p + j];
                    if (s > 0.0) keep_ids.push_back(batch.superpixel_ids[q]);
                }
                if (keep_ids.size() != Qa) {
                    losses.skipped += Qa - keep_ids.size();
                    if (keep_ids.empty()) break;
                    batch = make_batch(rows, seg, keep_ids);
                    continue;
                }
                try {
                    Var xc = nn::group_mean(x_sae, batch.sizes);
                    Var yc_hat = nn::linear(xc, wd_a);
                    Var sads = nn::sad(nn::constant(batch.centers), yc_hat, kSadClampEps);
                    Var lh = nn::l_half(xc, kLHalfEps);
                    l_sae_v = nn::add(nn::mean(sads), nn::scale(nn::mean(lh), cfg.lambda_sparsity));
                    // weights of the double average (Eq. 18 structure)
                    w = Tensor::zeros({batch.pixel_index.size()});
                    std::size_t row = 0;
                    for (std::size_t q = 0; q < batch.sizes.size(); ++q)
                        for (std::size_t k = 0; k < batch.sizes[q]; ++k, ++row)
                            w.data[row] = 1.0 / (static_cast<double>(batch.sizes.size()) *
                                                 static_cast<double>(batch.sizes[q]));
                    const Tensor x_scae_batch = batch.pixel_index.size() == N
                                                    ? x_scae_const
                                                    : scae_encode_batch(model, batch.pixels);
                    Var dcol = nn::sqdiff(x_sae, nn::constant(x_scae_batch));
                    l_col_v = nn::weighted_sum(dcol, w);
                    loss_a = nn::add(l_sae_v, nn::scale(l_col_v, cfg.mu_collab));
                    phase_a_ok = true;
                } catch (const NumericalError&) {
                    // a degenerate decode slipped past the mass probe (a dead
                    // decoder column); drop the whole batch and log it
                    break;
                }
            }
            if (!phase_a_ok) {
                model.sae.bn_running_mean = rm_snapshot;
                model.sae.bn_running_var = rv_snapshot;
                result.skipped += losses.skipped + batch.sizes.size();
                continue;
            }
            result.skipped += losses.skipped;
            const std::size_t Nb = batch.pixel_index.size();

            nn::backward(loss_a);
            losses.l_sae = l_sae_v->value.data[0];
            losses.l_col = l_col_v->value.data[0];
            check_finite(losses.l_sae, epoch, bi, "L_SAE");
            check_finite(losses.l_col, epoch, bi, "L_COL");

            nn::adam_step(model.sae.encoder_weight, we->grad, model.adam_sae_encoder,
                          cfg.lr_encoder);
            nn::adam_step(model.sae.bn_gamma, gamma->grad, model.adam_bn_gamma, cfg.lr_encoder);
            nn::adam_step(model.sae.bn_beta, beta->grad, model.adam_bn_beta, cfg.lr_encoder);
            nn::adam_step(model.decoder_weight, wd_a->grad, model.adam_decoder, cfg.lr_decoder);
            clamp_nonnegative(model.decoder_weight);
            if (!decoder_views_agree(model)) ++result.decoder_view_violations;

            // ---- phase B: spectral stream + shared decoder ----
            const Tensor x_sae_const = x_sae->value;  // held constant in Eq. 18
            const int threads = par::enabled() ? par::max_threads() : 1;
            std::vector<ScaeLeaves> leaves;
            leaves.reserve(static_cast<std::size_t>(threads));
            for (int t = 0; t < threads; ++t) leaves.push_back(make_scae_leaves(model));
            std::vector<double> l_scae_partial(static_cast<std::size_t>(threads), 0.0);
            std::vector<std::size_t> skip_partial(static_cast<std::size_t>(threads), 0);

            const std::size_t L = model.bands;
            par::parallel_for(static_cast<std::size_t>(threads), [&](std::size_t t) {
                ScaeLeaves& lf = leaves[t];
                const std::size_t lo = Nb * t / static_cast<std::size_t>(threads);
                const std::size_t hi = Nb * (t + 1) / static_cast<std::size_t>(threads);
                for (std::size_t k = lo; k < hi; ++k) {
                    try {
                        Tensor px({1, L}, std::vector<double>(
                                              batch.pixels.data.begin() + static_cast<long>(k * L),
                                              batch.pixels.data.begin() +
                                                  static_cast<long>((k + 1) * L)));
                        Var hk = nn::constant(std::move(px));
                        Var cur = hk;
                        for (std::size_t s = 0; s < 4; ++s)
                            cur = nn::maxpool1d(nn::relu(nn::conv1d(cur, lf.conv[s])));
                        cur = nn::reshape(cur, {1, cur->value.numel()});
                        cur = nn::relu(nn::linear(cur, lf.fc_hidden));
                        cur = nn::relu(nn::linear(cur, lf.fc_out));
                        Var xk = nn::l1_normalize(cur, cfg.l1_eps);
                        Var yhat = nn::linear(xk, lf.decoder);
                        Tensor yk({1, L}, std::vector<double>(
                                              batch.pixels.data.begin() + static_cast<long>(k * L),
                                              batch.pixels.data.begin() +
                                                  static_cast<long>((k + 1) * L)));
                        Var sadk = nn::sad(nn::constant(std::move(yk)), yhat, kSadClampEps);
                        Var lhk = nn::l_half(xk, kLHalfEps);
                        Tensor xs({1, p}, std::vector<double>(
                                              x_sae_const.data.begin() + static_cast<long>(k * p),
                                              x_sae_const.data.begin() +
                                                  static_cast<long>((k + 1) * p)));
                        Var sqk = nn::sqdiff(xk, nn::constant(std::move(xs)));
                        Var recon = nn::add(sadk, nn::scale(lhk, cfg.lambda_sparsity));
                        Var root = nn::scale(nn::add(recon, nn::scale(sqk, cfg.mu_collab)),
                                             w.data[k]);
                        nn::backward(root);
                        l_scae_partial[t] += w.data[k] * recon->value.data[0];
                    } catch (const NumericalError&) {
                        ++skip_partial[t];
                    }
                }
            });

            for (int t = 0; t < threads; ++t) {
                result.skipped += skip_partial[static_cast<std::size_t>(t)];
                losses.l_scae += l_scae_partial[static_cast<std::size_t>(t)];
            }
            check_finite(losses.l_scae, epoch, bi, "L_SCAE");

            // reduce thread gradients in thread order, then step each group
            auto reduce_step = [&](Tensor& param, nn::AdamState& state, double lr,
                                   auto leaf_selector) {
                Tensor grad = Tensor::zeros(param.shape);
                for (int t = 0; t < threads; ++t) {
                    const Tensor& g = leaf_selector(leaves[static_cast<std::size_t>(t)])->grad;
                    for (std::size_t i = 0; i < grad.numel(); ++i) grad.data[i] += g.data[i];
                }
                nn::adam_step(param, grad, state, lr);
            };
            for (std::size_t s = 0; s < 4; ++s)
                reduce_step(model.scae.conv[s], model.adam_conv[s], cfg.lr_encoder,
                            [s](ScaeLeaves& lf) { return lf.conv[s]; });
            reduce_step(model.scae.fc_hidden, model.adam_fc_hidden, cfg.lr_encoder,
                        [](ScaeLeaves& lf) { return lf.fc_hidden; });
            reduce_step(model.scae.fc_out, model.adam_fc_out, cfg.lr_encoder,
                        [](ScaeLeaves& lf) { return lf.fc_out; });
            reduce_step(model.decoder_weight, model.adam_decoder, cfg.lr_decoder,
                        [](ScaeLeaves& lf) { return lf.decoder; });
            clamp_nonnegative(model.decoder_weight);
            if (!decoder_views_agree(model)) ++result.decoder_view_violations;

            stats.l_sae += losses.l_sae;
            stats.l_scae += losses.l_scae;
            stats.l_col += losses.l_col;
            ++counted_batches;
        }

        if (counted_batches == 0)
            throw NumericalError("train: every batch of epoch " + std::to_string(epoch) +
                                 " was degenerate");
        {
            stats.l_sae /= static_cast<double>(counted_batches);
            stats.l_scae /= static_cast<double>(counted_batches);
            stats.l_col /= static_cast<double>(counted_batches);
        }
        stats.total = stats.l_sae + stats.l_scae + cfg.mu_collab * stats.l_col;
        check_finite(stats.total, epoch, 0, "total");
        result.trace.push_back(stats);
    }

    par::set_enabled(parallel_was);
    return result;
}

}  // namespace unmix
