#include "unmix/sscu.hpp"

#include <algorithm>
#include <cmath>

#include "unmix/errors.hpp"
#include "unmix/nn/ops.hpp"
#include "unmix/parallel.hpp"

namespace unmix {

namespace {

constexpr std::array<std::size_t, 4> kConvChannels{3, 6, 12, 24};
constexpr std::array<std::size_t, 4> kConvKernels{5, 4, 5, 4};

Tensor he_normal(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng,
                 bool nonnegative = false) {
    Tensor t = Tensor::zeros(std::move(shape));
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& v : t.data) {
        v = stddev * normal01(rng);
        if (nonnegative) v = std::fabs(v);
    }
    return t;
}

// The conv/FC stack sees only nonnegative, spectrally smooth inputs, so a
// filter whose coefficients sum to a negative value responds negatively
// almost everywhere and its ReLU output dies at initialization. Flipping the
// sign of such rows keeps every channel alive without changing the He scale.
void flip_negative_sum_rows(Tensor& t, std::size_t row_elems) {
    for (std::size_t r = 0; r < t.numel() / row_elems; ++r) {
        double sum = 0.0;
        for (std::size_t i = 0; i < row_elems; ++i) sum += t.data[r * row_elems + i];
        if (sum < 0.0)
            for (std::size_t i = 0; i < row_elems; ++i) t.data[r * row_elems + i] *= -1.0;
    }
}

double row_norm(const double* v, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += v[i] * v[i];
    return std::sqrt(acc);
}

}  // namespace

ScaeShape scae_shape(std::size_t bands) {
    ScaeShape shape;
    std::size_t len = bands;
    for (std::size_t s = 0; s < 4; ++s) {
        if (len < kConvKernels[s])
            throw DomainError("scae: " + std::to_string(bands) +
                              " bands are too few for the conv/pool stack; minimum is " +
                              std::to_string(kScaeMinBands));
        len = len - kConvKernels[s] + 1;
        shape.conv_len[s] = len;
        if (len < 2)
            throw DomainError("scae: " + std::to_string(bands) +
                              " bands are too few for the conv/pool stack; minimum is " +
                              std::to_string(kScaeMinBands));
        len /= 2;
        shape.pool_len[s] = len;
    }
    shape.flatten = kConvChannels[3] * len;
    return shape;
}

void TrainConfig::validate() const {
    if (lambda_sparsity < 0.0) throw DomainError("train config: lambda must be >= 0");
    if (mu_collab < 0.0) throw DomainError("train config: mu must be >= 0");
    if (lr_encoder <= 0.0 || lr_decoder <= 0.0)
        throw DomainError("train config: learning rates must be positive");
    if (epochs < 1) throw DomainError("train config: epochs must be >= 1");
    if (batch_pixels < 1) throw DomainError("train config: batch size must be >= 1");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw DomainError("train config: dropout rate must be in [0,1)");
    if (l1_eps <= 0.0) throw DomainError("train config: normalization eps must be > 0");
}

SscuModel init_model(std::size_t bands, std::size_t endmembers, const EndmemberSet& decoder_init,
                     const TrainConfig& cfg) {
    cfg.validate();
    if (decoder_init.count() != endmembers || decoder_init.bands() != bands)
        throw DimensionError("init_model: decoder initializer shape mismatch");
    const ScaeShape shape = scae_shape(bands);

    SscuModel model;
    model.bands = bands;
    model.endmembers = endmembers;
    model.config = cfg;

    Rng rng(mix_seed(cfg.seed, 0x111717));
    model.sae.encoder_weight = he_normal({endmembers, bands}, bands, rng);
    model.sae.bn_gamma = Tensor::full({endmembers}, 1.0);
    model.sae.bn_beta = Tensor::zeros({endmembers});
    model.sae.bn_running_mean = Tensor::zeros({endmembers});
    model.sae.bn_running_var = Tensor::full({endmembers}, 1.0);

    std::size_t cin = 1;
    for (std::size_t s = 0; s < 4; ++s) {
        model.scae.conv[s] =
            he_normal({kConvChannels[s], cin, kConvKernels[s]}, cin * kConvKernels[s], rng);
        flip_negative_sum_rows(model.scae.conv[s], cin * kConvKernels[s]);
        cin = kConvChannels[s];
    }
    model.scae.fc_hidden = he_normal({100, shape.flatten}, shape.flatten, rng);
    flip_negative_sum_rows(model.scae.fc_hidden, shape.flatten);
    // Nonnegative start keeps every abundance channel of the ReLU output layer
    // alive at initialization (inputs are nonnegative after the hidden ReLU).
    model.scae.fc_out = he_normal({endmembers, 100}, 100, rng, /*nonnegative=*/true);

    model.decoder_weight = Tensor::zeros({bands, endmembers});
    for (std::size_t b = 0; b < bands; ++b)
        for (std::size_t j = 0; j < endmembers; ++j)
            model.decoder_weight.data[b * endmembers + j] =
                std::max(0.0, decoder_init.row(j)[b]);

    model.adam_sae_encoder = nn::AdamState::for_param(model.sae.encoder_weight);
    model.adam_bn_gamma = nn::AdamState::for_param(model.sae.bn_gamma);
    model.adam_bn_beta = nn::AdamState::for_param(model.sae.bn_beta);
    for (std::size_t s = 0; s < 4; ++s)
        model.adam_conv[s] = nn::AdamState::for_param(model.scae.conv[s]);
    model.adam_fc_hidden = nn::AdamState::for_param(model.scae.fc_hidden);
    model.adam_fc_out = nn::AdamState::for_param(model.scae.fc_out);
    model.adam_decoder = nn::AdamState::for_param(model.decoder_weight);
    return model;
}

namespace {

SaeForward sae_forward_impl(const SaeParams& sae, const Tensor& decoder, double dropout_rate,
                            double l1_eps, const Tensor& pixels, bool train, Rng* rng,
                            Tensor* running_mean, Tensor* running_var) {
    Tensor rows = pixels;
    if (rows.rank() == 1) rows.shape = {1, rows.shape[0]};
    const std::size_t K = rows.shape[0];

    Tensor z = nn::linear_forward(rows, sae.encoder_weight);  // [K x p]
    nn::BnCache bn_cache;
    Tensor zb = nn::batchnorm_forward(z, sae.bn_gamma, sae.bn_beta, running_mean, running_var,
                                      train, kBnEps, kBnMomentum, &bn_cache);
    Tensor mask;
    Rng dummy(0);
    Tensor zd = nn::dropout_forward(zb, dropout_rate, rng ? *rng : dummy, train, &mask);
    Tensor h = nn::relu_forward(zd);
    Tensor sums;
    Tensor x = nn::l1_normalize_forward(h, l1_eps, &sums);  // [K x p]

    SaeForward out;
    const std::size_t p = x.shape[1];
    out.center_abundance = Tensor::zeros({p});
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t j = 0; j < p; ++j) out.center_abundance.data[j] += x.data[k * p + j];
    for (std::size_t j = 0; j < p; ++j) out.center_abundance.data[j] /= static_cast<double>(K);
    out.center_reconstruction = nn::linear_forward(out.center_abundance, decoder);  // [L]
    out.abundances = std::move(x);
    return out;
}

}  // namespace

SaeForward sae_forward(SscuModel& model, const Tensor& pixels, bool train, Rng& rng) {
    return sae_forward_impl(model.sae, model.sae_decoder(), model.config.dropout_rate,
                            model.config.l1_eps, pixels, train, &rng,
                            &model.sae.bn_running_mean, &model.sae.bn_running_var);
}

SaeForward sae_forward(const SscuModel& model, const Tensor& pixels) {
    Tensor mean = model.sae.bn_running_mean, var = model.sae.bn_running_var;
    return sae_forward_impl(model.sae, model.sae_decoder(), model.config.dropout_rate,
                            model.config.l1_eps, pixels, false, nullptr, &mean, &var);
}

namespace {

void scae_encode_pixel(const ScaeParams& scae, double l1_eps, const double* pixel, std::size_t L,
                       double* out_p, std::size_t p) {
    Tensor h({1, L}, std::vector<double>(pixel, pixel + L));
    std::vector<std::size_t> argmax;
    for (std::size_t s = 0; s < 4; ++s) {
        h = nn::relu_forward(nn::conv1d_forward(h, scae.conv[s]));
        h = nn::maxpool1d_forward(h, &argmax);
    }
    h.shape = {1, h.numel()};
    Tensor f2 = nn::relu_forward(nn::linear_forward(h, scae.fc_hidden));
    Tensor f3 = nn::relu_forward(nn::linear_forward(f2, scae.fc_out));
    Tensor sums;
    Tensor x = nn::l1_normalize_forward(f3, l1_eps, &sums);
    std::copy(x.data.begin(), x.data.end(), out_p);
    (void)p;
}

Tensor scae_encode_rows(const SscuModel& model, const Tensor& pixel_rows, bool parallel) {
    if (pixel_rows.rank() != 2 || pixel_rows.shape[1] != model.bands)
        throw DimensionError("scae_encode: expected [n x L] pixel rows");
    scae_shape(model.bands);  // validates the band count
    const std::size_t n = pixel_rows.shape[0], L = model.bands, p = model.endmembers;
    Tensor out = Tensor::zeros({n, p});
    auto body = [&](std::size_t k) {
        scae_encode_pixel(model.scae, model.config.l1_eps, pixel_rows.data.data() + k * L, L,
                          out.data.data() + k * p, p);
    };
    if (parallel)
        par::parallel_for(n, body);
    else
        par::serial_for(n, body);
    return out;
}

}  // namespace

ScaeForward scae_forward(const SscuModel& model, const Tensor& pixel) {
    if (pixel.numel() != model.bands) throw DimensionError("scae_forward: pixel length mismatch");
    ScaeForward out;
    out.abundance = Tensor::zeros({model.endmembers});
    scae_encode_pixel(model.scae, model.config.l1_eps, pixel.data.data(), model.bands,
                      out.abundance.data.data(), model.endmembers);
    out.reconstruction = nn::linear_forward(out.abundance, model.scae_decoder());
    return out;
}

Tensor scae_encode_batch(const SscuModel& model, const Tensor& pixel_rows) {
    return scae_encode_rows(model, pixel_rows, true);
}

Tensor scae_encode_batch_serial(const SscuModel& model, const Tensor& pixel_rows) {
    return scae_encode_rows(model, pixel_rows, false);
}

SuperpixelBatch make_batch(const Tensor& pixel_rows, const Segmentation& seg,
                           const std::vector<std::size_t>& superpixel_ids) {
    const std::size_t L = pixel_rows.shape[1];
    SuperpixelBatch batch;
    std::vector<double> pixels, centers;
    for (std::size_t id : superpixel_ids) {
        const Superpixel& sp = seg.superpixels.at(id);
        const double* center_row = pixel_rows.data.data() + sp.center * L;
        if (row_norm(center_row, L) == 0.0) {
            ++batch.dropped_pixels;
            continue;  // degenerate center spectrum: skip the whole superpixel
        }
        std::size_t kept = 0;
        for (std::size_t idx : sp.members) {
            const double* row = pixel_rows.data.data() + idx * L;
            if (row_norm(row, L) == 0.0) {
                ++batch.dropped_pixels;
                continue;
            }
            pixels.insert(pixels.end(), row, row + L);
            batch.pixel_index.push_back(idx);
            ++kept;
        }
        if (kept == 0) continue;
        batch.sizes.push_back(kept);
        batch.superpixel_ids.push_back(id);
        centers.insert(centers.end(), center_row, center_row + L);
    }
    batch.pixels = Tensor({batch.pixel_index.size(), L}, std::move(pixels));
    batch.centers = Tensor({batch.sizes.size(), L}, std::move(centers));
    return batch;
}

double loss_sae(const SscuModel& model, const SuperpixelBatch& batch) {
    const std::size_t Q = batch.sizes.size();
    if (Q == 0) throw ContractViolation("loss_sae: empty batch");
    Tensor mean = model.sae.bn_running_mean, var = model.sae.bn_running_var;
    Tensor z = nn::linear_forward(batch.pixels, model.sae.encoder_weight);
    nn::BnCache cache;
    Tensor zb = nn::batchnorm_forward(z, model.sae.bn_gamma, model.sae.bn_beta, &mean, &var,
                                      false, kBnEps, kBnMomentum, &cache);
    Tensor h = nn::relu_forward(zb);
    Tensor sums;
    Tensor x = nn::l1_normalize_forward(h, model.config.l1_eps, &sums);
    Tensor xc = nn::group_mean_forward(x, batch.sizes);
    Tensor yc_hat = nn::linear_forward(xc, model.sae_decoder());
    Tensor sads = nn::sad_forward(batch.centers, yc_hat, kSadClampEps, nullptr);
    Tensor lh = nn::l_half_forward(xc, kLHalfEps);
    double acc = 0.0;
    for (std::size_t q = 0; q < Q; ++q)
        acc += sads.data[q] + model.config.lambda_sparsity * lh.data[q];
    return acc / static_cast<double>(Q);
}

double loss_scae(const SscuModel& model, const SuperpixelBatch& batch) {
    const std::size_t Q = batch.sizes.size();
    if (Q == 0) throw ContractViolation("loss_scae: empty batch");
    Tensor x = scae_encode_batch(model, batch.pixels);
    Tensor yhat = nn::linear_forward(x, model.scae_decoder());
    Tensor sads = nn::sad_forward(batch.pixels, yhat, kSadClampEps, nullptr);
    Tensor lh = nn::l_half_forward(x, kLHalfEps);
    double acc = 0.0;
    std::size_t row = 0;
    for (std::size_t q = 0; q < Q; ++q) {
        double inner = 0.0;
        for (std::size_t k = 0; k < batch.sizes[q]; ++k, ++row)
            inner += sads.data[row] + model.config.lambda_sparsity * lh.data[row];
        acc += inner / static_cast<double>(batch.sizes[q]);
    }
    return acc / static_cast<double>(Q);
}

double loss_col(const Tensor& x_sae, const Tensor& x_scae, const std::vector<std::size_t>& sizes) {
    require_same_shape(x_sae, x_scae, "loss_col");
    const std::size_t Q = sizes.size();
    if (Q == 0) throw ContractViolation("loss_col: empty batch");
    std::size_t total = 0;
    for (std::size_t s : sizes) total += s;
    if (total != x_sae.shape[0])
        throw ContractViolation("loss_col: sizes do not cover the abundance rows");
    Tensor d = nn::sqdiff_forward(x_sae, x_scae);
    double acc = 0.0;
    std::size_t row = 0;
    for (std::size_t q = 0; q < Q; ++q) {
        double inner = 0.0;
        for (std::size_t k = 0; k < sizes[q]; ++k, ++row) inner += d.data[row];
        acc += inner / static_cast<double>(sizes[q]);
    }
    return acc / static_cast<double>(Q);
}

UnmixResult extract_results(const SscuModel& model, const HsiCube& cube) {
    if (cube.bands != model.bands) throw DimensionError("extract: cube band count mismatch");
    UnmixResult result;
    const std::size_t p = model.endmembers, L = model.bands;

    result.endmembers.signatures = Tensor::zeros({p, L});
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t b = 0; b < L; ++b)
            result.endmembers.signatures.data[j * L + b] =
                model.decoder_weight.data[b * p + j];
    try {
        result.endmembers.validate();
    } catch (const std::exception& e) {
        result.invariant_warning = true;
        result.warnings.push_back(std::string("endmembers: ") + e.what());
    }

    Tensor rows = pixels_as_rows(cube);
    Tensor x = scae_encode_batch(model, rows);  // [n x p]
    result.abundances.height = cube.height;
    result.abundances.width = cube.width;
    result.abundances.endmembers = p;
    x.shape = {cube.height, cube.width, p};
    result.abundances.fractions = std::move(x);
    try {
        result.abundances.validate(1e-5);
    } catch (const std::exception& e) {
        result.invariant_warning = true;
        result.warnings.push_back(std::string("abundances: ") + e.what());
    }
    return result;
}

}  // namespace unmix
