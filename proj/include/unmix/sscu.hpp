#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "unmix/hsi.hpp"
#include "unmix/nn/adam.hpp"
#include "unmix/rng.hpp"
#include "unmix/slic.hpp"

namespace unmix {

// Loss/normalization constants shared by both streams.
inline constexpr double kSadClampEps = 1e-9;   // cosine clamp in the SAD loss
inline constexpr double kLHalfEps = 1e-12;     // smoothing of the l1/2 term
inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.9;

// Shortest spectrum the four conv/pool stages accept under the valid/floor rules.
inline constexpr std::size_t kScaeMinBands = 66;

struct ScaeShape {
    std::array<std::size_t, 4> conv_len{};  // length after each convolution
    std::array<std::size_t, 4> pool_len{};  // length after each pooling
    std::size_t flatten = 0;                // 24 * pool_len[3]
};

// Stage-length arithmetic for a given band count; throws DomainError naming
// kScaeMinBands when the spectrum is too short.
ScaeShape scae_shape(std::size_t bands);

struct SaeParams {
    Tensor encoder_weight;   // [p x L], no bias
    Tensor bn_gamma, bn_beta;
    Tensor bn_running_mean, bn_running_var;
};

struct ScaeParams {
    std::array<Tensor, 4> conv;  // [3x1x5], [6x3x4], [12x6x5], [24x12x4]
    Tensor fc_hidden;            // [100 x F]
    Tensor fc_out;               // [p x 100]
};

struct TrainConfig {
    double lambda_sparsity = 5e-5;
    double mu_collab = 0.5;
    double lr_encoder = 1e-4;
    double lr_decoder = 1e-5;
    int epochs = 200;
    // A batch is built from whole superpixels until their member pixels reach
    // this count; the SAE step sees the superpixels, the SCAE step their pixels.
    int batch_pixels = 128;
    std::uint64_t seed = 0;
    double dropout_rate = 0.1;
    double l1_eps = 1e-9;  // guard in the abundance normalization
    bool deterministic = false;

    void validate() const;
};

struct SscuModel {
    std::size_t bands = 0, endmembers = 0;
    SaeParams sae;
    ScaeParams scae;
    TrainConfig config;

    // The single shared decoder storage. Both stream views alias it; the
    // trainer asserts their bitwise identity after every optimizer step.
    Tensor decoder_weight;  // [L x p]
    const Tensor& sae_decoder() const { return decoder_weight; }
    const Tensor& scae_decoder() const { return decoder_weight; }

    nn::AdamState adam_sae_encoder, adam_bn_gamma, adam_bn_beta;
    std::array<nn::AdamState, 4> adam_conv;
    nn::AdamState adam_fc_hidden, adam_fc_out;
    nn::AdamState adam_decoder;  // one state, stepped by both phases
};

// He-style seeded initialization for the encoders; the decoder starts from the
// given endmember set (transposed to L x p).
SscuModel init_model(std::size_t bands, std::size_t endmembers, const EndmemberSet& decoder_init,
                     const TrainConfig& cfg);

struct SaeForward {
    Tensor abundances;             // [K x p]
    Tensor center_abundance;       // [p]
    Tensor center_reconstruction;  // [L]
};

// Forward of one superpixel's pixels through the spatial stream. The train
// variant uses batch statistics, updates the running stats, and draws dropout
// masks from rng; the const variant runs in eval mode.
SaeForward sae_forward(SscuModel& model, const Tensor& pixels, bool train, Rng& rng);
SaeForward sae_forward(const SscuModel& model, const Tensor& pixels);

struct ScaeForward {
    Tensor abundance;       // [p]
    Tensor reconstruction;  // [L]
};
ScaeForward scae_forward(const SscuModel& model, const Tensor& pixel);

// Encoder over many pixels (rows), OpenMP-parallel; the serial variant is the
// reference the tests compare against.
Tensor scae_encode_batch(const SscuModel& model, const Tensor& pixel_rows);
Tensor scae_encode_batch_serial(const SscuModel& model, const Tensor& pixel_rows);

// Pixels of a set of superpixels, grouped contiguously, plus their centers.
struct SuperpixelBatch {
    Tensor pixels;                          // [N x L]
    std::vector<std::size_t> sizes;         // member count per superpixel
    std::vector<std::size_t> pixel_index;   // global flat index per row
    Tensor centers;                         // [Q x L]
    std::vector<std::size_t> superpixel_ids;
    std::size_t dropped_pixels = 0;         // zero-norm members removed
};
SuperpixelBatch make_batch(const Tensor& pixel_rows, const Segmentation& seg,
                           const std::vector<std::size_t>& superpixel_ids);

// Eval-mode loss terms; the trainer computes the same quantities through the
// gradient graph.
double loss_sae(const SscuModel& model, const SuperpixelBatch& batch);
double loss_scae(const SscuModel& model, const SuperpixelBatch& batch);
double loss_col(const Tensor& x_sae, const Tensor& x_scae, const std::vector<std::size_t>& sizes);

struct EpochStats {
    double l_sae = 0.0, l_scae = 0.0, l_col = 0.0, total = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> trace;
    std::size_t decoder_view_violations = 0;
    std::size_t skipped = 0;  // degenerate samples skipped
};

TrainResult train(SscuModel& model, const HsiCube& cube, const Segmentation& seg);

struct UnmixResult {
    EndmemberSet endmembers;
    AbundanceField abundances;
    bool invariant_warning = false;
    std::vector<std::string> warnings;
};

// Endmembers from the shared decoder, abundances from the spectral stream in
// eval mode over every pixel.
UnmixResult extract_results(const SscuModel& model, const HsiCube& cube);

}  // namespace unmix
