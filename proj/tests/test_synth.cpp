#include <doctest.h>

#include <cmath>

#include "unmix/errors.hpp"
#include "unmix/metrics.hpp"
#include "unmix/synth.hpp"

using namespace unmix;

namespace {

// lag-1 spatial autocorrelation (Moran-style) of one abundance channel
double lag1_autocorr(const AbundanceField& f, std::size_t channel) {
    const std::size_t H = f.height, W = f.width, p = f.endmembers;
    double mean = 0.0;
    for (std::size_t k = 0; k < H * W; ++k) mean += f.fractions.data[k * p + channel];
    mean /= static_cast<double>(H * W);
    double num = 0.0, den = 0.0;
    std::size_t pairs = 0;
    for (std::size_t r = 0; r < H; ++r)
        for (std::size_t c = 0; c < W; ++c) {
            const double v = f.fractions.data[(r * W + c) * p + channel] - mean;
            den += v * v;
            if (c + 1 < W) {
                num += v * (f.fractions.data[(r * W + c + 1) * p + channel] - mean);
                ++pairs;
            }
            if (r + 1 < H) {
                num += v * (f.fractions.data[((r + 1) * W + c) * p + channel] - mean);
                ++pairs;
            }
        }
    return (num / static_cast<double>(pairs)) / (den / static_cast<double>(H * W));
}

}  // namespace

TEST_CASE("generated endmembers are bounded, distinct and reproducible") {
    const EndmemberSet a = gen_endmembers(5, 162, 7);
    const EndmemberSet b = gen_endmembers(5, 162, 7);
    CHECK(a.signatures.data == b.signatures.data);  // same seed, same spectra

    for (double v : a.signatures.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = i + 1; j < 5; ++j)
            CHECK(spectral_angle(a.row(i), a.row(j), 162) >= 0.1);

    const EndmemberSet minimal = gen_endmembers(2, 4, 3);
    CHECK(minimal.count() == 2);
    CHECK_THROWS_AS(gen_endmembers(1, 10, 0), DomainError);
}

TEST_CASE("abundance fields satisfy the constraints") {
    const AbundanceField f = gen_abundances(16, 16, 4, 0.0, 1.0, 3);
    for (std::size_t k = 0; k < f.pixels(); ++k) {
        double sum = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(f.fractions.data[k * 4 + j] >= 0.0);
            sum += f.fractions.data[k * 4 + j];
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }

    const AbundanceField capped = gen_abundances(16, 16, 4, 0.0, 0.8, 3);
    double max_entry = 0.0;
    for (double v : capped.fractions.data) max_entry = std::max(max_entry, v);
    CHECK(max_entry <= 0.8 + 1e-6);
    capped.validate(1e-6);
}

TEST_CASE("smoothing raises spatial autocorrelation") {
    const AbundanceField rough = gen_abundances(48, 48, 4, 0.0, 1.0, 11);
    const AbundanceField smooth = gen_abundances(48, 48, 4, 3.0, 1.0, 11);
    for (std::size_t j = 0; j < 4; ++j)
        CHECK(lag1_autocorr(smooth, j) > lag1_autocorr(rough, j));
}

TEST_CASE("noiseless pure pixel reproduces its endmember spectrum") {
    const std::size_t p = 3, L = 12;
    const EndmemberSet em = gen_endmembers(p, L, 5);
    AbundanceField f;
    f.height = 1;
    f.width = 1;
    f.endmembers = p;
    f.fractions = Tensor({1, 1, p}, {0.0, 1.0, 0.0});
    const HsiCube cube = mix_and_noise(em, f, std::nullopt, 0);
    for (std::size_t b = 0; b < L; ++b)
        CHECK(cube.reflectance.data[b] == doctest::Approx(em.row(1)[b]).epsilon(1e-12));
}

TEST_CASE("measured SNR tracks the request within half a decibel") {
    SynthConfig cfg;
    cfg.height = 64;
    cfg.width = 64;
    cfg.endmembers = 5;
    cfg.bands = 64 + 8;  // small enough to stay quick
    cfg.sigma_g = 1.0;
    cfg.alpha_max = 1.0;
    cfg.seed = 21;
    cfg.snr_db = 30.0;
    const EndmemberSet em = gen_endmembers(cfg.endmembers, cfg.bands, cfg.seed);
    const AbundanceField ab = gen_abundances(cfg.height, cfg.width, cfg.endmembers, cfg.sigma_g,
                                             cfg.alpha_max, cfg.seed);
    const HsiCube clean = mix_and_noise(em, ab, std::nullopt, cfg.seed);
    const HsiCube noisy = mix_and_noise(em, ab, cfg.snr_db, cfg.seed);
    double sig = 0.0, noise = 0.0;
    for (std::size_t i = 0; i < clean.reflectance.numel(); ++i) {
        sig += clean.reflectance.data[i] * clean.reflectance.data[i];
        const double d = noisy.reflectance.data[i] - clean.reflectance.data[i];
        noise += d * d;
    }
    const double measured = 10.0 * std::log10(sig / noise);
    CHECK(measured == doctest::Approx(30.0).epsilon(0.5 / 30.0));
}

TEST_CASE("scene generation is deterministic under a fixed seed") {
    SynthConfig cfg;
    cfg.height = 12;
    cfg.width = 10;
    cfg.endmembers = 3;
    cfg.bands = 20;
    cfg.seed = 99;
    const DatasetBundle a = generate_scene(cfg);
    const DatasetBundle b = generate_scene(cfg);
    CHECK(a.cube.reflectance.data == b.cube.reflectance.data);
    CHECK(a.gt_endmembers->signatures.data == b.gt_endmembers->signatures.data);
    CHECK(a.gt_abundances->fractions.data == b.gt_abundances->fractions.data);
}

TEST_CASE("config validation rejects infeasible caps") {
    SynthConfig cfg;
    cfg.endmembers = 2;
    cfg.alpha_max = 0.4;  // 2 * 0.4 < 1: no vector can satisfy the sum constraint
    CHECK_THROWS_AS(cfg.validate(), DomainError);
}
