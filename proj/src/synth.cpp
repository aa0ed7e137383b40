#include "unmix/synth.hpp"

#include <algorithm>
#include <cmath>

#include "unmix/errors.hpp"
#include "unmix/nn/ops.hpp"
#include "unmix/rng.hpp"

namespace unmix {

namespace {

constexpr double kPairwiseSadFloor = 0.1;

double spectra_sad(const double* a, const double* b, std::size_t L) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < L; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double c = dot / std::sqrt(na * nb);
    return std::acos(std::clamp(c, -1.0, 1.0));
}

std::vector<double> one_spectrum(std::size_t L, Rng& rng) {
    std::vector<double> s(L, uniform(rng, 0.35, 0.65));
    const int bumps = 3 + static_cast<int>(uniform_index(rng, 4));  // 3..6
    for (int b = 0; b < bumps; ++b) {
        const double amp = uniform(rng, 0.06, 0.22) * (uniform01(rng) < 0.5 ? 1.0 : -1.0);
        const double center = uniform01(rng);
        const double width = uniform(rng, 0.03, 0.15);
        for (std::size_t i = 0; i < L; ++i) {
            const double t = static_cast<double>(i) / static_cast<double>(L - 1);
            const double d = (t - center) / width;
            s[i] += amp * std::exp(-0.5 * d * d);
        }
    }
    for (double& v : s) v = std::clamp(v, 0.0, 1.0);
    return s;
}

// separable blur with replicate boundary; kernel radius 3*sigma
void gaussian_blur_channel(std::vector<double>& img, std::size_t H, std::size_t W, double sigma) {
    if (sigma <= 0.0) return;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i / sigma) * (i / sigma));
        sum += kernel[i + radius];
    }
    for (double& k : kernel) k /= sum;

    std::vector<double> tmp(img.size());
    for (std::size_t r = 0; r < H; ++r)
        for (std::size_t c = 0; c < W; ++c) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const long cc = std::clamp<long>(static_cast<long>(c) + i, 0, static_cast<long>(W) - 1);
                acc += kernel[i + radius] * img[r * W + static_cast<std::size_t>(cc)];
            }
            tmp[r * W + c] = acc;
        }
    for (std::size_t r = 0; r < H; ++r)
        for (std::size_t c = 0; c < W; ++c) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const long rr = std::clamp<long>(static_cast<long>(r) + i, 0, static_cast<long>(H) - 1);
                acc += kernel[i + radius] * tmp[static_cast<std::size_t>(rr) * W + c];
            }
            img[r * W + c] = acc;
        }
}

}  // namespace

void SynthConfig::validate() const {
    if (endmembers < 2) throw DomainError("synth: p must be >= 2");
    if (bands < 2 * endmembers) throw DomainError("synth: bands must be >= 2*p");
    if (sigma_g < 0.0) throw DomainError("synth: sigma_g must be >= 0");
    if (alpha_max <= 0.0 || alpha_max > 1.0) throw DomainError("synth: alpha_max must be in (0,1]");
    if (alpha_max * static_cast<double>(endmembers) < 1.0)
        throw DomainError("synth: alpha_max*p < 1 leaves no feasible abundance vector");
    if (height == 0 || width == 0) throw DomainError("synth: empty image");
}

EndmemberSet gen_endmembers(std::size_t p, std::size_t L, std::uint64_t seed) {
    if (p < 2) throw DomainError("gen_endmembers: p must be >= 2");
    if (L < 2 * p) throw DomainError("gen_endmembers: L must be >= 2*p");
    Rng rng(mix_seed(seed, 0xE17D));
    std::vector<std::vector<double>> spectra(p);
    for (auto& s : spectra) s = one_spectrum(L, rng);

    const int budget = 200;
    for (int attempt = 0; attempt <= budget; ++attempt) {
        bool ok = true;
        for (std::size_t i = 0; i < p && ok; ++i)
            for (std::size_t j = i + 1; j < p; ++j)
                if (spectra_sad(spectra[i].data(), spectra[j].data(), L) < kPairwiseSadFloor) {
                    spectra[j] = one_spectrum(L, rng);
                    ok = false;
                    break;
                }
        if (ok) {
            EndmemberSet set;
            set.signatures = Tensor::zeros({p, L});
            for (std::size_t i = 0; i < p; ++i)
                std::copy(spectra[i].begin(), spectra[i].end(),
                          set.signatures.data.begin() + static_cast<long>(i * L));
            set.validate();
            return set;
        }
    }
    throw NumericalError("gen_endmembers: retry budget exhausted without pairwise SAD >= 0.1");
}

AbundanceField gen_abundances(std::size_t height, std::size_t width, std::size_t p, double sigma_g,
                              double alpha_max, std::uint64_t seed) {
    const std::size_t n = height * width;
    Rng rng(mix_seed(seed, 0xABDA));
    AbundanceField field;
    field.height = height;
    field.width = width;
    field.endmembers = p;
    field.fractions = Tensor::zeros({height, width, p});
    auto& x = field.fractions.data;

    // flat Dirichlet via normalized unit exponentials
    for (std::size_t k = 0; k < n; ++k) {
        double sum = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            double u = uniform01(rng);
            while (u <= 0.0) u = uniform01(rng);
            x[k * p + j] = -std::log(u);
            sum += x[k * p + j];
        }
        for (std::size_t j = 0; j < p; ++j) x[k * p + j] /= sum;
    }

    if (sigma_g > 0.0) {
        std::vector<double> channel(n);
        for (std::size_t j = 0; j < p; ++j) {
            for (std::size_t k = 0; k < n; ++k) channel[k] = x[k * p + j];
            gaussian_blur_channel(channel, height, width, sigma_g);
            for (std::size_t k = 0; k < n; ++k) x[k * p + j] = channel[k];
        }
        for (std::size_t k = 0; k < n; ++k) {
            double sum = 0.0;
            for (std::size_t j = 0; j < p; ++j) sum += x[k * p + j];
            for (std::size_t j = 0; j < p; ++j) x[k * p + j] /= sum;
        }
    }

    if (alpha_max < 1.0) {
        for (std::size_t k = 0; k < n; ++k) {
            double* v = &x[k * p];
            for (int pass = 0; pass < 100; ++pass) {
                double excess = 0.0, headroom = 0.0;
                for (std::size_t j = 0; j < p; ++j) {
                    if (v[j] > alpha_max) {
                        excess += v[j] - alpha_max;
                        v[j] = alpha_max;
                    } else {
                        headroom += alpha_max - v[j];
                    }
                }
                if (excess <= 1e-15) break;
                // push the clipped mass into the remaining headroom, proportionally
                for (std::size_t j = 0; j < p; ++j)
                    if (v[j] < alpha_max) v[j] += excess * (alpha_max - v[j]) / headroom;
            }
            double sum = 0.0;
            for (std::size_t j = 0; j < p; ++j) sum += v[j];
            for (std::size_t j = 0; j < p; ++j) v[j] /= sum;
        }
    }
    return field;
}

HsiCube mix_and_noise(const EndmemberSet& endmembers, const AbundanceField& abundances,
                      std::optional<double> snr_db, std::uint64_t seed) {
    const std::size_t p = endmembers.count(), L = endmembers.bands();
    if (abundances.endmembers != p)
        throw DimensionError("mix_and_noise: abundance channels " +
                             std::to_string(abundances.endmembers) + " != endmembers " +
                             std::to_string(p));
    const std::size_t n = abundances.pixels();
    HsiCube cube;
    cube.height = abundances.height;
    cube.width = abundances.width;
    cube.bands = L;
    cube.reflectance = Tensor::zeros({cube.height, cube.width, L});
    auto& y = cube.reflectance.data;
    const auto& x = abundances.fractions.data;

    double signal_power = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t b = 0; b < L; ++b) {
            double acc = 0.0;
            for (std::size_t j = 0; j < p; ++j) acc += x[k * p + j] * endmembers.row(j)[b];
            y[k * L + b] = acc;
            signal_power += acc * acc;
        }

    if (snr_db) {
        signal_power /= static_cast<double>(n * L);
        const double sigma = std::sqrt(signal_power / std::pow(10.0, *snr_db / 10.0));
        Rng rng(mix_seed(seed, 0x401E));
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += sigma * normal01(rng);
    }
    return cube;
}

DatasetBundle generate_scene(const SynthConfig& cfg) {
    cfg.validate();
    DatasetBundle bundle;
    bundle.name = "synthetic";
    EndmemberSet em = gen_endmembers(cfg.endmembers, cfg.bands, cfg.seed);
    AbundanceField ab = gen_abundances(cfg.height, cfg.width, cfg.endmembers, cfg.sigma_g,
                                       cfg.alpha_max, cfg.seed);
    bundle.cube = mix_and_noise(em, ab, cfg.snr_db, cfg.seed);
    bundle.gt_endmembers = std::move(em);
    bundle.gt_abundances = std::move(ab);
    bundle.validate();
    return bundle;
}

}  // namespace unmix
