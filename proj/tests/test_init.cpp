#include <doctest.h>

#include <cmath>

#include "unmix/errors.hpp"
#include "unmix/fcls.hpp"
#include "unmix/hsi.hpp"
#include "unmix/metrics.hpp"
#include "unmix/rng.hpp"
#include "unmix/synth.hpp"
#include "unmix/vca.hpp"

using namespace unmix;

namespace {

double residual2(const EndmemberSet& em, const double* y, const double* x) {
    const std::size_t p = em.count(), L = em.bands();
    double acc = 0.0;
    for (std::size_t b = 0; b < L; ++b) {
        double yhat = 0.0;
        for (std::size_t j = 0; j < p; ++j) yhat += x[j] * em.row(j)[b];
        const double d = y[b] - yhat;
        acc += d * d;
    }
    return acc;
}

// exhaustive simplex grid search at the given step (p = 3)
double grid_best_objective(const EndmemberSet& em, const double* y, double step) {
    double best = std::numeric_limits<double>::infinity();
    for (double a = 0.0; a <= 1.0 + 1e-12; a += step)
        for (double b = 0.0; a + b <= 1.0 + 1e-12; b += step) {
            const double x[3] = {a, b, 1.0 - a - b};
            best = std::min(best, residual2(em, y, x));
        }
    return best;
}

// golden-section line search on the 2-endmember simplex
double golden_best_objective(const EndmemberSet& em, const double* y) {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = 0.0, hi = 1.0;
    double c = hi - phi * (hi - lo), d = lo + phi * (hi - lo);
    auto f = [&](double t) {
        const double x[2] = {t, 1.0 - t};
        return residual2(em, y, x);
    };
    double fc = f(c), fd = f(d);
    for (int i = 0; i < 80; ++i) {
        if (fc < fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = f(d);
        }
    }
    return std::min(fc, fd);
}

Tensor columns_from_pixels(const std::vector<std::vector<double>>& pixels) {
    const std::size_t n = pixels.size(), L = pixels[0].size();
    Tensor Y = Tensor::zeros({L, n});
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t b = 0; b < L; ++b) Y.data[b * n + k] = pixels[k][b];
    return Y;
}

}  // namespace

TEST_CASE("vca recovers the vertices of a clean simplex") {
    const std::size_t p = 4, L = 30;
    const EndmemberSet em = gen_endmembers(p, L, 13);
    Rng rng(31);
    std::vector<std::vector<double>> pixels;
    // vertices plus interior points
    for (std::size_t j = 0; j < p; ++j)
        pixels.emplace_back(em.row(j), em.row(j) + L);
    for (int k = 0; k < 400; ++k) {
        std::vector<double> x(p);
        double s = 0.0;
        for (auto& v : x) {
            v = -std::log(uniform01(rng));
            s += v;
        }
        std::vector<double> y(L, 0.0);
        for (std::size_t j = 0; j < p; ++j)
            for (std::size_t b = 0; b < L; ++b) y[b] += x[j] / s * em.row(j)[b];
        pixels.push_back(std::move(y));
    }
    VcaConfig cfg;
    cfg.endmembers = p;
    cfg.seed = 5;
    const VcaResult res = vca(columns_from_pixels(pixels), cfg);
    const auto perm = match_endmembers(res.endmembers, em);
    const auto sad = sad_metric(res.endmembers, em, perm);
    for (double v : sad.per_endmember) CHECK(v < 1e-3);
}

TEST_CASE("vca on a segment returns the two extremes") {
    const std::size_t L = 16;
    const EndmemberSet em = gen_endmembers(2, L, 4);
    std::vector<std::vector<double>> pixels;
    for (int k = 0; k <= 20; ++k) {
        const double t = k / 20.0;
        std::vector<double> y(L);
        for (std::size_t b = 0; b < L; ++b) y[b] = t * em.row(0)[b] + (1 - t) * em.row(1)[b];
        pixels.push_back(std::move(y));
    }
    VcaConfig cfg;
    cfg.endmembers = 2;
    cfg.seed = 1;
    cfg.snr_estimate_override = 100.0;  // projective branch
    const VcaResult res = vca(columns_from_pixels(pixels), cfg);
    // the selected columns are the segment endpoints (t = 0 and t = 1)
    std::vector<std::size_t> got = res.indices;
    std::sort(got.begin(), got.end());
    CHECK(got == std::vector<std::size_t>{0, 20});
}

TEST_CASE("vca selection is deterministic under a fixed seed") {
    SynthConfig scfg;
    scfg.height = 16;
    scfg.width = 16;
    scfg.endmembers = 4;
    scfg.bands = 32;
    scfg.sigma_g = 0.5;
    scfg.seed = 8;
    const DatasetBundle bundle = generate_scene(scfg);
    const Tensor Y = flatten(bundle.cube);
    VcaConfig cfg;
    cfg.endmembers = 4;
    cfg.seed = 17;
    const VcaResult a = vca(Y, cfg);
    const VcaResult b = vca(Y, cfg);
    CHECK(a.indices == b.indices);
}

TEST_CASE("vca is stable across projection seeds") {
    SynthConfig scfg;
    scfg.height = 64;
    scfg.width = 64;
    scfg.endmembers = 5;
    scfg.bands = 162;
    scfg.sigma_g = 2.0;
    scfg.alpha_max = 0.8;
    scfg.snr_db = 30.0;
    scfg.seed = 12;
    const DatasetBundle bundle = generate_scene(scfg);
    const Tensor Y = flatten(bundle.cube);
    std::vector<double> sads;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        VcaConfig cfg;
        cfg.endmembers = 5;
        cfg.seed = seed;
        const VcaResult res = vca(Y, cfg);
        const auto perm = match_endmembers(res.endmembers, *bundle.gt_endmembers);
        sads.push_back(sad_metric(res.endmembers, *bundle.gt_endmembers, perm).mean);
    }
    double mean = 0.0;
    for (double s : sads) mean += s;
    mean /= static_cast<double>(sads.size());
    double var = 0.0;
    for (double s : sads) var += (s - mean) * (s - mean);
    const double stddev = std::sqrt(var / static_cast<double>(sads.size() - 1));
    CHECK(stddev < 0.02);
}

TEST_CASE("vca rejects p beyond the data dimensions") {
    std::vector<std::vector<double>> pixels(3, std::vector<double>(8, 0.5));
    VcaConfig cfg;
    cfg.endmembers = 4;  // more endmembers than pixels
    CHECK_THROWS_AS(vca(columns_from_pixels(pixels), cfg), DomainError);
}

TEST_CASE("fcls rejects a rank-deficient endmember matrix") {
    EndmemberSet em;
    em.signatures = Tensor({3, 6}, {0.5, 0.5, 0.5, 0.5, 0.5, 0.5,
                                    0.5, 0.5, 0.5, 0.5, 0.5, 0.5,
                                    0.2, 0.3, 0.4, 0.5, 0.6, 0.7});
    std::vector<double> y(6, 0.4), x(3);
    CHECK_THROWS_AS(fcls_pixel(y.data(), 6, em, 1e3, x.data()), NumericalError);
}

TEST_CASE("vca rejects rank-deficient data") {
    // all pixels identical: rank 1 < p
    std::vector<std::vector<double>> pixels(10, std::vector<double>(8, 0.5));
    VcaConfig cfg;
    cfg.endmembers = 3;
    cfg.seed = 0;
    CHECK_THROWS_AS(vca(columns_from_pixels(pixels), cfg), NumericalError);
}

TEST_CASE("fcls reproduces exact mixtures and pure pixels") {
    const std::size_t p = 4, L = 24;
    const EndmemberSet em = gen_endmembers(p, L, 23);
    std::vector<double> y(L, 0.0);
    for (std::size_t b = 0; b < L; ++b) y[b] = 0.3 * em.row(0)[b] + 0.7 * em.row(1)[b];
    std::vector<double> x(p);
    fcls_pixel(y.data(), L, em, 1e3, x.data());
    CHECK(x[0] == doctest::Approx(0.3).epsilon(1e-6));
    CHECK(x[1] == doctest::Approx(0.7).epsilon(1e-6));
    CHECK(x[2] == doctest::Approx(0.0).epsilon(1e-6));

    std::vector<double> pure(em.row(2), em.row(2) + L);
    fcls_pixel(pure.data(), L, em, 1e3, x.data());
    CHECK(x[2] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("fcls objective matches the exhaustive grid oracle on p=3") {
    const std::size_t p = 3, L = 20;
    const EndmemberSet em = gen_endmembers(p, L, 29);
    Rng rng(100);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(p);
        double s = 0.0;
        for (auto& v : x) {
            v = -std::log(uniform01(rng));
            s += v;
        }
        std::vector<double> y(L, 0.0);
        for (std::size_t j = 0; j < p; ++j)
            for (std::size_t b = 0; b < L; ++b) y[b] += x[j] / s * em.row(j)[b];
        for (auto& v : y) v += 0.02 * normal01(rng);  // noisy mixture
        std::vector<double> sol(p);
        fcls_pixel(y.data(), L, em, 1e3, sol.data());
        const double ours = residual2(em, y.data(), sol.data());
        const double grid = grid_best_objective(em, y.data(), 0.01);
        CHECK(ours <= grid + 1e-6);
    }
}

TEST_CASE("fcls matches a golden-section oracle on p=2") {
    const std::size_t p = 2, L = 18;
    const EndmemberSet em = gen_endmembers(p, L, 31);
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> y(L);
        for (std::size_t b = 0; b < L; ++b)
            y[b] = 0.5 * (em.row(0)[b] + em.row(1)[b]) + 0.05 * normal01(rng);
        std::vector<double> sol(p);
        fcls_pixel(y.data(), L, em, 1e3, sol.data());
        const double ours = residual2(em, y.data(), sol.data());
        const double oracle = golden_best_objective(em, y.data());
        CHECK(ours <= oracle + 1e-6);
    }
}

TEST_CASE("fcls outputs satisfy the constraints after renormalization") {
    SynthConfig scfg;
    scfg.height = 12;
    scfg.width = 12;
    scfg.endmembers = 4;
    scfg.bands = 30;
    scfg.snr_db = 20.0;
    scfg.seed = 3;
    const DatasetBundle bundle = generate_scene(scfg);
    const Tensor Y = flatten(bundle.cube);
    const FclsResult res = fcls(Y, *bundle.gt_endmembers);
    const std::size_t n = scfg.height * scfg.width;
    for (std::size_t k = 0; k < n; ++k) {
        double sum = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(res.abundances.data[j * n + k] >= 0.0);
            sum += res.abundances.data[j * n + k];
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
}
