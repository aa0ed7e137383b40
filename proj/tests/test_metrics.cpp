#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "unmix/errors.hpp"
#include "unmix/metrics.hpp"
#include "unmix/rng.hpp"
#include "unmix/synth.hpp"

using namespace unmix;

TEST_CASE("matching identical sets gives the identity with zero cost") {
    const EndmemberSet em = gen_endmembers(4, 24, 3);
    const auto perm = match_endmembers(em, em);
    for (std::size_t j = 0; j < 4; ++j) CHECK(perm[j] == j);
    const auto sad = sad_metric(em, em, perm);
    CHECK(sad.mean == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("a row swap is recovered as the inverse permutation") {
    const EndmemberSet gt = gen_endmembers(3, 20, 5);
    EndmemberSet swapped = gt;
    for (std::size_t b = 0; b < 20; ++b)
        std::swap(swapped.signatures.data[0 * 20 + b], swapped.signatures.data[2 * 20 + b]);
    const auto perm = match_endmembers(swapped, gt);
    CHECK(perm[0] == 2);
    CHECK(perm[1] == 1);
    CHECK(perm[2] == 0);
}

TEST_CASE("assignment cost never exceeds any brute-force permutation (p=4)") {
    Rng rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        EndmemberSet est, gt;
        est.signatures = Tensor::zeros({4, 16});
        gt.signatures = Tensor::zeros({4, 16});
        for (double& v : est.signatures.data) v = uniform(rng, 0.05, 1.0);
        for (double& v : gt.signatures.data) v = uniform(rng, 0.05, 1.0);
        const auto perm = match_endmembers(est, gt);
        double total = 0.0;
        for (std::size_t j = 0; j < 4; ++j)
            total += spectral_angle(est.row(perm[j]), gt.row(j), 16);
        std::vector<std::size_t> idx = {0, 1, 2, 3};
        do {
            double other = 0.0;
            for (std::size_t j = 0; j < 4; ++j)
                other += spectral_angle(est.row(idx[j]), gt.row(j), 16);
            CHECK(total <= other + 1e-12);
        } while (std::next_permutation(idx.begin(), idx.end()));
    }
}

TEST_CASE("sad metric: orthogonality and scale invariance") {
    EndmemberSet gt;
    gt.signatures = Tensor({2, 2}, {1.0, 0.0, 0.0, 1.0});
    EndmemberSet est;
    est.signatures = Tensor({2, 2}, {0.0, 1.0, 1.0, 0.0});
    const auto perm = match_endmembers(est, gt);
    const auto sad = sad_metric(est, gt, perm);
    // matching pairs the orthogonal unit vectors correctly (cost 0)
    CHECK(sad.mean == doctest::Approx(0.0).epsilon(1e-12));

    // against the identity permutation both pairs are orthogonal
    const auto sad_id = sad_metric(est, gt, {0, 1});
    CHECK(sad_id.per_endmember[0] == doctest::Approx(3.14159265 / 2).epsilon(1e-6));

    const EndmemberSet base = gen_endmembers(3, 18, 9);
    EndmemberSet scaled = base;
    for (std::size_t b = 0; b < 18; ++b) scaled.signatures.data[1 * 18 + b] *= 3.0;
    const auto p2 = match_endmembers(scaled, base);
    const auto s2 = sad_metric(scaled, base, p2);
    CHECK(s2.per_endmember[1] < 1e-6);
}

TEST_CASE("rmse metric hand case and naive recomputation") {
    AbundanceField gt;
    gt.height = 1;
    gt.width = 1;
    gt.endmembers = 2;
    gt.fractions = Tensor({1, 1, 2}, {1.0, 0.0});
    AbundanceField est = gt;
    est.fractions = Tensor({1, 1, 2}, {0.0, 1.0});
    const auto r = rmse_metric(est, gt, {0, 1});
    CHECK(r.per_endmember[0] == doctest::Approx(1.0));
    CHECK(r.per_endmember[1] == doctest::Approx(1.0));
    CHECK(r.full_vector == doctest::Approx(std::sqrt(2.0)));

    CHECK(rmse_metric(gt, gt, {0, 1}).mean == doctest::Approx(0.0));

    Rng rng(77);
    AbundanceField a, b;
    a.height = b.height = 5;
    a.width = b.width = 4;
    a.endmembers = b.endmembers = 3;
    a.fractions = Tensor::zeros({5, 4, 3});
    b.fractions = Tensor::zeros({5, 4, 3});
    for (double& v : a.fractions.data) v = uniform(rng, 0.0, 1.0);
    for (double& v : b.fractions.data) v = uniform(rng, 0.0, 1.0);
    const auto res = rmse_metric(a, b, {0, 1, 2});
    for (std::size_t j = 0; j < 3; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < 20; ++k) {
            const double d = a.fractions.data[k * 3 + j] - b.fractions.data[k * 3 + j];
            acc += d * d;
        }
        CHECK(res.per_endmember[j] == doctest::Approx(std::sqrt(acc / 20.0)).epsilon(1e-10));
    }
}

TEST_CASE("matching is invariant to positive per-row scaling") {
    Rng rng(15);
    EndmemberSet est = gen_endmembers(4, 20, 33);
    const EndmemberSet gt = gen_endmembers(4, 20, 34);
    const auto before = match_endmembers(est, gt);
    for (std::size_t i = 0; i < 4; ++i) {
        const double s = uniform(rng, 0.5, 4.0);
        for (std::size_t b = 0; b < 20; ++b) est.signatures.data[i * 20 + b] *= s;
    }
    const auto after = match_endmembers(est, gt);
    CHECK(before == after);
}

TEST_CASE("report serialization carries the permutation") {
    const EndmemberSet em = gen_endmembers(3, 12, 2);
    const MetricReport report = evaluate(em, nullptr, em, nullptr, 9, "cfg");
    const std::string json = report.to_json();
    CHECK(json.find("permutation") != std::string::npos);
    CHECK(json.find("mean_sad") != std::string::npos);
    CHECK(report.to_table().find("mean") != std::string::npos);
}

TEST_CASE("p mismatch is rejected") {
    const EndmemberSet a = gen_endmembers(3, 12, 2);
    const EndmemberSet b = gen_endmembers(4, 12, 2);
    CHECK_THROWS_AS(match_endmembers(a, b), DimensionError);
}
