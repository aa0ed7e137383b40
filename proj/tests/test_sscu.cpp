#include <doctest.h>

#include <cmath>

#include "unmix/checkpoint.hpp"
#include "unmix/errors.hpp"
#include "unmix/fcls.hpp"
#include "unmix/metrics.hpp"
#include "unmix/parallel.hpp"
#include "unmix/sscu.hpp"
#include "unmix/synth.hpp"
#include "unmix/vca.hpp"

using namespace unmix;

namespace {

DatasetBundle toy_scene(std::size_t hw = 12, std::size_t p = 3, std::size_t L = 66,
                        std::uint64_t seed = 5) {
    SynthConfig cfg;
    cfg.height = hw;
    cfg.width = hw;
    cfg.endmembers = p;
    cfg.bands = L;
    cfg.sigma_g = 1.0;
    cfg.snr_db = 30.0;
    cfg.alpha_max = 0.9;
    cfg.seed = seed;
    return generate_scene(cfg);
}

SscuModel toy_model(const DatasetBundle& bundle, int epochs = 3, std::uint64_t seed = 1) {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.seed = seed;
    cfg.batch_pixels = 32;
    return init_model(bundle.cube.bands, bundle.gt_endmembers->count(), *bundle.gt_endmembers,
                      cfg);
}

Segmentation toy_segmentation(const DatasetBundle& bundle) {
    SlicConfig cfg;
    cfg.size_s = 4.0;
    cfg.compactness = 0.1;
    return slic_segment(*bundle.gt_abundances, cfg);
}

}  // namespace

TEST_CASE("scae shape arithmetic matches the table rules") {
    const ScaeShape a = scae_shape(162);
    CHECK(a.pool_len[3] == 7);
    CHECK(a.flatten == 168);
    const ScaeShape b = scae_shape(198);
    CHECK(b.flatten == 216);

    const ScaeShape min_ok = scae_shape(kScaeMinBands);
    CHECK(min_ok.flatten == 24);

    // below the minimum the stack cannot be built; the error names the bound
    for (std::size_t L : {65u, 34u, 10u}) {
        try {
            scae_shape(L);
            FAIL("expected a domain error");
        } catch (const DomainError& e) {
            CHECK(std::string(e.what()).find(std::to_string(kScaeMinBands)) != std::string::npos);
        }
    }
}

TEST_CASE("sae forward degenerate cases") {
    const DatasetBundle bundle = toy_scene();
    SscuModel model = toy_model(bundle);
    const Tensor rows = pixels_as_rows(bundle.cube);
    const std::size_t L = bundle.cube.bands;

    // K = 1: the center abundance is the single pixel's abundance
    Tensor one({1, L}, std::vector<double>(rows.data.begin(), rows.data.begin() + L));
    const SaeForward f1 = sae_forward(model, one);
    for (std::size_t j = 0; j < model.endmembers; ++j)
        CHECK(f1.center_abundance.data[j] == doctest::Approx(f1.abundances.data[j]).epsilon(1e-12));

    // K identical pixels: the mean equals each member
    Tensor three = Tensor::zeros({3, L});
    for (int k = 0; k < 3; ++k)
        std::copy(rows.data.begin(), rows.data.begin() + L,
                  three.data.begin() + static_cast<long>(k * L));
    const SaeForward f3 = sae_forward(model, three);
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t j = 0; j < model.endmembers; ++j)
            CHECK(f3.abundances.data[k * model.endmembers + j] ==
                  doctest::Approx(f3.center_abundance.data[j]).epsilon(1e-12));
}

TEST_CASE("sae abundances satisfy the constraints when the code has mass") {
    const DatasetBundle bundle = toy_scene();
    SscuModel model = toy_model(bundle);
    const Tensor rows = pixels_as_rows(bundle.cube);
    const SaeForward f = sae_forward(model, rows);
    const std::size_t p = model.endmembers;
    for (std::size_t k = 0; k < rows.shape[0]; ++k) {
        double sum = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            CHECK(f.abundances.data[k * p + j] >= 0.0);
            sum += f.abundances.data[k * p + j];
        }
        if (sum >= 1e-3) CHECK(sum == doctest::Approx(1.0).epsilon(1.1e-6));
    }
}

TEST_CASE("freshly initialized encoders keep every pixel and channel alive") {
    const DatasetBundle bundle = toy_scene(8);
    const Tensor rows = pixels_as_rows(bundle.cube);
    const std::size_t p = bundle.gt_endmembers->count();
    for (std::uint64_t seed = 0; seed < 16; ++seed) {
        TrainConfig cfg;
        cfg.seed = seed;
        const SscuModel model =
            init_model(bundle.cube.bands, p, *bundle.gt_endmembers, cfg);
        const Tensor x = scae_encode_batch(model, rows);
        std::vector<double> channel_mass(p, 0.0);
        for (std::size_t k = 0; k < rows.shape[0]; ++k) {
            double sum = 0.0;
            for (std::size_t j = 0; j < p; ++j) {
                sum += x.data[k * p + j];
                channel_mass[j] += x.data[k * p + j];
            }
            CHECK(sum > 0.99);  // no dead pixels
        }
        for (std::size_t j = 0; j < p; ++j) CHECK(channel_mass[j] > 0.0);  // no dead channels
    }
}

TEST_CASE("scae forward satisfies the abundance constraints") {
    const DatasetBundle bundle = toy_scene();
    SscuModel model = toy_model(bundle);
    const Tensor rows = pixels_as_rows(bundle.cube);
    const Tensor x = scae_encode_batch(model, rows);
    const std::size_t p = model.endmembers;
    for (std::size_t k = 0; k < rows.shape[0]; ++k) {
        double sum = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            CHECK(x.data[k * p + j] >= 0.0);
            sum += x.data[k * p + j];
        }
        // pre-normalization mass is comfortably above 1e-3 with the nonneg
        // output-layer initialization, so sums are within 1e-6 of one
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("loss_sae is near zero for a perfectly reconstructing model") {
    // two identical pixels equal to decoder column 0; encoder drives channel 0
    const std::size_t p = 2, L = 66;
    EndmemberSet em = gen_endmembers(p, L, 3);
    TrainConfig cfg;
    cfg.lambda_sparsity = 0.0;
    SscuModel model = init_model(L, p, em, cfg);
    for (std::size_t b = 0; b < L; ++b)
        for (std::size_t j = 0; j < p; ++j)
            model.sae.encoder_weight.data[j * L + b] = j == 0 ? 1.0 : -1.0;

    Segmentation seg;
    seg.height = 1;
    seg.width = 2;
    seg.labels = {0, 0};
    seg.superpixels.resize(1);
    seg.superpixels[0].members = {0, 1};
    seg.superpixels[0].center = 0;

    Tensor rows = Tensor::zeros({2, L});
    for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t b = 0; b < L; ++b) rows.data[k * L + b] = em.row(0)[b];

    const SuperpixelBatch batch = make_batch(rows, seg, {0});
    CHECK(loss_sae(model, batch) < 1e-4);
}

TEST_CASE("loss_scae is invariant to duplicating identical pixels") {
    const std::size_t p = 2, L = 66;
    const EndmemberSet em = gen_endmembers(p, L, 9);
    TrainConfig cfg;
    SscuModel model = init_model(L, p, em, cfg);

    auto batch_of = [&](std::size_t copies) {
        Segmentation seg;
        seg.height = 1;
        seg.width = copies;
        seg.labels.assign(copies, 0);
        seg.superpixels.resize(1);
        for (std::size_t k = 0; k < copies; ++k) seg.superpixels[0].members.push_back(k);
        seg.superpixels[0].center = 0;
        Tensor rows = Tensor::zeros({copies, L});
        for (std::size_t k = 0; k < copies; ++k)
            for (std::size_t b = 0; b < L; ++b)
                rows.data[k * L + b] = 0.6 * em.row(0)[b] + 0.4 * em.row(1)[b];
        return make_batch(rows, seg, {0});
    };
    const double l2 = loss_scae(model, batch_of(2));
    const double l4 = loss_scae(model, batch_of(4));
    CHECK(l2 == doctest::Approx(l4).epsilon(1e-12));
}

TEST_CASE("loss_col hand values and symmetry") {
    Tensor a({1, 2}, {1.0, 0.0});
    Tensor b({1, 2}, {0.0, 1.0});
    CHECK(loss_col(a, b, {1}) == doctest::Approx(2.0));
    CHECK(loss_col(b, a, {1}) == doctest::Approx(2.0));
    CHECK(loss_col(a, a, {1}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(loss_col(a, b, {2}), ContractViolation);
}

TEST_CASE("decoder storage is shared between the stream views") {
    const DatasetBundle bundle = toy_scene();
    SscuModel model = toy_model(bundle);
    CHECK(&model.sae_decoder() == &model.scae_decoder());
    model.decoder_weight.data[3] = 0.123456;
    CHECK(model.sae_decoder().data[3] == 0.123456);
    CHECK(model.scae_decoder().data[3] == 0.123456);
}

TEST_CASE("training decreases the loss and keeps the decoder views identical") {
    const DatasetBundle bundle = toy_scene(16);
    const Segmentation seg = toy_segmentation(bundle);
    SscuModel model = toy_model(bundle, 8, 2);
    const TrainResult res = train(model, bundle.cube, seg);
    REQUIRE(res.trace.size() == 8);
    CHECK(res.decoder_view_violations == 0);
    CHECK(res.trace.back().total < res.trace.front().total);
    for (const auto& t : res.trace) {
        CHECK(std::isfinite(t.total));
        CHECK(t.total ==
              doctest::Approx(t.l_sae + t.l_scae + model.config.mu_collab * t.l_col).epsilon(1e-10));
    }
}

TEST_CASE("training is deterministic in deterministic mode") {
    const DatasetBundle bundle = toy_scene(10);
    const Segmentation seg = toy_segmentation(bundle);
    auto run = [&] {
        TrainConfig cfg;
        cfg.epochs = 3;
        cfg.seed = 11;
        cfg.batch_pixels = 32;
        cfg.deterministic = true;
        SscuModel model = init_model(bundle.cube.bands, bundle.gt_endmembers->count(),
                                     *bundle.gt_endmembers, cfg);
        const TrainResult res = train(model, bundle.cube, seg);
        return std::pair<std::vector<EpochStats>, Tensor>(res.trace, model.decoder_weight);
    };
    const auto a = run();
    const auto b = run();
    CHECK(a.second.data == b.second.data);
    for (std::size_t e = 0; e < a.first.size(); ++e)
        CHECK(a.first[e].total == b.first[e].total);
}

TEST_CASE("extraction emits valid fields and nonnegative endmembers") {
    const DatasetBundle bundle = toy_scene(10);
    const Segmentation seg = toy_segmentation(bundle);
    SscuModel model = toy_model(bundle, 2, 3);
    train(model, bundle.cube, seg);
    const UnmixResult res = extract_results(model, bundle.cube);
    CHECK_FALSE(res.invariant_warning);
    for (double v : res.endmembers.signatures.data) CHECK(v >= 0.0);
    res.abundances.validate(1e-5);
}

TEST_CASE("checkpoints round-trip through float32 blobs") {
    const DatasetBundle bundle = toy_scene(10);
    SscuModel model = toy_model(bundle, 2, 7);
    const auto dir = std::filesystem::temp_directory_path() / "unmix_ckpt_test";
    std::filesystem::remove_all(dir);
    save_checkpoint(model, 42, dir);
    int epoch = 0;
    const SscuModel loaded = load_checkpoint(dir, &epoch);
    CHECK(epoch == 42);
    CHECK(loaded.bands == model.bands);
    CHECK(loaded.endmembers == model.endmembers);
    REQUIRE(loaded.decoder_weight.numel() == model.decoder_weight.numel());
    for (std::size_t i = 0; i < model.decoder_weight.numel(); ++i)
        CHECK(static_cast<float>(model.decoder_weight.data[i]) ==
              static_cast<float>(loaded.decoder_weight.data[i]));
    for (std::size_t i = 0; i < model.scae.fc_hidden.numel(); ++i)
        CHECK(static_cast<float>(model.scae.fc_hidden.data[i]) ==
              static_cast<float>(loaded.scae.fc_hidden.data[i]));
    std::filesystem::remove_all(dir);
}

TEST_CASE("a fully collapsed spatial encoder aborts instead of training on nothing") {
    // zero encoder weights put every superpixel's mean code at zero, so every
    // batch is degenerate and the epoch cannot proceed
    const DatasetBundle bundle = toy_scene(10);
    const Segmentation seg = toy_segmentation(bundle);
    SscuModel model = toy_model(bundle, 2, 3);
    model.sae.encoder_weight = Tensor::zeros(model.sae.encoder_weight.shape);
    model.sae.bn_beta = Tensor::zeros(model.sae.bn_beta.shape);
    try {
        train(model, bundle.cube, seg);
        FAIL("expected a numerical error");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("degenerate") != std::string::npos);
    }
}

TEST_CASE("training aborts with a diagnostic on non-finite loss") {
    const DatasetBundle bundle = toy_scene(10);
    const Segmentation seg = toy_segmentation(bundle);
    SscuModel model = toy_model(bundle, 2, 3);
    // an encoder-side inf is absorbed by the ReLU mask; a decoder-side one
    // reaches the reconstruction loss and must abort
    model.decoder_weight.data[0] = std::numeric_limits<double>::infinity();
    try {
        train(model, bundle.cube, seg);
        FAIL("expected a numerical error");
    } catch (const NumericalError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("epoch") != std::string::npos);
    }
}
