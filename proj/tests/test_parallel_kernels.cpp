#include <doctest.h>

#include "unmix/fcls.hpp"
#include "unmix/nn/ops.hpp"
#include "unmix/parallel.hpp"
#include "unmix/slic.hpp"
#include "unmix/sscu.hpp"
#include "unmix/synth.hpp"

using namespace unmix;

namespace {

struct ParGuard {
    bool saved = par::enabled();
    ~ParGuard() { par::set_enabled(saved); }
};

DatasetBundle scene() {
    SynthConfig cfg;
    cfg.height = 24;
    cfg.width = 24;
    cfg.endmembers = 4;
    cfg.bands = 70;
    cfg.sigma_g = 1.0;
    cfg.snr_db = 25.0;
    cfg.seed = 6;
    return generate_scene(cfg);
}

}  // namespace

TEST_CASE("fcls parallel kernel equals the serial reference bitwise") {
    ParGuard guard;
    const DatasetBundle bundle = scene();
    const Tensor Y = flatten(bundle.cube);
    par::set_enabled(false);
    const FclsResult serial = fcls_serial(Y, *bundle.gt_endmembers);
    par::set_enabled(true);
    const FclsResult parallel = fcls(Y, *bundle.gt_endmembers);
    CHECK(serial.abundances.data == parallel.abundances.data);
    CHECK(serial.flagged == parallel.flagged);
}

TEST_CASE("scae batch encoder equals the serial reference bitwise") {
    ParGuard guard;
    const DatasetBundle bundle = scene();
    TrainConfig cfg;
    const SscuModel model =
        init_model(bundle.cube.bands, bundle.gt_endmembers->count(), *bundle.gt_endmembers, cfg);
    const Tensor rows = pixels_as_rows(bundle.cube);
    par::set_enabled(false);
    const Tensor a = scae_encode_batch_serial(model, rows);
    par::set_enabled(true);
    const Tensor b = scae_encode_batch(model, rows);
    CHECK(a.data == b.data);
}

TEST_CASE("batched dense layer is invariant to the parallel switch") {
    ParGuard guard;
    Rng rng(8);
    Tensor X = Tensor::zeros({100, 30});
    Tensor W = Tensor::zeros({7, 30});
    for (double& v : X.data) v = normal01(rng);
    for (double& v : W.data) v = normal01(rng);
    par::set_enabled(false);
    const Tensor a = nn::linear_forward(X, W);
    par::set_enabled(true);
    const Tensor b = nn::linear_forward(X, W);
    CHECK(a.data == b.data);

    Tensor gy = Tensor::full({100, 7}, 0.25);
    Tensor gx1 = Tensor::zeros({100, 30}), gw1 = Tensor::zeros({7, 30});
    Tensor gx2 = Tensor::zeros({100, 30}), gw2 = Tensor::zeros({7, 30});
    par::set_enabled(false);
    nn::linear_backward(X, W, gy, &gx1, &gw1);
    par::set_enabled(true);
    nn::linear_backward(X, W, gy, &gx2, &gw2);
    CHECK(gx1.data == gx2.data);
    CHECK(gw1.data == gw2.data);
}

TEST_CASE("slic assignment is invariant to the parallel switch") {
    ParGuard guard;
    const DatasetBundle bundle = scene();
    SlicConfig cfg;
    cfg.size_s = 4.0;
    cfg.compactness = 0.1;
    par::set_enabled(false);
    const Segmentation a = slic_segment(*bundle.gt_abundances, cfg);
    par::set_enabled(true);
    const Segmentation b = slic_segment(*bundle.gt_abundances, cfg);
    CHECK(a.labels == b.labels);
}
