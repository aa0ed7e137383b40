#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "unmix/bundle_io.hpp"
#include "unmix/errors.hpp"
#include "unmix/hsi.hpp"
#include "unmix/rng.hpp"
#include "unmix/synth.hpp"

using namespace unmix;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* tag) {
    fs::path dir = fs::temp_directory_path() / (std::string("unmix_test_") + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

DatasetBundle small_bundle(bool with_gt) {
    SynthConfig cfg;
    cfg.height = 6;
    cfg.width = 5;
    cfg.endmembers = 3;
    cfg.bands = 8;
    cfg.sigma_g = 0.0;
    cfg.snr_db = 25.0;
    cfg.alpha_max = 1.0;
    cfg.seed = 42;
    DatasetBundle b = generate_scene(cfg);
    for (std::size_t i = 0; i < cfg.bands; ++i)
        b.cube.wavelengths.push_back(0.4 + 0.02 * static_cast<double>(i));
    if (!with_gt) {
        b.gt_endmembers.reset();
        b.gt_abundances.reset();
    }
    return b;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("flatten/unflatten are inverse and use row-major pixel order") {
    HsiCube cube;
    cube.height = 2;
    cube.width = 2;
    cube.bands = 3;
    cube.reflectance = Tensor({2, 2, 3}, {0, 1, 2, 10, 11, 12, 20, 21, 22, 30, 31, 32});
    Tensor m = flatten(cube);
    REQUIRE(m.shape == std::vector<std::size_t>{3, 4});
    // pixel (0,1) lands in column 1
    CHECK(m.data[0 * 4 + 1] == 10);
    CHECK(m.data[1 * 4 + 1] == 11);
    CHECK(m.data[2 * 4 + 1] == 12);
    HsiCube back = unflatten(m, 2, 2);
    CHECK(back.reflectance.data == cube.reflectance.data);

    HsiCube one;
    one.height = 1;
    one.width = 1;
    one.bands = 4;
    one.reflectance = Tensor({1, 1, 4}, {5, 6, 7, 8});
    Tensor mv = flatten(one);
    CHECK(mv.shape == std::vector<std::size_t>{4, 1});

    // inverse property across a spread of shapes
    Rng rng(31);
    for (auto [H, W, L] : {std::tuple<std::size_t, std::size_t, std::size_t>{3, 7, 5},
                           {8, 2, 11},
                           {1, 9, 2},
                           {6, 6, 3}}) {
        HsiCube c;
        c.height = H;
        c.width = W;
        c.bands = L;
        c.reflectance = Tensor::zeros({H, W, L});
        for (double& v : c.reflectance.data) v = uniform(rng, 0.0, 1.0);
        const HsiCube back = unflatten(flatten(c), H, W);
        CHECK(back.reflectance.data == c.reflectance.data);
    }
}

TEST_CASE("bundle round trip is bit-stable") {
    const fs::path dir = temp_dir("roundtrip");
    DatasetBundle b = small_bundle(true);
    save_bundle(b, dir);
    DatasetBundle loaded = load_bundle(dir);
    CHECK(loaded.name == b.name);
    CHECK(loaded.cube.wavelengths == b.cube.wavelengths);
    REQUIRE(loaded.gt_endmembers.has_value());
    REQUIRE(loaded.gt_abundances.has_value());

    // a second save of the loaded bundle reproduces the bytes exactly
    const fs::path dir2 = temp_dir("roundtrip2");
    save_bundle(loaded, dir2);
    CHECK(file_bytes(dir / "cube.raw") == file_bytes(dir2 / "cube.raw"));
    CHECK(file_bytes(dir / "gt_endmembers.csv") == file_bytes(dir2 / "gt_endmembers.csv"));
    CHECK(file_bytes(dir / "gt_abundances.raw") == file_bytes(dir2 / "gt_abundances.raw"));

    // and the loaded cube equals the re-loaded cube bitwise
    DatasetBundle loaded2 = load_bundle(dir2);
    CHECK(loaded.cube.reflectance.data == loaded2.cube.reflectance.data);
    fs::remove_all(dir);
    fs::remove_all(dir2);
}

TEST_CASE("bundle without ground truth loads with both optionals absent") {
    const fs::path dir = temp_dir("nogt");
    save_bundle(small_bundle(false), dir);
    DatasetBundle loaded = load_bundle(dir);
    CHECK_FALSE(loaded.gt_endmembers.has_value());
    CHECK_FALSE(loaded.gt_abundances.has_value());
    fs::remove_all(dir);
}

TEST_CASE("size mismatch is reported with the expected byte count") {
    const fs::path dir = temp_dir("badsize");
    save_bundle(small_bundle(false), dir);
    // truncate the payload
    const std::string bytes = file_bytes(dir / "cube.raw");
    std::ofstream out(dir / "cube.raw", std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 8));
    out.close();
    try {
        load_bundle(dir);
        FAIL("expected a format error");
    } catch (const FormatError& e) {
        const std::string msg = e.what();
        CHECK(msg.find(std::to_string(6 * 5 * 8 * 4)) != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("non-finite cube values are refused") {
    DatasetBundle b = small_bundle(false);
    b.cube.reflectance.data[7] = std::numeric_limits<double>::quiet_NaN();
    const fs::path dir = temp_dir("nan");
    CHECK_THROWS_AS(save_bundle(b, dir), FormatError);
    fs::remove_all(dir);
}

TEST_CASE("save refuses an abundance field violating the sum constraint") {
    DatasetBundle b = small_bundle(true);
    b.gt_abundances->fractions.data[0] += 0.01;  // breaks ASC by 1e-2
    const fs::path dir = temp_dir("badasc");
    CHECK_THROWS_AS(save_bundle(b, dir), DomainError);
    fs::remove_all(dir);
}

TEST_CASE("missing header is a format error") {
    const fs::path dir = temp_dir("nohdr");
    CHECK_THROWS_AS(load_bundle(dir), FormatError);
    fs::remove_all(dir);
}

TEST_CASE("abundance validation catches ANC violations") {
    AbundanceField f;
    f.height = 1;
    f.width = 1;
    f.endmembers = 2;
    f.fractions = Tensor({1, 1, 2}, {1.2, -0.2});
    CHECK_THROWS_AS(f.validate(1e-5), DomainError);
}
