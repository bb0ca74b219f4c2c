#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "organct/crops.hpp"
#include "organct/util.hpp"
#include "organct/vocab.hpp"
#include "organct/vvol.hpp"

using namespace organct;

namespace {

std::filesystem::path temp_dir() {
    auto p = std::filesystem::temp_directory_path() / "organct_volume_tests";
    std::filesystem::create_directories(p);
    return p;
}

Volume make_volume(int nx, int ny, int nz) {
    Volume v;
    v.dims = {nx, ny, nz};
    v.spacing = {1.0, 1.0, 2.5};
    v.voxels.resize(v.dims.count());
    for (std::size_t i = 0; i < v.voxels.size(); ++i)
        v.voxels[i] = std::int16_t(int(i * 7 % 4001) - 2000);
    return v;
}

SegMask make_mask(int nx, int ny, int nz) {
    SegMask m;
    m.dims = {nx, ny, nz};
    m.spacing = {1.0, 1.0, 2.5};
    m.labels.assign(m.dims.count(), 0);
    m.label_table[1] = "liver";
    m.label_table[2] = "spleen";
    return m;
}

}  // namespace

TEST_CASE("volume container round-trips exactly") {
    const auto dir = temp_dir();
    const Volume v = make_volume(13, 9, 5);
    for (bool gz : {false, true}) {
        const auto path = dir / (gz ? "v.gz.vvol" : "v.vvol");
        write_volume(path, v, gz);
        const Volume r = load_volume(path);
        CHECK(r.dims == v.dims);
        CHECK(r.spacing == v.spacing);
        CHECK(r.voxels == v.voxels);
    }
}

TEST_CASE("mask container round-trips with label table") {
    const auto dir = temp_dir();
    SegMask m = make_mask(6, 7, 4);
    m.at(1, 2, 3) = 1;
    m.at(4, 5, 2) = 2;
    write_mask(dir / "m.vvol", m);
    const SegMask r = load_mask(dir / "m.vvol");
    CHECK(r.labels == m.labels);
    CHECK(r.label_table == m.label_table);
    CHECK(r.present_organs() == std::vector<std::string>{"liver", "spleen"});
    CHECK(r.id_of("liver") == 1);
    CHECK(r.id_of("pancreas") == 0);
}

TEST_CASE("format errors carry byte offsets") {
    const auto dir = temp_dir();
    const Volume v = make_volume(4, 4, 2);
    write_volume(dir / "t.vvol", v);

    SUBCASE("bad magic") {
        auto bytes = read_text_file(dir / "t.vvol");
        bytes[0] = 'X';
        write_text_file(dir / "bad.vvol", bytes);
        CHECK_THROWS_AS(load_volume(dir / "bad.vvol"), VvolFormatError);
    }
    SUBCASE("truncated payload") {
        auto bytes = read_text_file(dir / "t.vvol");
        bytes.resize(bytes.size() - 3);
        write_text_file(dir / "trunc.vvol", bytes);
        try {
            load_volume(dir / "trunc.vvol");
            FAIL("expected a format error");
        } catch (const VvolFormatError& e) {
            CHECK(std::string(e.what()).find("offset") != std::string::npos);
        }
    }
    SUBCASE("trailing bytes") {
        auto bytes = read_text_file(dir / "t.vvol");
        bytes += "xx";
        write_text_file(dir / "trail.vvol", bytes);
        CHECK_THROWS_AS(load_volume(dir / "trail.vvol"), VvolFormatError);
    }
}

TEST_CASE("window transfer function oracle") {
    // clamp((hu - level)/width + 0.5, 0, 1)
    CHECK(window_value(40.0, kSoftWindow) == doctest::Approx(0.5));
    CHECK(window_value(-160.0, kSoftWindow) == doctest::Approx(0.0));
    CHECK(window_value(240.0, kSoftWindow) == doctest::Approx(1.0));
    CHECK(window_value(-600.0, kLungWindow) == doctest::Approx(0.5));
    CHECK(window_value(115.0, kSoftWindow) ==
          doctest::Approx((115.0 - 40.0) / 400.0 + 0.5));
    for (double hu : {-3000.0, -50.0, 0.0, 77.0, 1200.0, 4000.0}) {
        const double v = window_value(hu, kBoneWindow);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("organ bounding box") {
    SegMask m = make_mask(10, 10, 6);
    m.at(2, 3, 1) = 1;
    m.at(7, 8, 4) = 1;
    auto bb = organ_bbox(m, "liver");
    REQUIRE(bb.has_value());
    CHECK(bb->x0 == 2);
    CHECK(bb->x1 == 7);
    CHECK(bb->y0 == 3);
    CHECK(bb->y1 == 8);
    CHECK(bb->z0 == 1);
    CHECK(bb->z1 == 4);
    CHECK(!organ_bbox(m, "spleen").has_value());
    CHECK_THROWS_AS(organ_bbox(m, "not_an_organ"), DataError);
}

TEST_CASE("crops are always 192x192x32") {
    Volume v = make_volume(40, 40, 12);
    SegMask m = make_mask(40, 40, 12);
    for (int z = 3; z < 9; ++z)
        for (int y = 10; y < 20; ++y)
            for (int x = 10; x < 25; ++x) m.at(x, y, z) = 1;
    for (auto mode : {CropMode::Train, CropMode::Infer}) {
        auto crops = extract_organ_crops(v, m, "liver", mode, 3);
        REQUIRE(crops.size() == 1);
        CHECK(crops[0].values.size() == std::size_t(kCropXY) * kCropXY * kCropZ);
        const auto ch = apply_windowing(crops[0]);
        CHECK(ch.values.size() == std::size_t(kCropXY) * kCropXY * kCropZ * 3);
    }
    CHECK_THROWS_AS(extract_organ_crops(v, m, "spleen", CropMode::Infer), DataError);
}

TEST_CASE("small organs expand with air padding and stay centered") {
    Volume v = make_volume(40, 40, 12);
    for (auto& x : v.voxels) x = 100;
    SegMask m = make_mask(40, 40, 12);
    for (int z = 4; z <= 7; ++z)
        for (int y = 18; y <= 21; ++y)
            for (int x = 18; x <= 21; ++x) m.at(x, y, z) = 1;
    auto crops = extract_organ_crops(v, m, "liver", CropMode::Infer);
    REQUIRE(crops.size() == 1);
    const auto& c = crops[0];
    // organ center lands on the crop center
    CHECK(c.at(kCropXY / 2, kCropXY / 2, kCropZ / 2) == doctest::Approx(100.0));
    // far corner is outside the 40^2 volume -> air
    CHECK(c.at(0, 0, kCropZ / 2) == doctest::Approx(double(kPadHU)));
}

TEST_CASE("oversized organs downscale instead of cropping away tissue") {
    Volume v = make_volume(240, 240, 8);
    for (auto& x : v.voxels) x = 50;
    SegMask m = make_mask(240, 240, 8);
    for (int z = 1; z < 7; ++z)
        for (int y = 4; y < 236; ++y)
            for (int x = 4; x < 236; ++x) m.at(x, y, z) = 1;
    auto crops = extract_organ_crops(v, m, "liver", CropMode::Infer);
    REQUIRE(crops.size() == 1);
    // interior of the downscaled organ keeps its intensity
    CHECK(crops[0].at(kCropXY / 2, kCropXY / 2, kCropZ / 2) == doctest::Approx(50.0));
}

TEST_CASE("inference z-windows cover the full extent without overlap except the last") {
    Volume v = make_volume(40, 40, 90);
    SegMask m = make_mask(40, 40, 90);
    for (int z = 5; z < 85; ++z) m.at(20, 20, z) = 1;  // 80 slices
    auto crops = extract_organ_crops(v, m, "liver", CropMode::Infer);
    // 80 slices -> stride-32 windows: 3 (last right-aligned)
    CHECK(crops.size() == 3);
    for (std::size_t i = 0; i < crops.size(); ++i) {
        CHECK(crops[i].z_window_index == int(i));
        CHECK(crops[i].z_window_count == int(crops.size()));
    }
}

TEST_CASE("training z-window is deterministic under seed") {
    Volume v = make_volume(40, 40, 90);
    SegMask m = make_mask(40, 40, 90);
    for (int z = 5; z < 85; ++z) m.at(20, 20, z) = 1;
    auto a = extract_organ_crops(v, m, "liver", CropMode::Train, 99);
    auto b = extract_organ_crops(v, m, "liver", CropMode::Train, 99);
    auto c = extract_organ_crops(v, m, "liver", CropMode::Train, 100);
    REQUIRE(a.size() == 1);
    REQUIRE(b.size() == 1);
    CHECK(a[0].values == b[0].values);
    REQUIRE(c.size() == 1);  // different seed may pick a different window
}

TEST_CASE("region features are volume fractions over the vocabulary order") {
    const auto vocab = OrganVocabulary::load(assets_dir());
    SegMask m = make_mask(10, 10, 4);
    for (int x = 0; x < 6; ++x) m.at(x, 0, 0) = 1;  // liver: 6 voxels
    for (int x = 0; x < 2; ++x) m.at(x, 1, 0) = 2;  // spleen: 2 voxels
    auto f = region_features(m, vocab);
    REQUIRE(f.size() == vocab.size());
    CHECK(f[vocab.index_of("liver")] == doctest::Approx(0.75));
    CHECK(f[vocab.index_of("spleen")] == doctest::Approx(0.25));
    double total = 0;
    for (double x : f) total += x;
    CHECK(total == doctest::Approx(1.0));
}
