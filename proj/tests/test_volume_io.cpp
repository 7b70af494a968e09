#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "cmbaug/nifti.hpp"
#include "cmbaug/rng.hpp"
#include "cmbaug/volume.hpp"

using namespace cmbaug;

namespace {

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

Volume random_volume(std::array<long, 3> shape, Rng& rng, float lo = 0.f, float hi = 1.f) {
    Volume v(shape, {1.0, 1.0, 1.0});
    for (auto& x : v.data) x = static_cast<float>(rng.uniform(lo, hi));
    return v;
}

// independent per-voxel oracle for clip+rescale given percentile window
Volume clip_rescale_oracle(const Volume& v, double low_pct, double high_pct) {
    std::vector<float> sorted = v.data;
    std::sort(sorted.begin(), sorted.end());
    auto pct = [&](double p) {
        const double rank = p / 100.0 * double(sorted.size() - 1);
        const std::size_t lo = std::size_t(std::floor(rank));
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        return sorted[lo] * (1.0 - (rank - lo)) + sorted[hi] * (rank - lo);
    };
    const double lo = pct(low_pct), hi = pct(high_pct);
    Volume out = v;
    for (auto& x : out.data) {
        if (hi == lo) {
            x = 0.f;
        } else {
            double c = std::min(hi, std::max(lo, double(x)));
            x = float((c - lo) / (hi - lo));
        }
    }
    return out;
}

}  // namespace

TEST_CASE("clip_and_rescale degenerate and percentile cases") {
    SECTION("constant volume maps to zeros") {
        Volume v({3, 3, 3}, {1, 1, 1}, 7.0f);
        Volume out = clip_and_rescale(v);
        for (float x : out.data) CHECK(x == 0.0f);
    }

    SECTION("0..999 with high_pct 99.5 uses linear-interpolated rank") {
        Volume v({10, 10, 10}, {1, 1, 1});
        for (long i = 0; i < 1000; ++i) v.data[i] = float(i);
        std::vector<float> sorted = v.data;
        std::sort(sorted.begin(), sorted.end());
        CHECK(percentile_of_sorted(sorted, 99.5) == Catch::Approx(994.005).margin(1e-9));
        Volume out = clip_and_rescale(v, 0.0, 99.5);
        float mn = 1e9f, mx = -1e9f;
        for (float x : out.data) {
            mn = std::min(mn, x);
            mx = std::max(mx, x);
        }
        CHECK(mn == 0.0f);
        CHECK(mx == 1.0f);             // values >= 994.005 clip to 1
        CHECK(out.data[995] == 1.0f);  // 995 > hi
        CHECK(out.data[0] == 0.0f);
    }

    SECTION("random volumes match the elementwise oracle") {
        Rng rng(99);
        for (int t = 0; t < 20; ++t) {
            Volume v = random_volume({5, 5, 5}, rng, -3.f, 11.f);
            Volume got = clip_and_rescale(v, 5.0, 95.0);
            Volume want = clip_rescale_oracle(v, 5.0, 95.0);
            for (long i = 0; i < v.numel(); ++i)
                CHECK(got.data[i] == Catch::Approx(want.data[i]).margin(1e-6));
        }
    }

    SECTION("idempotent on data already in [0,1] with full window") {
        Rng rng(100);
        Volume v = random_volume({4, 4, 4}, rng, 0.f, 1.f);
        v.data[0] = 0.f;
        v.data[1] = 1.f;
        Volume once = clip_and_rescale(v, 0.0, 100.0);
        Volume twice = clip_and_rescale(once, 0.0, 100.0);
        for (long i = 0; i < v.numel(); ++i)
            CHECK(std::abs(once.data[i] - twice.data[i]) < 1e-6f);
    }

    SECTION("invalid percentile window throws") {
        Volume v({2, 2, 2}, {1, 1, 1}, 0.f);
        CHECK_THROWS_AS(clip_and_rescale(v, 50.0, 50.0), std::invalid_argument);
        CHECK_THROWS_AS(clip_and_rescale(v, -1.0, 99.5), std::invalid_argument);
    }
}

TEST_CASE("patch origins follow stride and tail rules") {
    // stride arithmetic oracle: enumerate origins directly
    auto oracle = [](long Z, long pz, long stride) {
        std::vector<long> o;
        for (long z = 0; z + pz <= Z; z += stride) o.push_back(z);
        if (o.back() + pz < Z) o.push_back(Z - pz);
        return o;
    };

    CHECK(patch_z_origins(32, 32, 16) == std::vector<long>{0});
    CHECK(patch_z_origins(48, 32, 16) == std::vector<long>{0, 16});
    CHECK(patch_z_origins(40, 32, 16) == std::vector<long>{0, 8});

    Rng rng(7);
    for (int t = 0; t < 50; ++t) {
        const long pz = rng.uniform_int(2, 24);
        const long Z = pz + rng.uniform_int(0, 50);
        const long stride = rng.uniform_int(1, pz);
        auto got = patch_z_origins(Z, pz, stride);
        CHECK(got == oracle(Z, pz, stride));
        // strictly increasing and covering [0, Z)
        std::vector<bool> covered(Z, false);
        for (std::size_t i = 0; i < got.size(); ++i) {
            if (i) CHECK(got[i] > got[i - 1]);
            for (long z = got[i]; z < got[i] + pz; ++z) covered[z] = true;
        }
        CHECK(std::all_of(covered.begin(), covered.end(), [](bool b) { return b; }));
    }
}

TEST_CASE("extract_patches cuts volume and mask identically") {
    Rng rng(8);
    Volume v = random_volume({6, 5, 40}, rng);
    PathologyMask m(v.shape);
    for (auto& b : m.data) b = rng.bernoulli(0.1) ? 1 : 0;
    PatchSpec spec;
    spec.patch_shape = {6, 5, 32};
    spec.z_overlap_fraction = 0.5;
    auto patches = extract_patches(v, m, spec);
    REQUIRE(patches.size() == 2);
    CHECK(patches[0].origin[2] == 0);
    CHECK(patches[1].origin[2] == 8);
    for (const auto& p : patches) {
        for (long z = 0; z < 32; ++z)
            for (long y = 0; y < 5; ++y)
                for (long x = 0; x < 6; ++x) {
                    CHECK(p.image.at(x, y, z) == v.at(x, y, z + p.origin[2]));
                    CHECK(p.mask.at(x, y, z) == m.at(x, y, z + p.origin[2]));
                    CHECK(p.mask.at(x, y, z) <= 1);
                }
    }

    PatchSpec bad = spec;
    bad.patch_shape = {6, 5, 64};
    CHECK_THROWS_AS(extract_patches(v, m, bad), std::invalid_argument);
    bad.patch_shape = {7, 5, 32};
    CHECK_THROWS_AS(extract_patches(v, m, bad), std::invalid_argument);
}

TEST_CASE("stitch_patches averages overlaps and inverts extract") {
    Rng rng(9);
    SECTION("round trip on unmodified patches") {
        Volume v = random_volume({4, 4, 24}, rng);
        PathologyMask m(v.shape);
        PatchSpec spec;
        spec.patch_shape = {4, 4, 8};
        spec.z_overlap_fraction = 0.5;
        auto patches = extract_patches(v, m, spec);
        std::vector<Volume> imgs;
        std::vector<std::array<long, 3>> origins;
        for (auto& p : patches) {
            imgs.push_back(p.image);
            origins.push_back(p.origin);
        }
        Volume back = stitch_patches(imgs, origins, v.shape);
        for (long i = 0; i < v.numel(); ++i)
            CHECK(back.data[i] == Catch::Approx(v.data[i]).margin(1e-6));
    }

    SECTION("two half-overlapping constant patches average to 0.5") {
        Volume a({2, 2, 8}, {1, 1, 1}, 0.0f);
        Volume b({2, 2, 8}, {1, 1, 1}, 1.0f);
        Volume out = stitch_patches({a, b}, {{{0, 0, 0}}, {{0, 0, 4}}}, {2, 2, 12});
        for (long z = 0; z < 12; ++z) {
            const float want = z < 4 ? 0.0f : (z < 8 ? 0.5f : 1.0f);
            CHECK(out.at(0, 0, z) == want);
        }
    }

    SECTION("random perturbation matches per-voxel sum/count oracle") {
        Volume v = random_volume({3, 3, 20}, rng);
        PathologyMask m(v.shape);
        PatchSpec spec;
        spec.patch_shape = {3, 3, 8};
        spec.z_overlap_fraction = 0.5;
        auto patches = extract_patches(v, m, spec);
        std::vector<Volume> imgs;
        std::vector<std::array<long, 3>> origins;
        for (auto& p : patches) {
            for (auto& x : p.image.data) x += float(rng.uniform(-0.1, 0.1));
            imgs.push_back(p.image);
            origins.push_back(p.origin);
        }
        Volume got = stitch_patches(imgs, origins, v.shape);
        // oracle: direct accumulation
        std::vector<double> sum(v.numel(), 0.0);
        std::vector<int> cnt(v.numel(), 0);
        for (std::size_t i = 0; i < imgs.size(); ++i)
            for (long z = 0; z < 8; ++z)
                for (long y = 0; y < 3; ++y)
                    for (long x = 0; x < 3; ++x) {
                        auto j = v.index(x, y, z + origins[i][2]);
                        sum[j] += imgs[i].at(x, y, z);
                        cnt[j] += 1;
                    }
        for (long j = 0; j < v.numel(); ++j)
            CHECK(got.data[j] == Catch::Approx(sum[j] / cnt[j]).margin(1e-6));
    }
}

TEST_CASE("nifti round trip preserves data and spacing") {
    Rng rng(10);
    for (const char* name : {"vol_rt.nii", "vol_rt.nii.gz"}) {
        Volume v = random_volume({7, 6, 5}, rng, -100.f, 250.f);
        v.spacing = {0.98, 0.98, 1.0};
        const std::string path = tmp_path(name);
        save_volume(v, path);
        Volume back = load_volume(path);
        REQUIRE(back.shape == v.shape);
        CHECK(back.spacing[0] == Catch::Approx(0.98).margin(1e-6));
        CHECK(back.spacing[2] == 1.0);
        for (long i = 0; i < v.numel(); ++i) CHECK(back.data[i] == v.data[i]);
        std::filesystem::remove(path);
    }
}

TEST_CASE("mask io stores 8-bit values") {
    Rng rng(11);
    PathologyMask m({5, 4, 3});
    for (auto& b : m.data) b = rng.bernoulli(0.3) ? 1 : 0;
    const std::string path = tmp_path("mask_rt.nii.gz");
    save_mask(m, {1, 1, 1}, path);
    PathologyMask back = load_mask(path);
    REQUIRE(back.shape == m.shape);
    CHECK(back.data == m.data);
    std::filesystem::remove(path);
}

TEST_CASE("raw format round trip") {
    Rng rng(12);
    Volume v = random_volume({4, 3, 5}, rng);
    v.spacing = {2.0, 0.5, 1.25};
    const std::string path = tmp_path("vol_rt.raw");
    save_volume(v, path);
    Volume back = load_volume(path);
    REQUIRE(back.shape == v.shape);
    CHECK(back.spacing == v.spacing);
    for (long i = 0; i < v.numel(); ++i) CHECK(back.data[i] == v.data[i]);
    std::filesystem::remove(path);
    std::filesystem::remove(path + ".json");
}

TEST_CASE("io errors are reported distinctly") {
    SECTION("missing file") {
        try {
            load_volume(tmp_path("nope_does_not_exist.nii"));
            FAIL("expected throw");
        } catch (const VolumeIoError& e) {
            CHECK(e.kind() == VolumeIoError::Kind::missing_file);
        }
    }

    SECTION("non-3D payload: time dimension of length 2") {
        Volume v({3, 3, 3}, {1, 1, 1}, 1.0f);
        const std::string path = tmp_path("vol_4d.nii");
        save_volume(v, path);
        // patch the header into a 4D file with dim[4] = 2
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        std::int16_t dim0 = 4, dim4 = 2;
        f.seekp(40);
        f.write(reinterpret_cast<char*>(&dim0), 2);
        f.seekp(48);
        f.write(reinterpret_cast<char*>(&dim4), 2);
        f.close();
        try {
            load_volume(path);
            FAIL("expected throw");
        } catch (const VolumeIoError& e) {
            CHECK(e.kind() == VolumeIoError::Kind::non_3d);
            CHECK(std::string(e.what()).find("non-3D payload") != std::string::npos);
        }
        std::filesystem::remove(path);
    }

    SECTION("corrupt header") {
        const std::string path = tmp_path("vol_corrupt.nii");
        std::ofstream f(path, std::ios::binary);
        std::vector<char> junk(400, 0x5a);
        f.write(junk.data(), junk.size());
        f.close();
        try {
            load_volume(path);
            FAIL("expected throw");
        } catch (const VolumeIoError& e) {
            CHECK(e.kind() == VolumeIoError::Kind::corrupt_header);
        }
        std::filesystem::remove(path);
    }

    SECTION("non-scalar datatype") {
        Volume v({2, 2, 2}, {1, 1, 1}, 1.0f);
        const std::string path = tmp_path("vol_rgb.nii");
        save_volume(v, path);
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        std::int16_t dtype = 128;  // RGB
        f.seekp(70);
        f.write(reinterpret_cast<char*>(&dtype), 2);
        f.close();
        try {
            load_volume(path);
            FAIL("expected throw");
        } catch (const VolumeIoError& e) {
            CHECK(e.kind() == VolumeIoError::Kind::non_scalar);
        }
        std::filesystem::remove(path);
    }
}
