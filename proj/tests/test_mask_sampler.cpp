#include <catch2/catch_amalgamated.hpp>

#include "cmbaug/mask_sampler.hpp"

using namespace cmbaug;

namespace {

PathologyMask full_support(std::array<long, 3> shape) {
    PathologyMask m(shape);
    std::fill(m.data.begin(), m.data.end(), 1);
    return m;
}

}  // namespace

TEST_CASE("empty_mask is all zero") {
    PathologyMask m = empty_mask({4, 4, 4});
    CHECK(m.numel() == 64);
    CHECK(m.sum() == 0);
    m.validate();
}

TEST_CASE("count_range (0,0) yields an identically zero mask") {
    LesionPrior prior;
    prior.count_range = {0, 0};
    Rng rng(3);
    PathologyMask m = sample_pathology_mask(full_support({16, 16, 16}), {1, 1, 1}, prior, rng);
    CHECK(m.sum() == 0);
}

TEST_CASE("same seed gives bitwise-identical masks") {
    LesionPrior prior;
    prior.count_range = {1, 3};
    PathologyMask support = full_support({24, 24, 24});
    Rng a(777), b(777);
    PathologyMask ma = sample_pathology_mask(support, {1, 1, 1}, prior, a);
    PathologyMask mb = sample_pathology_mask(support, {1, 1, 1}, prior, b);
    CHECK(ma.data == mb.data);
    CHECK(ma.sum() > 0);
}

TEST_CASE("empty foreground after erosion is an error") {
    LesionPrior prior;
    prior.foreground_margin_vox = 4;
    PathologyMask tiny = full_support({5, 5, 5});  // erosion by 4 empties a 5^3 cube
    Rng rng(1);
    CHECK_THROWS_AS(sample_pathology_mask(tiny, {1, 1, 1}, prior, rng), MaskSamplerError);
    CHECK_THROWS_WITH(sample_pathology_mask(tiny, {1, 1, 1}, prior, rng),
                      Catch::Matchers::ContainsSubstring("no placement region"));
}

TEST_CASE("sampled lesions stay inside the eroded foreground") {
    LesionPrior prior;
    prior.count_range = {1, 3};
    prior.foreground_margin_vox = 2;
    // an off-center blob support
    PathologyMask support({32, 32, 24});
    for (long z = 2; z < 22; ++z)
        for (long y = 4; y < 28; ++y)
            for (long x = 4; x < 28; ++x) support.at(x, y, z) = 1;
    PathologyMask eroded = erode(support, prior.foreground_margin_vox);
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        Rng rng(seed);
        PathologyMask m = sample_pathology_mask(support, {1, 1, 1}, prior, rng);
        for (long i = 0; i < m.numel(); ++i) {
            if (m.data[i]) CHECK(eroded.data[i] == 1);
        }
    }
}

TEST_CASE("component count and physical extent obey the prior across seeds") {
    LesionPrior prior;
    prior.count_range = {1, 4};
    prior.radius_range_mm = {1.0, 4.0};
    prior.elongation_prob = 0.5;
    prior.elongation_ratio_range = {1.0, 2.5};
    prior.foreground_margin_vox = 1;
    PathologyMask support = full_support({40, 40, 28});
    const std::array<double, 3> spacing{0.98, 0.98, 1.0};
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed * 13 + 1);
        PathologyMask m = sample_pathology_mask(support, spacing, prior, rng);
        m.validate();
        auto comps = connected_components(m);
        CHECK(long(comps.size()) >= prior.count_range.first);
        CHECK(long(comps.size()) <= prior.count_range.second);
        for (const auto& c : comps) CHECK(c.max_extent_mm(spacing) <= 10.0);
    }
}

TEST_CASE("rmax 4mm at unit spacing keeps components within 10 voxels extent") {
    LesionPrior prior;
    prior.count_range = {2, 4};
    prior.radius_range_mm = {2.0, 4.0};
    prior.elongation_prob = 1.0;
    prior.elongation_ratio_range = {1.2, 2.0};
    PathologyMask support = full_support({48, 48, 32});
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 400);
        PathologyMask m = sample_pathology_mask(support, {1, 1, 1}, prior, rng);
        for (const auto& c : connected_components(m)) {
            CHECK(c.max_extent_mm({1, 1, 1}) <= 10.0);
            auto bb = c.bounding_box();
            CHECK(bb[1] - bb[0] + 1 <= 11);
            CHECK(bb[3] - bb[2] + 1 <= 11);
            CHECK(bb[5] - bb[4] + 1 <= 11);
        }
    }
}

TEST_CASE("prior validation rejects bad geometry") {
    LesionPrior prior;
    prior.radius_range_mm = {1.0, 6.0};  // would allow > 10 mm diameter
    CHECK_THROWS_AS(prior.validate(), std::invalid_argument);
    prior = LesionPrior{};
    prior.count_range = {3, 1};
    CHECK_THROWS_AS(prior.validate(), std::invalid_argument);
}

TEST_CASE("harvest_real_masks returns patch-cut pathological masks only") {
    PatchSpec spec;
    spec.patch_shape = {12, 12, 8};
    spec.z_overlap_fraction = 0.5;

    SECTION("healthy-only input gives an empty list") {
        SampleRecord healthy;
        healthy.volume = Volume({12, 12, 16}, {1, 1, 1}, 0.5f);
        healthy.mask = PathologyMask({12, 12, 16});
        healthy.domain = Domain::healthy;
        CHECK(harvest_real_masks({healthy}, spec).empty());
    }

    SECTION("one pathological record with an interior lesion keeps its component") {
        SampleRecord rec;
        rec.volume = Volume({12, 12, 16}, {1, 1, 1}, 0.5f);
        rec.mask = PathologyMask({12, 12, 16});
        // 2x2x2 lesion fully inside the first patch (z 0..7)
        for (long z = 2; z < 4; ++z)
            for (long y = 5; y < 7; ++y)
                for (long x = 5; x < 7; ++x) rec.mask.at(x, y, z) = 1;
        rec.domain = Domain::pathological;
        auto masks = harvest_real_masks({rec}, spec);
        REQUIRE(masks.size() == 3);  // z origins 0, 4, 8
        CHECK(connected_components(masks[0]).size() == 1);
        CHECK(masks[0].sum() == 8);
        CHECK(masks[2].sum() == 0);
    }
}
