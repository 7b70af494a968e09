#pragma once

#include "cmbaug/components.hpp"
#include "cmbaug/rng.hpp"
#include "cmbaug/volume.hpp"

namespace cmbaug {

/// Geometry priors for sampled pathology masks. Radii are semi-axes in mm;
/// the 10 mm diameter cap for cerebral microbleeds bounds every sampled
/// component's physical extent.
struct LesionPrior {
    std::pair<long, long> count_range{1, 3};
    std::pair<double, double> radius_range_mm{1.2, 4.0};
    double elongation_prob = 0.3;
    std::pair<double, double> elongation_ratio_range{1.0, 1.8};
    long foreground_margin_vox = 2;

    void validate() const {
        if (count_range.first < 0 || count_range.first > count_range.second)
            throw std::invalid_argument("LesionPrior: bad count_range");
        if (!(radius_range_mm.first > 0.0) ||
            radius_range_mm.first > radius_range_mm.second)
            throw std::invalid_argument("LesionPrior: bad radius_range_mm");
        if (radius_range_mm.second > 5.0)
            throw std::invalid_argument("LesionPrior: radius above 5 mm violates the 10 mm "
                                        "diameter cap");
        if (elongation_prob < 0.0 || elongation_prob > 1.0)
            throw std::invalid_argument("LesionPrior: elongation_prob outside [0,1]");
        if (elongation_ratio_range.first < 1.0 ||
            elongation_ratio_range.first > elongation_ratio_range.second)
            throw std::invalid_argument("LesionPrior: bad elongation_ratio_range");
        if (foreground_margin_vox < 0)
            throw std::invalid_argument("LesionPrior: negative margin");
    }
};

class MaskSamplerError : public std::runtime_error {
public:
    explicit MaskSamplerError(const std::string& msg) : std::runtime_error(msg) {}
};

inline PathologyMask empty_mask(std::array<long, 3> shape) { return PathologyMask(shape); }

namespace maskdetail {

struct Ellipsoid {
    std::array<double, 3> center_vox;
    std::array<double, 3> axis;      // unit long-axis direction (physical space)
    double semi_long_mm;
    double semi_short_mm;
};

/// Voxel membership: center of the voxel lies inside the continuous ellipsoid.
inline bool inside(const Ellipsoid& e, long x, long y, long z,
                   const std::array<double, 3>& spacing) {
    const double dx = (x - e.center_vox[0]) * spacing[0];
    const double dy = (y - e.center_vox[1]) * spacing[1];
    const double dz = (z - e.center_vox[2]) * spacing[2];
    const double t = dx * e.axis[0] + dy * e.axis[1] + dz * e.axis[2];
    const double r2 = dx * dx + dy * dy + dz * dz - t * t;
    const double a2 = e.semi_long_mm * e.semi_long_mm;
    const double b2 = e.semi_short_mm * e.semi_short_mm;
    return (t * t) / a2 + r2 / b2 <= 1.0;
}

inline std::vector<VoxelIndex> rasterize(const Ellipsoid& e, std::array<long, 3> shape,
                                          const std::array<double, 3>& spacing) {
    std::vector<VoxelIndex> out;
    std::array<long, 3> lo, hi;
    for (int a = 0; a < 3; ++a) {
        const double r_vox = e.semi_long_mm / spacing[a];
        lo[a] = std::max(0L, static_cast<long>(std::floor(e.center_vox[a] - r_vox)) - 1);
        hi[a] = std::min(shape[a] - 1, static_cast<long>(std::ceil(e.center_vox[a] + r_vox)) + 1);
    }
    for (long z = lo[2]; z <= hi[2]; ++z)
        for (long y = lo[1]; y <= hi[1]; ++y)
            for (long x = lo[0]; x <= hi[0]; ++x)
                if (inside(e, x, y, z, spacing)) out.push_back({x, y, z});
    return out;
}

inline std::array<double, 3> random_unit_vector(Rng& rng) {
    while (true) {
        const double x = rng.uniform(-1.0, 1.0);
        const double y = rng.uniform(-1.0, 1.0);
        const double z = rng.uniform(-1.0, 1.0);
        const double n2 = x * x + y * y + z * z;
        if (n2 > 1e-4 && n2 <= 1.0) {
            const double n = std::sqrt(n2);
            return {x / n, y / n, z / n};
        }
    }
}

}  // namespace maskdetail

/// Samples a semi-random pathology mask: a union of randomly placed, possibly
/// elongated ellipsoids whose voxels all lie in the margin-eroded foreground.
/// Placements that would touch an already placed lesion are rejected so each
/// lesion stays its own connected component.
inline PathologyMask sample_pathology_mask(const PathologyMask& foreground,
                                           std::array<double, 3> spacing,
                                           const LesionPrior& prior, Rng& rng) {
    prior.validate();
    PathologyMask support = erode(foreground, prior.foreground_margin_vox);
    std::vector<VoxelIndex> centers;
    for (long z = 0; z < support.shape[2]; ++z)
        for (long y = 0; y < support.shape[1]; ++y)
            for (long x = 0; x < support.shape[0]; ++x)
                if (support.at(x, y, z)) centers.push_back({x, y, z});
    if (centers.empty()) throw MaskSamplerError("no placement region: foreground empty after erosion");

    PathologyMask mask(foreground.shape);
    PathologyMask blocked(foreground.shape);  // mask dilated by 1, to keep components apart
    const long target = rng.uniform_int(prior.count_range.first, prior.count_range.second);
    long placed = 0;
    for (long lesion = 0; lesion < target; ++lesion) {
        bool done = false;
        for (int attempt = 0; attempt < 64 && !done; ++attempt) {
            const VoxelIndex c = centers[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<long>(centers.size()) - 1))];
            maskdetail::Ellipsoid e;
            e.center_vox = {static_cast<double>(c.x), static_cast<double>(c.y),
                            static_cast<double>(c.z)};
            e.semi_short_mm = rng.uniform(prior.radius_range_mm.first, prior.radius_range_mm.second);
            double ratio = 1.0;
            if (rng.bernoulli(prior.elongation_prob))
                ratio = rng.uniform(prior.elongation_ratio_range.first,
                                    prior.elongation_ratio_range.second);
            e.semi_long_mm = std::min(e.semi_short_mm * ratio, 5.0);
            e.axis = maskdetail::random_unit_vector(rng);
            auto voxels = maskdetail::rasterize(e, mask.shape, spacing);
            if (voxels.empty()) continue;
            bool valid = true;
            for (const auto& v : voxels) {
                if (!support.at(v.x, v.y, v.z) || blocked.at(v.x, v.y, v.z)) {
                    valid = false;
                    break;
                }
            }
            if (!valid) continue;
            for (const auto& v : voxels) mask.at(v.x, v.y, v.z) = 1;
            for (const auto& v : voxels)
                for (long dz = -1; dz <= 1; ++dz)
                    for (long dy = -1; dy <= 1; ++dy)
                        for (long dx = -1; dx <= 1; ++dx) {
                            const long nx = v.x + dx, ny = v.y + dy, nz = v.z + dz;
                            if (blocked.in_bounds_xyz(nx, ny, nz)) blocked.at(nx, ny, nz) = 1;
                        }
            ++placed;
            done = true;
        }
    }
    if (placed < prior.count_range.first)
        throw MaskSamplerError("no placement region: could not fit " +
                               std::to_string(prior.count_range.first) + " lesion(s)");
    return mask;
}

/// Patch-cut the annotated masks of the pathological records (the real masks
/// that drive the pathological-to-healthy cycle).
inline std::vector<PathologyMask> harvest_real_masks(const std::vector<SampleRecord>& records,
                                                     const PatchSpec& spec) {
    std::vector<PathologyMask> out;
    for (const auto& r : records) {
        if (r.domain != Domain::pathological) continue;
        for (auto& patch : extract_patches(r.volume, r.mask, spec))
            out.push_back(std::move(patch.mask));
    }
    return out;
}

}  // namespace cmbaug
