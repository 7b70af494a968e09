#pragma once

#include "cmbaug/mask_sampler.hpp"

namespace cmbaug {

/// Procedural brain-like volume: ellipsoidal tissue support with smooth
/// texture, dark tubular vessels, and dark ellipsoidal lesions matching the
/// returned mask. An engineered test oracle, not an MR simulation.
struct PhantomConfig {
    std::array<long, 3> shape{64, 64, 32};
    std::array<double, 3> spacing{0.98, 0.98, 1.0};
    double background_level = 0.55;        // tissue base intensity
    double tissue_texture_scale = 0.06;    // smooth noise amplitude
    std::pair<long, long> vessel_count{2, 4};
    std::pair<double, double> vessel_radius_vox{0.8, 1.4};
    LesionPrior lesion_prior;
    double lesion_contrast = 0.5;          // hypointensity depth
    std::uint64_t seed = 1;

    void validate() const {
        for (long d : shape)
            if (d < 8) throw std::invalid_argument("PhantomConfig: shape too small");
        for (double s : spacing)
            if (!(s > 0)) throw std::invalid_argument("PhantomConfig: non-positive spacing");
        if (!(lesion_contrast > 0.0 && lesion_contrast <= 1.0))
            throw std::invalid_argument("PhantomConfig: lesion_contrast must be in (0,1]");
        if (vessel_count.first < 0 || vessel_count.first > vessel_count.second)
            throw std::invalid_argument("PhantomConfig: bad vessel_count");
        lesion_prior.validate();
    }
};

struct PhantomDetail {
    SampleRecord record;
    PathologyMask brain_support;
    PathologyMask vessel_mask;
};

namespace phantomdetail {

constexpr double kAirLevel = 0.02;
constexpr double kVesselDepth = 0.35;

/// Smooth value noise in [-1,1]: random lattice values, trilinear blend.
inline std::vector<float> value_noise(std::array<long, 3> shape, long cell, Rng& rng) {
    const long gx = shape[0] / cell + 2, gy = shape[1] / cell + 2, gz = shape[2] / cell + 2;
    std::vector<double> grid(static_cast<std::size_t>(gx) * gy * gz);
    for (auto& g : grid) g = rng.uniform(-1.0, 1.0);
    auto gat = [&](long x, long y, long z) { return grid[(z * gy + y) * gx + x]; };
    std::vector<float> out(static_cast<std::size_t>(shape[0]) * shape[1] * shape[2]);
    std::size_t i = 0;
    for (long z = 0; z < shape[2]; ++z)
        for (long y = 0; y < shape[1]; ++y)
            for (long x = 0; x < shape[0]; ++x, ++i) {
                const double fx = double(x) / cell, fy = double(y) / cell, fz = double(z) / cell;
                const long x0 = long(fx), y0 = long(fy), z0 = long(fz);
                const double tx = fx - x0, ty = fy - y0, tz = fz - z0;
                double v = 0.0;
                for (int dz = 0; dz <= 1; ++dz)
                    for (int dy = 0; dy <= 1; ++dy)
                        for (int dx = 0; dx <= 1; ++dx)
                            v += gat(x0 + dx, y0 + dy, z0 + dz) * (dx ? tx : 1 - tx) *
                                 (dy ? ty : 1 - ty) * (dz ? tz : 1 - tz);
                out[i] = static_cast<float>(v);
            }
    return out;
}

inline PathologyMask brain_ellipsoid(std::array<long, 3> shape, Rng& rng) {
    PathologyMask m(shape);
    const double cx = shape[0] / 2.0 + rng.uniform(-1.0, 1.0);
    const double cy = shape[1] / 2.0 + rng.uniform(-1.0, 1.0);
    const double cz = shape[2] / 2.0 + rng.uniform(-0.5, 0.5);
    const double ax = shape[0] * rng.uniform(0.40, 0.45);
    const double ay = shape[1] * rng.uniform(0.40, 0.45);
    const double az = shape[2] * rng.uniform(0.40, 0.45);
    for (long z = 0; z < shape[2]; ++z)
        for (long y = 0; y < shape[1]; ++y)
            for (long x = 0; x < shape[0]; ++x) {
                const double u = (x - cx) / ax, v = (y - cy) / ay, w = (z - cz) / az;
                if (u * u + v * v + w * w <= 1.0) m.at(x, y, z) = 1;
            }
    return m;
}

/// One straight-ish dark tube inside the support; retried by the caller until
/// its bounding box is elongated enough (max/min axis ratio >= 3).
inline PathologyMask trace_vessel(const PathologyMask& support, double radius_vox, Rng& rng) {
    PathologyMask tube(support.shape);
    PathologyMask inner = erode(support, 2);
    std::vector<VoxelIndex> candidates;
    for (long z = 0; z < inner.shape[2]; ++z)
        for (long y = 0; y < inner.shape[1]; ++y)
            for (long x = 0; x < inner.shape[0]; ++x)
                if (inner.at(x, y, z)) candidates.push_back({x, y, z});
    if (candidates.empty()) return tube;
    const VoxelIndex start =
        candidates[std::size_t(rng.uniform_int(0, long(candidates.size()) - 1))];
    // mostly in-plane direction
    double dx = rng.uniform(-1.0, 1.0), dy = rng.uniform(-1.0, 1.0), dz = rng.uniform(-0.2, 0.2);
    const double n = std::sqrt(dx * dx + dy * dy + dz * dz);
    if (n < 1e-6) return tube;
    dx /= n;
    dy /= n;
    dz /= n;
    const long half_len = std::max<long>(8, long(3.0 * (2.0 * radius_vox + 1.0)));
    const double r2 = radius_vox * radius_vox;
    for (long t = -half_len; t <= half_len; ++t) {
        const double px = start.x + dx * t, py = start.y + dy * t, pz = start.z + dz * t;
        const long rb = long(std::ceil(radius_vox));
        for (long z = long(pz) - rb; z <= long(pz) + rb + 1; ++z)
            for (long y = long(py) - rb; y <= long(py) + rb + 1; ++y)
                for (long x = long(px) - rb; x <= long(px) + rb + 1; ++x) {
                    if (!tube.in_bounds_xyz(x, y, z) || !support.at(x, y, z)) continue;
                    const double ux = x - px, uy = y - py, uz = z - pz;
                    if (ux * ux + uy * uy + uz * uz <= r2) tube.at(x, y, z) = 1;
                }
    }
    return tube;
}

inline double bbox_axis_ratio(const Component& c) {
    const auto bb = c.bounding_box();
    const double sx = double(bb[1] - bb[0] + 1);
    const double sy = double(bb[3] - bb[2] + 1);
    const double sz = double(bb[5] - bb[4] + 1);
    const double mx = std::max({sx, sy, sz});
    const double mn = std::min({sx, sy, sz});
    return mx / mn;
}

/// Shell statistics around one lesion: voxels within Chebyshev distance 2 of
/// the component, excluding every lesion voxel.
inline std::pair<double, double> inside_and_shell_mean(const Volume& v, const PathologyMask& all,
                                                       const Component& comp) {
    double inside = 0.0;
    for (const auto& p : comp.voxels) inside += v.at(p.x, p.y, p.z);
    inside /= double(comp.voxels.size());
    double shell = 0.0;
    long count = 0;
    const auto bb = comp.bounding_box();
    for (long z = std::max(0L, bb[4] - 2); z <= std::min(v.shape[2] - 1, bb[5] + 2); ++z)
        for (long y = std::max(0L, bb[2] - 2); y <= std::min(v.shape[1] - 1, bb[3] + 2); ++y)
            for (long x = std::max(0L, bb[0] - 2); x <= std::min(v.shape[0] - 1, bb[1] + 2); ++x) {
                if (all.at(x, y, z)) continue;
                bool near = false;
                for (const auto& p : comp.voxels)
                    if (std::abs(p.x - x) <= 2 && std::abs(p.y - y) <= 2 && std::abs(p.z - z) <= 2) {
                        near = true;
                        break;
                    }
                if (near) {
                    shell += v.at(x, y, z);
                    ++count;
                }
            }
    return {inside, count ? shell / count : 0.0};
}

}  // namespace phantomdetail

inline PhantomDetail generate_phantom_detailed(const PhantomConfig& cfg) {
    using namespace phantomdetail;
    cfg.validate();
    Rng rng(cfg.seed);
    Rng tex_rng = rng.fork("texture");
    Rng brain_rng = rng.fork("brain");
    Rng vessel_rng = rng.fork("vessels");
    Rng lesion_rng = rng.fork("lesions");

    PhantomDetail out;
    PathologyMask brain = brain_ellipsoid(cfg.shape, brain_rng);
    Volume v(cfg.shape, cfg.spacing, float(kAirLevel));
    auto noise = value_noise(cfg.shape, 6, tex_rng);
    for (long i = 0; i < v.numel(); ++i)
        if (brain.data[i])
            v.data[i] = float(cfg.background_level + cfg.tissue_texture_scale * noise[i]);

    // vessels: dark elongated tubes (the classic CMB confounder); tubes are
    // kept disjoint so each stays one elongated component
    PathologyMask vessels(cfg.shape);
    PathologyMask vessel_blocked(cfg.shape);
    const long n_vessels = vessel_rng.uniform_int(cfg.vessel_count.first, cfg.vessel_count.second);
    for (long k = 0; k < n_vessels; ++k) {
        for (int attempt = 0; attempt < 32; ++attempt) {
            const double r = vessel_rng.uniform(cfg.vessel_radius_vox.first,
                                                cfg.vessel_radius_vox.second);
            PathologyMask tube = trace_vessel(brain, r, vessel_rng);
            if (tube.empty_mask()) continue;
            auto comps = connected_components(tube);
            if (comps.size() != 1 || bbox_axis_ratio(comps[0]) < 3.0) continue;
            bool overlaps = false;
            for (long i = 0; i < tube.numel() && !overlaps; ++i)
                if (tube.data[i] && vessel_blocked.data[i]) overlaps = true;
            if (overlaps) continue;
            for (long i = 0; i < v.numel(); ++i)
                if (tube.data[i]) {
                    vessels.data[i] = 1;
                    v.data[i] = float(std::max(kAirLevel, double(v.data[i]) - kVesselDepth));
                }
            vessel_blocked = dilate(vessels, 1);
            break;
        }
    }

    // lesions: sample a mask away from vessels, then darken
    PathologyMask lesion_support = brain;
    PathologyMask vessel_zone = dilate(vessels, 3);
    for (long i = 0; i < lesion_support.numel(); ++i)
        if (vessel_zone.data[i]) lesion_support.data[i] = 0;
    PathologyMask mask(cfg.shape);
    if (cfg.lesion_prior.count_range.second > 0) {
        mask = sample_pathology_mask(lesion_support, cfg.spacing, cfg.lesion_prior, lesion_rng);
        for (long i = 0; i < v.numel(); ++i)
            if (mask.data[i]) v.data[i] = float(std::max(0.0, double(v.data[i]) - cfg.lesion_contrast));
        // hypointensity contract: inside mean + contrast/2 < shell mean
        for (const auto& comp : connected_components(mask)) {
            for (int iter = 0; iter < 16; ++iter) {
                auto [inside, shell] = inside_and_shell_mean(v, mask, comp);
                const double excess = inside + cfg.lesion_contrast / 2.0 - shell + 1e-3;
                if (excess < 0) break;
                bool lowered = false;
                for (const auto& p : comp.voxels) {
                    const float before = v.at(p.x, p.y, p.z);
                    const float after = float(std::max(0.0, double(before) - excess - 1e-3));
                    if (after < before) lowered = true;
                    v.at(p.x, p.y, p.z) = after;
                }
                if (!lowered)
                    throw std::runtime_error("phantom: cannot satisfy lesion hypointensity "
                                             "(surrounding shell too dark)");
            }
        }
    }

    out.record.volume = std::move(v);
    out.record.mask = std::move(mask);
    out.record.domain = out.record.mask.empty_mask() ? Domain::healthy : Domain::pathological;
    out.record.subject_id = "phantom_" + std::to_string(cfg.seed);
    out.brain_support = std::move(brain);
    out.vessel_mask = std::move(vessels);
    return out;
}

inline SampleRecord generate_phantom(const PhantomConfig& cfg) {
    return generate_phantom_detailed(cfg).record;
}

/// Deterministic fan-out: n_healthy healthy then n_pathological pathological
/// records, each from an independent per-record substream of `seed`.
inline std::vector<SampleRecord> generate_dataset(long n_healthy, long n_pathological,
                                                  const PhantomConfig& cfg, std::uint64_t seed) {
    std::vector<SampleRecord> out;
    char name[32];
    for (long i = 0; i < n_healthy; ++i) {
        PhantomConfig c = cfg;
        c.seed = splitmix64(seed ^ splitmix64(0x1000 + std::uint64_t(i)));
        c.lesion_prior.count_range = {0, 0};
        SampleRecord r = generate_phantom(c);
        std::snprintf(name, sizeof(name), "h%03ld", i);
        r.subject_id = name;
        out.push_back(std::move(r));
    }
    for (long i = 0; i < n_pathological; ++i) {
        PhantomConfig c = cfg;
        c.seed = splitmix64(seed ^ splitmix64(0x2000 + std::uint64_t(i)));
        SampleRecord r = generate_phantom(c);
        std::snprintf(name, sizeof(name), "p%03ld", i);
        r.subject_id = name;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace cmbaug
