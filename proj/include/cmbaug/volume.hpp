#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmbaug {

/// 3D scalar image. Shape is (X, Y, Z), data is x-fastest, spacing in mm.
struct Volume {
    std::array<long, 3> shape{0, 0, 0};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::vector<float> data;

    Volume() = default;

    Volume(std::array<long, 3> shape_, std::array<double, 3> spacing_, float fill = 0.0f)
        : shape(shape_), spacing(spacing_),
          data(static_cast<std::size_t>(shape_[0]) * shape_[1] * shape_[2], fill) {}

    long numel() const { return shape[0] * shape[1] * shape[2]; }

    std::size_t index(long x, long y, long z) const {
        return static_cast<std::size_t>((z * shape[1] + y) * shape[0] + x);
    }

    float& at(long x, long y, long z) { return data[index(x, y, z)]; }
    float at(long x, long y, long z) const { return data[index(x, y, z)]; }

    bool in_bounds(long x, long y, long z) const {
        return x >= 0 && x < shape[0] && y >= 0 && y < shape[1] && z >= 0 && z < shape[2];
    }

    void validate() const {
        if (static_cast<long>(data.size()) != numel())
            throw std::logic_error("Volume: data size does not match shape");
        for (double s : spacing)
            if (!(s > 0.0)) throw std::logic_error("Volume: non-positive spacing");
        for (float v : data)
            if (!std::isfinite(v)) throw std::logic_error("Volume: non-finite value");
    }
};

/// Binary mask aligned with a Volume; values are {0,1}, healthy masks all 0.
struct PathologyMask {
    std::array<long, 3> shape{0, 0, 0};
    std::vector<std::uint8_t> data;

    PathologyMask() = default;

    explicit PathologyMask(std::array<long, 3> shape_, std::uint8_t fill = 0)
        : shape(shape_),
          data(static_cast<std::size_t>(shape_[0]) * shape_[1] * shape_[2], fill) {}

    long numel() const { return shape[0] * shape[1] * shape[2]; }

    std::size_t index(long x, long y, long z) const {
        return static_cast<std::size_t>((z * shape[1] + y) * shape[0] + x);
    }

    std::uint8_t& at(long x, long y, long z) { return data[index(x, y, z)]; }
    std::uint8_t at(long x, long y, long z) const { return data[index(x, y, z)]; }

    bool in_bounds_xyz(long x, long y, long z) const {
        return x >= 0 && x < shape[0] && y >= 0 && y < shape[1] && z >= 0 && z < shape[2];
    }

    long sum() const {
        long s = 0;
        for (auto v : data) s += v;
        return s;
    }

    bool empty_mask() const { return sum() == 0; }

    void validate() const {
        if (static_cast<long>(data.size()) != numel())
            throw std::logic_error("PathologyMask: data size does not match shape");
        for (auto v : data)
            if (v > 1) throw std::logic_error("PathologyMask: value outside {0,1}");
    }
};

enum class Domain { healthy, pathological };

inline const char* domain_name(Domain d) {
    return d == Domain::healthy ? "healthy" : "pathological";
}

/// One training/evaluation unit.
struct SampleRecord {
    Volume volume;
    PathologyMask mask;
    Domain domain = Domain::healthy;
    std::string subject_id;
};

// ---------------------------------------------------------------------------
// Intensity normalization
// ---------------------------------------------------------------------------

/// Percentile with linear interpolation between closest ranks.
inline double percentile_of_sorted(const std::vector<float>& sorted, double pct) {
    if (sorted.empty()) throw std::invalid_argument("percentile: empty data");
    if (sorted.size() == 1) return sorted[0];
    const double rank = pct / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return static_cast<double>(sorted[lo]) * (1.0 - frac) + static_cast<double>(sorted[hi]) * frac;
}

/// Clip intensities to the [low_pct, high_pct] percentile window and rescale
/// to [0,1]. A constant volume maps to all zeros.
inline Volume clip_and_rescale(const Volume& v, double low_pct = 0.0, double high_pct = 99.5) {
    if (!(low_pct >= 0.0 && low_pct < high_pct && high_pct <= 100.0))
        throw std::invalid_argument("clip_and_rescale: need 0 <= low_pct < high_pct <= 100");
    std::vector<float> sorted = v.data;
    std::sort(sorted.begin(), sorted.end());
    const double lo = percentile_of_sorted(sorted, low_pct);
    const double hi = percentile_of_sorted(sorted, high_pct);
    Volume out = v;
    if (hi == lo) {
        std::fill(out.data.begin(), out.data.end(), 0.0f);
        return out;
    }
    const double inv = 1.0 / (hi - lo);
    for (auto& x : out.data) {
        const double c = std::min(hi, std::max(lo, static_cast<double>(x)));
        x = static_cast<float>((c - lo) * inv);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Patch extraction / stitching
// ---------------------------------------------------------------------------

/// Patches span the whole axial plane; sliding happens along z only.
struct PatchSpec {
    std::array<long, 3> patch_shape{160, 146, 32};
    double z_overlap_fraction = 0.5;

    long stride_z() const {
        const long pz = patch_shape[2];
        const long s = static_cast<long>(std::llround(pz * (1.0 - z_overlap_fraction)));
        return s;
    }

    void validate() const {
        for (long d : patch_shape)
            if (d < 1) throw std::invalid_argument("PatchSpec: patch dims must be >= 1");
        if (!(z_overlap_fraction >= 0.0 && z_overlap_fraction < 1.0))
            throw std::invalid_argument("PatchSpec: z_overlap_fraction must be in [0,1)");
        if (stride_z() < 1) throw std::invalid_argument("PatchSpec: stride_z must be >= 1");
    }
};

/// Regular origins 0, s, 2s, ... plus a tail patch anchored at Z - pz when the
/// last regular patch stops short of Z; guarantees full z coverage.
inline std::vector<long> patch_z_origins(long z_extent, long pz, long stride) {
    if (z_extent < pz)
        throw std::invalid_argument("extract_patches: z extent smaller than patch depth");
    std::vector<long> origins;
    const long n_regular = (z_extent - pz) / stride + 1;
    for (long i = 0; i < n_regular; ++i) origins.push_back(i * stride);
    if (origins.back() + pz < z_extent) origins.push_back(z_extent - pz);
    return origins;
}

struct PatchTriple {
    Volume image;
    PathologyMask mask;
    std::array<long, 3> origin{0, 0, 0};
};

inline std::vector<PatchTriple> extract_patches(const Volume& v, const PathologyMask& m,
                                                const PatchSpec& spec) {
    spec.validate();
    const auto [px, py, pz] = spec.patch_shape;
    if (v.shape[0] != px || v.shape[1] != py)
        throw std::invalid_argument("extract_patches: patch x/y must equal the volume's axial "
                                    "plane");
    if (m.shape != v.shape)
        throw std::invalid_argument("extract_patches: mask shape differs from volume");
    std::vector<PatchTriple> out;
    for (long z0 : patch_z_origins(v.shape[2], pz, spec.stride_z())) {
        PatchTriple t;
        t.origin = {0, 0, z0};
        t.image = Volume({px, py, pz}, v.spacing);
        t.mask = PathologyMask({px, py, pz});
        const std::size_t slab = static_cast<std::size_t>(px) * py;
        for (long z = 0; z < pz; ++z) {
            std::copy_n(v.data.begin() + (z0 + z) * slab, slab, t.image.data.begin() + z * slab);
            std::copy_n(m.data.begin() + (z0 + z) * slab, slab, t.mask.data.begin() + z * slab);
        }
        out.push_back(std::move(t));
    }
    return out;
}

/// Inverse of extract_patches: overlapping z-slabs are averaged voxelwise.
inline Volume stitch_patches(const std::vector<Volume>& patches,
                             const std::vector<std::array<long, 3>>& origins,
                             std::array<long, 3> full_shape) {
    if (patches.empty()) throw std::invalid_argument("stitch_patches: no patches");
    if (patches.size() != origins.size())
        throw std::invalid_argument("stitch_patches: patch/origin count mismatch");
    Volume out(full_shape, patches[0].spacing);
    std::vector<float> acc(out.data.size(), 0.0f);
    std::vector<std::uint32_t> cnt(out.data.size(), 0);
    for (std::size_t i = 0; i < patches.size(); ++i) {
        const Volume& p = patches[i];
        const auto& o = origins[i];
        for (long z = 0; z < p.shape[2]; ++z)
            for (long y = 0; y < p.shape[1]; ++y)
                for (long x = 0; x < p.shape[0]; ++x) {
                    const std::size_t j = out.index(o[0] + x, o[1] + y, o[2] + z);
                    acc[j] += p.at(x, y, z);
                    ++cnt[j];
                }
    }
    for (std::size_t j = 0; j < acc.size(); ++j) {
        if (cnt[j] == 0)
            throw std::invalid_argument("stitch_patches: patches do not cover the volume");
        out.data[j] = acc[j] / static_cast<float>(cnt[j]);
    }
    return out;
}

}  // namespace cmbaug
