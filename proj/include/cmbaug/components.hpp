#pragma once

#include <deque>

#include "cmbaug/volume.hpp"

namespace cmbaug {

struct VoxelIndex {
    long x, y, z;
};

struct Component {
    std::vector<VoxelIndex> voxels;

    std::array<double, 3> centroid() const {
        double cx = 0, cy = 0, cz = 0;
        for (const auto& v : voxels) {
            cx += v.x;
            cy += v.y;
            cz += v.z;
        }
        const double n = static_cast<double>(voxels.size());
        return {cx / n, cy / n, cz / n};
    }

    /// Maximum pairwise distance between voxel centers, in physical units.
    double max_extent_mm(std::array<double, 3> spacing) const {
        double best = 0.0;
        for (std::size_t i = 0; i < voxels.size(); ++i)
            for (std::size_t j = i + 1; j < voxels.size(); ++j) {
                const double dx = (voxels[i].x - voxels[j].x) * spacing[0];
                const double dy = (voxels[i].y - voxels[j].y) * spacing[1];
                const double dz = (voxels[i].z - voxels[j].z) * spacing[2];
                best = std::max(best, dx * dx + dy * dy + dz * dz);
            }
        return std::sqrt(best);
    }

    std::array<long, 6> bounding_box() const {  // x0,x1,y0,y1,z0,z1 inclusive
        std::array<long, 6> bb{voxels[0].x, voxels[0].x, voxels[0].y,
                               voxels[0].y, voxels[0].z, voxels[0].z};
        for (const auto& v : voxels) {
            bb[0] = std::min(bb[0], v.x);
            bb[1] = std::max(bb[1], v.x);
            bb[2] = std::min(bb[2], v.y);
            bb[3] = std::max(bb[3], v.y);
            bb[4] = std::min(bb[4], v.z);
            bb[5] = std::max(bb[5], v.z);
        }
        return bb;
    }
};

/// 26-connected components of the nonzero voxels.
inline std::vector<Component> connected_components(const PathologyMask& m) {
    std::vector<Component> out;
    std::vector<std::uint8_t> seen(m.data.size(), 0);
    for (long z = 0; z < m.shape[2]; ++z)
        for (long y = 0; y < m.shape[1]; ++y)
            for (long x = 0; x < m.shape[0]; ++x) {
                const std::size_t i0 = m.index(x, y, z);
                if (!m.data[i0] || seen[i0]) continue;
                Component comp;
                std::deque<VoxelIndex> queue{{x, y, z}};
                seen[i0] = 1;
                while (!queue.empty()) {
                    VoxelIndex v = queue.front();
                    queue.pop_front();
                    comp.voxels.push_back(v);
                    for (long dz = -1; dz <= 1; ++dz)
                        for (long dy = -1; dy <= 1; ++dy)
                            for (long dx = -1; dx <= 1; ++dx) {
                                if (!dx && !dy && !dz) continue;
                                const long nx = v.x + dx, ny = v.y + dy, nz = v.z + dz;
                                if (!m.in_bounds_xyz(nx, ny, nz)) continue;
                                const std::size_t ni = m.index(nx, ny, nz);
                                if (m.data[ni] && !seen[ni]) {
                                    seen[ni] = 1;
                                    queue.push_back({nx, ny, nz});
                                }
                            }
                }
                out.push_back(std::move(comp));
            }
    return out;
}

/// Erosion with a Chebyshev ball (cube) of the given radius; voxels closer
/// than the radius to the volume border are removed as well.
inline PathologyMask erode(const PathologyMask& m, long radius) {
    if (radius <= 0) return m;
    PathologyMask out(m.shape);
    for (long z = 0; z < m.shape[2]; ++z)
        for (long y = 0; y < m.shape[1]; ++y)
            for (long x = 0; x < m.shape[0]; ++x) {
                if (!m.at(x, y, z)) continue;
                bool keep = x - radius >= 0 && x + radius < m.shape[0] && y - radius >= 0 &&
                            y + radius < m.shape[1] && z - radius >= 0 && z + radius < m.shape[2];
                for (long dz = -radius; keep && dz <= radius; ++dz)
                    for (long dy = -radius; keep && dy <= radius; ++dy)
                        for (long dx = -radius; keep && dx <= radius; ++dx)
                            if (!m.at(x + dx, y + dy, z + dz)) keep = false;
                if (keep) out.at(x, y, z) = 1;
            }
    return out;
}

/// Dilation with a Chebyshev ball (cube) of the given radius.
inline PathologyMask dilate(const PathologyMask& m, long radius) {
    if (radius <= 0) return m;
    PathologyMask out(m.shape);
    for (long z = 0; z < m.shape[2]; ++z)
        for (long y = 0; y < m.shape[1]; ++y)
            for (long x = 0; x < m.shape[0]; ++x) {
                if (!m.at(x, y, z)) continue;
                for (long dz = -radius; dz <= radius; ++dz)
                    for (long dy = -radius; dy <= radius; ++dy)
                        for (long dx = -radius; dx <= radius; ++dx) {
                            const long nx = x + dx, ny = y + dy, nz = z + dz;
                            if (m.in_bounds_xyz(nx, ny, nz)) out.at(nx, ny, nz) = 1;
                        }
            }
    return out;
}

}  // namespace cmbaug
