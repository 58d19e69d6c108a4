#pragma once

#include <photofuse/camera.hpp>
#include <photofuse/image.hpp>
#include <photofuse/normals.hpp>
#include <photofuse/raster.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <type_traits>

namespace photofuse {

/// Per-pixel weight in [0,1]; zero outside the rendered footprint.
struct QualityMask : Grid<double> {
    QualityMask() = default;
    QualityMask(int w, int h, double fill = 0.0) : Grid<double>(w, h, fill) {}
};

struct MaskParams {
    /// Distance in pixels at which the border weight saturates to 1.
    double border_distance = 20.0;
    /// Neighbour depth jump, as a fraction of the map's depth range, that counts as a border.
    double discontinuity_fraction = 0.01;
};

/// |cos| of the angle between the surface normal and the direction to the camera center,
/// i.e. the normal is flipped toward the camera before the clamp. Invalid normals give 0.
inline QualityMask angle_mask(const SurfaceBuffer& s, const Camera& cam) {
    QualityMask m(s.depth.width(), s.depth.height());
    const Point3 eye = cam.center();
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (!s.depth.covered(x, y)) {
                continue;
            }
            const Vec3& n = s.normal(x, y);
            if (n.squaredNorm() < 0.5) {
                continue;
            }
            const Vec3 view = (eye - s.position(x, y)).normalized();
            m(x, y) = std::clamp(std::abs(n.dot(view)), 0.0, 1.0);
        }
    }
    return m;
}

inline QualityMask angle_mask(const PointCloud& cloud, const Camera& cam, const RenderOptions& opt = {}) {
    if (!cloud.has_normals()) {
        return angle_mask(rasterize(estimate_normals(cloud, 10), cam, opt), cam);
    }
    return angle_mask(rasterize(cloud, cam, opt), cam);
}

/// Meshes without vertex normals use face normals; face-less meshes are treated as clouds.
inline QualityMask angle_mask(const TriangleMesh& mesh, const Camera& cam, const RenderOptions& opt = {}) {
    if (mesh.faces.empty()) {
        return angle_mask(mesh.vertices, cam, opt);
    }
    return angle_mask(rasterize(mesh, cam), cam);
}

/// Linear ramp: nearest covered pixel 1, farthest 0. Maps whose depth range is below
/// rounding level (1e-9 relative) count as constant and are all 1.
inline QualityMask depth_mask(const DepthMap& dm) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double d : dm.data()) {
        if (std::isfinite(d)) {
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
    }
    if (!std::isfinite(lo)) {
        throw InputError("depth map has no covered pixel");
    }
    QualityMask m(dm.width(), dm.height());
    for (std::size_t i = 0; i < dm.size(); ++i) {
        const double d = dm.data()[i];
        if (std::isfinite(d)) {
            m.data()[i] = hi - lo > 1e-9 * hi ? (hi - d) / (hi - lo) : 1.0;
        }
    }
    return m;
}

/// Silhouette pixels (covered, with an empty or off-image 4-neighbour) plus depth
/// discontinuities. A step to a neighbour is a discontinuity when it exceeds the threshold
/// both as a raw jump and against the depth extrapolated linearly from the opposite
/// neighbour, so steep but smooth surfaces are not mistaken for occlusion edges.
inline Grid<unsigned char> border_pixels(const DepthMap& dm, const MaskParams& p = {}) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double d : dm.data()) {
        if (std::isfinite(d)) {
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
    }
    Grid<unsigned char> border(dm.width(), dm.height(), 0);
    if (!std::isfinite(lo)) {
        return border;
    }
    const double jump = std::max(p.discontinuity_fraction * (hi - lo), 1e-9 * hi);
    constexpr int dx[4] = {1, -1, 0, 0};
    constexpr int dy[4] = {0, 0, 1, -1};
    for (int y = 0; y < dm.height(); ++y) {
        for (int x = 0; x < dm.width(); ++x) {
            const double d = dm(x, y);
            if (!std::isfinite(d)) {
                continue;
            }
            for (int k = 0; k < 4; ++k) {
                const int nx = x + dx[k], ny = y + dy[k];
                if (!dm.contains(nx, ny) || !std::isfinite(dm(nx, ny))) {
                    border(x, y) = 1;
                    break;
                }
                const double step = dm(nx, ny) - d;
                if (std::abs(step) <= jump) {
                    continue;
                }
                const int bx = x - dx[k], by = y - dy[k];
                const bool has_back = dm.contains(bx, by) && std::isfinite(dm(bx, by));
                if (!has_back || std::abs(step - (d - dm(bx, by))) > jump) {
                    border(x, y) = 1;
                    break;
                }
            }
        }
    }
    return border;
}

/// Exact L1 (city-block) distance to the nearest marked pixel, by the two-pass chamfer sweep.
/// Grids with no marked pixel yield +inf everywhere.
inline Grid<double> city_block_distance(const Grid<unsigned char>& seeds) {
    const double inf = std::numeric_limits<double>::infinity();
    Grid<double> d(seeds.width(), seeds.height(), inf);
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (seeds.data()[i]) {
            d.data()[i] = 0.0;
        }
    }
    for (int y = 0; y < d.height(); ++y) {
        for (int x = 0; x < d.width(); ++x) {
            if (x > 0) d(x, y) = std::min(d(x, y), d(x - 1, y) + 1.0);
            if (y > 0) d(x, y) = std::min(d(x, y), d(x, y - 1) + 1.0);
        }
    }
    for (int y = d.height() - 1; y >= 0; --y) {
        for (int x = d.width() - 1; x >= 0; --x) {
            if (x + 1 < d.width()) d(x, y) = std::min(d(x, y), d(x + 1, y) + 1.0);
            if (y + 1 < d.height()) d(x, y) = std::min(d(x, y), d(x, y + 1) + 1.0);
        }
    }
    return d;
}

/// min(1, distance to nearest border / border_distance) over the footprint.
inline QualityMask border_mask(const DepthMap& dm, const Camera& /*cam*/, const MaskParams& p = {}) {
    const auto dist = city_block_distance(border_pixels(dm, p));
    QualityMask m(dm.width(), dm.height());
    for (std::size_t i = 0; i < dm.size(); ++i) {
        if (std::isfinite(dm.data()[i])) {
            m.data()[i] = std::min(1.0, dist.data()[i] / p.border_distance);
        }
    }
    return m;
}

/// Pixelwise product of the three quality masks.
inline QualityMask combined_mask(const QualityMask& angle, const QualityMask& depth, const QualityMask& border) {
    if (!angle.same_shape(depth) || !angle.same_shape(border)) {
        throw InputError("mask dimension mismatch");
    }
    QualityMask m(angle.width(), angle.height());
    for (std::size_t i = 0; i < m.size(); ++i) {
        m.data()[i] = angle.data()[i] * depth.data()[i] * border.data()[i];
    }
    return m;
}

/// All masks of one view, rendered once.
struct ViewMasks {
    DepthMap depth;
    QualityMask angle;
    QualityMask depth_weight;
    QualityMask border;
    QualityMask combined;
};

template <typename Geometry>
ViewMasks compute_view_masks(const Geometry& g, const Camera& cam, const MaskParams& p = {},
                             const RenderOptions& opt = {}) {
    ViewMasks v;
    SurfaceBuffer s = [&] {
        if constexpr (std::is_same_v<Geometry, TriangleMesh>) {
            if (!g.vertices.has_normals() && g.faces.empty()) {
                return rasterize(estimate_normals(g.vertices, 10), cam, opt);
            }
            return rasterize_geometry(g, cam, opt);
        } else {
            return rasterize(g.has_normals() ? g : estimate_normals(g, 10), cam, opt);
        }
    }();
    v.angle = angle_mask(s, cam);
    v.depth = std::move(s.depth);
    bool any = false;
    for (double d : v.depth.data()) {
        any = any || std::isfinite(d);
    }
    if (any) {
        v.depth_weight = depth_mask(v.depth);
    } else {
        v.depth_weight = QualityMask(cam.width, cam.height);
    }
    v.border = border_mask(v.depth, cam, p);
    v.combined = combined_mask(v.angle, v.depth_weight, v.border);
    return v;
}

} // namespace photofuse
