#pragma once

#include <photofuse/camera.hpp>
#include <photofuse/geometry.hpp>
#include <photofuse/image.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace photofuse {

inline constexpr double kEmptyDepth = std::numeric_limits<double>::infinity();

/// Camera-space z per pixel, +inf where no surface was drawn.
struct DepthMap : Grid<double> {
    DepthMap() = default;
    DepthMap(int w, int h) : Grid<double>(w, h, kEmptyDepth) {}

    bool covered(int x, int y) const { return std::isfinite((*this)(x, y)); }
};

/// Everything the rasterizer knows about the nearest surface at each pixel.
struct SurfaceBuffer {
    DepthMap depth;
    Grid<Point3> position;  // world-space surface point
    Grid<Vec3> normal;      // world-space unit normal, zero if unknown or invalid
};

struct RenderOptions {
    /// Half side of the square splat drawn for each point of a bare cloud.
    int splat_radius = 2;
};

namespace detail {

inline SurfaceBuffer empty_surface(const Camera& cam) {
    return {DepthMap(cam.width, cam.height), Grid<Point3>(cam.width, cam.height, Point3::Zero()),
            Grid<Vec3>(cam.width, cam.height, Vec3::Zero())};
}

inline double edge(double ax, double ay, double bx, double by, double px, double py) {
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

} // namespace detail

/// Z-buffered rasterization of a triangle mesh, perspective-correct in depth.
///
/// Triangles with any vertex behind the camera are skipped. Pixel centers on a shared edge
/// are covered by both triangles; the nearer one wins, the earlier face on exact ties.
inline SurfaceBuffer rasterize(const TriangleMesh& mesh, const Camera& cam) {
    auto out = detail::empty_surface(cam);
    const auto& pts = mesh.vertices.points;
    std::vector<std::optional<Projection>> proj(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        proj[i] = project_point(cam, pts[i]);
    }
    const bool smooth = mesh.vertices.has_normals();
    for (const auto& f : mesh.faces) {
        const auto& pa = proj[f[0]];
        const auto& pb = proj[f[1]];
        const auto& pc = proj[f[2]];
        if (!pa || !pb || !pc) {
            continue;
        }
        const double area = detail::edge(pa->u, pa->v, pb->u, pb->v, pc->u, pc->v);
        if (area == 0.0 || !std::isfinite(area)) {
            continue;
        }
        const int x0 = std::max(0, static_cast<int>(std::ceil(std::min({pa->u, pb->u, pc->u}))));
        const int x1 = std::min(cam.width - 1, static_cast<int>(std::floor(std::max({pa->u, pb->u, pc->u}))));
        const int y0 = std::max(0, static_cast<int>(std::ceil(std::min({pa->v, pb->v, pc->v}))));
        const int y1 = std::min(cam.height - 1, static_cast<int>(std::floor(std::max({pa->v, pb->v, pc->v}))));
        const Point3& A = pts[f[0]];
        const Point3& B = pts[f[1]];
        const Point3& C = pts[f[2]];
        const Vec3 face_n = (B - A).cross(C - A).normalized();
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                double la = detail::edge(pb->u, pb->v, pc->u, pc->v, x, y) / area;
                double lb = detail::edge(pc->u, pc->v, pa->u, pa->v, x, y) / area;
                double lc = detail::edge(pa->u, pa->v, pb->u, pb->v, x, y) / area;
                if (la < 0.0 || lb < 0.0 || lc < 0.0) {
                    continue;
                }
                // Screen-space barycentrics weighted by 1/z give perspective-correct ones.
                const double wa = la / pa->depth;
                const double wb = lb / pb->depth;
                const double wc = lc / pc->depth;
                const double inv_z = wa + wb + wc;
                const double z = 1.0 / inv_z;
                if (!(z < out.depth(x, y))) {
                    continue;
                }
                const double ba = wa * z, bb = wb * z, bc = wc * z;
                out.depth(x, y) = z;
                out.position(x, y) = ba * A + bb * B + bc * C;
                Vec3 n = face_n;
                if (smooth) {
                    const auto& ns = *mesh.vertices.normals;
                    const Vec3 blended = ba * ns[f[0]] + bb * ns[f[1]] + bc * ns[f[2]];
                    if (mesh.vertices.normal_valid(f[0]) && mesh.vertices.normal_valid(f[1]) &&
                        mesh.vertices.normal_valid(f[2]) && blended.norm() > 1e-12) {
                        n = blended.normalized();
                    } else {
                        n = Vec3::Zero();
                    }
                }
                out.normal(x, y) = n;
            }
        }
    }
    return out;
}

/// Z-buffered square splats for a bare point cloud.
inline SurfaceBuffer rasterize(const PointCloud& cloud, const Camera& cam, const RenderOptions& opt = {}) {
    auto out = detail::empty_surface(cam);
    const int r = std::max(0, opt.splat_radius);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto pr = project_point(cam, cloud.points[i]);
        if (!pr) {
            continue;
        }
        const int px = pixel_index(pr->u);
        const int py = pixel_index(pr->v);
        for (int y = std::max(0, py - r); y <= std::min(cam.height - 1, py + r); ++y) {
            for (int x = std::max(0, px - r); x <= std::min(cam.width - 1, px + r); ++x) {
                if (pr->depth < out.depth(x, y)) {
                    out.depth(x, y) = pr->depth;
                    out.position(x, y) = cloud.points[i];
                    out.normal(x, y) = cloud.has_normals() ? (*cloud.normals)[i] : Vec3::Zero();
                }
            }
        }
    }
    return out;
}

/// Meshes rasterize their faces; a mesh without faces falls back to splatting its vertices.
inline SurfaceBuffer rasterize_geometry(const TriangleMesh& mesh, const Camera& cam, const RenderOptions& opt = {}) {
    return mesh.faces.empty() ? rasterize(mesh.vertices, cam, opt) : rasterize(mesh, cam);
}

inline DepthMap render_depth_map(const TriangleMesh& mesh, const Camera& cam, const RenderOptions& opt = {}) {
    return rasterize_geometry(mesh, cam, opt).depth;
}

inline DepthMap render_depth_map(const PointCloud& cloud, const Camera& cam, const RenderOptions& opt = {}) {
    return rasterize(cloud, cam, opt).depth;
}

/// In front of the camera, inside the image, and no farther than the depth buffer plus `eps`.
inline bool is_visible(const Point3& p, const Camera& cam, const DepthMap& dm, double eps) {
    const auto pr = project_point(cam, p);
    if (!pr) {
        return false;
    }
    const int x = pixel_index(pr->u);
    const int y = pixel_index(pr->v);
    if (!dm.contains(x, y)) {
        return false;
    }
    return pr->depth <= dm(x, y) + eps;
}

} // namespace photofuse
