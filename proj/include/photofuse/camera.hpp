#pragma once

#include <photofuse/error.hpp>
#include <photofuse/geometry.hpp>

#include <cmath>
#include <optional>

namespace photofuse {

/// Pinhole camera with two-coefficient radial distortion.
///
/// World points map to camera space as q = R*p + t. The camera frame is x right, y down,
/// z forward; a point is in front when q.z > 0. Pixel coordinates are y-down with pixel
/// centers at integer positions.
struct Camera {
    double focal = 1.0;
    double k1 = 0.0;
    double k2 = 0.0;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    int width = 0;
    int height = 0;
    double cx = 0.0;
    double cy = 0.0;

    /// Principal point at the image center, (w-1)/2 and (h-1)/2 in pixel-center coordinates.
    static Camera centered(double focal, int width, int height) {
        Camera c;
        c.focal = focal;
        c.width = width;
        c.height = height;
        c.cx = 0.5 * (width - 1);
        c.cy = 0.5 * (height - 1);
        return c;
    }

    Point3 center() const { return -(rotation.transpose() * translation); }

    Vec3 to_camera(const Point3& p) const { return rotation * p + translation; }

    void validate() const {
        if (!(focal > 0.0) || !std::isfinite(focal)) {
            throw InputError("camera focal length must be positive");
        }
        if ((rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
            std::abs(rotation.determinant() - 1.0) > 1e-9) {
            throw InputError("camera rotation must be orthonormal with determinant +1");
        }
        if (width <= 0 || height <= 0) {
            throw InputError("camera image size must be positive");
        }
    }
};

/// Camera pose expressed in a new world frame, given the map `to_new` from the old frame.
/// Depth scales with the similarity's scale; pixel projections are unchanged.
inline Camera transform_camera(const Camera& cam, const SimilarityTransform& to_new) {
    // old p = to_new^-1(x); R p + t = (1/s) R Rt^T (x - tt) + t, then rescale by s.
    Camera out = cam;
    const Mat3 rt = to_new.rotation().transpose();
    out.rotation = cam.rotation * rt;
    out.translation = to_new.scale() * cam.translation - out.rotation * to_new.translation();
    return out;
}

struct Projection {
    double u;
    double v;
    double depth;
};

/// Pixel position and camera-space depth, or nothing when the point is not in front.
inline std::optional<Projection> project_point(const Camera& cam, const Point3& p) {
    const Vec3 q = cam.to_camera(p);
    if (!(q.z() > 0.0)) {
        return std::nullopt;
    }
    const double x = q.x() / q.z();
    const double y = q.y() / q.z();
    const double r2 = x * x + y * y;
    const double rho = 1.0 + cam.k1 * r2 + cam.k2 * r2 * r2;
    return Projection{cam.cx + cam.focal * rho * x, cam.cy + cam.focal * rho * y, q.z()};
}

/// Nearest pixel index of a continuous coordinate.
inline int pixel_index(double c) { return static_cast<int>(std::floor(c + 0.5)); }

} // namespace photofuse
