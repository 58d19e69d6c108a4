#pragma once

#include <photofuse/error.hpp>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace photofuse {

using Point3 = Eigen::Vector3d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Rgb = Eigen::Vector3d;

/// Points with optional parallel normal and color arrays.
///
/// A normal of exactly zero length marks an invalid normal (degenerate neighbourhood);
/// every other stored normal is unit length. Colors are RGB in [0,1].
struct PointCloud {
    std::vector<Point3> points;
    std::optional<std::vector<Vec3>> normals;
    std::optional<std::vector<Rgb>> colors;

    std::size_t size() const noexcept { return points.size(); }
    bool empty() const noexcept { return points.empty(); }
    bool has_normals() const noexcept { return normals.has_value(); }
    bool has_colors() const noexcept { return colors.has_value(); }

    bool normal_valid(std::size_t i) const {
        return normals && (*normals)[i].squaredNorm() > 0.5;
    }

    /// Throws InputError when the parallel arrays disagree or values are non-finite.
    void validate() const {
        for (const auto& p : points) {
            if (!p.allFinite()) {
                throw InputError("point cloud contains a non-finite coordinate");
            }
        }
        if (normals) {
            if (normals->size() != points.size()) {
                throw InputError("normal count does not match point count");
            }
            for (const auto& n : *normals) {
                const double len = n.norm();
                if (len != 0.0 && std::abs(len - 1.0) > 1e-6) {
                    throw InputError("normal is not unit length");
                }
            }
        }
        if (colors && colors->size() != points.size()) {
            throw InputError("color count does not match point count");
        }
    }
};

using Face = std::array<std::uint32_t, 3>;

struct TriangleMesh {
    PointCloud vertices;
    std::vector<Face> faces;

    void validate() const {
        vertices.validate();
        const auto n = vertices.size();
        for (const auto& f : faces) {
            if (f[0] >= n || f[1] >= n || f[2] >= n) {
                throw InputError("face index out of range");
            }
            if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) {
                throw InputError("degenerate face with repeated vertex index");
            }
        }
    }
};

/// Rotation about a unit axis by `angle` radians.
inline Mat3 axis_angle(const Vec3& axis, double angle) {
    return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

/// Geodesic distance between two rotations, in radians.
inline double rotation_angle_between(const Mat3& a, const Mat3& b) {
    const double c = ((a.transpose() * b).trace() - 1.0) / 2.0;
    return std::acos(std::clamp(c, -1.0, 1.0));
}

/// p -> s * R * p + t with uniform scale s > 0 and a proper rotation R.
class SimilarityTransform {
public:
    SimilarityTransform() = default;

    /// Validates the invariants: s > 0 and finite, R orthonormal with det +1 (1e-9).
    SimilarityTransform(double scale, const Mat3& rotation, const Vec3& translation)
        : scale_(scale), rotation_(rotation), translation_(translation) {
        if (!(scale > 0.0) || !std::isfinite(scale)) {
            throw InputError("similarity scale must be positive and finite");
        }
        if (!rotation.allFinite() || !translation.allFinite()) {
            throw InputError("similarity transform has non-finite entries");
        }
        if ((rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
            throw InputError("rotation matrix is not orthonormal");
        }
        if (std::abs(rotation.determinant() - 1.0) > 1e-9) {
            throw InputError("rotation matrix must have determinant +1");
        }
    }

    static SimilarityTransform identity() { return {}; }

    double scale() const noexcept { return scale_; }
    const Mat3& rotation() const noexcept { return rotation_; }
    const Vec3& translation() const noexcept { return translation_; }

    Point3 operator()(const Point3& p) const { return scale_ * (rotation_ * p) + translation_; }

    Vec3 rotate(const Vec3& v) const { return rotation_ * v; }

private:
    double scale_ = 1.0;
    Mat3 rotation_ = Mat3::Identity();
    Vec3 translation_ = Vec3::Zero();
};

/// The transform equivalent to applying `b` first, then `a`.
inline SimilarityTransform compose(const SimilarityTransform& a, const SimilarityTransform& b) {
    return {a.scale() * b.scale(), a.rotation() * b.rotation(),
            a.scale() * (a.rotation() * b.translation()) + a.translation()};
}

inline SimilarityTransform invert(const SimilarityTransform& t) {
    const double inv_s = 1.0 / t.scale();
    const Mat3 rt = t.rotation().transpose();
    return {inv_s, rt, -inv_s * (rt * t.translation())};
}

/// Points map through s*R*p + t, normals through R, colors are copied.
inline PointCloud apply_transform(const SimilarityTransform& t, const PointCloud& c) {
    PointCloud out;
    out.points.reserve(c.size());
    for (const auto& p : c.points) {
        out.points.push_back(t(p));
    }
    if (c.normals) {
        out.normals.emplace();
        out.normals->reserve(c.size());
        for (const auto& n : *c.normals) {
            out.normals->push_back(t.rotate(n));
        }
    }
    out.colors = c.colors;
    return out;
}

inline TriangleMesh apply_transform(const SimilarityTransform& t, const TriangleMesh& m) {
    return {apply_transform(t, m.vertices), m.faces};
}

struct Aabb {
    Point3 min;
    Point3 max;

    Point3 center() const { return 0.5 * (min + max); }
    double diagonal() const { return (max - min).norm(); }

    std::array<Point3, 8> corners() const {
        std::array<Point3, 8> out;
        for (int i = 0; i < 8; ++i) {
            out[i] = Point3((i & 1) ? max.x() : min.x(), (i & 2) ? max.y() : min.y(),
                            (i & 4) ? max.z() : min.z());
        }
        return out;
    }
};

inline Aabb compute_aabb(std::span<const Point3> points) {
    if (points.empty()) {
        throw InputError("empty geometry");
    }
    Aabb box{points.front(), points.front()};
    for (const auto& p : points) {
        box.min = box.min.cwiseMin(p);
        box.max = box.max.cwiseMax(p);
    }
    return box;
}

inline Aabb compute_aabb(const PointCloud& c) { return compute_aabb(c.points); }

} // namespace photofuse
