#pragma once

#include <photofuse/geometry.hpp>
#include <photofuse/kdtree.hpp>

#include <Eigen/Eigenvalues>

#include <optional>

namespace photofuse {

/// Flip rule for estimated normals: toward `viewpoint`, or away from it when `away` is set.
struct NormalOrientation {
    Point3 viewpoint = Point3::Zero();
    bool away = false;
};

/// Normals from the smallest-eigenvalue eigenvector of each point's k-neighbourhood
/// covariance (the point itself plus its k nearest neighbours, fewer if the cloud is small).
///
/// Neighbourhoods of rank < 2 get a zero normal, which downstream masks treat as invalid.
inline PointCloud estimate_normals(const PointCloud& c, std::size_t k,
                                   std::optional<NormalOrientation> orient = std::nullopt) {
    if (k < 3) {
        throw InputError("normal estimation needs k >= 3");
    }
    if (c.empty()) {
        throw InputError("empty geometry");
    }
    const KdTree tree(c.points);
    PointCloud out = c;
    out.normals.emplace(c.size(), Vec3::Zero());
    for (std::size_t i = 0; i < c.size(); ++i) {
        const auto hits = tree.knn(c.points[i], k + 1);
        Point3 mean = Point3::Zero();
        for (const auto& h : hits) {
            mean += c.points[h.index];
        }
        mean /= static_cast<double>(hits.size());
        Mat3 cov = Mat3::Zero();
        for (const auto& h : hits) {
            const Vec3 d = c.points[h.index] - mean;
            cov += d * d.transpose();
        }
        const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
        const Vec3 ev = eig.eigenvalues(); // ascending
        const double scale = std::max(ev[2], 0.0);
        if (!(scale > 0.0) || ev[1] <= 1e-10 * scale) {
            continue;
        }
        Vec3 n = eig.eigenvectors().col(0).normalized();
        if (orient) {
            const double side = n.dot(orient->viewpoint - c.points[i]);
            if ((side < 0.0) != orient->away) {
                n = -n;
            }
        }
        (*out.normals)[i] = n;
    }
    return out;
}

/// Area-weighted vertex normals from the face winding (counter-clockwise = outward).
inline PointCloud vertex_normals(const TriangleMesh& m) {
    PointCloud out = m.vertices;
    std::vector<Vec3> acc(m.vertices.size(), Vec3::Zero());
    for (const auto& f : m.faces) {
        const auto& a = m.vertices.points[f[0]];
        const Vec3 n = (m.vertices.points[f[1]] - a).cross(m.vertices.points[f[2]] - a);
        for (auto v : f) {
            acc[v] += n;
        }
    }
    for (auto& n : acc) {
        const double len = n.norm();
        n = len > 0.0 ? Vec3(n / len) : Vec3::Zero();
    }
    out.normals = std::move(acc);
    return out;
}

} // namespace photofuse
