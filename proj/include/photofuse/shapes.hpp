#pragma once

#include <photofuse/geometry.hpp>

#include <cmath>
#include <numbers>

namespace photofuse {

/// Latitude-longitude sphere with outward unit normals. `rings` >= 2, `segments` >= 3.
inline TriangleMesh uv_sphere(double radius, int rings, int segments, const Point3& center = Point3::Zero()) {
    TriangleMesh m;
    auto& v = m.vertices;
    v.normals.emplace();
    auto add = [&](const Vec3& dir) {
        v.points.push_back(center + radius * dir);
        v.normals->push_back(dir);
        return static_cast<std::uint32_t>(v.points.size() - 1);
    };
    const std::uint32_t north = add(Vec3(0, 0, 1));
    for (int r = 1; r < rings; ++r) {
        const double theta = std::numbers::pi * r / rings;
        for (int s = 0; s < segments; ++s) {
            const double phi = 2.0 * std::numbers::pi * s / segments;
            add(Vec3(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)));
        }
    }
    const std::uint32_t south = add(Vec3(0, 0, -1));
    auto ring = [&](int r, int s) { return static_cast<std::uint32_t>(1 + (r - 1) * segments + (s % segments)); };
    for (int s = 0; s < segments; ++s) {
        m.faces.push_back({north, ring(1, s), ring(1, s + 1)});
        m.faces.push_back({south, ring(rings - 1, s + 1), ring(rings - 1, s)});
    }
    for (int r = 1; r + 1 < rings; ++r) {
        for (int s = 0; s < segments; ++s) {
            m.faces.push_back({ring(r, s), ring(r + 1, s), ring(r + 1, s + 1)});
            m.faces.push_back({ring(r, s), ring(r + 1, s + 1), ring(r, s + 1)});
        }
    }
    return m;
}

/// Regular n x n vertex grid spanning [-half, half]^2 in the plane z = 0, normals +z.
inline TriangleMesh grid_plane(double half, int n) {
    TriangleMesh m;
    m.vertices.normals.emplace();
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            m.vertices.points.emplace_back(-half + 2.0 * half * i / (n - 1), -half + 2.0 * half * j / (n - 1), 0.0);
            m.vertices.normals->emplace_back(0.0, 0.0, 1.0);
        }
    }
    auto id = [n](int i, int j) { return static_cast<std::uint32_t>(j * n + i); };
    for (int j = 0; j + 1 < n; ++j) {
        for (int i = 0; i + 1 < n; ++i) {
            m.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            m.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    return m;
}

} // namespace photofuse
