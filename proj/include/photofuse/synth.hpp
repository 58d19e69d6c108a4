#pragma once

#include <photofuse/camera.hpp>
#include <photofuse/error.hpp>
#include <photofuse/geometry.hpp>
#include <photofuse/image.hpp>
#include <photofuse/normals.hpp>
#include <photofuse/raster.hpp>
#include <photofuse/shapes.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace photofuse {

/// Solid texture: low-frequency color waves, Gaussian blobs and fine luminance value noise,
/// evaluated at 3D surface points so every view of a point sees the same color.
class ProceduralTexture {
public:
    ProceduralTexture() = default;

    /// `scale` is the object's size; the noise lattice spacing is scale/100.
    ProceduralTexture(std::uint64_t seed, double scale) {
        std::mt19937_64 rng(seed ^ 0x7e47u);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::normal_distribution<double> g;
        for (int i = 0; i < 4; ++i) {
            Wave w;
            const Vec3 dir = Vec3(g(rng), g(rng), g(rng)).normalized();
            const double wavelength = scale * (1.0 / 8.0 + u(rng) * (1.0 / 4.0 - 1.0 / 8.0));
            w.k = dir * (2.0 * std::numbers::pi / wavelength);
            w.phase = 2.0 * std::numbers::pi * u(rng);
            w.amp = Rgb(u(rng), u(rng), u(rng)) * 0.08;
            waves_.push_back(w);
        }
        detail_seed_ = rng();
        detail_cell_ = scale / 100.0;
        detail_amp_ = 0.1;
        for (int i = 0; i < 12; ++i) {
            Blob b;
            b.center = Vec3(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5) * scale;
            b.inv_sigma2 = 1.0 / std::pow(scale * (0.04 + 0.06 * u(rng)), 2);
            b.amp = Rgb(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5) * 0.3;
            blobs_.push_back(b);
        }
    }

    Rgb operator()(const Point3& p) const {
        Rgb c = Rgb::Constant(0.5);
        for (const auto& w : waves_) c += w.amp * std::sin(w.k.dot(p) + w.phase);
        c += Rgb::Constant(detail_amp_ * detail(p / detail_cell_));
        for (const auto& b : blobs_) {
            c += b.amp * std::exp(-(p - b.center).squaredNorm() * b.inv_sigma2);
        }
        return c.cwiseMax(0.0).cwiseMin(1.0);
    }

private:
    double lattice(std::int64_t x, std::int64_t y, std::int64_t z) const {
        std::uint64_t h = detail_seed_;
        for (std::int64_t v : {x, y, z}) {
            h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
            h *= 0xbf58476d1ce4e5b9ull;
            h ^= h >> 31;
        }
        return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
    }

    // Value noise in [-1, 1] on a unit lattice, smoothstep-interpolated.
    double detail(const Vec3& q) const {
        const Vec3 f(std::floor(q.x()), std::floor(q.y()), std::floor(q.z()));
        const Vec3 t = q - f;
        const Vec3 s = t.cwiseProduct(t).cwiseProduct(Vec3::Constant(3.0) - 2.0 * t);
        const auto ix = static_cast<std::int64_t>(f.x());
        const auto iy = static_cast<std::int64_t>(f.y());
        const auto iz = static_cast<std::int64_t>(f.z());
        double acc = 0.0;
        for (int c = 0; c < 8; ++c) {
            const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
            const double w = (dx ? s.x() : 1 - s.x()) * (dy ? s.y() : 1 - s.y()) * (dz ? s.z() : 1 - s.z());
            acc += w * lattice(ix + dx, iy + dy, iz + dz);
        }
        return acc;
    }

    std::uint64_t detail_seed_ = 0;
    double detail_cell_ = 1.0;
    double detail_amp_ = 0.0;
    struct Wave {
        Vec3 k;
        double phase;
        Rgb amp;
    };
    struct Blob {
        Vec3 center;
        double inv_sigma2;
        Rgb amp;
    };
    std::vector<Wave> waves_;
    std::vector<Blob> blobs_;
};

inline const Rgb kSynthBackground = Rgb(0.08, 0.08, 0.1);

/// Camera at `eye` looking at `target`, image y pointing away from `up`.
inline Camera look_at(const Point3& eye, const Point3& target, const Vec3& up, double focal, int width, int height) {
    Camera c = Camera::centered(focal, width, height);
    const Vec3 z = (target - eye).normalized();
    const Vec3 x = z.cross(up).normalized();
    const Vec3 y = z.cross(x);
    c.rotation.row(0) = x.transpose();
    c.rotation.row(1) = y.transpose();
    c.rotation.row(2) = z.transpose();
    c.translation = -(c.rotation * eye);
    return c;
}

/// Textured image through the projection module's rasterizer.
inline Image render_raster(const TriangleMesh& mesh, const Camera& cam, const ProceduralTexture& tex,
                           const Rgb& background = kSynthBackground) {
    const auto s = rasterize(mesh, cam);
    Image img(cam.width, cam.height, background);
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x)
            if (s.depth.covered(x, y)) img(x, y) = tex(s.position(x, y));
    return img;
}

/// Ray caster over a bounding-volume hierarchy; shares no code with the rasterizer.
class RayCaster {
public:
    explicit RayCaster(const TriangleMesh& mesh) : mesh_(mesh) {
        order_.resize(mesh.faces.size());
        for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
        if (!order_.empty()) build(0, static_cast<std::uint32_t>(order_.size()));
    }

    /// Nearest hit distance along origin + t * dir, t > 0.
    std::optional<double> intersect(const Vec3& origin, const Vec3& dir) const {
        if (nodes_.empty()) return std::nullopt;
        const Vec3 inv(1.0 / dir.x(), 1.0 / dir.y(), 1.0 / dir.z());
        double best = std::numeric_limits<double>::infinity();
        std::vector<std::uint32_t> stack{0};
        while (!stack.empty()) {
            const Node& n = nodes_[stack.back()];
            stack.pop_back();
            if (!slab(n, origin, inv, best)) continue;
            if (n.count > 0) {
                for (std::uint32_t i = n.first; i < n.first + n.count; ++i) {
                    const auto& f = mesh_.faces[order_[i]];
                    const auto t = hit_triangle(origin, dir, mesh_.vertices.points[f[0]], mesh_.vertices.points[f[1]],
                                                mesh_.vertices.points[f[2]]);
                    if (t && *t < best) best = *t;
                }
            } else {
                stack.push_back(n.left);
                stack.push_back(n.right);
            }
        }
        if (!std::isfinite(best)) return std::nullopt;
        return best;
    }

    /// Image of a distortion-free camera, one ray through each pixel center.
    Image render(const Camera& cam, const ProceduralTexture& tex, const Rgb& background = kSynthBackground) const {
        if (cam.k1 != 0.0 || cam.k2 != 0.0) {
            throw InputError("ray caster supports distortion-free cameras only");
        }
        Image img(cam.width, cam.height, background);
        const Point3 eye = cam.center();
        const Mat3 rt = cam.rotation.transpose();
        for (int y = 0; y < cam.height; ++y) {
            for (int x = 0; x < cam.width; ++x) {
                const Vec3 d = (rt * Vec3((x - cam.cx) / cam.focal, (y - cam.cy) / cam.focal, 1.0)).normalized();
                if (const auto t = intersect(eye, d)) img(x, y) = tex(eye + *t * d);
            }
        }
        return img;
    }

private:
    struct Node {
        Vec3 lo, hi;
        std::uint32_t left = 0, right = 0, first = 0, count = 0;
    };

    static std::optional<double> hit_triangle(const Vec3& o, const Vec3& d, const Vec3& a, const Vec3& b,
                                              const Vec3& c) {
        const Vec3 e1 = b - a, e2 = c - a;
        const Vec3 p = d.cross(e2);
        const double det = e1.dot(p);
        if (std::abs(det) < 1e-14) return std::nullopt;
        const double inv = 1.0 / det;
        const Vec3 s = o - a;
        const double u = s.dot(p) * inv;
        if (u < 0.0 || u > 1.0) return std::nullopt;
        const Vec3 q = s.cross(e1);
        const double v = d.dot(q) * inv;
        if (v < 0.0 || u + v > 1.0) return std::nullopt;
        const double t = e2.dot(q) * inv;
        if (!(t > 1e-12)) return std::nullopt;
        return t;
    }

    static bool slab(const Node& n, const Vec3& o, const Vec3& inv, double tmax) {
        double t0 = 0.0, t1 = tmax;
        for (int k = 0; k < 3; ++k) {
            double a = (n.lo[k] - o[k]) * inv[k];
            double b = (n.hi[k] - o[k]) * inv[k];
            if (a > b) std::swap(a, b);
            t0 = std::max(t0, a);
            t1 = std::min(t1, b);
            if (t0 > t1) return false;
        }
        return true;
    }

    std::uint32_t build(std::uint32_t first, std::uint32_t last) {
        const auto id = static_cast<std::uint32_t>(nodes_.size());
        nodes_.emplace_back();
        Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
        Vec3 clo = lo, chi = hi;
        for (std::uint32_t i = first; i < last; ++i) {
            const auto& f = mesh_.faces[order_[i]];
            Vec3 centroid = Vec3::Zero();
            for (auto v : f) {
                const auto& p = mesh_.vertices.points[v];
                lo = lo.cwiseMin(p);
                hi = hi.cwiseMax(p);
                centroid += p / 3.0;
            }
            clo = clo.cwiseMin(centroid);
            chi = chi.cwiseMax(centroid);
        }
        nodes_[id].lo = lo;
        nodes_[id].hi = hi;
        if (last - first <= 4) {
            nodes_[id].first = first;
            nodes_[id].count = last - first;
            return id;
        }
        int axis = 0;
        (chi - clo).maxCoeff(&axis);
        const std::uint32_t mid = first + (last - first) / 2;
        auto key = [&](std::uint32_t f) {
            const auto& t = mesh_.faces[f];
            return mesh_.vertices.points[t[0]][axis] + mesh_.vertices.points[t[1]][axis] +
                   mesh_.vertices.points[t[2]][axis];
        };
        std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + last,
                         [&](std::uint32_t a, std::uint32_t b) { return key(a) < key(b) || (key(a) == key(b) && a < b); });
        const auto l = build(first, mid);
        const auto r = build(mid, last);
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    const TriangleMesh& mesh_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
};

enum class SceneKind { sphere, vase, plane };

inline SceneKind scene_kind_from_string(const std::string& s) {
    if (s == "sphere") return SceneKind::sphere;
    if (s == "vase") return SceneKind::vase;
    if (s == "plane") return SceneKind::plane;
    throw InputError("unknown scene kind '" + s + "' (expected sphere, vase or plane)");
}

inline std::string to_string(SceneKind k) {
    switch (k) {
    case SceneKind::sphere: return "sphere";
    case SceneKind::vase: return "vase";
    case SceneKind::plane: return "plane";
    }
    return "vase";
}

struct SceneSpec {
    SceneKind kind = SceneKind::vase;
    int vertices = 5000;
    int images = 6;
    int width = 640;
    int height = 480;
    /// Largest rotation of the decoy reconstruction frame, radians.
    double frame_rotation = 0.35;
};

/// A scene with known answers: mesh, true and modeled cameras, rendered photographs, and
/// the frame the reconstruction is expressed in.
struct SyntheticScene {
    SceneSpec spec;
    std::uint64_t seed = 0;
    TriangleMesh mesh;              // scan geometry; vertex colors are the true texture
    ProceduralTexture texture;
    std::vector<Camera> true_cameras;  // cameras the photographs were taken with
    std::vector<Camera> cameras;       // cameras as the reconstruction reports them, scene frame
    std::vector<Image> images;
    /// Scene frame -> reconstruction frame. Registration should recover its inverse.
    SimilarityTransform frame;
    /// Reconstruction cloud in its own frame.
    PointCloud reconstruction;
    double point_noise = 0.0;
};

namespace synth_detail {

/// Spindle of revolution along z with a twisted three-lobe ripple and a spout bulge, so it
/// has no rotational or mirror symmetry.
inline Point3 vase_point(const Vec3& dir) {
    const double theta = std::acos(std::clamp(dir.z(), -1.0, 1.0));
    const double phi = std::atan2(dir.y(), dir.x());
    const double st = std::sin(theta);
    double r = st * (0.5 + 0.14 * std::sin(2.5 * theta + 0.3));
    double dphi = std::remainder(phi - 0.8, 2.0 * std::numbers::pi);
    r *= 1.0 + 0.1 * std::cos(3.0 * phi + 0.7 * theta) * st +
         0.2 * std::exp(-dphi * dphi / 0.08) * std::exp(-(theta - 0.8) * (theta - 0.8) / 0.05);
    return {r * std::cos(phi), r * std::sin(phi), 1.1 * std::cos(theta)};
}

inline void ring_counts(int budget, int& rings, int& segments) {
    rings = std::max(3, static_cast<int>(std::lround(std::sqrt(budget / 2.0))));
    segments = std::max(3, static_cast<int>(std::lround(static_cast<double>(budget - 2) / (rings - 1))));
}

} // namespace synth_detail

inline TriangleMesh vase_mesh(int budget) {
    int rings = 0, segments = 0;
    synth_detail::ring_counts(budget, rings, segments);
    TriangleMesh m = uv_sphere(1.0, rings, segments);
    for (auto& p : m.vertices.points) p = synth_detail::vase_point(p);
    m.vertices = vertex_normals(m);
    return m;
}

/// Builds the scene deterministically from the seed.
inline SyntheticScene generate_scene(std::uint64_t seed, const SceneSpec& spec = {}) {
    if (spec.vertices < 16 || spec.images < 1 || spec.width < 16 || spec.height < 16) {
        throw InputError("scene spec needs >= 16 vertices, >= 1 image and images of at least 16x16");
    }
    SyntheticScene s;
    s.spec = spec;
    s.seed = seed;
    std::mt19937_64 rng(seed);
    const double px = std::min(spec.width, spec.height);
    Point3 look(0, 0, 0);
    if (spec.kind == SceneKind::plane) {
        const int n = std::max(2, static_cast<int>(std::lround(std::sqrt(spec.vertices))));
        s.mesh = grid_plane(1.0, n);
        const double dist = 4.0;
        const double focal = 0.75 * px * dist;
        for (int i = 0; i < spec.images; ++i) {
            const double a = spec.images == 1 ? 0.0 : (-20.0 + 40.0 * i / (spec.images - 1)) * std::numbers::pi / 180.0;
            const Point3 eye(dist * std::sin(a), 0.0, dist * std::cos(a));
            s.true_cameras.push_back(look_at(eye, look, Vec3::UnitY(), focal, spec.width, spec.height));
        }
    } else {
        if (spec.kind == SceneKind::sphere) {
            int rings = 0, segments = 0;
            synth_detail::ring_counts(spec.vertices, rings, segments);
            s.mesh = uv_sphere(1.0, rings, segments);
        } else {
            s.mesh = vase_mesh(spec.vertices);
        }
        const double radius = compute_aabb(s.mesh.vertices).diagonal() / 2.0;
        const double dist = 5.0 * radius;
        const double focal = 0.47 * px * std::sqrt(dist * dist - radius * radius) / radius;
        // Stations evenly spaced in azimuth, each with one camera above and one below.
        const int stations = (spec.images + 1) / 2;
        for (int i = 0; i < spec.images; ++i) {
            const double az = 2.0 * std::numbers::pi * (i / 2) / stations + 0.2;
            const double el = (i % 2 == 0 ? 35.0 : -35.0) * std::numbers::pi / 180.0;
            const Point3 eye = dist * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
            s.true_cameras.push_back(look_at(eye, look, Vec3::UnitZ(), focal, spec.width, spec.height));
        }
    }
    const double size = compute_aabb(s.mesh.vertices).diagonal();
    s.texture = ProceduralTexture(seed, size);
    s.mesh.vertices.colors.emplace();
    for (const auto& p : s.mesh.vertices.points) s.mesh.vertices.colors->push_back(s.texture(p));
    s.cameras = s.true_cameras;
    for (const auto& c : s.true_cameras) s.images.push_back(render_raster(s.mesh, c, s.texture));

    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g;
    const Vec3 axis = Vec3(g(rng), g(rng), g(rng)).normalized();
    const double angle = spec.frame_rotation * (0.5 + 0.5 * u(rng));
    const double scale = std::exp(std::log(0.5) + u(rng) * (std::log(3.0) - std::log(0.5)));
    const Vec3 t = Vec3(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5) * 4.0 * size;
    s.frame = SimilarityTransform(scale, axis_angle(axis, angle), t);
    s.reconstruction = apply_transform(s.frame, s.mesh.vertices);
    return s;
}

struct Perturbation {
    enum class Mode { principal_shift, camera_rotation, cloud_similarity, point_noise } mode = Mode::principal_shift;
    std::size_t camera = 0;
    double dx = 0.0;  // pixels
    double dy = 0.0;
    double mrad = 0.0;
    SimilarityTransform similarity;
    double sigma = 0.0;  // reconstruction-frame units
    std::uint64_t seed = 0;
};

/// Injects one known error.
///
/// principal_shift: the photograph of `camera` is retaken with its principal point moved by
/// (-dx, -dy), so the reported camera now projects every point (dx, dy) pixels away from
/// where the photograph shows it. camera_rotation: the reported camera is rotated by `mrad`
/// about a seeded axis. cloud_similarity: the reconstruction frame is composed with
/// `similarity`. point_noise: isotropic Gaussian noise on the reconstruction cloud.
inline SyntheticScene perturb_scene(SyntheticScene s, const Perturbation& p) {
    using Mode = Perturbation::Mode;
    if ((p.mode == Mode::principal_shift || p.mode == Mode::camera_rotation) && p.camera >= s.cameras.size()) {
        throw InputError("perturbation camera index out of range");
    }
    switch (p.mode) {
    case Mode::principal_shift: {
        if (p.dx == 0.0 && p.dy == 0.0) break;
        auto& c = s.true_cameras[p.camera];
        c.cx = s.cameras[p.camera].cx - p.dx;
        c.cy = s.cameras[p.camera].cy - p.dy;
        s.images[p.camera] = render_raster(s.mesh, c, s.texture);
        break;
    }
    case Mode::camera_rotation: {
        if (p.mrad == 0.0) break;
        std::mt19937_64 rng(p.seed);
        std::normal_distribution<double> g;
        const Vec3 axis = Vec3(g(rng), g(rng), g(rng)).normalized();
        s.cameras[p.camera].rotation = axis_angle(axis, p.mrad * 1e-3) * s.cameras[p.camera].rotation;
        s.cameras[p.camera].translation = axis_angle(axis, p.mrad * 1e-3) * s.cameras[p.camera].translation;
        break;
    }
    case Mode::cloud_similarity:
        s.frame = compose(p.similarity, s.frame);
        s.reconstruction = apply_transform(p.similarity, s.reconstruction);
        break;
    case Mode::point_noise: {
        if (p.sigma == 0.0) break;
        std::mt19937_64 rng(p.seed);
        std::normal_distribution<double> g(0.0, p.sigma);
        for (auto& q : s.reconstruction.points) q += Vec3(g(rng), g(rng), g(rng));
        s.point_noise = std::hypot(s.point_noise, p.sigma);
        break;
    }
    }
    return s;
}

/// Replaces every photograph with the ray-cast rendering from its true camera.
inline void render_with_ray_caster(SyntheticScene& s) {
    const RayCaster rc(s.mesh);
    for (std::size_t i = 0; i < s.images.size(); ++i) s.images[i] = rc.render(s.true_cameras[i], s.texture);
}

/// Pixel displacement the matcher should report for each camera relative to camera `ref`:
/// minus the difference of the injected principal-point errors.
inline std::array<double, 2> expected_displacement(const SyntheticScene& s, std::size_t ref, std::size_t target) {
    auto err = [&](std::size_t i) {
        return std::array<double, 2>{s.cameras[i].cx - s.true_cameras[i].cx, s.cameras[i].cy - s.true_cameras[i].cy};
    };
    const auto a = err(ref), b = err(target);
    return {-(b[0] - a[0]), -(b[1] - a[1])};
}

/// Hand-picked style correspondences: `count` well-spread scan vertices (farthest-point order
/// from vertex 0) paired with their reconstruction points, the latter jittered by Gaussian
/// noise of `jitter` times the reconstruction's bounding-box diagonal. Pairs are
/// (reconstruction, scan).
inline std::vector<std::pair<Point3, Point3>> picked_correspondences(const SyntheticScene& s, int count = 10,
                                                                     double jitter = 0.0025) {
    const auto& pts = s.mesh.vertices.points;
    std::vector<std::pair<Point3, Point3>> out;
    if (pts.empty() || count <= 0) return out;
    std::vector<double> nearest(pts.size(), std::numeric_limits<double>::infinity());
    std::size_t pick = 0;
    std::mt19937_64 rng(s.seed ^ 0x70696b6564ull);
    const double sigma = jitter * compute_aabb(s.reconstruction.points).diagonal();
    std::normal_distribution<double> g(0.0, sigma);
    for (int n = 0; n < count && n < static_cast<int>(pts.size()); ++n) {
        const Point3 noisy = s.reconstruction.points[pick] + Vec3(g(rng), g(rng), g(rng));
        out.emplace_back(noisy, pts[pick]);
        std::size_t next = 0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            nearest[i] = std::min(nearest[i], (pts[i] - pts[pick]).squaredNorm());
            if (nearest[i] > nearest[next]) next = i;
        }
        pick = next;
    }
    return out;
}

} // namespace photofuse
