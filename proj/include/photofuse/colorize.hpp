#pragma once

#include <photofuse/block.hpp>
#include <photofuse/camera.hpp>
#include <photofuse/color.hpp>
#include <photofuse/error.hpp>
#include <photofuse/image.hpp>
#include <photofuse/masks.hpp>
#include <photofuse/raster.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

namespace photofuse {

/// One photograph prepared for colorization: its camera in scan space, the RGB image, its
/// YCbCr conversion, and the depth map and combined quality mask rendered from the scan.
struct View {
    Camera camera;
    Image rgb;
    Grid<Vec3> ycbcr;
    DepthMap depth;
    QualityMask weight;
};

inline View make_view(Camera camera, Image rgb, DepthMap depth, QualityMask weight) {
    const auto fits = [&](int w, int h) { return w == camera.width && h == camera.height; };
    if (!fits(rgb.width(), rgb.height()) || !fits(depth.width(), depth.height()) ||
        !fits(weight.width(), weight.height())) {
        throw InputError("view image, depth map and mask sizes must match the camera");
    }
    View v{std::move(camera), std::move(rgb), {}, std::move(depth), std::move(weight)};
    v.ycbcr = to_ycbcr(v.rgb);
    return v;
}

struct ColorizeConfig {
    int block_size = 7;
    int search_radius = 15;
    int best_k = 3;
    double visibility_eps = 0.0;
    bool local_correction = true;
    Rgb uncolored_color = Rgb::Constant(0.5);
    /// Worker threads for the point loop; 0 picks the hardware concurrency.
    unsigned threads = 0;
};

struct ProjectionEntry {
    std::uint32_t image;
    double u;
    double v;
    double weight;  // combined mask at the rounded projection, 0 unless visible
    bool visible;
};

/// Where one point lands in each image that has it in front and in bounds.
struct PointProjectionSet {
    std::uint32_t point;
    std::vector<ProjectionEntry> entries;
};

inline PointProjectionSet project_to_views(std::uint32_t index, const Point3& p, std::span<const View> views,
                                           double eps) {
    PointProjectionSet set{index, {}};
    for (std::size_t i = 0; i < views.size(); ++i) {
        const auto& v = views[i];
        const auto pr = project_point(v.camera, p);
        if (!pr) {
            continue;
        }
        const int x = pixel_index(pr->u);
        const int y = pixel_index(pr->v);
        if (!v.depth.contains(x, y)) {
            continue;
        }
        const bool visible = pr->depth <= v.depth(x, y) + eps;
        set.entries.push_back({static_cast<std::uint32_t>(i), pr->u, pr->v, visible ? v.weight(x, y) : 0.0, visible});
    }
    return set;
}

/// The min(k, usable) entries with the largest positive weight, heaviest first, ties by image id.
inline std::vector<ProjectionEntry> select_best_images(const PointProjectionSet& set, int k) {
    if (k < 1) {
        throw InputError("best_k must be >= 1");
    }
    std::vector<ProjectionEntry> usable;
    for (const auto& e : set.entries) {
        if (e.visible && e.weight > 0.0) {
            usable.push_back(e);
        }
    }
    std::sort(usable.begin(), usable.end(), [](const ProjectionEntry& a, const ProjectionEntry& b) {
        return a.weight != b.weight ? a.weight > b.weight : a.image < b.image;
    });
    if (usable.size() > static_cast<std::size_t>(k)) {
        usable.resize(static_cast<std::size_t>(k));
    }
    return usable;
}

struct DisplacementRecord {
    std::uint32_t point;
    std::uint32_t reference;
    std::uint32_t image;
    int dx;
    int dy;
    double error;
};

struct MatchResult {
    int dx = 0;
    int dy = 0;
    double error = 0.0;
    std::size_t evaluations = 0;
};

/// Reusable buffers for block matching, one per worker.
struct MatchScratch {
    std::vector<Vec3> reference;
    std::vector<Vec3> patch;
};

/// Block matching of one point between a reference and a target image.
///
/// The reference block is the n x n YCbCr neighbourhood sampled bilinearly around the
/// point's projection (ru, rv) in the reference. Candidates sit at integer offsets
/// (dx, dy) in [-W, W]^2 around the projection (tu, tv) in the target; candidates whose
/// center pixel falls outside the target are skipped. The winner minimizes the mean of the
/// per-channel mean-subtracted MSE; ties go to the smaller RGB distance between block
/// centers, then to the smaller |dx| + |dy|, then to the lexicographically smaller (dx, dy).
/// Returns nothing when the target projection is more than W pixels off the image.
inline std::optional<MatchResult> local_displacement(const View& ref, double ru, double rv, const View& target,
                                                     double tu, double tv, int block_size, int search_radius,
                                                     MatchScratch& scratch) {
    if (block_size < 1 || block_size % 2 == 0) {
        throw InputError("block side must be a positive odd number");
    }
    if (search_radius < 0) {
        throw InputError("search radius must be >= 0");
    }
    const int r = block_size / 2;
    const int W = search_radius;
    const int tx = pixel_index(tu), ty = pixel_index(tv);
    if (tx < -W || ty < -W || tx > target.rgb.width() - 1 + W || ty > target.rgb.height() - 1 + W) {
        return std::nullopt;
    }
    const std::size_t n2 = static_cast<std::size_t>(block_size) * static_cast<std::size_t>(block_size);
    scratch.reference.resize(n2);
    for (int b = -r, i = 0; b <= r; ++b)
        for (int a = -r; a <= r; ++a) scratch.reference[i++] = sample_bilinear(ref.ycbcr, ru + a, rv + b);

    const int side = block_size + 2 * W;
    scratch.patch.resize(static_cast<std::size_t>(side) * static_cast<std::size_t>(side));
    for (int j = 0; j < side; ++j)
        for (int i = 0; i < side; ++i)
            scratch.patch[static_cast<std::size_t>(j) * side + i] =
                sample_bilinear(target.ycbcr, tu - W - r + i, tv - W - r + j);

    const Rgb ref_center = sample_bilinear(ref.rgb, ru, rv);
    std::optional<MatchResult> best;
    std::optional<double> best_center;
    std::size_t evaluations = 0;
    const double inv = 1.0 / static_cast<double>(n2);
    const auto key = [](int x, int y) { return std::make_tuple(std::abs(x) + std::abs(y), x, y); };
    for (int dy = -W; dy <= W; ++dy) {
        for (int dx = -W; dx <= W; ++dx) {
            if (!target.rgb.contains(pixel_index(tu + dx), pixel_index(tv + dy))) {
                continue;
            }
            ++evaluations;
            // Shifted sums: a constant difference yields exactly zero.
            const Vec3 shift = scratch.reference[0] - scratch.patch[static_cast<std::size_t>(dy + W) * side + (dx + W)];
            Vec3 sum = Vec3::Zero(), sq = Vec3::Zero();
            for (int b = 0; b < block_size; ++b) {
                const Vec3* row = scratch.patch.data() + static_cast<std::size_t>(dy + W + b) * side + (dx + W);
                const Vec3* s = scratch.reference.data() + static_cast<std::size_t>(b) * block_size;
                for (int a = 0; a < block_size; ++a) {
                    const Vec3 d = s[a] - row[a] - shift;
                    sum += d;
                    sq += d.cwiseAbs2();
                }
            }
            const Vec3 mean = sum * inv;
            const Vec3 mse = (sq * inv - mean.cwiseAbs2()).cwiseMax(0.0);
            const double err = match_error(mse);
            const double tol = best ? 1e-12 * std::max(1.0, best->error) : 0.0;
            if (!best || err < best->error - tol) {
                best = MatchResult{dx, dy, err, 0};
                best_center.reset();
                continue;
            }
            if (err > best->error + tol) {
                continue;
            }
            if (!best_center) {
                best_center = (sample_bilinear(target.rgb, tu + best->dx, tv + best->dy) - ref_center).norm();
            }
            const double center = (sample_bilinear(target.rgb, tu + dx, tv + dy) - ref_center).norm();
            if (center < *best_center || (center == *best_center && key(dx, dy) < key(best->dx, best->dy))) {
                best = MatchResult{dx, dy, std::min(err, best->error), 0};
                best_center = center;
            }
        }
    }
    if (!best) {
        return std::nullopt;
    }
    best->evaluations = evaluations;
    return best;
}

inline std::optional<MatchResult> local_displacement(const View& ref, double ru, double rv, const View& target,
                                                     double tu, double tv, int block_size, int search_radius) {
    MatchScratch scratch;
    return local_displacement(ref, ru, rv, target, tu, tv, block_size, search_radius, scratch);
}

struct Contribution {
    Rgb color;
    double weight;
};

/// Weighted mean of the contributions; nothing when the weights sum to zero.
inline std::optional<Rgb> blend_point_color(std::span<const Contribution> parts) {
    double total = 0.0;
    Rgb acc = Rgb::Zero();
    for (const auto& c : parts) {
        acc += c.weight * c.color;
        total += c.weight;
    }
    if (!(total > 0.0)) {
        return std::nullopt;
    }
    return (acc / total).cwiseMax(0.0).cwiseMin(1.0);
}

struct ColoredPoint {
    std::uint32_t point;
    Rgb rgb;
    int contributors = 0;
    bool colored = false;
};

struct ColorizeReport {
    std::size_t points = 0;
    std::size_t colored = 0;
    std::vector<std::uint32_t> uncolored;
    /// Count of accepted displacements per (dx, dy), reference images excluded.
    std::map<std::pair<int, int>, std::size_t> displacement_histogram;
    std::size_t displacement_searches = 0;
    std::size_t no_match = 0;
    std::size_t block_evaluations = 0;
    std::size_t max_point_evaluations = 0;
    /// Point with only one usable image; these run no search.
    std::size_t single_view_points = 0;
    double seconds = 0.0;
};

struct ColorizeResult {
    PointCloud cloud;
    std::vector<ColoredPoint> points;
    std::vector<DisplacementRecord> displacements;
    std::vector<std::size_t> evaluations;  // per point
    ColorizeReport report;
};

namespace detail {

struct PointOutcome {
    ColoredPoint colored;
    std::vector<DisplacementRecord> records;
    std::size_t searches = 0;
    std::size_t no_match = 0;
    std::size_t evaluations = 0;
};

inline PointOutcome colorize_point(std::uint32_t index, const Point3& p, std::span<const View> views,
                                   const ColorizeConfig& cfg, MatchScratch& scratch) {
    PointOutcome out;
    out.colored = {index, cfg.uncolored_color, 0, false};
    const auto best = select_best_images(project_to_views(index, p, views, cfg.visibility_eps), cfg.best_k);
    if (best.empty()) {
        return out;
    }
    const auto& ref = best.front();
    std::vector<Contribution> parts;
    parts.push_back({sample_bilinear(views[ref.image].rgb, ref.u, ref.v), ref.weight});
    out.records.push_back({index, ref.image, ref.image, 0, 0, 0.0});
    for (std::size_t i = 1; i < best.size(); ++i) {
        const auto& t = best[i];
        int dx = 0, dy = 0;
        double err = 0.0;
        if (cfg.local_correction) {
            ++out.searches;
            const auto m = local_displacement(views[ref.image], ref.u, ref.v, views[t.image], t.u, t.v,
                                              cfg.block_size, cfg.search_radius, scratch);
            if (!m) {
                ++out.no_match;
                continue;
            }
            out.evaluations += m->evaluations;
            dx = m->dx;
            dy = m->dy;
            err = m->error;
        }
        out.records.push_back({index, ref.image, t.image, dx, dy, err});
        parts.push_back({sample_bilinear(views[t.image].rgb, t.u + dx, t.v + dy), t.weight});
    }
    if (const auto c = blend_point_color(parts)) {
        out.colored = {index, *c, static_cast<int>(parts.size()), true};
    }
    return out;
}

} // namespace detail

/// Colors every scan point from the views: best-k selection, block-matching correction of
/// each non-reference image against the heaviest one, then the weighted blend. Output
/// order and values do not depend on the thread count.
inline ColorizeResult colorize_cloud(const PointCloud& scan, std::span<const View> views, const ColorizeConfig& cfg) {
    if (cfg.best_k < 1) throw InputError("best_k must be >= 1");
    if (cfg.block_size < 1 || cfg.block_size % 2 == 0) throw InputError("block side must be a positive odd number");
    if (cfg.search_radius < 0) throw InputError("search radius must be >= 0");
    const auto start = std::chrono::steady_clock::now();
    std::vector<detail::PointOutcome> outcomes(scan.size());
    unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, scan.size() / 64)));
    auto work = [&](std::size_t begin, std::size_t end) {
        MatchScratch scratch;
        for (std::size_t i = begin; i < end; ++i) {
            outcomes[i] = detail::colorize_point(static_cast<std::uint32_t>(i), scan.points[i], views, cfg, scratch);
        }
    };
    if (threads <= 1) {
        work(0, scan.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (scan.size() + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            const std::size_t b = t * chunk, e = std::min(scan.size(), b + chunk);
            if (b < e) pool.emplace_back(work, b, e);
        }
        for (auto& th : pool) th.join();
    }

    ColorizeResult res;
    res.cloud = scan;
    res.cloud.colors.emplace(scan.size());
    auto& rep = res.report;
    rep.points = scan.size();
    res.evaluations.resize(scan.size());
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        auto& o = outcomes[i];
        (*res.cloud.colors)[i] = o.colored.rgb;
        if (o.colored.colored) {
            ++rep.colored;
            if (o.colored.contributors == 1 && o.searches == 0) ++rep.single_view_points;
        } else {
            rep.uncolored.push_back(static_cast<std::uint32_t>(i));
        }
        for (const auto& d : o.records) {
            if (d.image != d.reference) ++rep.displacement_histogram[{d.dx, d.dy}];
        }
        rep.displacement_searches += o.searches;
        rep.no_match += o.no_match;
        rep.block_evaluations += o.evaluations;
        rep.max_point_evaluations = std::max(rep.max_point_evaluations, o.evaluations);
        res.evaluations[i] = o.evaluations;
        res.points.push_back(o.colored);
        res.displacements.insert(res.displacements.end(), o.records.begin(), o.records.end());
    }
    if (rep.colored == 0 && !scan.empty()) {
        throw InputError("no camera sees any scan point");
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

/// "point,image,dx,dy,error"; each point's reference image comes first with a zero row.
inline std::string displacement_csv(std::span<const DisplacementRecord> records) {
    std::string out = "point,image,dx,dy,error\n";
    char buf[64];
    for (const auto& r : records) {
        const int n = std::snprintf(buf, sizeof(buf), "%u,%u,%d,%d,%.9g\n", r.point, r.image, r.dx, r.dy, r.error);
        out.append(buf, static_cast<std::size_t>(n));
    }
    return out;
}

} // namespace photofuse
