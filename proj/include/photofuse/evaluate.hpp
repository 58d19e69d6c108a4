#pragma once

// Scores a run directory against the synthetic scene it was produced from.

#include <photofuse/masks.hpp>
#include <photofuse/pipeline.hpp>
#include <photofuse/scene_io.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace photofuse {

/// Pass thresholds. Colors are Euclidean RGB distances in units of 1/255.
struct ScoreThresholds {
    double exact_color_mean = 2.0;
    double exact_color_p95 = 6.0;
    double shifted_color_mean = 4.0;
    double transform = 1e-4;
    double recovery = 0.95;
    double recovery_radius_px = 1.0;
};

struct TransformScore {
    double scale_rel = 0.0;
    double rotation_rad = 0.0;
    double translation_rel = 0.0;  // |t - t*| / scan bounding-box diagonal
};

struct RecoveryScore {
    std::size_t textured = 0;
    std::size_t recovered = 0;
    double rate() const { return textured ? static_cast<double>(recovered) / static_cast<double>(textured) : 0.0; }
};

struct ColorScore {
    std::size_t count = 0;
    double mean = 0.0;
    double p95 = 0.0;
    double max = 0.0;
};

struct ScoreReport {
    std::size_t points = 0;
    std::size_t colored = 0;
    std::optional<TransformScore> transform;
    std::optional<RecoveryScore> recovery;
    std::optional<ColorScore> color;
    bool shifted = false;
    /// Named pass/fail checks that apply to this scene; `pass` is their conjunction.
    std::vector<std::pair<std::string, bool>> checks;
    bool pass = true;
};

inline TransformScore score_transform(const SimilarityTransform& got, const SimilarityTransform& want, double diag) {
    return {std::abs(got.scale() / want.scale() - 1.0), rotation_angle_between(got.rotation(), want.rotation()),
            (got.translation() - want.translation()).norm() / diag};
}

/// Sorted per-point errors, mean and nearest-rank 95th percentile.
inline ColorScore score_colors(std::vector<double> err) {
    ColorScore s;
    s.count = err.size();
    if (err.empty()) return s;
    std::sort(err.begin(), err.end());
    double sum = 0.0;
    for (double e : err) sum += e;
    s.mean = sum / static_cast<double>(err.size());
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(err.size())));
    s.p95 = err[std::max<std::size_t>(rank, 1) - 1];
    s.max = err.back();
    return s;
}

/// Pixels at least `margin` (city-block) away from the image edge and from any pixel the
/// surface does not cover.
inline Grid<double> interior_distance(const DepthMap& depth) {
    Grid<unsigned char> seeds(depth.width(), depth.height(), 0);
    for (int y = 0; y < depth.height(); ++y)
        for (int x = 0; x < depth.width(); ++x) seeds(x, y) = !depth.covered(x, y);
    auto d = city_block_distance(seeds);
    for (int y = 0; y < d.height(); ++y)
        for (int x = 0; x < d.width(); ++x) {
            const double edge = 1.0 + std::min({x, y, d.width() - 1 - x, d.height() - 1 - y});
            d(x, y) = std::min(d(x, y), edge);
        }
    return d;
}

struct DisplacementRow {
    std::uint32_t point;
    std::uint32_t image;
    int dx;
    int dy;
};

/// Rows of displacements.csv; the first row of each point is its reference image.
inline std::vector<DisplacementRow> parse_displacements(std::string_view bytes) {
    std::vector<DisplacementRow> out;
    text_detail::for_each_line(bytes, [&](std::string_view line, std::size_t no) {
        if (no == 1 || line.empty()) return;
        const auto v = text_detail::numbers(line, no);
        if (v.size() != 5) throw ParseError("displacement row needs 5 fields", no);
        out.push_back({static_cast<std::uint32_t>(v[0]), static_cast<std::uint32_t>(v[1]), static_cast<int>(v[2]),
                       static_cast<int>(v[3])});
    });
    return out;
}

/// Fraction of textured point/image pairs whose search found the injected shift.
///
/// A pair counts when its expected displacement is nonzero and the point's true projection
/// lies at least W + B/2 + 1 pixels inside the rendered surface in both the reference and the
/// target photograph, so that every candidate block lies on texture.
inline RecoveryScore score_recovery(const SceneTruth& truth, const TriangleMesh& scan,
                                    const std::vector<DisplacementRow>& rows, int block_size, int search_radius,
                                    double radius_px) {
    std::vector<Grid<double>> inside;
    for (const auto& cam : truth.true_cameras) inside.push_back(interior_distance(rasterize(scan, cam).depth));
    const double margin = search_radius + block_size / 2 + 1;
    auto interior = [&](std::uint32_t point, std::uint32_t image) {
        const auto pr = project_point(truth.true_cameras[image], scan.vertices.points[point]);
        if (!pr) return false;
        const int x = pixel_index(pr->u), y = pixel_index(pr->v);
        return inside[image].contains(x, y) && inside[image](x, y) >= margin;
    };
    RecoveryScore s;
    std::uint32_t current = std::numeric_limits<std::uint32_t>::max(), ref = 0;
    for (const auto& r : rows) {
        if (r.point != current) {
            current = r.point;
            ref = r.image;
            continue;
        }
        if (r.point >= scan.vertices.size() || r.image >= truth.true_cameras.size()) {
            throw InputError("displacement row references a point or image outside the scene");
        }
        const auto& er = truth.principal_errors[ref];
        const auto& et = truth.principal_errors[r.image];
        const double ex = -(et[0] - er[0]), ey = -(et[1] - er[1]);
        if (ex == 0.0 && ey == 0.0) continue;
        if (!interior(r.point, ref) || !interior(r.point, r.image)) continue;
        ++s.textured;
        s.recovered += std::hypot(r.dx - ex, r.dy - ey) <= radius_px;
    }
    return s;
}

/// Scores `run_dir` (a colorize, register or fuse output) against `scene_dir`.
inline ScoreReport evaluate_run(const std::filesystem::path& scene_dir, const std::filesystem::path& run_dir,
                                const ScoreThresholds& th = {}) {
    const auto truth = load_truth(scene_dir);
    const auto scan = load_scan(scene_dir / "scan.ply");
    if (truth.colors.size() != scan.vertices.size()) {
        throw InputError("truth colors do not match the scan's point count");
    }
    nlohmann::json report, config;
    try {
        report = nlohmann::json::parse(read_file(run_dir / "report.json"));
        config = nlohmann::json::parse(read_file(run_dir / "config.json"));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("run report is not valid JSON: ") + e.what());
    }
    RunConfig cfg;
    merge_json(cfg, config);

    ScoreReport out;
    out.points = scan.vertices.size();
    for (const auto& e : truth.principal_errors) out.shifted = out.shifted || e[0] != 0.0 || e[1] != 0.0;
    const double diag = compute_aabb(scan.vertices).diagonal();

    if (std::filesystem::exists(run_dir / "transform.txt")) {
        const auto t = parse_transform(read_file(run_dir / "transform.txt"));
        out.transform = score_transform(t, truth.expected_transform, diag);
        const auto& ts = *out.transform;
        out.checks.emplace_back("transform",
                                ts.scale_rel < th.transform && ts.rotation_rad < th.transform && ts.translation_rel < th.transform);
    }

    if (std::filesystem::exists(run_dir / "colored.ply")) {
        const auto colored = as_mesh(load_ply(run_dir / "colored.ply")).vertices;
        if (colored.size() != scan.vertices.size() || !colored.colors) {
            throw InputError("colored cloud has " + std::to_string(colored.size()) + " points, scene has " +
                             std::to_string(scan.vertices.size()));
        }
        std::vector<bool> skip(colored.size(), false);
        for (const auto& i : report.at("colorize").at("uncolored")) skip.at(i.get<std::size_t>()) = true;
        std::vector<double> err;
        for (std::size_t i = 0; i < colored.size(); ++i) {
            if (skip[i]) continue;
            err.push_back(((*colored.colors)[i] - truth.colors[i]).norm() * 255.0);
        }
        out.colored = err.size();
        out.color = score_colors(std::move(err));
        if (out.shifted) {
            out.checks.emplace_back("color_mean_shifted", out.color->mean < th.shifted_color_mean);
            if (cfg.local_correction) {
                out.recovery = score_recovery(truth, scan, parse_displacements(read_file(run_dir / "displacements.csv")),
                                              cfg.block_size, cfg.search_radius, th.recovery_radius_px);
                out.checks.emplace_back("recovery", out.recovery->rate() >= th.recovery);
            }
        } else {
            out.checks.emplace_back("all_colored", out.colored == out.points);
            out.checks.emplace_back("color_mean", out.color->mean < th.exact_color_mean);
            out.checks.emplace_back("color_p95", out.color->p95 < th.exact_color_p95);
        }
    }
    for (const auto& [name, ok] : out.checks) out.pass = out.pass && ok;
    return out;
}

inline nlohmann::json to_json(const ScoreReport& s) {
    nlohmann::json j;
    j["points"] = s.points;
    j["colored"] = s.colored;
    j["colored_fraction"] = s.points ? static_cast<double>(s.colored) / static_cast<double>(s.points) : 0.0;
    j["shifted_scene"] = s.shifted;
    if (s.transform) {
        j["transform"] = {{"scale_rel_error", s.transform->scale_rel},
                          {"rotation_error_rad", s.transform->rotation_rad},
                          {"translation_rel_error", s.transform->translation_rel}};
    }
    if (s.recovery) {
        j["recovery"] = {{"textured_pairs", s.recovery->textured},
                         {"recovered", s.recovery->recovered},
                         {"rate", s.recovery->rate()}};
    }
    if (s.color) {
        j["color_error_255"] = {{"count", s.color->count}, {"mean", s.color->mean}, {"p95", s.color->p95},
                                {"max", s.color->max}};
    }
    j["checks"] = nlohmann::json::object();
    for (const auto& [name, ok] : s.checks) j["checks"][name] = ok;
    j["pass"] = s.pass;
    return j;
}

} // namespace photofuse
