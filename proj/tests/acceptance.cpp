// Acceptance run: one PASS/FAIL line per criterion, tolerances pinned below.
//
// Usage: acceptance [--expect-fail N]...
// Exit status is 0 when every criterion passes except those named by --expect-fail, which
// are still executed and reported as they come out.

#include <photofuse/block.hpp>
#include <photofuse/bundler.hpp>
#include <photofuse/evaluate.hpp>
#include <photofuse/kdtree.hpp>
#include <photofuse/masks.hpp>
#include <photofuse/pipeline.hpp>
#include <photofuse/ply.hpp>
#include <photofuse/registration.hpp>
#include <photofuse/scene_io.hpp>
#include <photofuse/synth.hpp>
#include <photofuse/text_io.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

using namespace photofuse;
namespace fs = std::filesystem;

namespace {

// Criterion 1
constexpr int kSicpTrials = 20;
constexpr std::size_t kSicpPoints = 5000;
constexpr double kSicpScaleMin = 0.1, kSicpScaleMax = 10.0;
constexpr double kSicpMaxRotation = 0.35;  // radians, random axis
constexpr double kSicpTol = 1e-4;
constexpr double kSicpSeconds = 10.0;
// Criteria 2-3
constexpr double kRecoveryRate = 0.95;
constexpr double kShiftedColorMean = 4.0;
constexpr std::size_t kShiftedCamera = 2;
// Criterion 4
constexpr double kExactMean = 2.0, kExactP95 = 6.0, kExactSeconds = 60.0;
// Criterion 5
constexpr int kBrightnessBlocks = 1000;
constexpr int kTriples = 1000;
// Criterion 6
constexpr int kNearestInstances = 50;
constexpr std::size_t kNearestPoints = 500;
constexpr double kRenderTol = 2.0 / 255.0, kRenderFraction = 0.99;
// Criterion 7
constexpr int kPlyClouds = 100;
constexpr double kBundlerTol = 1e-9;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::set<int> g_expected_fail;
int g_unexpected = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
    std::printf("%s %d %s: %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
    std::fflush(stdout);
    if (!pass && !g_expected_fail.count(id)) ++g_unexpected;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

fs::path work_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / "photofuse_acceptance" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

RunConfig run_config(const fs::path& scene, const fs::path& out) {
    RunConfig c;
    c.scan = (scene / "scan.ply").string();
    c.bundle = (scene / "bundle.out").string();
    c.images = (scene / "images").string();
    c.output = out.string();
    c.coarse = CoarseMode::correspondences;
    c.correspondences = (scene / "correspondences.txt").string();
    return c;
}

/// Closed bumpy surface with three unequal axes, sampled at random directions.
PointCloud lumpy_cloud(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
    Vec3 k[4];
    double ph[4];
    for (int i = 0; i < 4; ++i) {
        k[i] = Vec3(g(rng), g(rng), g(rng)) * 1.5;
        ph[i] = u(rng);
    }
    PointCloud c;
    while (c.size() < n) {
        Vec3 d(g(rng), g(rng), g(rng));
        if (d.norm() < 1e-9) continue;
        d.normalize();
        double r = 1.0;
        for (int i = 0; i < 4; ++i) r += 0.12 * std::sin(k[i].dot(d) + ph[i]);
        c.points.push_back(Point3(1.0 * d.x(), 0.7 * d.y(), 0.45 * d.z()) * r);
    }
    return c;
}

void criterion_sicp() {
    std::mt19937_64 rng(1001);
    std::uniform_real_distribution<double> ls(std::log(kSicpScaleMin), std::log(kSicpScaleMax));
    std::uniform_real_distribution<double> ang(0.0, kSicpMaxRotation);
    std::normal_distribution<double> g;
    int ok = 0;
    bool monotone = true;
    double worst_s = 0, worst_r = 0, worst_t = 0, worst_time = 0;
    for (int trial = 0; trial < kSicpTrials; ++trial) {
        const auto target = lumpy_cloud(rng, kSicpPoints);
        const SimilarityTransform truth(std::exp(ls(rng)), axis_angle(Vec3(g(rng), g(rng), g(rng)), ang(rng)),
                                        Vec3(g(rng), g(rng), g(rng)) * 3.0);
        const auto source = apply_transform(truth, target);
        const auto t0 = Clock::now();
        const auto rep = sicp_register(source, target, coarse_align_bbox(source, target));
        const double secs = seconds_since(t0);
        const auto want = invert(truth);
        const double es = std::abs(rep.transform.scale() / want.scale() - 1.0);
        const double er = rotation_angle_between(rep.transform.rotation(), want.rotation());
        const double et = (rep.transform.translation() - want.translation()).norm() / compute_aabb(target).diagonal();
        for (std::size_t i = 1; i < rep.rmse_trace.size(); ++i) monotone = monotone && rep.rmse_trace[i] <= rep.rmse_trace[i - 1];
        worst_s = std::max(worst_s, es);
        worst_r = std::max(worst_r, er);
        worst_t = std::max(worst_t, et);
        worst_time = std::max(worst_time, secs);
        ok += es < kSicpTol && er < kSicpTol && et < kSicpTol && secs < kSicpSeconds;
    }
    report(1, "sicp_recovery", ok == kSicpTrials && monotone,
           fmt("%d/%d trials within %.0e; worst scale %.2e rot %.2e rad trans %.2e diag; slowest %.2f s; rmse "
               "nonincreasing: %s",
               ok, kSicpTrials, kSicpTol, worst_s, worst_r, worst_t, worst_time, monotone ? "yes" : "no"));
}

void criteria_shifted() {
    const std::pair<double, double> shifts[] = {{4, -2}, {-4, 2}, {10, 0}, {0, 10}};
    bool rec_ok = true, ab_ok = true;
    std::string rec_detail, ab_detail;
    for (const auto& [dx, dy] : shifts) {
        SceneSpec spec;
        spec.kind = SceneKind::plane;
        spec.images = 3;
        Perturbation p;
        p.camera = kShiftedCamera;
        p.dx = dx;
        p.dy = dy;
        const auto tag = fmt("shift_%+g_%+g", dx, dy);
        const auto scene = work_dir(tag + "_scene");
        export_scene(perturb_scene(generate_scene(7, spec), p), scene);
        const auto on = work_dir(tag + "_on"), off = work_dir(tag + "_off");
        run_pipeline(run_config(scene, on), Stage::fuse);
        auto c = run_config(scene, off);
        c.local_correction = false;
        run_pipeline(c, Stage::fuse);
        const auto with = evaluate_run(scene, on), without = evaluate_run(scene, off);
        const double rate = with.recovery ? with.recovery->rate() : 0.0;
        rec_ok = rec_ok && with.recovery && with.recovery->textured > 0 && rate >= kRecoveryRate;
        rec_detail += fmt("(%+g,%+g) %.4f of %zu; ", dx, dy, rate, with.recovery ? with.recovery->textured : 0);
        ab_ok = ab_ok && with.color->mean < without.color->mean && with.color->mean < kShiftedColorMean;
        ab_detail += fmt("(%+g,%+g) %.3f vs %.3f; ", dx, dy, with.color->mean, without.color->mean);
    }
    report(2, "displacement_recovery", rec_ok, fmt("rate >= %.2f within 1 px: ", kRecoveryRate) + rec_detail);
    report(3, "correction_ab", ab_ok,
           fmt("mean error/255 corrected vs uncorrected, corrected < %.0f: ", kShiftedColorMean) + ab_detail);
}

struct ExactRun {
    fs::path scene;
    fs::path run;
};

ExactRun criterion_exact() {
    ExactRun r{work_dir("exact_scene"), work_dir("exact_run")};
    const auto t0 = Clock::now();
    export_scene(generate_scene(42), r.scene);
    const double synth_secs = seconds_since(t0);
    const auto t1 = Clock::now();
    run_pipeline(run_config(r.scene, r.run), Stage::fuse);
    const double fuse_secs = seconds_since(t1);
    const auto s = evaluate_run(r.scene, r.run);
    const bool all = s.colored == s.points;
    auto plain = run_config(r.scene, work_dir("exact_run_uncorrected"));
    plain.local_correction = false;
    run_pipeline(plain, Stage::fuse);
    const auto u = evaluate_run(r.scene, plain.output);
    const bool pass = all && s.color->mean < kExactMean && s.color->p95 < kExactP95 && fuse_secs < kExactSeconds;
    report(4, "exact_pipeline", pass,
           fmt("colored %zu/%zu; mean %.3f/255 (< %.0f); p95 %.3f/255 (< %.0f); fuse %.2f s (< %.0f), synth %.2f s; "
               "without correction mean %.3f p95 %.3f",
               s.colored, s.points, s.color->mean, kExactMean, s.color->p95, kExactP95, fuse_secs, kExactSeconds,
               synth_secs, u.color->mean, u.color->p95));
    return r;
}

void criterion_brightness() {
    std::mt19937_64 rng(5005);
    // Dyadic samples and offsets keep every sum exact, so equality is meaningful.
    std::uniform_int_distribution<int> level(0, 1024), shift(-512, 512);
    std::uniform_int_distribution<int> side(0, 4);
    int exact = 0;
    for (int i = 0; i < kBrightnessBlocks; ++i) {
        const int n = 2 * side(rng) + 1;
        const Vec3 k(shift(rng) / 1024.0, shift(rng) / 1024.0, shift(rng) / 1024.0);
        std::vector<Vec3> s, t;
        for (int j = 0; j < n * n; ++j) {
            s.emplace_back(level(rng) / 1024.0, level(rng) / 1024.0, level(rng) / 1024.0);
            t.push_back(s.back() + k);
        }
        exact += block_mse(Block(n, s), Block(n, t)) == Vec3::Zero();
    }
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int sym = 0, nonneg = 0;
    for (int i = 0; i < kTriples; ++i) {
        std::vector<Vec3> a, b, c;
        for (int j = 0; j < 49; ++j) {
            a.emplace_back(u(rng), u(rng), u(rng));
            b.emplace_back(u(rng), u(rng), u(rng));
            c.emplace_back(u(rng), u(rng), u(rng));
        }
        const Block ba(7, a), bb(7, b), bc(7, c);
        sym += match_error(block_mse(ba, bb)) == match_error(block_mse(bb, ba)) &&
               match_error(block_mse(bb, bc)) == match_error(block_mse(bc, bb)) &&
               match_error(block_mse(ba, bc)) == match_error(block_mse(bc, ba));
        nonneg += match_error(block_mse(ba, bb)) >= 0.0 && match_error(block_mse(bb, bc)) >= 0.0 &&
                  match_error(block_mse(ba, bc)) >= 0.0 && match_error(block_mse(ba, ba)) == 0.0;
    }
    report(5, "brightness_invariance",
           exact == kBrightnessBlocks && sym == kTriples && nonneg == kTriples,
           fmt("block_mse(S,S+k)==0 on %d/%d blocks; symmetric %d/%d and nonnegative %d/%d triples", exact,
               kBrightnessBlocks, sym, kTriples, nonneg, kTriples));
}

void criterion_oracles(const ExactRun& exact) {
    std::mt19937_64 rng(6006);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int nn_ok = 0;
    for (int inst = 0; inst < kNearestInstances; ++inst) {
        PointCloud a, b;
        for (std::size_t i = 0; i < kNearestPoints; ++i) {
            a.points.emplace_back(u(rng), u(rng), u(rng));
            b.points.emplace_back(u(rng), u(rng), u(rng));
        }
        const auto got = nearest_correspondences(a, b);
        bool same = got.size() == a.size();
        for (std::size_t i = 0; same && i < a.size(); ++i) {
            std::uint32_t best = 0;
            double bd = (a.points[i] - b.points[0]).squaredNorm();
            for (std::uint32_t j = 1; j < b.size(); ++j) {
                const double d = (a.points[i] - b.points[j]).squaredNorm();
                if (d < bd) {
                    bd = d;
                    best = j;
                }
            }
            same = got[i].source == i && got[i].target == best && got[i].sq_dist == bd;
        }
        nn_ok += same;
    }

    const auto scan = load_scan(exact.scene / "scan.ply");
    const auto truth = load_truth(exact.scene);
    std::size_t mask_px = 0, mask_same = 0;
    for (const auto& cam : truth.true_cameras) {
        const auto vm = compute_view_masks(scan, cam, MaskParams{}, RenderOptions{});
        for (std::size_t i = 0; i < vm.combined.size(); ++i) {
            const double want = vm.angle.data()[i] * vm.depth_weight.data()[i] * vm.border.data()[i];
            ++mask_px;
            mask_same += std::memcmp(&want, &vm.combined.data()[i], sizeof(double)) == 0;
        }
    }

    double worst_fraction = 1.0;
    for (auto kind : {SceneKind::vase, SceneKind::sphere, SceneKind::plane}) {
        SceneSpec spec;
        spec.kind = kind;
        const auto s = generate_scene(17, spec);
        const RayCaster rc(s.mesh);
        for (std::size_t c = 0; c < s.true_cameras.size(); ++c) {
            const Image traced = rc.render(s.true_cameras[c], s.texture);
            std::size_t close = 0;
            for (std::size_t i = 0; i < traced.size(); ++i) {
                close += (traced.data()[i] - s.images[c].data()[i]).cwiseAbs().maxCoeff() <= kRenderTol;
            }
            worst_fraction = std::min(worst_fraction, static_cast<double>(close) / static_cast<double>(traced.size()));
        }
    }
    report(6, "oracle_equivalence",
           nn_ok == kNearestInstances && mask_same == mask_px && worst_fraction >= kRenderFraction,
           fmt("nearest vs exhaustive %d/%d instances; combined mask bit-identical %zu/%zu px; raster vs ray cast "
               "worst view %.4f within 2/255 (>= %.2f)",
               nn_ok, kNearestInstances, mask_same, mask_px, worst_fraction, kRenderFraction));
}

void criterion_parsers() {
    std::mt19937_64 rng(7007);
    std::uniform_real_distribution<double> u(-1e4, 1e4);
    std::uniform_int_distribution<int> count(1, 300);
    int ply_ok = 0;
    for (int i = 0; i < kPlyClouds; ++i) {
        PointCloud c;
        const int n = count(rng);
        for (int j = 0; j < n; ++j) c.points.emplace_back(u(rng), u(rng), u(rng));
        bool same = true;
        for (auto enc : {PlyEncoding::ascii, PlyEncoding::binary_little_endian}) {
            const auto back = std::get<PointCloud>(parse_ply(write_ply(c, enc)));
            same = same && back.points == c.points;
        }
        ply_ok += same;
    }

    const char* bundle =
        "# Bundle file v0.3\n"
        "1 2\n"
        "812.5 -0.031 0.0045\n"
        "0.36 0.48 -0.8\n-0.8 0.6 0\n0.48 0.64 0.6\n"
        "0.25 -1.5 -6.75\n"
        "0.125 -2.5 3\n255 0 64\n1 0 3 -10.5 20.25\n"
        "1.5 0.5 -0.75\n10 20 30\n1 0 9 4 -8\n";
    const auto rec = parse_bundler(bundle, {{800, 600}});
    Mat3 r;
    r << 0.36, 0.48, -0.8, -0.8, 0.6, 0, 0.48, 0.64, 0.6;
    const auto& raw = rec.raw_cameras.at(0);
    bool literals = raw.focal == 812.5 && raw.k1 == -0.031 && raw.k2 == 0.0045 && raw.rotation == r &&
                    raw.translation == Vec3(0.25, -1.5, -6.75) && rec.sparse_points.size() == 2 &&
                    rec.sparse_points.points[0] == Point3(0.125, -2.5, 3) &&
                    rec.sparse_points.points[1] == Point3(1.5, 0.5, -0.75) && rec.views.at(0).at(0).key == 3 &&
                    rec.views.at(0).at(0).x == -10.5 && rec.views.at(1).at(0).y == -8;
    const auto back = to_bundler(*rec.cameras.at(0));
    const double recon = std::max({(back.rotation - raw.rotation).cwiseAbs().maxCoeff(),
                                   (back.translation - raw.translation).cwiseAbs().maxCoeff(),
                                   std::abs(back.focal - raw.focal), std::abs(back.k1 - raw.k1),
                                   std::abs(back.k2 - raw.k2)});

    std::vector<PointPair> pairs;
    for (int i = 0; i < 25; ++i) pairs.emplace_back(Point3(u(rng), u(rng), u(rng)), Point3(u(rng), u(rng), u(rng)));
    const bool corr = parse_correspondences(write_correspondences(pairs)) == pairs;

    report(7, "parser_round_trips", ply_ok == kPlyClouds && literals && recon <= kBundlerTol && corr,
           fmt("PLY bit-exact %d/%d clouds (ascii and binary); Bundler literals %s, reconversion max diff %.1e (<= "
               "%.0e); correspondences exact: %s",
               ply_ok, kPlyClouds, literals ? "match" : "differ", recon, kBundlerTol, corr ? "yes" : "no"));
}

void criterion_determinism(const ExactRun& exact) {
    const auto a = work_dir("det_a"), b = work_dir("det_b");
    run_pipeline(run_config(exact.scene, a), Stage::fuse);
    run_pipeline(run_config(exact.scene, b), Stage::fuse);
    bool same = true;
    std::string detail;
    for (auto f : {"colored.ply", "report.json", "transform.txt", "displacements.csv"}) {
        const bool eq = read_file(a / f) == read_file(b / f);
        same = same && eq;
        detail += fmt("%s %s; ", f, eq ? "identical" : "DIFFERENT");
    }
    report(8, "determinism", same, detail);
}

void criterion_work_bound(const ExactRun& exact) {
    auto cfg = run_config(exact.scene, exact.run);
    cfg.best_k = 3;
    cfg.search_radius = 15;
    const auto scan = load_scan(cfg.scan);
    auto images = load_image_dir(cfg.images);
    const auto rec = load_bundle(cfg.bundle, &images);
    const auto t = parse_transform(read_file(exact.run / "transform.txt"));
    const auto built = build_views(scan, scan_frame_cameras(rec, t), std::move(images.images), cfg, std::nullopt);
    const auto ccfg = colorize_config(cfg, scan.vertices);
    const auto result = colorize_cloud(scan.vertices, built.views, ccfg);
    const std::size_t side = 2 * 15 + 1, bound = (3 - 1) * side * side;
    std::size_t over = 0, single = 0, single_nonzero = 0, max_eval = 0, multi = 0;
    for (std::uint32_t i = 0; i < scan.vertices.size(); ++i) {
        const auto usable =
            select_best_images(project_to_views(i, scan.vertices.points[i], built.views, ccfg.visibility_eps), 3).size();
        const std::size_t e = result.evaluations[i];
        max_eval = std::max(max_eval, e);
        over += e > bound;
        if (usable == 1) {
            ++single;
            single_nonzero += e != 0;
        }
        multi += usable > 1;
    }
    SceneSpec one;
    one.images = 1;
    const auto s1 = work_dir("single_scene"), r1 = work_dir("single_run");
    export_scene(generate_scene(9, one), s1);
    const auto rep1 = run_pipeline(run_config(s1, r1), Stage::fuse);
    const auto single_cam_evals = rep1.at("colorize").at("block_evaluations").get<std::size_t>();
    report(9, "work_bound", over == 0 && single_nonzero == 0 && single_cam_evals == 0 && multi > 0,
           fmt("max %zu evaluations per point (bound %zu), %zu over; %zu single-view points with %zu nonzero; "
               "one-camera scene %zu evaluations",
               max_eval, bound, over, single, single_nonzero, single_cam_evals));
}

} // namespace

int main(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--expect-fail" && i + 1 < argc) {
            g_expected_fail.insert(std::atoi(argv[++i]));
        } else {
            std::fprintf(stderr, "usage: acceptance [--expect-fail N]...\n");
            return 1;
        }
    }
    try {
        criterion_sicp();
        criteria_shifted();
        const auto exact = criterion_exact();
        criterion_brightness();
        criterion_oracles(exact);
        criterion_parsers();
        criterion_determinism(exact);
        criterion_work_bound(exact);
    } catch (const std::exception& e) {
        std::printf("FAIL acceptance aborted: %s\n", e.what());
        return 1;
    }
    for (int id : g_expected_fail) std::printf("note: criterion %d is listed as a known failure\n", id);
    return g_unexpected == 0 ? 0 : 1;
}
