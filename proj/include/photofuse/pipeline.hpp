#pragma once

// End-to-end runs: file loading, registration, mask rendering with an on-disk cache,
// colorization, and the run directory with its manifest.

#include <photofuse/bundler.hpp>
#include <photofuse/colorize.hpp>
#include <photofuse/config.hpp>
#include <photofuse/enhance.hpp>
#include <photofuse/file_util.hpp>
#include <photofuse/image_io.hpp>
#include <photofuse/masks.hpp>
#include <photofuse/ply.hpp>
#include <photofuse/registration.hpp>
#include <photofuse/text_io.hpp>

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace photofuse {

namespace fs = std::filesystem;

inline constexpr const char* kCacheEnv = "PHOTOFUSE_CACHE_DIR";

struct ImageSet {
    std::vector<std::string> names;
    std::vector<Image> images;
};

/// Every .png and .ppm file of `dir`, in lexicographic file-name order.
inline ImageSet load_image_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw InputError("image directory not found: " + dir.string());
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        auto ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png" || ext == ".ppm") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        throw InputError("no .png or .ppm images in " + dir.string());
    }
    ImageSet set;
    for (const auto& f : files) {
        set.names.push_back(f.filename().string());
        set.images.push_back(load_image(f));
    }
    return set;
}

inline std::vector<ImageSize> image_sizes(const ImageSet& set) {
    std::vector<ImageSize> out;
    for (const auto& im : set.images) out.push_back({im.width(), im.height()});
    return out;
}

inline TriangleMesh load_scan(const fs::path& path) {
    auto mesh = as_mesh(load_ply(path));
    if (mesh.vertices.empty()) {
        throw InputError("scan has no vertices: " + path.string());
    }
    return mesh;
}

/// Bundle file read against the image set; one image per camera, in order.
inline BundlerReconstruction load_bundle(const fs::path& path, const ImageSet* images) {
    const auto bytes = read_file(path);
    if (!images) {
        return parse_bundler(bytes, {{1, 1}});
    }
    auto rec = parse_bundler(bytes, image_sizes(*images));
    if (rec.cameras.size() != images->images.size()) {
        throw InputError("bundle has " + std::to_string(rec.cameras.size()) + " cameras but " +
                         std::to_string(images->images.size()) + " images were found");
    }
    return rec;
}

inline SimilarityTransform coarse_transform(const PointCloud& sfm, const PointCloud& scan, const RunConfig& cfg) {
    switch (cfg.coarse) {
    case CoarseMode::bbox:
        return coarse_align_bbox(sfm, scan);
    case CoarseMode::correspondences:
        if (cfg.correspondences.empty()) throw InputError("coarse mode corr needs a correspondence file");
        return coarse_align_correspondences(parse_correspondences(read_file(cfg.correspondences)));
    case CoarseMode::file:
        if (cfg.transform.empty()) throw InputError("coarse mode file needs --transform");
        return parse_transform(read_file(cfg.transform));
    }
    return {};
}

struct RegistrationResult {
    SimilarityTransform coarse;
    SicpReport sicp;
};

/// Coarse estimate, then SICP of the SfM points (moving) onto the scan (fixed).
inline RegistrationResult register_clouds(const PointCloud& sfm, const PointCloud& scan, const RunConfig& cfg) {
    if (sfm.size() < 3) {
        throw InputError("bundle holds fewer than 3 reconstructed points");
    }
    RegistrationResult r;
    r.coarse = coarse_transform(sfm, scan, cfg);
    r.sicp = sicp_register(sfm, scan, r.coarse, {cfg.sicp_tol, cfg.sicp_max_iter, cfg.sicp_reject_sigma});
    return r;
}

inline std::string rmse_trace_text(const std::vector<double>& trace) {
    std::string out;
    for (double v : trace) {
        text_detail::append_number(out, v);
        out += '\n';
    }
    return out;
}

inline std::vector<double> parse_rmse_trace(std::string_view bytes) {
    std::vector<double> out;
    text_detail::for_each_line(bytes, [&](std::string_view line, std::size_t no) {
        for (double v : text_detail::numbers(line, no)) out.push_back(v);
    });
    return out;
}

/// Usable cameras of a bundle moved into the scan frame.
inline std::vector<Camera> scan_frame_cameras(const BundlerReconstruction& rec, const SimilarityTransform& sfm_to_scan) {
    std::vector<Camera> out;
    for (std::size_t i = 0; i < rec.cameras.size(); ++i) {
        if (!rec.cameras[i]) {
            throw InputError("camera " + std::to_string(i) + " has zero focal length");
        }
        out.push_back(transform_camera(*rec.cameras[i], sfm_to_scan));
    }
    return out;
}

inline MaskParams mask_params(const RunConfig& cfg) { return {cfg.border_distance, cfg.discontinuity_fraction}; }

/// Content key of one view's masks: geometry, camera and every mask parameter.
inline std::string mask_cache_key(const TriangleMesh& scan, const Camera& cam, const MaskParams& p,
                                  const RenderOptions& opt) {
    Fnv1a h;
    h.update("photofuse-masks-v1");
    h.update(scan.vertices.points.data(), scan.vertices.points.size() * sizeof(Point3));
    if (scan.vertices.normals) h.update(scan.vertices.normals->data(), scan.vertices.normals->size() * sizeof(Vec3));
    h.update(scan.faces.data(), scan.faces.size() * sizeof(Face));
    for (double v : {cam.focal, cam.k1, cam.k2, cam.cx, cam.cy}) h.update_value(v);
    h.update(cam.rotation.data(), 9 * sizeof(double));
    h.update(cam.translation.data(), 3 * sizeof(double));
    h.update_value(cam.width);
    h.update_value(cam.height);
    h.update_value(p.border_distance);
    h.update_value(p.discontinuity_fraction);
    h.update_value(opt.splat_radius);
    return h.hex();
}

namespace pipeline_detail {

inline std::string encode_masks(const DepthMap& depth, const QualityMask& weight) {
    std::string out = "PFMASK1\n";
    const std::int32_t wh[2] = {depth.width(), depth.height()};
    out.append(reinterpret_cast<const char*>(wh), sizeof(wh));
    out.append(reinterpret_cast<const char*>(depth.data().data()), depth.size() * sizeof(double));
    out.append(reinterpret_cast<const char*>(weight.data().data()), weight.size() * sizeof(double));
    return out;
}

inline std::optional<std::pair<DepthMap, QualityMask>> decode_masks(const std::string& bytes, int w, int h) {
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (bytes.size() != 8 + 8 + 2 * n * sizeof(double) || bytes.compare(0, 8, "PFMASK1\n") != 0) {
        return std::nullopt;
    }
    std::int32_t wh[2];
    std::memcpy(wh, bytes.data() + 8, sizeof(wh));
    if (wh[0] != w || wh[1] != h) return std::nullopt;
    DepthMap d(w, h);
    QualityMask q(w, h);
    std::memcpy(d.data().data(), bytes.data() + 16, n * sizeof(double));
    std::memcpy(q.data().data(), bytes.data() + 16 + n * sizeof(double), n * sizeof(double));
    return std::pair{std::move(d), std::move(q)};
}

} // namespace pipeline_detail

inline fs::path cache_directory(const RunConfig& cfg) {
    if (const char* env = std::getenv(kCacheEnv); env && *env) return env;
    return fs::path(cfg.output) / "cache";
}

struct ViewBuild {
    std::vector<View> views;
    std::size_t cache_hits = 0;
};

/// Depth map and combined mask per camera, reused from `cache_dir` when the key matches.
inline ViewBuild build_views(const TriangleMesh& scan, const std::vector<Camera>& cams, std::vector<Image> images,
                             const RunConfig& cfg, const std::optional<fs::path>& cache_dir) {
    ViewBuild out;
    const auto params = mask_params(cfg);
    const RenderOptions opt{cfg.splat_radius};
    for (std::size_t i = 0; i < cams.size(); ++i) {
        const auto& cam = cams[i];
        std::optional<std::pair<DepthMap, QualityMask>> masks;
        fs::path file;
        if (cache_dir) {
            file = *cache_dir / (mask_cache_key(scan, cam, params, opt) + ".mask");
            if (fs::exists(file)) {
                masks = pipeline_detail::decode_masks(read_file(file), cam.width, cam.height);
                if (masks) ++out.cache_hits;
            }
        }
        if (!masks) {
            auto vm = compute_view_masks(scan, cam, params, opt);
            masks.emplace(std::move(vm.depth), std::move(vm.combined));
            if (cache_dir) write_file_atomic(file, pipeline_detail::encode_masks(masks->first, masks->second));
        }
        out.views.push_back(make_view(cam, std::move(images[i]), std::move(masks->first), std::move(masks->second)));
    }
    return out;
}

inline ColorizeConfig colorize_config(const RunConfig& cfg, const PointCloud& scan) {
    ColorizeConfig c;
    c.block_size = cfg.block_size;
    c.search_radius = cfg.search_radius;
    c.best_k = cfg.best_k;
    c.visibility_eps = cfg.visibility_eps ? *cfg.visibility_eps : 0.005 * compute_aabb(scan).diagonal();
    c.local_correction = cfg.local_correction;
    c.uncolored_color = cfg.uncolored_color;
    return c;
}

inline nlohmann::json similarity_json(const SimilarityTransform& t) {
    nlohmann::json r = nlohmann::json::array();
    for (int i = 0; i < 3; ++i) r.push_back({t.rotation()(i, 0), t.rotation()(i, 1), t.rotation()(i, 2)});
    return {{"scale", t.scale()},
            {"rotation", r},
            {"translation", {t.translation()[0], t.translation()[1], t.translation()[2]}}};
}

inline SimilarityTransform similarity_from_json(const nlohmann::json& j) {
    Mat3 r;
    Vec3 t;
    for (int i = 0; i < 3; ++i) {
        for (int k = 0; k < 3; ++k) r(i, k) = j.at("rotation").at(i).at(k).get<double>();
        t[i] = j.at("translation").at(i).get<double>();
    }
    return {j.at("scale").get<double>(), r, t};
}

inline nlohmann::json registration_json(const RegistrationResult& r) {
    return {{"coarse", similarity_json(r.coarse)},
            {"transform", similarity_json(r.sicp.transform)},
            {"iterations", r.sicp.iterations},
            {"converged", r.sicp.converged},
            {"initial_rmse", r.sicp.rmse_trace.front()},
            {"final_rmse", r.sicp.rmse_trace.back()}};
}

inline nlohmann::json colorize_json(const ColorizeResult& r, const ColorizeConfig& cfg) {
    const auto& rep = r.report;
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& [d, n] : rep.displacement_histogram) hist.push_back({d.first, d.second, n});
    const std::size_t side = 2 * static_cast<std::size_t>(cfg.search_radius) + 1;
    return {{"points", rep.points},
            {"colored", rep.colored},
            {"uncolored", rep.uncolored},
            {"single_view_points", rep.single_view_points},
            {"displacement_searches", rep.displacement_searches},
            {"no_match", rep.no_match},
            {"block_evaluations", rep.block_evaluations},
            {"max_point_evaluations", rep.max_point_evaluations},
            {"evaluation_bound_per_point", (static_cast<std::size_t>(cfg.best_k) - 1) * side * side},
            {"displacement_histogram", hist}};
}

/// Run directory bookkeeping: stage timings and the files written so far.
class RunWriter {
public:
    explicit RunWriter(fs::path dir) : dir_(std::move(dir)), start_(std::chrono::steady_clock::now()) {
        fs::create_directories(dir_);
    }

    const fs::path& dir() const noexcept { return dir_; }

    void write(const std::string& name, std::string_view bytes) {
        write_file_atomic(dir_ / name, bytes);
        files_[name] = {bytes.size(), Fnv1a().update(bytes).hex()};
    }

    void write_json(const std::string& name, const nlohmann::json& j) { write(name, j.dump(2) + "\n"); }

    template <typename F>
    auto timed(const std::string& stage, F&& f) {
        const auto t0 = std::chrono::steady_clock::now();
        struct Stop {
            RunWriter* w;
            std::string stage;
            std::chrono::steady_clock::time_point t0;
            ~Stop() { w->timings_[stage] += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); }
        } stop{this, stage, t0};
        return f();
    }

    void note(const std::string& key, nlohmann::json v) { extra_[key] = std::move(v); }

    /// manifest.json: hashes of every file written, wall-clock timings and the creation time.
    void finish(const std::string& command) {
        nlohmann::json files = nlohmann::json::object();
        for (const auto& [name, info] : files_) files[name] = {{"bytes", info.first}, {"fnv1a64", info.second}};
        nlohmann::json timings = timings_;
        timings["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        const std::time_t now = std::time(nullptr);
        char stamp[32];
        std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        nlohmann::json m = {{"command", command}, {"created", stamp}, {"files", files}, {"timings_seconds", timings}};
        for (const auto& [k, v] : extra_.items()) m[k] = v;
        write_file_atomic(dir_ / "manifest.json", m.dump(2) + "\n");
    }

private:
    fs::path dir_;
    std::chrono::steady_clock::time_point start_;
    std::map<std::string, std::pair<std::size_t, std::string>> files_;
    std::map<std::string, double> timings_;
    nlohmann::json extra_ = nlohmann::json::object();
};

enum class Stage { register_only, colorize_only, fuse };

inline std::string to_string(Stage s) {
    switch (s) {
    case Stage::register_only: return "register";
    case Stage::colorize_only: return "colorize";
    case Stage::fuse: return "fuse";
    }
    return "fuse";
}

/// Runs registration, colorization or both and fills `cfg.output`. Returns report.json.
///
/// register: coarse estimate plus SICP; writes transform.txt and rmse_trace.txt.
/// colorize: cameras enter the scan frame through `cfg.transform` (identity when unset).
/// fuse: register, then colorize with the recovered transform.
inline nlohmann::json run_pipeline(const RunConfig& cfg, Stage stage) {
    cfg.validate();
    if (cfg.scan.empty()) throw InputError("a scan PLY is required");
    if (cfg.bundle.empty()) throw InputError("a Bundler file is required");
    if (stage != Stage::register_only && cfg.images.empty()) throw InputError("an image directory is required");

    RunWriter run(cfg.output);
    run.write_json("config.json", to_json(cfg));
    nlohmann::json report = {{"command", to_string(stage)}};

    const auto scan = run.timed("load", [&] { return load_scan(cfg.scan); });
    std::optional<ImageSet> images;
    if (!cfg.images.empty()) images = run.timed("load", [&] { return load_image_dir(cfg.images); });
    const auto rec = run.timed("load", [&] { return load_bundle(cfg.bundle, images ? &*images : nullptr); });

    SimilarityTransform sfm_to_scan;
    if (stage == Stage::colorize_only) {
        if (!cfg.transform.empty()) sfm_to_scan = parse_transform(read_file(cfg.transform));
    } else {
        const auto reg = run.timed("register", [&] { return register_clouds(rec.sparse_points, scan.vertices, cfg); });
        sfm_to_scan = reg.sicp.transform;
        run.write("transform.txt", write_transform(sfm_to_scan));
        run.write("rmse_trace.txt", rmse_trace_text(reg.sicp.rmse_trace));
        report["registration"] = registration_json(reg);
    }

    if (stage != Stage::register_only) {
        const auto cams = scan_frame_cameras(rec, sfm_to_scan);
        const auto built = run.timed("masks", [&] {
            return build_views(scan, cams, std::move(images->images), cfg, cache_directory(cfg));
        });
        run.note("mask_cache_hits", built.cache_hits);
        const auto ccfg = colorize_config(cfg, scan.vertices);
        auto result = run.timed("colorize", [&] { return colorize_cloud(scan.vertices, built.views, ccfg); });
        for (auto i : result.report.uncolored) (*result.cloud.colors)[i] = cfg.uncolored_color;
        run.write("colored.ply", write_ply(result.cloud, PlyEncoding::binary_little_endian));
        run.write("displacements.csv", displacement_csv(result.displacements));
        report["colorize"] = colorize_json(result, ccfg);
        report["image_names"] = images->names;
    }
    run.write_json("report.json", report);
    run.finish(to_string(stage));
    return report;
}

/// Histogram-equalizes the value channel of every image into `out_dir`/enhanced.
inline std::size_t run_enhance(const fs::path& images_dir, const fs::path& out_dir) {
    RunWriter run(out_dir);
    const auto set = run.timed("load", [&] { return load_image_dir(images_dir); });
    run.timed("enhance", [&] {
        for (std::size_t i = 0; i < set.images.size(); ++i) {
            const auto name = "enhanced/" + fs::path(set.names[i]).stem().string() + ".png";
            run.write(name, encode_png(equalize_value_channel(set.images[i])));
        }
        return 0;
    });
    run.finish("enhance");
    return set.images.size();
}

/// Angle, depth, border and combined masks of every camera as 16-bit PNG, value = v / 65535,
/// plus masks.json listing each mask's range over the covered pixels.
inline nlohmann::json run_masks(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.scan.empty() || cfg.bundle.empty() || cfg.images.empty()) {
        throw InputError("masks needs a scan, a Bundler file and an image directory");
    }
    RunWriter run(cfg.output);
    const auto scan = load_scan(cfg.scan);
    const auto images = load_image_dir(cfg.images);
    const auto rec = load_bundle(cfg.bundle, &images);
    SimilarityTransform t;
    if (!cfg.transform.empty()) t = parse_transform(read_file(cfg.transform));
    const auto cams = scan_frame_cameras(rec, t);
    nlohmann::json side = nlohmann::json::array();
    run.timed("masks", [&] {
        for (std::size_t i = 0; i < cams.size(); ++i) {
            const auto vm = compute_view_masks(scan, cams[i], mask_params(cfg), {cfg.splat_radius});
            const auto stem = fs::path(images.names[i]).stem().string();
            nlohmann::json entry = {{"image", images.names[i]}};
            const std::pair<const char*, const QualityMask*> masks[] = {
                {"angle", &vm.angle}, {"depth", &vm.depth_weight}, {"border", &vm.border}, {"combined", &vm.combined}};
            for (const auto& [name, m] : masks) {
                double lo = 1.0, hi = 0.0;
                for (std::size_t k = 0; k < m->size(); ++k) {
                    if (!std::isfinite(vm.depth.data()[k])) continue;
                    lo = std::min(lo, m->data()[k]);
                    hi = std::max(hi, m->data()[k]);
                }
                const std::string file = "masks/" + stem + "_" + name + ".png";
                run.write(file, encode_png_gray16(*m));
                entry[name] = {{"file", file}, {"min", lo <= hi ? lo : 0.0}, {"max", lo <= hi ? hi : 0.0}};
            }
            side.push_back(entry);
        }
        return 0;
    });
    nlohmann::json j = {{"scale", "pixel / 65535"}, {"views", side}};
    run.write_json("masks.json", j);
    run.finish("masks");
    return j;
}

} // namespace photofuse
