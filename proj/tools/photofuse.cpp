// photofuse command line: enhance, register, masks, colorize, fuse, synth, eval.

#include <photofuse/evaluate.hpp>
#include <photofuse/pipeline.hpp>
#include <photofuse/scene_io.hpp>
#include <photofuse/synth.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

using namespace photofuse;

namespace {

/// Flags shared by register, masks, colorize and fuse. Unset flags leave the config alone.
struct RunFlags {
    std::string config;
    std::optional<std::string> scan, bundle, images, output, correspondences, transform, coarse;
    std::optional<int> block_size, search_radius, best_k, sicp_max_iter;
    std::optional<double> sicp_tol, visibility_eps;
    std::optional<std::uint64_t> seed;
    bool no_correction = false;

    void attach(CLI::App* app) {
        app->add_option("--config", config, "JSON run configuration; flags override its keys");
        app->add_option("--scan", scan, "Scanned mesh or cloud (PLY)");
        app->add_option("--bundle", bundle, "Bundler v0.3 reconstruction");
        app->add_option("--images", images, "Directory of photographs, sorted by name to match the cameras");
        app->add_option("-o,--output", output, "Run directory");
        app->add_option("--coarse", coarse, "Coarse alignment: bbox, corr or file")
            ->check(CLI::IsMember({"bbox", "corr", "correspondences", "file"}));
        app->add_option("--correspondences", correspondences, "Picked pairs, 6 numbers per line (SfM then scan)");
        app->add_option("--transform", transform, "Similarity transform file (SfM -> scan)");
        app->add_option("--block-size", block_size, "Block side B, odd");
        app->add_option("--search-radius", search_radius, "Search half-width W in pixels");
        app->add_option("--best-k", best_k, "Images blended per point");
        app->add_option("--sicp-tol", sicp_tol, "Relative RMSE change that stops SICP");
        app->add_option("--sicp-max-iter", sicp_max_iter, "SICP iteration cap");
        app->add_option("--visibility-eps", visibility_eps, "Depth-test tolerance in scan units");
        app->add_option("--seed", seed, "Seed recorded with the run");
        app->add_flag("--no-correction", no_correction, "Blend without the local displacement search");
    }

    RunConfig resolve() const {
        RunConfig c = config.empty() ? RunConfig{} : load_config(config);
        if (scan) c.scan = *scan;
        if (bundle) c.bundle = *bundle;
        if (images) c.images = *images;
        if (output) c.output = *output;
        if (correspondences) c.correspondences = *correspondences;
        if (transform) c.transform = *transform;
        if (coarse) c.coarse = coarse_mode_from_string(*coarse);
        if (block_size) c.block_size = *block_size;
        if (search_radius) c.search_radius = *search_radius;
        if (best_k) c.best_k = *best_k;
        if (sicp_tol) c.sicp_tol = *sicp_tol;
        if (sicp_max_iter) c.sicp_max_iter = *sicp_max_iter;
        if (visibility_eps) c.visibility_eps = *visibility_eps;
        if (seed) c.seed = *seed;
        if (no_correction) c.local_correction = false;
        return c;
    }
};

struct SynthFlags {
    std::string kind = "vase";
    std::string output = "scene";
    std::string renderer = "raster";
    std::uint64_t seed = 42;
    SceneSpec spec;
    std::optional<std::size_t> shift_camera;
    std::vector<double> shift;
    std::optional<std::size_t> rotate_camera;
    double rotate_mrad = 0.0;
    std::optional<double> cloud_scale;
    double cloud_rotation_deg = 0.0;
    std::vector<double> cloud_axis{0.0, 0.0, 1.0};
    std::vector<double> cloud_translation{0.0, 0.0, 0.0};
    double point_noise = 0.0;

    void attach(CLI::App* app) {
        app->add_option("--kind", kind, "sphere, vase or plane")->check(CLI::IsMember({"sphere", "vase", "plane"}));
        app->add_option("--seed", seed, "Scene seed");
        app->add_option("--vertices", spec.vertices, "Vertex budget");
        app->add_option("--images", spec.images, "Photograph count");
        app->add_option("--width", spec.width, "Image width");
        app->add_option("--height", spec.height, "Image height");
        app->add_option("--frame-rotation", spec.frame_rotation, "Largest decoy frame rotation, radians");
        app->add_option("-o,--output", output, "Scene directory");
        app->add_option("--renderer", renderer, "raster or raycast")->check(CLI::IsMember({"raster", "raycast"}));
        app->add_option("--shift-camera", shift_camera, "Camera whose principal point is wrong");
        app->add_option("--shift", shift, "Principal point error DX DY in pixels")->expected(2);
        app->add_option("--rotate-camera", rotate_camera, "Camera whose reported rotation is wrong");
        app->add_option("--rotate-mrad", rotate_mrad, "Rotation error in milliradians");
        app->add_option("--cloud-scale", cloud_scale, "Extra similarity applied to the reconstruction: scale");
        app->add_option("--cloud-rotation-deg", cloud_rotation_deg, "... rotation angle in degrees");
        app->add_option("--cloud-axis", cloud_axis, "... rotation axis")->expected(3);
        app->add_option("--cloud-translation", cloud_translation, "... translation")->expected(3);
        app->add_option("--point-noise", point_noise, "Gaussian noise sigma on the reconstruction cloud");
    }

    SyntheticScene build() const {
        SceneSpec sp = spec;
        sp.kind = scene_kind_from_string(kind);
        auto s = generate_scene(seed, sp);
        if (shift_camera || !shift.empty()) {
            if (shift.size() != 2) throw InputError("--shift needs DX DY");
            Perturbation p;
            p.camera = shift_camera.value_or(0);
            p.dx = shift[0];
            p.dy = shift[1];
            s = perturb_scene(std::move(s), p);
        }
        if (rotate_camera) {
            Perturbation p;
            p.mode = Perturbation::Mode::camera_rotation;
            p.camera = *rotate_camera;
            p.mrad = rotate_mrad;
            p.seed = seed + 1;
            s = perturb_scene(std::move(s), p);
        }
        if (cloud_scale || cloud_rotation_deg != 0.0) {
            Perturbation p;
            p.mode = Perturbation::Mode::cloud_similarity;
            const Vec3 axis(cloud_axis[0], cloud_axis[1], cloud_axis[2]);
            if (!(axis.norm() > 0.0)) throw InputError("--cloud-axis must be nonzero");
            if (!(cloud_scale.value_or(1.0) > 0.0)) throw InputError("--cloud-scale must be positive");
            p.similarity = SimilarityTransform(cloud_scale.value_or(1.0),
                                               axis_angle(axis, cloud_rotation_deg * std::numbers::pi / 180.0),
                                               Vec3(cloud_translation[0], cloud_translation[1], cloud_translation[2]));
            s = perturb_scene(std::move(s), p);
        }
        if (point_noise != 0.0) {
            if (!(point_noise > 0.0)) throw InputError("--point-noise must be positive");
            Perturbation p;
            p.mode = Perturbation::Mode::point_noise;
            p.sigma = point_noise;
            p.seed = seed + 2;
            s = perturb_scene(std::move(s), p);
        }
        if (renderer == "raycast") render_with_ray_caster(s);
        return s;
    }
};

void print_summary(const nlohmann::json& report, const std::string& output) {
    nlohmann::json brief = {{"output", output}};
    if (report.contains("registration")) {
        brief["final_rmse"] = report["registration"]["final_rmse"];
        brief["iterations"] = report["registration"]["iterations"];
    }
    if (report.contains("colorize")) {
        brief["colored"] = report["colorize"]["colored"];
        brief["points"] = report["colorize"]["points"];
    }
    std::cout << brief.dump() << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Register an SfM reconstruction to a scan and project photo color onto it", "photofuse"};
    app.require_subcommand(1);

    std::string enhance_in, enhance_out = "enhanced_run";
    auto* enhance = app.add_subcommand("enhance", "Histogram-equalize the value channel of every image");
    enhance->add_option("--images", enhance_in, "Image directory")->required();
    enhance->add_option("-o,--output", enhance_out, "Output directory");

    RunFlags reg_flags, mask_flags, col_flags, fuse_flags;
    auto* reg = app.add_subcommand("register", "Coarse alignment plus SICP; writes transform.txt and rmse_trace.txt");
    reg_flags.attach(reg);
    auto* masks = app.add_subcommand("masks", "Dump angle, depth, border and combined masks per image");
    mask_flags.attach(masks);
    auto* colorize = app.add_subcommand("colorize", "Color the scan from the photographs");
    col_flags.attach(colorize);
    auto* fuse = app.add_subcommand("fuse", "register, then colorize with the recovered transform");
    fuse_flags.attach(fuse);

    SynthFlags synth_flags;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic scene with known answers");
    synth_flags.attach(synth);

    std::string eval_scene, eval_run;
    bool eval_strict = false;
    auto* eval = app.add_subcommand("eval", "Score a run directory against a synthetic scene");
    eval->add_option("--scene", eval_scene, "Scene directory")->required();
    eval->add_option("--run", eval_run, "Run directory")->required();
    eval->add_flag("--strict", eval_strict, "Exit 3 when any check fails");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (*enhance) {
            const auto n = run_enhance(enhance_in, enhance_out);
            std::cout << nlohmann::json{{"output", enhance_out}, {"images", n}}.dump() << "\n";
        } else if (*reg) {
            const auto cfg = reg_flags.resolve();
            print_summary(run_pipeline(cfg, Stage::register_only), cfg.output);
        } else if (*masks) {
            const auto cfg = mask_flags.resolve();
            run_masks(cfg);
            std::cout << nlohmann::json{{"output", cfg.output}}.dump() << "\n";
        } else if (*colorize) {
            const auto cfg = col_flags.resolve();
            print_summary(run_pipeline(cfg, Stage::colorize_only), cfg.output);
        } else if (*fuse) {
            const auto cfg = fuse_flags.resolve();
            print_summary(run_pipeline(cfg, Stage::fuse), cfg.output);
        } else if (*synth) {
            const auto files = export_scene(synth_flags.build(), synth_flags.output);
            std::cout << nlohmann::json{{"output", synth_flags.output}, {"files", files.size()}}.dump() << "\n";
        } else if (*eval) {
            const auto score = evaluate_run(eval_scene, eval_run);
            std::cout << to_json(score).dump(2) << "\n";
            if (eval_strict && !score.pass) return 3;
        }
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
