#pragma once

// Synthetic scenes on disk: the inputs a real capture would provide (scan, bundle, images)
// next to the answers (truth.json, truth_colors.txt).

#include <photofuse/bundler.hpp>
#include <photofuse/file_util.hpp>
#include <photofuse/image_io.hpp>
#include <photofuse/pipeline.hpp>
#include <photofuse/ply.hpp>
#include <photofuse/registration.hpp>
#include <photofuse/synth.hpp>
#include <photofuse/text_io.hpp>

#include <json.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace photofuse {

inline nlohmann::json camera_json(const Camera& c) {
    nlohmann::json r = nlohmann::json::array();
    for (int i = 0; i < 3; ++i) r.push_back({c.rotation(i, 0), c.rotation(i, 1), c.rotation(i, 2)});
    return {{"focal", c.focal}, {"k1", c.k1}, {"k2", c.k2}, {"rotation", r},
            {"translation", {c.translation[0], c.translation[1], c.translation[2]}},
            {"width", c.width}, {"height", c.height}, {"cx", c.cx}, {"cy", c.cy}};
}

inline Camera camera_from_json(const nlohmann::json& j) {
    Camera c;
    c.focal = j.at("focal").get<double>();
    c.k1 = j.at("k1").get<double>();
    c.k2 = j.at("k2").get<double>();
    for (int i = 0; i < 3; ++i) {
        for (int k = 0; k < 3; ++k) c.rotation(i, k) = j.at("rotation").at(i).at(k).get<double>();
        c.translation[i] = j.at("translation").at(i).get<double>();
    }
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    return c;
}

/// What a scene directory knows beyond the pipeline inputs.
struct SceneTruth {
    std::uint64_t seed = 0;
    std::string kind;
    /// Reconstruction frame -> scene frame: the transform registration should find.
    SimilarityTransform expected_transform;
    std::vector<Camera> true_cameras;  // scene frame
    /// Reported minus true principal point, per camera, in pixels.
    std::vector<std::array<double, 2>> principal_errors;
    double point_noise = 0.0;
    std::vector<Rgb> colors;
};

inline std::string colors_text(const std::vector<Rgb>& colors) {
    std::string out = "# r g b per scan vertex, [0,1]\n";
    for (const auto& c : colors) {
        for (int k = 0; k < 3; ++k) {
            if (k) out += ' ';
            text_detail::append_number(out, c[k]);
        }
        out += '\n';
    }
    return out;
}

inline std::vector<Rgb> parse_colors(std::string_view bytes) {
    std::vector<Rgb> out;
    text_detail::for_each_line(bytes, [&](std::string_view line, std::size_t no) {
        const auto v = text_detail::numbers(line, no);
        if (v.empty()) return;
        if (v.size() != 3) throw ParseError("color row needs 3 numbers", no);
        out.emplace_back(v[0], v[1], v[2]);
    });
    return out;
}

/// Writes scan.ply, bundle.out, correspondences.txt, images/NNNN.png, truth.json and
/// truth_colors.txt.
/// Returns every written path relative to `dir`, in write order.
inline std::vector<std::string> export_scene(const SyntheticScene& s, const std::filesystem::path& dir) {
    std::vector<std::string> written;
    auto put = [&](const std::string& name, std::string_view bytes) {
        write_file_atomic(dir / name, bytes);
        written.push_back(name);
    };
    TriangleMesh scan = s.mesh;
    scan.vertices.colors.reset();
    put("scan.ply", write_ply(scan));

    std::vector<BundlerCamera> cams;
    for (const auto& c : s.cameras) cams.push_back(to_bundler(transform_camera(c, s.frame)));
    put("bundle.out", write_bundler(cams, s.reconstruction, {}));
    put("correspondences.txt", write_correspondences(picked_correspondences(s)));

    for (std::size_t i = 0; i < s.images.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "images/%04zu.png", i);
        put(name, encode_png(s.images[i]));
    }

    nlohmann::json truth;
    truth["seed"] = s.seed;
    truth["kind"] = to_string(s.spec.kind);
    truth["spec"] = {{"vertices", s.spec.vertices}, {"images", s.spec.images}, {"width", s.spec.width},
                     {"height", s.spec.height}, {"frame_rotation", s.spec.frame_rotation}};
    truth["frame"] = similarity_json(s.frame);
    truth["expected_transform"] = similarity_json(invert(s.frame));
    truth["true_cameras"] = nlohmann::json::array();
    truth["principal_errors"] = nlohmann::json::array();
    for (std::size_t i = 0; i < s.cameras.size(); ++i) {
        truth["true_cameras"].push_back(camera_json(s.true_cameras[i]));
        truth["principal_errors"].push_back(
            {s.cameras[i].cx - s.true_cameras[i].cx, s.cameras[i].cy - s.true_cameras[i].cy});
    }
    truth["point_noise"] = s.point_noise;
    put("truth.json", truth.dump(2) + "\n");
    put("truth_colors.txt", colors_text(*s.mesh.vertices.colors));
    return written;
}

inline SceneTruth load_truth(const std::filesystem::path& dir) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(dir / "truth.json"));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("truth.json is not valid JSON: ") + e.what());
    }
    SceneTruth t;
    try {
        t.seed = j.at("seed").get<std::uint64_t>();
        t.kind = j.at("kind").get<std::string>();
        t.expected_transform = similarity_from_json(j.at("expected_transform"));
        for (const auto& c : j.at("true_cameras")) t.true_cameras.push_back(camera_from_json(c));
        for (const auto& e : j.at("principal_errors")) t.principal_errors.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
        t.point_noise = j.at("point_noise").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("truth.json is missing a field: ") + e.what());
    }
    t.colors = parse_colors(read_file(dir / "truth_colors.txt"));
    return t;
}

} // namespace photofuse
