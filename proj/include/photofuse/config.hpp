#pragma once

#include <photofuse/error.hpp>
#include <photofuse/file_util.hpp>
#include <photofuse/geometry.hpp>

#include <json.hpp>

#include <optional>
#include <string>

namespace photofuse {

enum class CoarseMode { bbox, correspondences, file };

inline CoarseMode coarse_mode_from_string(const std::string& s) {
    if (s == "bbox") return CoarseMode::bbox;
    if (s == "corr" || s == "correspondences") return CoarseMode::correspondences;
    if (s == "file") return CoarseMode::file;
    throw InputError("unknown coarse alignment mode '" + s + "' (expected bbox, corr or file)");
}

inline std::string to_string(CoarseMode m) {
    switch (m) {
    case CoarseMode::bbox: return "bbox";
    case CoarseMode::correspondences: return "corr";
    case CoarseMode::file: return "file";
    }
    return "bbox";
}

/// Every tunable of a run. Stored as a JSON object whose keys match the CLI flags with
/// dashes turned into underscores (`--block-size` <-> "block_size").
struct RunConfig {
    std::string scan;
    std::string bundle;
    std::string images;
    std::string output = "run";
    std::string correspondences;
    std::string transform;

    int block_size = 7;
    int search_radius = 15;
    int best_k = 3;
    /// Absolute visibility tolerance; unset means 0.5% of the scan bounding-box diagonal.
    std::optional<double> visibility_eps;
    double sicp_tol = 1e-6;
    int sicp_max_iter = 100;
    double sicp_reject_sigma = 0.0;
    CoarseMode coarse = CoarseMode::bbox;

    int splat_radius = 2;
    double border_distance = 20.0;
    double discontinuity_fraction = 0.01;
    bool local_correction = true;
    Rgb uncolored_color = Rgb::Constant(0.5);
    std::uint64_t seed = 42;

    void validate() const {
        if (block_size < 3 || block_size % 2 == 0) {
            throw InputError("block_size must be odd and >= 3");
        }
        if (search_radius < 1) throw InputError("search_radius must be >= 1");
        if (best_k < 1) throw InputError("best_k must be >= 1");
        if (visibility_eps && !(*visibility_eps >= 0.0)) throw InputError("visibility_eps must be >= 0");
        if (!(sicp_tol > 0.0)) throw InputError("sicp_tol must be positive");
        if (sicp_max_iter < 1) throw InputError("sicp_max_iter must be >= 1");
        if (splat_radius < 0) throw InputError("splat_radius must be >= 0");
        if (!(border_distance > 0.0)) throw InputError("border_distance must be positive");
    }
};

inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    j["scan"] = c.scan;
    j["bundle"] = c.bundle;
    j["images"] = c.images;
    j["output"] = c.output;
    j["correspondences"] = c.correspondences;
    j["transform"] = c.transform;
    j["block_size"] = c.block_size;
    j["search_radius"] = c.search_radius;
    j["best_k"] = c.best_k;
    j["visibility_eps"] = c.visibility_eps ? nlohmann::json(*c.visibility_eps) : nlohmann::json(nullptr);
    j["sicp_tol"] = c.sicp_tol;
    j["sicp_max_iter"] = c.sicp_max_iter;
    j["sicp_reject_sigma"] = c.sicp_reject_sigma;
    j["coarse"] = to_string(c.coarse);
    j["splat_radius"] = c.splat_radius;
    j["border_distance"] = c.border_distance;
    j["discontinuity_fraction"] = c.discontinuity_fraction;
    j["local_correction"] = c.local_correction;
    j["uncolored_color"] = {c.uncolored_color[0], c.uncolored_color[1], c.uncolored_color[2]};
    j["seed"] = c.seed;
    return j;
}

/// Overlays the keys present in `j` onto `c`. Unknown keys are an error.
inline void merge_json(RunConfig& c, const nlohmann::json& j) {
    if (!j.is_object()) {
        throw InputError("config must be a JSON object");
    }
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "scan") c.scan = v.get<std::string>();
            else if (key == "bundle") c.bundle = v.get<std::string>();
            else if (key == "images") c.images = v.get<std::string>();
            else if (key == "output") c.output = v.get<std::string>();
            else if (key == "correspondences") c.correspondences = v.get<std::string>();
            else if (key == "transform") c.transform = v.get<std::string>();
            else if (key == "block_size") c.block_size = v.get<int>();
            else if (key == "search_radius") c.search_radius = v.get<int>();
            else if (key == "best_k") c.best_k = v.get<int>();
            else if (key == "visibility_eps") {
                if (v.is_null()) c.visibility_eps.reset();
                else c.visibility_eps = v.get<double>();
            }
            else if (key == "sicp_tol") c.sicp_tol = v.get<double>();
            else if (key == "sicp_max_iter") c.sicp_max_iter = v.get<int>();
            else if (key == "sicp_reject_sigma") c.sicp_reject_sigma = v.get<double>();
            else if (key == "coarse") c.coarse = coarse_mode_from_string(v.get<std::string>());
            else if (key == "splat_radius") c.splat_radius = v.get<int>();
            else if (key == "border_distance") c.border_distance = v.get<double>();
            else if (key == "discontinuity_fraction") c.discontinuity_fraction = v.get<double>();
            else if (key == "local_correction") c.local_correction = v.get<bool>();
            else if (key == "uncolored_color") {
                const auto a = v.get<std::vector<double>>();
                if (a.size() != 3) throw InputError("uncolored_color needs 3 components");
                c.uncolored_color = Rgb(a[0], a[1], a[2]);
            }
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else throw InputError("unknown config key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("config value has the wrong type: ") + e.what());
    }
}

inline RunConfig parse_config(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig c;
    merge_json(c, j);
    c.validate();
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

} // namespace photofuse
