#pragma once

#include <photofuse/camera.hpp>
#include <photofuse/error.hpp>
#include <photofuse/geometry.hpp>

#include <Eigen/SVD>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace photofuse {

/// One camera exactly as stored in a bundle.out file.
///
/// Bundler cameras look down -z with y up: P = R*X + t, p = -P.xy / P.z,
/// p' = f * (1 + k1*|p|^2 + k2*|p|^4) * p, measured from the image center.
struct BundlerCamera {
    double focal = 0.0;
    double k1 = 0.0;
    double k2 = 0.0;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
};

struct BundlerView {
    std::uint32_t camera;
    std::uint32_t key;
    double x;  // Bundler image coordinates: center origin, y up
    double y;
};

struct ImageSize {
    int width;
    int height;
};

struct BundlerReconstruction {
    std::vector<BundlerCamera> raw_cameras;
    /// Converted cameras; empty for zero-focal (unusable) cameras, kept for index stability.
    std::vector<std::optional<Camera>> cameras;
    PointCloud sparse_points;
    std::vector<std::vector<BundlerView>> views;
};

namespace bundler_detail {
inline const Mat3& flip_yz() {
    static const Mat3 m = Vec3(1.0, -1.0, -1.0).asDiagonal();
    return m;
}
} // namespace bundler_detail

/// Bundler camera as a y-down, z-forward camera with principal point at the image center.
/// The frame change is diag(1,-1,-1), a proper rotation, so det(R) stays +1.
inline Camera from_bundler(const BundlerCamera& b, ImageSize size) {
    Camera c = Camera::centered(b.focal, size.width, size.height);
    c.k1 = b.k1;
    c.k2 = b.k2;
    c.rotation = bundler_detail::flip_yz() * b.rotation;
    // Text files carry rotations rounded to a few digits; snap near-orthonormal ones onto SO(3).
    const double dev = (c.rotation.transpose() * c.rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (dev > 1e-12 && dev < 1e-3) {
        const Eigen::JacobiSVD<Mat3> svd(c.rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
        c.rotation = svd.matrixU() * svd.matrixV().transpose();
    }
    c.translation = bundler_detail::flip_yz() * b.translation;
    return c;
}

inline BundlerCamera to_bundler(const Camera& c) {
    return {c.focal, c.k1, c.k2, bundler_detail::flip_yz() * c.rotation, bundler_detail::flip_yz() * c.translation};
}

/// Bundler image coordinates to pixels: x_px = cx + x, y_px = cy - y.
inline std::pair<double, double> bundler_to_pixel(const Camera& c, double x, double y) {
    return {c.cx + x, c.cy - y};
}

inline std::pair<double, double> pixel_to_bundler(const Camera& c, double u, double v) {
    return {u - c.cx, c.cy - v};
}

namespace bundler_detail {

class Tokens {
public:
    explicit Tokens(std::string_view s) : s_(s) {}

    std::size_t line() const noexcept { return line_; }

    double number() {
        skip_ws();
        if (pos_ >= s_.size()) {
            throw ParseError("Bundler: unexpected end of file", line_);
        }
        const char* b = s_.data() + pos_;
        double v = 0.0;
        const auto [p, ec] = std::from_chars(b, s_.data() + s_.size(), v);
        if (ec != std::errc{}) {
            throw ParseError("Bundler: malformed number", line_);
        }
        pos_ += static_cast<std::size_t>(p - b);
        return v;
    }

    long long integer() {
        const double v = number();
        if (v != static_cast<double>(static_cast<long long>(v))) {
            throw ParseError("Bundler: expected an integer", line_);
        }
        return static_cast<long long>(v);
    }

private:
    void skip_ws() {
        while (pos_ < s_.size()) {
            const char c = s_[pos_];
            if (c == '\n') {
                ++line_;
            } else if (c == '#') {
                while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
                continue;
            } else if (c != ' ' && c != '\t' && c != '\r') {
                return;
            }
            ++pos_;
        }
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
};

} // namespace bundler_detail

/// Parses a "# Bundle file v0.3" reconstruction. `sizes` gives each camera's image size; a
/// single entry applies to every camera.
inline BundlerReconstruction parse_bundler(std::string_view bytes, const std::vector<ImageSize>& sizes) {
    const auto nl = bytes.find('\n');
    std::string_view head = bytes.substr(0, nl);
    if (!head.empty() && head.back() == '\r') head.remove_suffix(1);
    if (head.rfind("# Bundle file", 0) != 0) {
        throw ParseError("Bundler: missing '# Bundle file' header", 1);
    }
    if (head != "# Bundle file v0.3") {
        throw InputError("Bundler: unsupported version '" + std::string(head.substr(std::min<std::size_t>(14, head.size()))) +
                         "', only v0.3 is supported");
    }
    bundler_detail::Tokens tok(bytes);
    const long long ncam = tok.integer();
    const long long npts = tok.integer();
    if (ncam < 1 || npts < 0) {
        throw ParseError("Bundler: need at least one camera", tok.line());
    }
    if (sizes.empty() || (sizes.size() != 1 && sizes.size() != static_cast<std::size_t>(ncam))) {
        throw InputError("Bundler: image size list does not match camera count");
    }
    BundlerReconstruction rec;
    for (long long i = 0; i < ncam; ++i) {
        BundlerCamera b;
        b.focal = tok.number();
        b.k1 = tok.number();
        b.k2 = tok.number();
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) b.rotation(r, c) = tok.number();
        for (int k = 0; k < 3; ++k) b.translation[k] = tok.number();
        rec.raw_cameras.push_back(b);
        if (b.focal == 0.0) {
            rec.cameras.emplace_back();
        } else {
            const auto sz = sizes.size() == 1 ? sizes[0] : sizes[static_cast<std::size_t>(i)];
            Camera cam = from_bundler(b, sz);
            cam.validate();
            rec.cameras.emplace_back(cam);
        }
    }
    rec.sparse_points.colors.emplace();
    for (long long i = 0; i < npts; ++i) {
        Point3 p;
        for (int k = 0; k < 3; ++k) p[k] = tok.number();
        Rgb c;
        for (int k = 0; k < 3; ++k) c[k] = tok.number() / 255.0;
        rec.sparse_points.points.push_back(p);
        rec.sparse_points.colors->push_back(c);
        const long long nv = tok.integer();
        if (nv < 0) {
            throw ParseError("Bundler: negative view count", tok.line());
        }
        std::vector<BundlerView> views;
        for (long long v = 0; v < nv; ++v) {
            const long long cam = tok.integer();
            const long long key = tok.integer();
            const double x = tok.number();
            const double y = tok.number();
            if (cam < 0 || cam >= ncam) {
                throw ParseError("Bundler: view references camera " + std::to_string(cam) + " out of range",
                                 tok.line());
            }
            views.push_back({static_cast<std::uint32_t>(cam), static_cast<std::uint32_t>(key), x, y});
        }
        rec.views.push_back(std::move(views));
    }
    return rec;
}

/// Serializes in v0.3 layout with full double precision.
inline std::string write_bundler(const std::vector<BundlerCamera>& cams, const PointCloud& points,
                                 const std::vector<std::vector<BundlerView>>& views) {
    std::string out = "# Bundle file v0.3\n";
    out += std::to_string(cams.size()) + " " + std::to_string(points.size()) + "\n";
    auto num = [&](double v) {
        char buf[32];
        const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        out.append(buf, p);
    };
    for (const auto& c : cams) {
        num(c.focal); out += ' '; num(c.k1); out += ' '; num(c.k2); out += '\n';
        for (int r = 0; r < 3; ++r) {
            num(c.rotation(r, 0)); out += ' '; num(c.rotation(r, 1)); out += ' '; num(c.rotation(r, 2)); out += '\n';
        }
        num(c.translation[0]); out += ' '; num(c.translation[1]); out += ' '; num(c.translation[2]); out += '\n';
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points.points[i];
        num(p[0]); out += ' '; num(p[1]); out += ' '; num(p[2]); out += '\n';
        const Rgb c = points.colors ? (*points.colors)[i] : Rgb::Zero();
        for (int k = 0; k < 3; ++k) {
            out += std::to_string(std::lround(std::clamp(c[k], 0.0, 1.0) * 255.0));
            out += k < 2 ? ' ' : '\n';
        }
        const auto& vs = i < views.size() ? views[i] : std::vector<BundlerView>{};
        out += std::to_string(vs.size());
        for (const auto& v : vs) {
            out += ' ' + std::to_string(v.camera) + ' ' + std::to_string(v.key) + ' ';
            num(v.x);
            out += ' ';
            num(v.y);
        }
        out += '\n';
    }
    return out;
}

} // namespace photofuse
