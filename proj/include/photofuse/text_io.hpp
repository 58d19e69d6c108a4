#pragma once

// Small line-oriented text formats: point correspondences and similarity transforms.

#include <photofuse/error.hpp>
#include <photofuse/geometry.hpp>
#include <photofuse/registration.hpp>

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

namespace photofuse {

namespace text_detail {

/// Numbers on one line; '#' starts a comment.
inline std::vector<double> numbers(std::string_view line, std::size_t line_no) {
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
        line = line.substr(0, hash);
    }
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < line.size()) {
        while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r' || line[pos] == ',')) {
            ++pos;
        }
        if (pos >= line.size()) break;
        double v = 0.0;
        const auto [p, ec] = std::from_chars(line.data() + pos, line.data() + line.size(), v);
        if (ec != std::errc{}) {
            throw ParseError("malformed number", line_no);
        }
        pos = static_cast<std::size_t>(p - line.data());
        out.push_back(v);
    }
    return out;
}

template <typename F>
void for_each_line(std::string_view bytes, F&& f) {
    std::size_t pos = 0, line_no = 0;
    while (pos < bytes.size()) {
        const auto nl = bytes.find('\n', pos);
        const auto end = nl == std::string_view::npos ? bytes.size() : nl;
        f(bytes.substr(pos, end - pos), ++line_no);
        pos = end + 1;
    }
}

inline void append_number(std::string& out, double v) {
    char buf[32];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, p);
}

} // namespace text_detail

/// "sx sy sz tx ty tz" per row: a point in the SfM frame and its match in the scan frame.
inline std::vector<PointPair> parse_correspondences(std::string_view bytes) {
    std::vector<PointPair> out;
    text_detail::for_each_line(bytes, [&](std::string_view line, std::size_t no) {
        const auto v = text_detail::numbers(line, no);
        if (v.empty()) return;
        if (v.size() != 6) {
            throw ParseError("correspondence row needs 6 numbers, got " + std::to_string(v.size()), no);
        }
        out.emplace_back(Point3(v[0], v[1], v[2]), Point3(v[3], v[4], v[5]));
    });
    return out;
}

inline std::string write_correspondences(const std::vector<PointPair>& pairs) {
    std::string out = "# sx sy sz tx ty tz\n";
    for (const auto& [s, t] : pairs) {
        for (int k = 0; k < 6; ++k) {
            if (k) out += ' ';
            text_detail::append_number(out, k < 3 ? s[k] : t[k - 3]);
        }
        out += '\n';
    }
    return out;
}

/// Transform file: the scale, then R row-major (three rows), then t; 13 numbers in all.
/// Line breaks and '#' comments are free-form.
inline SimilarityTransform parse_transform(std::string_view bytes) {
    std::vector<double> v;
    text_detail::for_each_line(bytes, [&](std::string_view line, std::size_t no) {
        const auto n = text_detail::numbers(line, no);
        v.insert(v.end(), n.begin(), n.end());
    });
    if (v.size() != 13) {
        throw InputError("transform file needs 13 numbers (s, R row-major, t), got " + std::to_string(v.size()));
    }
    Mat3 r;
    for (int i = 0; i < 9; ++i) r(i / 3, i % 3) = v[1 + i];
    return {v[0], r, Vec3(v[10], v[11], v[12])};
}

inline std::string write_transform(const SimilarityTransform& t) {
    std::string out = "# scale\n";
    text_detail::append_number(out, t.scale());
    out += "\n# rotation (row-major)\n";
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            if (c) out += ' ';
            text_detail::append_number(out, t.rotation()(r, c));
        }
        out += '\n';
    }
    out += "# translation\n";
    for (int k = 0; k < 3; ++k) {
        if (k) out += ' ';
        text_detail::append_number(out, t.translation()[k]);
    }
    out += '\n';
    return out;
}

} // namespace photofuse
