#pragma once

#include <photofuse/error.hpp>
#include <photofuse/file_util.hpp>
#include <photofuse/geometry.hpp>

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace photofuse {

using Geometry = std::variant<PointCloud, TriangleMesh>;

enum class PlyEncoding { ascii, binary_little_endian };

namespace ply_detail {

enum class Scalar { i8, u8, i16, u16, i32, u32, f32, f64 };

inline std::optional<Scalar> scalar_from_name(std::string_view s) {
    if (s == "char" || s == "int8") return Scalar::i8;
    if (s == "uchar" || s == "uint8") return Scalar::u8;
    if (s == "short" || s == "int16") return Scalar::i16;
    if (s == "ushort" || s == "uint16") return Scalar::u16;
    if (s == "int" || s == "int32") return Scalar::i32;
    if (s == "uint" || s == "uint32") return Scalar::u32;
    if (s == "float" || s == "float32") return Scalar::f32;
    if (s == "double" || s == "float64") return Scalar::f64;
    return std::nullopt;
}

inline std::size_t scalar_size(Scalar s) {
    switch (s) {
    case Scalar::i8: case Scalar::u8: return 1;
    case Scalar::i16: case Scalar::u16: return 2;
    case Scalar::i32: case Scalar::u32: case Scalar::f32: return 4;
    case Scalar::f64: return 8;
    }
    return 0;
}

struct Property {
    std::string name;
    Scalar type;
    bool is_list = false;
    Scalar count_type = Scalar::u8;
};

struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<Property> props;
};

/// Sequential reader over the body in either encoding.
class BodyReader {
public:
    BodyReader(std::string_view body, bool binary, std::size_t first_line)
        : body_(body), binary_(binary), line_(first_line) {}

    double read(Scalar t) {
        return binary_ ? read_binary(t) : read_ascii();
    }

    void end_row() {
        if (binary_) {
            return;
        }
        // Anything left on the row is a malformed record.
        while (pos_ < body_.size() && (body_[pos_] == ' ' || body_[pos_] == '\t' || body_[pos_] == '\r')) {
            ++pos_;
        }
        if (pos_ < body_.size() && body_[pos_] != '\n') {
            throw ParseError("PLY: unexpected extra values on row", line_);
        }
        if (pos_ < body_.size()) {
            ++pos_;
            ++line_;
        }
    }

private:
    double read_ascii() {
        while (pos_ < body_.size() && (body_[pos_] == ' ' || body_[pos_] == '\t' || body_[pos_] == '\r')) {
            ++pos_;
        }
        if (pos_ >= body_.size()) {
            throw ParseError("PLY: truncated body, element count exceeds data", line_);
        }
        if (body_[pos_] == '\n') {
            throw ParseError("PLY: row has too few values", line_);
        }
        const char* b = body_.data() + pos_;
        const char* e = body_.data() + body_.size();
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(b, e, v);
        if (ec != std::errc{}) {
            throw ParseError("PLY: malformed number", line_);
        }
        pos_ += static_cast<std::size_t>(ptr - b);
        return v;
    }

    template <typename T>
    T load() {
        if (pos_ + sizeof(T) > body_.size()) {
            throw ParseError("PLY: truncated binary body, element count exceeds data", line_);
        }
        T v;
        std::memcpy(&v, body_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    double read_binary(Scalar t) {
        static_assert(std::endian::native == std::endian::little, "binary PLY reader assumes a little-endian host");
        switch (t) {
        case Scalar::i8: return load<std::int8_t>();
        case Scalar::u8: return load<std::uint8_t>();
        case Scalar::i16: return load<std::int16_t>();
        case Scalar::u16: return load<std::uint16_t>();
        case Scalar::i32: return load<std::int32_t>();
        case Scalar::u32: return load<std::uint32_t>();
        case Scalar::f32: return load<float>();
        case Scalar::f64: return load<double>();
        }
        return 0.0;
    }

    std::string_view body_;
    bool binary_;
    std::size_t line_;
    std::size_t pos_ = 0;
};

inline void append_double(std::string& out, double v) {
    char buf[32];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, p);
}

template <typename T>
void append_binary(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

inline std::uint8_t color_byte(double c) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0));
}

} // namespace ply_detail

/// Parses ascii 1.0 or binary_little_endian 1.0 PLY.
///
/// Reads x/y/z, optional nx/ny/nz and red/green/blue (uchar colors map to [0,1] by /255,
/// float colors are taken as-is); other vertex properties are skipped. A `face` element with
/// a `vertex_indices` (or `vertex_index`) list makes the result a TriangleMesh; polygons with
/// more than three corners are fanned into triangles.
inline Geometry parse_ply(std::string_view bytes) {
    using namespace ply_detail;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    auto next_line = [&]() -> std::optional<std::string_view> {
        if (pos >= bytes.size()) {
            return std::nullopt;
        }
        const auto nl = bytes.find('\n', pos);
        const auto end = nl == std::string_view::npos ? bytes.size() : nl;
        std::string_view l = bytes.substr(pos, end - pos);
        pos = nl == std::string_view::npos ? bytes.size() : nl + 1;
        ++line_no;
        if (!l.empty() && l.back() == '\r') {
            l.remove_suffix(1);
        }
        return l;
    };

    auto first = next_line();
    if (!first || *first != "ply") {
        throw ParseError("PLY: missing 'ply' magic", 1);
    }
    bool binary = false;
    bool have_format = false;
    std::vector<Element> elements;
    for (;;) {
        auto l = next_line();
        if (!l) {
            throw ParseError("PLY: header ended without end_header", line_no);
        }
        std::istringstream ss{std::string(*l)};
        std::string kw;
        ss >> kw;
        if (kw.empty() || kw == "comment" || kw == "obj_info") {
            continue;
        }
        if (kw == "end_header") {
            break;
        }
        if (kw == "format") {
            std::string fmt, ver;
            ss >> fmt >> ver;
            if (ver != "1.0") {
                throw ParseError("PLY: unsupported format version '" + ver + "'", line_no);
            }
            if (fmt == "ascii") {
                binary = false;
            } else if (fmt == "binary_little_endian") {
                binary = true;
            } else {
                throw ParseError("PLY: unsupported format '" + fmt + "'", line_no);
            }
            have_format = true;
        } else if (kw == "element") {
            Element e;
            long long count = -1;
            ss >> e.name >> count;
            if (e.name.empty() || count < 0 || ss.fail()) {
                throw ParseError("PLY: malformed element line", line_no);
            }
            e.count = static_cast<std::size_t>(count);
            elements.push_back(std::move(e));
        } else if (kw == "property") {
            if (elements.empty()) {
                throw ParseError("PLY: property before any element", line_no);
            }
            std::string t1;
            ss >> t1;
            Property p;
            if (t1 == "list") {
                std::string ct, it;
                ss >> ct >> it >> p.name;
                const auto c = scalar_from_name(ct);
                const auto i = scalar_from_name(it);
                if (!c || !i || p.name.empty()) {
                    throw ParseError("PLY: malformed list property", line_no);
                }
                p.is_list = true;
                p.count_type = *c;
                p.type = *i;
            } else {
                const auto t = scalar_from_name(t1);
                ss >> p.name;
                if (!t || p.name.empty()) {
                    throw ParseError("PLY: malformed property '" + std::string(*l) + "'", line_no);
                }
                p.type = *t;
            }
            elements.back().props.push_back(std::move(p));
        } else {
            throw ParseError("PLY: unknown header keyword '" + kw + "'", line_no);
        }
    }
    if (!have_format) {
        throw ParseError("PLY: header has no format line", line_no);
    }

    BodyReader reader(bytes.substr(pos), binary, line_no + 1);
    PointCloud cloud;
    std::vector<Face> faces;
    bool has_faces = false;
    for (const auto& e : elements) {
        if (e.name == "vertex") {
            int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1, ir = -1, ig = -1, ib = -1;
            for (int k = 0; k < static_cast<int>(e.props.size()); ++k) {
                const auto& n = e.props[k].name;
                if (e.props[k].is_list) continue;
                if (n == "x") ix = k;
                else if (n == "y") iy = k;
                else if (n == "z") iz = k;
                else if (n == "nx") inx = k;
                else if (n == "ny") iny = k;
                else if (n == "nz") inz = k;
                else if (n == "red") ir = k;
                else if (n == "green") ig = k;
                else if (n == "blue") ib = k;
            }
            if (ix < 0 || iy < 0 || iz < 0) {
                throw InputError("PLY: vertex element lacks x/y/z");
            }
            const bool normals = inx >= 0 && iny >= 0 && inz >= 0;
            const bool colors = ir >= 0 && ig >= 0 && ib >= 0;
            cloud.points.reserve(e.count);
            if (normals) cloud.normals.emplace();
            if (colors) cloud.colors.emplace();
            std::vector<double> row(e.props.size());
            for (std::size_t i = 0; i < e.count; ++i) {
                for (std::size_t k = 0; k < e.props.size(); ++k) {
                    const auto& p = e.props[k];
                    if (p.is_list) {
                        const auto n = static_cast<std::size_t>(reader.read(p.count_type));
                        for (std::size_t j = 0; j < n; ++j) reader.read(p.type);
                        row[k] = 0.0;
                    } else {
                        row[k] = reader.read(p.type);
                    }
                }
                reader.end_row();
                cloud.points.emplace_back(row[ix], row[iy], row[iz]);
                if (normals) {
                    cloud.normals->emplace_back(row[inx], row[iny], row[inz]);
                }
                if (colors) {
                    const bool bytes_ = e.props[ir].type == Scalar::u8;
                    const double s = bytes_ ? 1.0 / 255.0 : 1.0;
                    cloud.colors->emplace_back(row[ir] * s, row[ig] * s, row[ib] * s);
                }
            }
        } else if (e.name == "face") {
            has_faces = true;
            faces.reserve(e.count);
            for (std::size_t i = 0; i < e.count; ++i) {
                for (const auto& p : e.props) {
                    if (!p.is_list) {
                        reader.read(p.type);
                        continue;
                    }
                    const auto n = static_cast<std::size_t>(reader.read(p.count_type));
                    std::vector<std::uint32_t> idx(n);
                    for (auto& v : idx) {
                        const double d = reader.read(p.type);
                        if (d < 0) {
                            throw InputError("PLY: negative face index");
                        }
                        v = static_cast<std::uint32_t>(d);
                    }
                    if (p.name == "vertex_indices" || p.name == "vertex_index") {
                        for (std::size_t j = 1; j + 1 < n; ++j) {
                            faces.push_back({idx[0], idx[j], idx[j + 1]});
                        }
                    }
                }
                reader.end_row();
            }
        } else {
            for (std::size_t i = 0; i < e.count; ++i) {
                for (const auto& p : e.props) {
                    if (p.is_list) {
                        const auto n = static_cast<std::size_t>(reader.read(p.count_type));
                        for (std::size_t j = 0; j < n; ++j) reader.read(p.type);
                    } else {
                        reader.read(p.type);
                    }
                }
                reader.end_row();
            }
        }
    }
    if (has_faces) {
        TriangleMesh m{std::move(cloud), std::move(faces)};
        m.validate();
        return m;
    }
    return cloud;
}

/// Positions and normals as double, colors as uchar, faces as `list uchar int`.
inline std::string write_ply(const PointCloud& c, const std::vector<Face>* faces, PlyEncoding enc) {
    using namespace ply_detail;
    std::string out;
    out += "ply\n";
    out += enc == PlyEncoding::ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n";
    out += "element vertex " + std::to_string(c.size()) + "\n";
    out += "property double x\nproperty double y\nproperty double z\n";
    if (c.normals) out += "property double nx\nproperty double ny\nproperty double nz\n";
    if (c.colors) out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    if (faces) {
        out += "element face " + std::to_string(faces->size()) + "\n";
        out += "property list uchar int vertex_indices\n";
    }
    out += "end_header\n";
    for (std::size_t i = 0; i < c.size(); ++i) {
        std::vector<double> vals(c.points[i].data(), c.points[i].data() + 3);
        if (c.normals) vals.insert(vals.end(), (*c.normals)[i].data(), (*c.normals)[i].data() + 3);
        if (enc == PlyEncoding::ascii) {
            for (std::size_t k = 0; k < vals.size(); ++k) {
                if (k) out += ' ';
                append_double(out, vals[k]);
            }
            if (c.colors) {
                for (int k = 0; k < 3; ++k) {
                    out += ' ';
                    out += std::to_string(color_byte((*c.colors)[i][k]));
                }
            }
            out += '\n';
        } else {
            for (double v : vals) append_binary(out, v);
            if (c.colors) {
                for (int k = 0; k < 3; ++k) append_binary(out, color_byte((*c.colors)[i][k]));
            }
        }
    }
    if (faces) {
        for (const auto& f : *faces) {
            if (enc == PlyEncoding::ascii) {
                out += "3 " + std::to_string(f[0]) + " " + std::to_string(f[1]) + " " + std::to_string(f[2]) + "\n";
            } else {
                append_binary(out, std::uint8_t{3});
                for (auto v : f) append_binary(out, static_cast<std::int32_t>(v));
            }
        }
    }
    return out;
}

inline std::string write_ply(const PointCloud& c, PlyEncoding enc = PlyEncoding::binary_little_endian) {
    return write_ply(c, nullptr, enc);
}

inline std::string write_ply(const TriangleMesh& m, PlyEncoding enc = PlyEncoding::binary_little_endian) {
    return write_ply(m.vertices, &m.faces, enc);
}

inline std::string write_ply(const Geometry& g, PlyEncoding enc = PlyEncoding::binary_little_endian) {
    return std::visit([&](const auto& x) { return write_ply(x, enc); }, g);
}

inline Geometry load_ply(const std::filesystem::path& path) { return parse_ply(read_file(path)); }

/// The mesh view of any geometry; clouds become meshes with no faces.
inline TriangleMesh as_mesh(Geometry g) {
    if (auto* m = std::get_if<TriangleMesh>(&g)) {
        return std::move(*m);
    }
    return {std::move(std::get<PointCloud>(g)), {}};
}

} // namespace photofuse
