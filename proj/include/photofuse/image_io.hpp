#pragma once

#include <photofuse/error.hpp>
#include <photofuse/file_util.hpp>
#include <photofuse/image.hpp>

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace photofuse {

namespace png_detail {

struct ReadSource {
    std::string_view bytes;
    std::size_t pos = 0;
};

struct ReadState {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::vector<unsigned char> pixels;
    std::vector<png_bytep> rows;
    char message[256] = {};

    ~ReadState() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

inline void on_error(png_structp png, png_const_charp msg) {
    auto* st = static_cast<ReadState*>(png_get_error_ptr(png));
    std::snprintf(st->message, sizeof(st->message), "%s", msg);
    png_longjmp(png, 1);
}

inline void on_warning(png_structp, png_const_charp) {}

inline void read_bytes(png_structp png, png_bytep out, png_size_t n) {
    auto* src = static_cast<ReadSource*>(png_get_io_ptr(png));
    if (src->pos + n > src->bytes.size()) {
        png_error(png, "truncated PNG data");
    }
    std::memcpy(out, src->bytes.data() + src->pos, n);
    src->pos += n;
}

struct WriteState {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::string out;
    char message[256] = {};

    ~WriteState() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

inline void on_write_error(png_structp png, png_const_charp msg) {
    auto* st = static_cast<WriteState*>(png_get_error_ptr(png));
    std::snprintf(st->message, sizeof(st->message), "%s", msg);
    png_longjmp(png, 1);
}

inline void write_bytes(png_structp png, png_bytep data, png_size_t n) {
    auto* st = static_cast<WriteState*>(png_get_io_ptr(png));
    st->out.append(reinterpret_cast<const char*>(data), n);
}

inline void flush(png_structp) {}

/// Encodes 8- or 16-bit samples (big-endian for 16-bit, as PNG stores them).
inline std::string encode(int width, int height, int channels, int depth, const std::vector<unsigned char>& data) {
    auto st = std::make_unique<WriteState>();
    st->png = png_create_write_struct(PNG_LIBPNG_VER_STRING, st.get(), on_write_error, on_warning);
    if (!st->png) throw Error("png_create_write_struct failed");
    st->info = png_create_info_struct(st->png);
    if (!st->info) throw Error("png_create_info_struct failed");
    const std::size_t stride = static_cast<std::size_t>(width) * channels * (depth / 8);
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) {
        rows[y] = const_cast<png_bytep>(data.data() + y * stride);
    }
    if (setjmp(png_jmpbuf(st->png))) {
        throw Error(std::string("PNG encode failed: ") + st->message);
    }
    png_set_write_fn(st->png, st.get(), write_bytes, flush);
    png_set_IHDR(st->png, st->info, width, height, depth, channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(st->png, st->info);
    png_write_image(st->png, rows.data());
    png_write_end(st->png, nullptr);
    return std::move(st->out);
}

} // namespace png_detail

/// Decodes a PNG to RGB reals. 8-bit samples map to v/255, 16-bit samples to v/65535
/// (no intermediate 8-bit rounding). Gray expands to RGB, palettes expand, alpha is dropped.
inline Image decode_png(std::string_view bytes) {
    using namespace png_detail;
    auto st = std::make_unique<ReadState>();
    ReadSource src{bytes, 0};
    st->png = png_create_read_struct(PNG_LIBPNG_VER_STRING, st.get(), on_error, on_warning);
    if (!st->png) throw Error("png_create_read_struct failed");
    st->info = png_create_info_struct(st->png);
    if (!st->info) throw Error("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(st->png))) {
        throw InputError(std::string("PNG decode failed: ") + st->message);
    }
    png_set_read_fn(st->png, &src, read_bytes);
    png_read_info(st->png, st->info);
    const png_uint_32 w = png_get_image_width(st->png, st->info);
    const png_uint_32 h = png_get_image_height(st->png, st->info);
    const int color = png_get_color_type(st->png, st->info);
    const int depth = png_get_bit_depth(st->png, st->info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(st->png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(st->png);
    if (png_get_valid(st->png, st->info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(st->png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(st->png);
    png_set_strip_alpha(st->png);
    png_read_update_info(st->png, st->info);
    const int out_depth = png_get_bit_depth(st->png, st->info);
    const std::size_t stride = png_get_rowbytes(st->png, st->info);
    st->pixels.resize(stride * h);
    st->rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) st->rows[y] = st->pixels.data() + y * stride;
    png_read_image(st->png, st->rows.data());
    png_read_end(st->png, nullptr);

    Image img(static_cast<int>(w), static_cast<int>(h));
    const unsigned char* p = st->pixels.data();
    for (png_uint_32 y = 0; y < h; ++y) {
        const unsigned char* row = p + y * stride;
        for (png_uint_32 x = 0; x < w; ++x) {
            Rgb c;
            for (int k = 0; k < 3; ++k) {
                if (out_depth == 16) {
                    const std::size_t o = (x * 3 + k) * 2;
                    c[k] = static_cast<double>((row[o] << 8) | row[o + 1]) / 65535.0;
                } else {
                    c[k] = static_cast<double>(row[x * 3 + k]) / 255.0;
                }
            }
            img(static_cast<int>(x), static_cast<int>(y)) = c;
        }
    }
    return img;
}

inline std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline std::string encode_png(const Image& img) {
    std::vector<unsigned char> data(img.size() * 3);
    for (std::size_t i = 0; i < img.size(); ++i) {
        for (int k = 0; k < 3; ++k) data[i * 3 + k] = to_byte(img.data()[i][k]);
    }
    return png_detail::encode(img.width(), img.height(), 3, 8, data);
}

/// 16-bit grayscale of values in [0,1], each stored as round(v * 65535).
inline std::string encode_png_gray16(const Grid<double>& g) {
    std::vector<unsigned char> data(g.size() * 2);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto v = static_cast<std::uint16_t>(std::lround(std::clamp(g.data()[i], 0.0, 1.0) * 65535.0));
        data[i * 2] = static_cast<unsigned char>(v >> 8);
        data[i * 2 + 1] = static_cast<unsigned char>(v & 0xff);
    }
    return png_detail::encode(g.width(), g.height(), 1, 16, data);
}

/// Binary PPM (P6). maxval up to 65535; two-byte samples are big-endian.
inline Image decode_ppm(std::string_view bytes) {
    std::size_t pos = 2;
    auto token = [&]() -> long {
        for (;;) {
            while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
            if (pos < bytes.size() && bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
                continue;
            }
            break;
        }
        long v = 0;
        bool any = false;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
            v = v * 10 + (bytes[pos++] - '0');
            any = true;
            if (v > (1L << 30)) throw InputError("PPM: header value too large");
        }
        if (!any) throw InputError("PPM: malformed header");
        return v;
    };
    const long w = token(), h = token(), maxval = token();
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
        throw InputError("PPM: invalid dimensions or maxval");
    }
    ++pos; // single whitespace after maxval
    const std::size_t bps = maxval > 255 ? 2 : 1;
    const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3 * bps;
    if (pos + need > bytes.size()) {
        throw InputError("PPM: truncated pixel data");
    }
    Image img(static_cast<int>(w), static_cast<int>(h));
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
    for (std::size_t i = 0; i < img.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            const std::size_t o = (i * 3 + k) * bps;
            const unsigned v = bps == 2 ? (p[o] << 8) | p[o + 1] : p[o];
            img.data()[i][k] = static_cast<double>(v) / static_cast<double>(maxval);
        }
    }
    return img;
}

inline std::string encode_ppm(const Image& img) {
    std::string out = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    for (const auto& c : img.data()) {
        for (int k = 0; k < 3; ++k) out.push_back(static_cast<char>(to_byte(c[k])));
    }
    return out;
}

/// Loads PNG or binary PPM, detected by content.
inline Image decode_image(std::string_view bytes) {
    static constexpr unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), png_sig, 8) == 0) {
        return decode_png(bytes);
    }
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') {
        return decode_ppm(bytes);
    }
    std::string fmt = "unknown";
    if (bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xff && static_cast<unsigned char>(bytes[1]) == 0xd8) {
        fmt = "JPEG";
    } else if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] >= '1' && bytes[1] <= '5') {
        fmt = std::string("PNM P") + bytes[1];
    } else if (bytes.size() >= 2 && bytes[0] == 'B' && bytes[1] == 'M') {
        fmt = "BMP";
    } else if (bytes.size() >= 4 && (bytes.substr(0, 4) == "II*" + std::string(1, '\0') || bytes.substr(0, 2) == "MM")) {
        fmt = "TIFF";
    }
    throw InputError("unsupported image format: " + fmt + " (expected PNG or binary PPM)");
}

inline Image load_image(const std::filesystem::path& path) { return decode_image(read_file(path)); }

/// Chooses PPM for a .ppm extension, PNG otherwise.
inline void save_image(const Image& img, const std::filesystem::path& path) {
    write_file_atomic(path, path.extension() == ".ppm" ? encode_ppm(img) : encode_png(img));
}

} // namespace photofuse
