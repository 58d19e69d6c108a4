#pragma once

#include <photofuse/geometry.hpp>
#include <photofuse/image.hpp>

#include <algorithm>
#include <cmath>

namespace photofuse {

/// Hue in degrees [0, 360), saturation and value in [0, 1].
struct Hsv {
    double h = 0.0;
    double s = 0.0;
    double v = 0.0;
};

/// Hexcone model.
inline Hsv rgb_to_hsv(const Rgb& rgb) {
    const double r = rgb[0], g = rgb[1], b = rgb[2];
    const double max = std::max({r, g, b});
    const double min = std::min({r, g, b});
    const double chroma = max - min;
    Hsv out;
    out.v = max;
    out.s = max > 0.0 ? chroma / max : 0.0;
    if (chroma > 0.0) {
        double h;
        if (max == r) {
            h = std::fmod((g - b) / chroma, 6.0);
        } else if (max == g) {
            h = (b - r) / chroma + 2.0;
        } else {
            h = (r - g) / chroma + 4.0;
        }
        h *= 60.0;
        if (h < 0.0) {
            h += 360.0;
        }
        out.h = h >= 360.0 ? h - 360.0 : h;
    }
    return out;
}

inline Rgb hsv_to_rgb(const Hsv& hsv) {
    const double c = hsv.v * hsv.s;
    const double hp = hsv.h / 60.0;
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    Rgb rgb;
    switch (static_cast<int>(hp) % 6) {
    case 0: rgb = {c, x, 0}; break;
    case 1: rgb = {x, c, 0}; break;
    case 2: rgb = {0, c, x}; break;
    case 3: rgb = {0, x, c}; break;
    case 4: rgb = {x, 0, c}; break;
    default: rgb = {c, 0, x}; break;
    }
    return rgb + Rgb::Constant(hsv.v - c);
}

/// BT.601 studio swing on a 0-255 scale: Y in [16,235], Cb/Cr in [16,240].
inline Vec3 rgb_to_ycbcr(const Rgb& rgb) {
    static const Mat3 m = (Mat3() << 65.481, 128.553, 24.966,
                                     -37.797, -74.203, 112.0,
                                     112.0, -93.786, -18.214).finished();
    return Vec3(16.0, 128.0, 128.0) + m * rgb;
}

inline Grid<Vec3> to_ycbcr(const Image& img) {
    Grid<Vec3> out(img.width(), img.height());
    std::transform(img.data().begin(), img.data().end(), out.data().begin(),
                   [](const Rgb& c) { return rgb_to_ycbcr(c); });
    return out;
}

} // namespace photofuse
