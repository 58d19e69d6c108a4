#pragma once

#include <photofuse/color.hpp>
#include <photofuse/image.hpp>

#include <array>
#include <cstddef>

namespace photofuse {

inline constexpr int kHistogramBins = 256;

inline int value_bin(double v) {
    return std::clamp(static_cast<int>(std::floor(v * kHistogramBins)), 0, kHistogramBins - 1);
}

/// Histogram-equalizes the HSV value channel, leaving hue and saturation untouched.
///
/// Each pixel's V becomes the cumulative fraction of pixels whose V falls in the same or a
/// lower bin, so the brightest populated bin maps to 1. An image whose V occupies a single
/// bin is returned unchanged.
inline Image equalize_value_channel(const Image& img) {
    if (img.empty()) {
        throw InputError("cannot equalize an empty image");
    }
    std::vector<Hsv> hsv(img.size());
    std::array<std::size_t, kHistogramBins> hist{};
    for (std::size_t i = 0; i < img.size(); ++i) {
        hsv[i] = rgb_to_hsv(img.data()[i]);
        ++hist[value_bin(hsv[i].v)];
    }
    const auto populated = std::count_if(hist.begin(), hist.end(), [](std::size_t n) { return n > 0; });
    if (populated <= 1) {
        return img;
    }
    std::array<double, kHistogramBins> cdf{};
    std::size_t running = 0;
    for (int b = 0; b < kHistogramBins; ++b) {
        running += hist[b];
        cdf[b] = static_cast<double>(running) / static_cast<double>(img.size());
    }
    Image out(img.width(), img.height());
    for (std::size_t i = 0; i < img.size(); ++i) {
        Hsv h = hsv[i];
        h.v = cdf[value_bin(h.v)];
        out.data()[i] = hsv_to_rgb(h);
    }
    return out;
}

} // namespace photofuse
