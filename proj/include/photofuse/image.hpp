#pragma once

#include <photofuse/error.hpp>
#include <photofuse/geometry.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace photofuse {

/// Row-major 2D array, y down. Pixel (x, y) has its center at continuous coordinate (x, y).
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(int width, int height, const T& fill = T{})
        : width_(width), height_(height), data_(checked_size(width, height), fill) {}

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

    T& operator()(int x, int y) { return data_[index(x, y)]; }
    const T& operator()(int x, int y) const { return data_[index(x, y)]; }

    /// Nearest edge pixel for out-of-range coordinates.
    const T& clamped(int x, int y) const {
        return data_[index(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1))];
    }

    std::vector<T>& data() noexcept { return data_; }
    const std::vector<T>& data() const noexcept { return data_; }

    bool same_shape(const Grid& o) const noexcept { return width_ == o.width_ && height_ == o.height_; }

    friend bool operator==(const Grid& a, const Grid& b) {
        return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
    }

private:
    static std::size_t checked_size(int w, int h) {
        if (w < 0 || h < 0) {
            throw InputError("negative image dimensions");
        }
        return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    }

    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

/// RGB photograph with components in [0,1].
using Image = Grid<Rgb>;

/// Bilinear interpolation with clamp-to-edge outside the grid.
template <typename T>
T sample_bilinear(const Grid<T>& g, double u, double v) {
    const double fx = std::floor(u);
    const double fy = std::floor(v);
    const double ax = u - fx;
    const double ay = v - fy;
    const int x0 = static_cast<int>(fx);
    const int y0 = static_cast<int>(fy);
    const T top = (1.0 - ax) * g.clamped(x0, y0) + ax * g.clamped(x0 + 1, y0);
    const T bottom = (1.0 - ax) * g.clamped(x0, y0 + 1) + ax * g.clamped(x0 + 1, y0 + 1);
    return (1.0 - ay) * top + ay * bottom;
}

} // namespace photofuse
