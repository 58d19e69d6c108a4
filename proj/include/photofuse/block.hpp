#pragma once

#include <photofuse/error.hpp>
#include <photofuse/geometry.hpp>
#include <photofuse/image.hpp>

#include <optional>
#include <span>
#include <vector>

namespace photofuse {

/// Square patch of YCbCr samples with side `n` (odd), stored row-major.
///
/// `n` is the side length; a block holds n*n samples and the error below normalizes by n*n.
class Block {
public:
    Block() = default;

    Block(int n, std::vector<Vec3> samples) : n_(n), samples_(std::move(samples)) {
        if (n < 1 || n % 2 == 0) {
            throw InputError("block side must be a positive odd number");
        }
        if (samples_.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n)) {
            throw InputError("block sample count must equal side squared");
        }
        update_mean();
    }

    int side() const noexcept { return n_; }
    std::span<const Vec3> samples() const noexcept { return samples_; }
    const Vec3& mean() const noexcept { return mean_; }
    const Vec3& center() const { return samples_[samples_.size() / 2]; }

    /// Refill in place from a grid window centered at (cx, cy); no allocation after the first use.
    void assign_from(const Grid<Vec3>& g, int cx, int cy, int n) {
        n_ = n;
        samples_.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
        const int r = n / 2;
        auto out = samples_.begin();
        for (int y = cy - r; y <= cy + r; ++y) {
            for (int x = cx - r; x <= cx + r; ++x) {
                *out++ = g.clamped(x, y);
            }
        }
        update_mean();
    }

private:
    void update_mean() {
        Vec3 sum = Vec3::Zero();
        for (const auto& s : samples_) {
            sum += s;
        }
        mean_ = sum / static_cast<double>(samples_.size());
    }

    int n_ = 0;
    std::vector<Vec3> samples_;
    Vec3 mean_ = Vec3::Zero();
};

/// Block centered at pixel (cx, cy); border-straddling blocks clamp to edge pixels.
/// Returns nothing when the center itself lies outside the grid.
inline std::optional<Block> extract_block(const Grid<Vec3>& g, int cx, int cy, int n) {
    if (n < 1 || n % 2 == 0) {
        throw InputError("block side must be a positive odd number");
    }
    if (!g.contains(cx, cy)) {
        return std::nullopt;
    }
    Block b;
    b.assign_from(g, cx, cy, n);
    return b;
}

/// Per-channel mean-subtracted MSE:
///   MSE_c = 1/n^2 * sum_ij ((S_ij - mean S) - (T_ij - mean T))^2
/// evaluated as the variance of the difference D = S - T, which is the same sum.
inline Vec3 block_mse(const Block& s, const Block& t) {
    if (s.side() != t.side()) {
        throw InputError("block size mismatch");
    }
    const auto a = s.samples();
    const auto b = t.samples();
    Vec3 dsum = Vec3::Zero();
    for (std::size_t i = 0; i < a.size(); ++i) {
        dsum += a[i] - b[i];
    }
    const Vec3 dmean = dsum / static_cast<double>(a.size());
    Vec3 acc = Vec3::Zero();
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += (a[i] - b[i] - dmean).cwiseAbs2();
    }
    return acc / static_cast<double>(a.size());
}

/// Mean of the three channel errors.
inline double match_error(const Vec3& mse) { return (mse[0] + mse[1] + mse[2]) / 3.0; }

} // namespace photofuse
