#pragma once

#include <photofuse/error.hpp>
#include <photofuse/geometry.hpp>
#include <photofuse/kdtree.hpp>

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

namespace photofuse {

struct Correspondence {
    std::uint32_t source;
    std::uint32_t target;
    double sq_dist;
};

using CorrespondenceSet = std::vector<Correspondence>;
using PointPair = std::pair<Point3, Point3>;

/// Scale from the ratio of bounding-box diagonals, identity rotation, box centers aligned.
/// A single outlier in either cloud skews the scale.
inline SimilarityTransform coarse_align_bbox(const PointCloud& source, const PointCloud& target) {
    const Aabb sb = compute_aabb(source);
    const Aabb tb = compute_aabb(target);
    const double sd = sb.diagonal();
    const double td = tb.diagonal();
    if (!(sd > 0.0) || !(td > 0.0)) {
        throw InputError("degenerate geometry: zero bounding-box diagonal");
    }
    const double s = td / sd;
    if (!std::isfinite(sd) || !std::isfinite(td) || !(s > 0.0) || !std::isfinite(s)) {
        throw NumericalError("bounding-box scale ratio is not finite");
    }
    return {s, Mat3::Identity(), tb.center() - s * sb.center()};
}

/// Closed-form least-squares similarity dst ~ s*R*src + t (Umeyama), with the reflection
/// guard. Throws InputError when the source points are collinear or coincident.
inline SimilarityTransform umeyama(std::span<const Point3> src, std::span<const Point3> dst) {
    if (src.size() != dst.size()) {
        throw InputError("point set sizes differ");
    }
    if (src.size() < 3) {
        throw InputError("insufficient correspondences: need at least 3 pairs");
    }
    const double n = static_cast<double>(src.size());
    Vec3 ms = Vec3::Zero(), md = Vec3::Zero();
    for (std::size_t i = 0; i < src.size(); ++i) {
        ms += src[i];
        md += dst[i];
    }
    ms /= n;
    md /= n;
    Mat3 cov = Mat3::Zero();
    Mat3 src_cov = Mat3::Zero();
    double src_var = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        const Vec3 a = src[i] - ms;
        const Vec3 b = dst[i] - md;
        cov += b * a.transpose();
        src_cov += a * a.transpose();
        src_var += a.squaredNorm();
    }
    cov /= n;
    src_cov /= n;
    src_var /= n;

    const Eigen::JacobiSVD<Mat3> src_svd(src_cov);
    const Vec3 sv = src_svd.singularValues();
    if (!(sv[0] > 0.0) || sv[1] <= 1e-12 * sv[0]) {
        throw InputError("rank-deficient correspondences: points are collinear or coincident");
    }

    const Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Vec3 d = Vec3::Ones();
    if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) {
        d[2] = -1.0;
    }
    const Mat3 r = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
    const double s = svd.singularValues().dot(d) / src_var;
    if (!std::isfinite(s) || !(s > 0.0) || !r.allFinite()) {
        throw NumericalError("similarity estimate is not finite");
    }
    return {s, r, md - s * (r * ms)};
}

inline SimilarityTransform coarse_align_correspondences(std::span<const PointPair> pairs) {
    if (pairs.size() < 3) {
        throw InputError("insufficient correspondences: need at least 3 pairs, got " +
                         std::to_string(pairs.size()));
    }
    std::vector<Point3> src, dst;
    src.reserve(pairs.size());
    dst.reserve(pairs.size());
    for (const auto& [s, t] : pairs) {
        src.push_back(s);
        dst.push_back(t);
    }
    return umeyama(src, dst);
}

/// For every point of `a`, its exact nearest neighbour in the tree built over `b`.
inline CorrespondenceSet nearest_correspondences(std::span<const Point3> a, const KdTree& b) {
    CorrespondenceSet out;
    out.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto hit = b.nearest(a[i]);
        out.push_back({static_cast<std::uint32_t>(i), hit.index, hit.sq_dist});
    }
    return out;
}

inline CorrespondenceSet nearest_correspondences(const PointCloud& a, const PointCloud& b) {
    if (b.empty()) {
        throw InputError("empty geometry");
    }
    return nearest_correspondences(a.points, KdTree(b.points));
}

/// Root mean square of correspondence distances, measured on the given clouds.
inline double rmse(const PointCloud& a, const PointCloud& b, const CorrespondenceSet& corr) {
    if (corr.empty()) {
        throw InputError("rmse needs at least one correspondence");
    }
    double sum = 0.0;
    for (const auto& c : corr) {
        sum += (a.points[c.source] - b.points[c.target]).squaredNorm();
    }
    return std::sqrt(sum / static_cast<double>(corr.size()));
}

struct SicpConfig {
    double tolerance = 1e-6;
    int max_iterations = 100;
    /// Pairs farther than median + k * robust sigma are dropped when k > 0. Off by default.
    double reject_sigma = 0.0;
};

struct SicpReport {
    SimilarityTransform transform;
    std::vector<double> rmse_trace;
    int iterations = 0;
    bool converged = false;
};

/// The update step produced a non-finite transform; carries the last valid estimate.
class SicpFailure : public NumericalError {
public:
    SicpFailure(const std::string& what, SimilarityTransform last, std::vector<double> trace)
        : NumericalError(what), last_(std::move(last)), trace_(std::move(trace)) {}

    const SimilarityTransform& last_valid() const noexcept { return last_; }
    const std::vector<double>& rmse_trace() const noexcept { return trace_; }

private:
    SimilarityTransform last_;
    std::vector<double> trace_;
};

namespace detail {

inline std::vector<bool> inlier_flags(const std::vector<double>& sq, double k) {
    std::vector<bool> keep(sq.size(), true);
    if (k <= 0.0 || sq.empty()) {
        return keep;
    }
    std::vector<double> d(sq.size());
    std::transform(sq.begin(), sq.end(), d.begin(), [](double v) { return std::sqrt(v); });
    auto tmp = d;
    const auto mid = tmp.begin() + static_cast<std::ptrdiff_t>(tmp.size() / 2);
    std::nth_element(tmp.begin(), mid, tmp.end());
    const double median = *mid;
    for (auto& v : tmp) {
        v = std::abs(v - median);
    }
    std::nth_element(tmp.begin(), mid, tmp.end());
    const double sigma = 1.4826 * *mid;
    for (std::size_t i = 0; i < d.size(); ++i) {
        keep[i] = d[i] <= median + k * sigma;
    }
    return keep;
}

} // namespace detail

/// Scale ICP with a bidirectional objective.
///
/// `source` moves, `target` stays fixed. Each iteration pairs every transformed source point
/// with its nearest target point and every target point with its nearest transformed source
/// point, records the RMSE over the union, and re-solves (s, R, t) in closed form over that
/// union. Stops when the relative RMSE change drops below the tolerance, the RMSE reaches
/// zero, or the iteration cap is hit; the reported transform is the one the last RMSE was
/// measured at.
inline SicpReport sicp_register(const PointCloud& source, const PointCloud& target,
                                const SimilarityTransform& init, const SicpConfig& cfg = {}) {
    if (source.empty() || target.empty()) {
        throw InputError("empty geometry");
    }
    const KdTree target_tree(target.points);
    SicpReport rep;
    rep.transform = init;
    std::vector<Point3> moved(source.size());
    std::vector<Point3> src_pts, dst_pts;
    std::vector<double> sq;
    const std::size_t total = source.size() + target.size();
    src_pts.reserve(total);
    dst_pts.reserve(total);
    sq.reserve(total);

    for (int it = 1; it <= std::max(1, cfg.max_iterations); ++it) {
        for (std::size_t i = 0; i < source.size(); ++i) {
            moved[i] = rep.transform(source.points[i]);
        }
        const KdTree moved_tree(moved);
        src_pts.clear();
        dst_pts.clear();
        sq.clear();
        for (std::size_t i = 0; i < source.size(); ++i) {
            const auto h = target_tree.nearest(moved[i]);
            src_pts.push_back(source.points[i]);
            dst_pts.push_back(target.points[h.index]);
            sq.push_back(h.sq_dist);
        }
        for (std::size_t j = 0; j < target.size(); ++j) {
            const auto h = moved_tree.nearest(target.points[j]);
            src_pts.push_back(source.points[h.index]);
            dst_pts.push_back(target.points[j]);
            sq.push_back(h.sq_dist);
        }
        const auto keep = detail::inlier_flags(sq, cfg.reject_sigma);
        double sum = 0.0;
        std::size_t kept = 0;
        for (std::size_t i = 0; i < sq.size(); ++i) {
            if (keep[i]) {
                sum += sq[i];
                ++kept;
            }
        }
        const double err = std::sqrt(sum / static_cast<double>(std::max<std::size_t>(kept, 1)));
        rep.rmse_trace.push_back(err);
        rep.iterations = it;
        if (err == 0.0) {
            rep.converged = true;
            break;
        }
        if (rep.rmse_trace.size() >= 2) {
            const double prev = rep.rmse_trace[rep.rmse_trace.size() - 2];
            if (std::abs(prev - err) / prev < cfg.tolerance) {
                rep.converged = true;
                break;
            }
        }
        if (it == cfg.max_iterations) {
            break;
        }
        if (cfg.reject_sigma > 0.0) {
            std::size_t w = 0;
            for (std::size_t i = 0; i < keep.size(); ++i) {
                if (keep[i]) {
                    src_pts[w] = src_pts[i];
                    dst_pts[w] = dst_pts[i];
                    ++w;
                }
            }
            src_pts.resize(w);
            dst_pts.resize(w);
        }
        try {
            rep.transform = umeyama(src_pts, dst_pts);
        } catch (const Error& e) {
            throw SicpFailure(std::string("SICP update failed: ") + e.what(), rep.transform, rep.rmse_trace);
        }
    }
    return rep;
}

} // namespace photofuse
