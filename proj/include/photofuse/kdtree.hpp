#pragma once

#include <photofuse/geometry.hpp>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <span>
#include <utility>
#include <vector>

namespace photofuse {

/// Exact nearest-neighbour index over a fixed set of 3D points.
///
/// Distance ties resolve to the smallest point index, so results match a linear scan
/// that keeps the first strictly-closer candidate.
class KdTree {
public:
    struct Hit {
        std::uint32_t index;
        double sq_dist;
    };

    KdTree() = default;

    explicit KdTree(std::span<const Point3> points) : points_(points.begin(), points.end()) {
        order_.resize(points_.size());
        std::iota(order_.begin(), order_.end(), 0u);
        if (!points_.empty()) {
            nodes_.reserve(2 * points_.size() / kLeafSize + 2);
            build(0, static_cast<std::uint32_t>(points_.size()));
        }
    }

    std::size_t size() const noexcept { return points_.size(); }
    bool empty() const noexcept { return points_.empty(); }

    Hit nearest(const Point3& q) const {
        Hit best{std::numeric_limits<std::uint32_t>::max(), std::numeric_limits<double>::infinity()};
        if (!nodes_.empty()) {
            search_nearest(0, q, best);
        }
        return best;
    }

    /// The k closest points, ascending by (distance, index).
    std::vector<Hit> knn(const Point3& q, std::size_t k) const {
        k = std::min(k, points_.size());
        std::priority_queue<Hit, std::vector<Hit>, HitLess> heap;
        if (k > 0) {
            search_knn(0, q, k, heap);
        }
        std::vector<Hit> out(heap.size());
        for (auto i = out.size(); i-- > 0;) {
            out[i] = heap.top();
            heap.pop();
        }
        return out;
    }

private:
    static constexpr std::uint32_t kLeafSize = 8;

    struct Node {
        std::uint32_t begin, end;   // range into order_
        std::uint32_t left, right;  // child node ids, 0 for leaves
        int axis;
        double split;
        Aabb box;
    };

    struct HitLess {
        bool operator()(const Hit& a, const Hit& b) const {
            return a.sq_dist < b.sq_dist || (a.sq_dist == b.sq_dist && a.index < b.index);
        }
    };

    std::uint32_t build(std::uint32_t begin, std::uint32_t end) {
        const auto id = static_cast<std::uint32_t>(nodes_.size());
        nodes_.push_back({begin, end, 0, 0, -1, 0.0, {}});
        Aabb box{points_[order_[begin]], points_[order_[begin]]};
        for (auto i = begin; i < end; ++i) {
            box.min = box.min.cwiseMin(points_[order_[i]]);
            box.max = box.max.cwiseMax(points_[order_[i]]);
        }
        nodes_[id].box = box;
        if (end - begin <= kLeafSize) {
            return id;
        }
        int axis = 0;
        (box.max - box.min).maxCoeff(&axis);
        const auto mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
        const auto left = build(begin, mid);
        const auto right = build(mid, end);
        nodes_[id].axis = axis;
        nodes_[id].split = points_[order_[mid]][axis];
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    static double box_sq_dist(const Aabb& b, const Point3& q) {
        const Vec3 d = (b.min - q).cwiseMax(q - b.max).cwiseMax(Vec3::Zero());
        return d.squaredNorm();
    }

    void search_nearest(std::uint32_t id, const Point3& q, Hit& best) const {
        const Node& n = nodes_[id];
        if (n.axis < 0) {
            for (auto i = n.begin; i < n.end; ++i) {
                const auto idx = order_[i];
                const double d = (points_[idx] - q).squaredNorm();
                if (d < best.sq_dist || (d == best.sq_dist && idx < best.index)) {
                    best = {idx, d};
                }
            }
            return;
        }
        const bool go_left = q[n.axis] < n.split;
        const auto first = go_left ? n.left : n.right;
        const auto second = go_left ? n.right : n.left;
        if (box_sq_dist(nodes_[first].box, q) <= best.sq_dist) {
            search_nearest(first, q, best);
        }
        if (box_sq_dist(nodes_[second].box, q) <= best.sq_dist) {
            search_nearest(second, q, best);
        }
    }

    template <typename Heap>
    void search_knn(std::uint32_t id, const Point3& q, std::size_t k, Heap& heap) const {
        const Node& n = nodes_[id];
        if (n.axis < 0) {
            for (auto i = n.begin; i < n.end; ++i) {
                const Hit h{order_[i], (points_[order_[i]] - q).squaredNorm()};
                if (heap.size() < k) {
                    heap.push(h);
                } else if (HitLess{}(h, heap.top())) {
                    heap.pop();
                    heap.push(h);
                }
            }
            return;
        }
        const bool go_left = q[n.axis] < n.split;
        const auto first = go_left ? n.left : n.right;
        const auto second = go_left ? n.right : n.left;
        for (auto child : {first, second}) {
            const double bound = heap.size() < k ? std::numeric_limits<double>::infinity() : heap.top().sq_dist;
            if (box_sq_dist(nodes_[child].box, q) <= bound) {
                search_knn(child, q, k, heap);
            }
        }
    }

    std::vector<Point3> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
};

} // namespace photofuse
