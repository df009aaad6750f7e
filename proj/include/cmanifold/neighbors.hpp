#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "common.hpp"

namespace cmanifold {

struct Neighbor {
    Eigen::Index index = 0;
    double distance = 0.0;
};

/// Exact k nearest rows of `points` to `query`, ordered by (distance, id).
/// `ids` (optional) breaks distance ties; row order is used otherwise.
/// `exclude` skips one row (the query itself when it belongs to `points`).
inline std::vector<Neighbor> nearest(const Matrix& points, const Eigen::Ref<const Vector>& query, std::size_t k,
                                     Eigen::Index exclude = -1, std::span<const std::int64_t> ids = {}) {
    const auto n = points.rows();
    std::vector<Neighbor> all;
    all.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        if (i == exclude) continue;
        double s = 0.0;
        for (Eigen::Index j = 0; j < points.cols(); ++j) {
            const double diff = points(i, j) - query[j];
            s += diff * diff;
        }
        all.push_back({i, std::sqrt(s)});
    }
    if (k > all.size()) throw ValidationError(fmt::format("k={} exceeds the {} available neighbors", k, all.size()));
    auto less = [&](const Neighbor& a, const Neighbor& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        if (!ids.empty()) return ids[static_cast<std::size_t>(a.index)] < ids[static_cast<std::size_t>(b.index)];
        return a.index < b.index;
    };
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), less);
    all.resize(k);
    return all;
}

}  // namespace cmanifold
