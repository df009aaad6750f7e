#pragma once

#include <numeric>

#include "common.hpp"

namespace cmanifold {

struct HullOptions {
    int max_iter = 10000;
    /// Duality gap tolerance, relative to the scale of the vertex set.
    double tol = 1e-6;
};

struct HullDistance {
    double distance = 0.0;
    Vector weights;  // convex combination over vertices
    double gap = 0.0;
    int iterations = 0;
};

namespace detail {

/// Affine minimizer of ||V_S mu||, sum(mu) = 1, over the active columns.
inline Vector affine_min_norm(const Matrix& v, const std::vector<Eigen::Index>& active) {
    const auto m = static_cast<Eigen::Index>(active.size());
    Vector mu(m);
    if (m == 1) {
        mu[0] = 1.0;
        return mu;
    }
    const Vector p0 = v.col(active[0]);
    Matrix diff(v.rows(), m - 1);
    for (Eigen::Index j = 1; j < m; ++j) diff.col(j - 1) = v.col(active[static_cast<std::size_t>(j)]) - p0;
    const Vector t = diff.colPivHouseholderQr().solve(-p0);
    mu[0] = 1.0 - t.sum();
    mu.tail(m - 1) = t;
    return mu;
}

}  // namespace detail

/// Euclidean distance from x to the convex hull of the columns of `vertices`
/// (Wolfe's minimum-norm-point algorithm on the translated set V - x).
inline HullDistance hull_distance(const Matrix& vertices, const Eigen::Ref<const Vector>& x, HullOptions opt = {}) {
    require(vertices.cols() >= 1, "hull_distance: empty vertex set");
    require(vertices.rows() == x.size(), "hull_distance: dimension mismatch");
    const Matrix v = vertices.colwise() - x;
    const auto n = v.cols();
    const double scale = std::max(1.0, v.colwise().squaredNorm().maxCoeff());
    const double tol = opt.tol * scale;

    Eigen::Index start = 0;
    v.colwise().squaredNorm().minCoeff(&start);
    std::vector<Eigen::Index> active{start};
    Vector lambda = Vector::Zero(n);
    lambda[start] = 1.0;
    Vector p = v.col(start);

    HullDistance r;
    for (int it = 0; it < opt.max_iter; ++it) {
        r.iterations = it + 1;
        Eigen::Index j = 0;
        const Vector proj = v.transpose() * p;
        proj.minCoeff(&j);
        r.gap = p.squaredNorm() - proj[j];
        if (r.gap <= tol || std::find(active.begin(), active.end(), j) != active.end()) {
            r.distance = p.norm();
            r.weights = lambda;
            return r;
        }
        active.push_back(j);
        for (;;) {
            const Vector mu = detail::affine_min_norm(v, active);
            if (mu.minCoeff() > 1e-12) {
                for (Eigen::Index a = 0; a < n; ++a) lambda[a] = 0;
                for (std::size_t a = 0; a < active.size(); ++a) lambda[active[a]] = mu[static_cast<Eigen::Index>(a)];
                break;
            }
            double theta = 1.0;
            for (std::size_t a = 0; a < active.size(); ++a) {
                const double la = lambda[active[a]], ma = mu[static_cast<Eigen::Index>(a)];
                if (ma <= 1e-12 && la - ma > 0) theta = std::min(theta, la / (la - ma));
            }
            for (std::size_t a = 0; a < active.size(); ++a)
                lambda[active[a]] = (1 - theta) * lambda[active[a]] + theta * mu[static_cast<Eigen::Index>(a)];
            std::vector<Eigen::Index> keep;
            for (auto a : active)
                if (lambda[a] > 1e-12) keep.push_back(a);
                else lambda[a] = 0;
            active = std::move(keep);
            if (active.empty()) throw ComputeError("hull_distance: active set collapsed");
        }
        p = v * lambda;
    }
    throw ComputeError(fmt::format("hull_distance: no convergence after {} iterations (gap {:.3e})", opt.max_iter, r.gap));
}

/// Nearest-convex-hull scorer over the two classes' training rows.
struct HullModel {
    Matrix correct;    // columns are vertices
    Matrix incorrect;
    HullOptions options;

    static HullModel fit(const Matrix& x, std::span<const int> y, HullOptions opt = {}) {
        require_both_classes(y);
        require(static_cast<std::size_t>(x.rows()) == y.size(), "HullModel: X and y row counts differ");
        HullModel m;
        m.options = opt;
        const auto pos = static_cast<Eigen::Index>(count_positive(y));
        m.correct.resize(x.cols(), pos);
        m.incorrect.resize(x.cols(), x.rows() - pos);
        Eigen::Index a = 0, b = 0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            if (y[static_cast<std::size_t>(i)] == 1) m.correct.col(a++) = x.row(i).transpose();
            else m.incorrect.col(b++) = x.row(i).transpose();
        }
        return m;
    }

    /// dist(incorrect hull) - dist(correct hull); larger means more likely correct.
    double score(const Eigen::Ref<const Vector>& x) const {
        return hull_distance(incorrect, x, options).distance - hull_distance(correct, x, options).distance;
    }
};

}  // namespace cmanifold
