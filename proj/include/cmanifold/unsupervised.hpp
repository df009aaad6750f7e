#pragma once

#include <array>

#include "geometry.hpp"
#include "projection.hpp"
#include "rng.hpp"

namespace cmanifold {

/// Local outlier factor in novelty mode: fitted on reference rows, evaluated on new points.
struct LofModel {
    Matrix reference;
    std::size_t k = 20;
    Vector k_distance;  // distance to the k-th neighbor of each reference row
    Vector lrd;         // local reachability density of each reference row

    static LofModel fit(const Matrix& x, std::size_t k = 20, int jobs = 1) {
        require(static_cast<std::size_t>(x.rows()) > k, fmt::format("lof: need more than k={} rows", k));
        LofModel m;
        m.reference = x;
        m.k = k;
        const auto n = static_cast<std::size_t>(x.rows());
        std::vector<std::vector<Neighbor>> nbrs(n);
        parallel_for(n, jobs, [&](std::size_t i) {
            nbrs[i] = nearest(x, x.row(static_cast<Eigen::Index>(i)).transpose(), k, static_cast<Eigen::Index>(i));
        });
        m.k_distance.resize(x.rows());
        for (std::size_t i = 0; i < n; ++i) m.k_distance[static_cast<Eigen::Index>(i)] = nbrs[i].back().distance;
        m.lrd.resize(x.rows());
        for (std::size_t i = 0; i < n; ++i) m.lrd[static_cast<Eigen::Index>(i)] = m.density(nbrs[i]);
        return m;
    }

    double density(const std::vector<Neighbor>& nb) const {
        double s = 0.0;
        for (const auto& o : nb) s += std::max(k_distance[o.index], o.distance);
        return 1.0 / (s / static_cast<double>(nb.size()) + 1e-10);
    }

    double score(const Eigen::Ref<const Vector>& q) const {
        const auto nb = nearest(reference, q, k);
        double s = 0.0;
        for (const auto& o : nb) s += lrd[o.index];
        return s / static_cast<double>(nb.size()) / density(nb);
    }
};

/// Uniform double in [0, 1) from 53 engine bits.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct KMeansModel {
    Matrix centers;  // k x d
    int iterations = 0;

    Eigen::Index assign(const Eigen::Ref<const Vector>& x, double* dist = nullptr) const {
        Eigen::Index best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < centers.rows(); ++c) {
            const double v = (centers.row(c).transpose() - x).squaredNorm();
            if (v < bd) {
                bd = v;
                best = c;
            }
        }
        if (dist) *dist = std::sqrt(bd);
        return best;
    }

    double nearest_distance(const Eigen::Ref<const Vector>& x) const {
        double d = 0.0;
        assign(x, &d);
        return d;
    }
};

/// Lloyd's algorithm with k-means++ seeding from a seeded stream.
inline KMeansModel kmeans(const Matrix& x, Eigen::Index k = 8, std::uint64_t seed = 42, int max_iter = 100) {
    require(k >= 1 && x.rows() >= k, fmt::format("kmeans: need at least k={} rows", k));
    auto rng = make_stream(seed, {stream::kmeans});
    const auto n = x.rows();
    KMeansModel m;
    m.centers.resize(k, x.cols());
    m.centers.row(0) = x.row(static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n))));
    Vector d2(n);
    for (Eigen::Index i = 0; i < n; ++i) d2[i] = (x.row(i) - m.centers.row(0)).squaredNorm();
    for (Eigen::Index c = 1; c < k; ++c) {
        const double total = d2.sum();
        Eigen::Index pick = 0;
        if (total > 0) {
            const double u = unit_uniform(rng) * total;
            double acc = 0.0;
            pick = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc > u) {
                    pick = i;
                    break;
                }
            }
        }
        m.centers.row(c) = x.row(pick);
        for (Eigen::Index i = 0; i < n; ++i) d2[i] = std::min(d2[i], (x.row(i) - m.centers.row(c)).squaredNorm());
    }
    std::vector<Eigen::Index> label(static_cast<std::size_t>(n), -1);
    for (int it = 0; it < max_iter; ++it) {
        m.iterations = it + 1;
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto a = m.assign(x.row(i).transpose());
            if (a != label[static_cast<std::size_t>(i)]) {
                label[static_cast<std::size_t>(i)] = a;
                changed = true;
            }
        }
        if (!changed) break;
        Matrix sum = Matrix::Zero(k, x.cols());
        Vector cnt = Vector::Zero(k);
        for (Eigen::Index i = 0; i < n; ++i) {
            sum.row(label[static_cast<std::size_t>(i)]) += x.row(i);
            cnt[label[static_cast<std::size_t>(i)]] += 1;
        }
        for (Eigen::Index c = 0; c < k; ++c)
            if (cnt[c] > 0) m.centers.row(c) = sum.row(c) / cnt[c];
    }
    return m;
}

inline constexpr std::array<const char*, 5> kUnsupervisedFeatures{"l2_norm", "recon_error", "lof", "cluster_uncertainty",
                                                                   "local_dim"};

struct UnsupervisedOptions {
    Eigen::Index pca_dim = 32;
    std::size_t lof_k = 20;
    Eigen::Index clusters = 8;
    int kmeans_iter = 100;
    int local_k = 10;
    std::uint64_t seed = 42;
    int jobs = 1;
};

/// Label-free feature extractors fitted on reference rows.
struct UnsupervisedModel {
    Matrix reference;
    PcaProjector pca;
    LofModel lof;
    KMeansModel km;
    UnsupervisedOptions options;

    static UnsupervisedModel fit(const Matrix& x, UnsupervisedOptions opt = {}) {
        require(x.rows() >= 21, "unsupervised_features: need at least 21 rows");
        UnsupervisedModel m;
        m.options = opt;
        m.reference = x;
        m.pca = fit_pca(x, std::min<Eigen::Index>({opt.pca_dim, x.cols(), x.rows() - 1}));
        m.lof = LofModel::fit(x, opt.lof_k, opt.jobs);
        m.km = kmeans(x, opt.clusters, opt.seed, opt.kmeans_iter);
        return m;
    }

    /// N x 5 matrix, columns in kUnsupervisedFeatures order.
    Matrix features(const Matrix& x) const {
        require(x.cols() == reference.cols(), "unsupervised_features: dimension mismatch");
        Matrix f(x.rows(), 5);
        parallel_for(static_cast<std::size_t>(x.rows()), options.jobs, [&](std::size_t ui) {
            const auto i = static_cast<Eigen::Index>(ui);
            const Vector v = x.row(i).transpose();
            f(i, 0) = v.norm();
            f(i, 1) = pca.reconstruction_error(v);
            f(i, 2) = lof.score(v);
            f(i, 3) = km.nearest_distance(v);
            f(i, 4) = local_dim(reference, v, options.local_k);
        });
        return f;
    }
};

}  // namespace cmanifold
