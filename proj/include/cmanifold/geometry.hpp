#pragma once

#include <array>
#include <optional>

#include "neighbors.hpp"
#include "parallel.hpp"

namespace cmanifold {

/// Levina-Bickel estimate from sorted neighbor distances T_1..T_k (k >= 2):
/// ((1/(k-1)) * sum_{j<k} ln(T_k / T_j))^-1. Returns nullopt when a distance
/// is zero or all distances coincide.
inline std::optional<double> levina_bickel(std::span<const double> sorted_distances, std::size_t k) {
    if (k < 2 || k > sorted_distances.size()) throw ValidationError("levina_bickel: k out of range");
    const double tk = sorted_distances[k - 1];
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < k; ++j) {
        if (!(sorted_distances[j] > 0)) return std::nullopt;
        s += std::log(tk / sorted_distances[j]);
    }
    if (!(s > 0)) return std::nullopt;
    return static_cast<double>(k - 1) / s;
}

struct IdEstimate {
    int k_min = 5;
    int k_max = 20;
    std::vector<double> per_k;  // per_k[i] is the estimate at k = k_min + i
    double pooled = 0.0;
    std::size_t samples = 0;  // points that contributed
    std::size_t skipped = 0;  // points dropped for duplicate neighbors
};

/// Intrinsic dimension by MLE: per-point estimates averaged over points, then over k in [k_min, k_max].
inline IdEstimate intrinsic_dim_mle(const Matrix& x, int k_min = 5, int k_max = 20, int jobs = 1) {
    require(k_min >= 2 && k_max >= k_min, "intrinsic_dim_mle: need 2 <= k_min <= k_max");
    require(x.rows() > k_max + 1, fmt::format("intrinsic_dim_mle: need N > k_max + 1 (N={}, k_max={})", x.rows(), k_max));
    require(x.allFinite(), "intrinsic_dim_mle: non-finite input");
    const auto n = static_cast<std::size_t>(x.rows());
    const auto nk = static_cast<std::size_t>(k_max - k_min + 1);
    std::vector<std::vector<double>> est(n);
    parallel_for(n, jobs, [&](std::size_t i) {
        const auto nb = nearest(x, x.row(static_cast<Eigen::Index>(i)).transpose(), static_cast<std::size_t>(k_max),
                                static_cast<Eigen::Index>(i));
        std::vector<double> dist(nb.size());
        for (std::size_t t = 0; t < nb.size(); ++t) dist[t] = nb[t].distance;
        std::vector<double> row;
        row.reserve(nk);
        for (int k = k_min; k <= k_max; ++k) {
            const auto v = levina_bickel(dist, static_cast<std::size_t>(k));
            if (!v) return;  // skip point entirely
            row.push_back(*v);
        }
        est[i] = std::move(row);
    });
    IdEstimate r;
    r.k_min = k_min;
    r.k_max = k_max;
    r.per_k.assign(nk, 0.0);
    for (const auto& row : est) {
        if (row.empty()) {
            ++r.skipped;
            continue;
        }
        ++r.samples;
        for (std::size_t t = 0; t < nk; ++t) r.per_k[t] += row[t];
    }
    if (r.samples == 0) throw ComputeError("intrinsic_dim_mle: every point has duplicate neighbors");
    for (auto& v : r.per_k) v /= static_cast<double>(r.samples);
    r.pooled = 0.0;
    for (double v : r.per_k) r.pooled += v;
    r.pooled /= static_cast<double>(nk);
    return r;
}

/// Levina-Bickel dimension at a single point of x (neighbors exclude the point itself).
inline double local_dim(const Matrix& x, Eigen::Index query_index, int k = 10) {
    require(k >= 2, "local_dim: k must be >= 2");
    require(query_index >= 0 && query_index < x.rows(), "local_dim: query index out of range");
    const auto nb = nearest(x, x.row(query_index).transpose(), static_cast<std::size_t>(k), query_index);
    std::vector<double> dist;
    for (const auto& n : nb) dist.push_back(n.distance);
    const auto v = levina_bickel(dist, static_cast<std::size_t>(k));
    if (!v) throw ComputeError("local_dim: duplicate neighbor (zero distance)");
    return *v;
}

/// Levina-Bickel dimension of an external query point against reference rows.
inline double local_dim(const Matrix& reference, const Eigen::Ref<const Vector>& query, int k = 10) {
    require(k >= 2, "local_dim: k must be >= 2");
    const auto nb = nearest(reference, query, static_cast<std::size_t>(k));
    std::vector<double> dist;
    for (const auto& n : nb) dist.push_back(n.distance);
    const auto v = levina_bickel(dist, static_cast<std::size_t>(k));
    if (!v) throw ComputeError("local_dim: duplicate neighbor (zero distance)");
    return *v;
}

/// Chordal distance between the lines spanned by two vectors: sin of the angle
/// between them, in [0, 1]. Computed from the rejection so that near-parallel
/// inputs keep full precision.
inline double grassmann_dist(const Vector& w1, const Vector& w2) {
    require(w1.size() == w2.size(), "grassmann_dist: dimension mismatch");
    const double n1 = w1.norm(), n2 = w2.norm();
    if (!(n1 > 0) || !(n2 > 0)) throw ValidationError("grassmann_dist: zero vector");
    const Vector a = w1 / n1, b = w2 / n2;
    const double c = a.dot(b);
    return std::clamp((b - c * a).norm(), 0.0, 1.0);
}

/// S_ij = |w_i . w_j| / (|w_i| |w_j|).
inline Matrix layer_similarity(const std::vector<Vector>& directions) {
    require(directions.size() >= 2, "layer_similarity: need at least 2 layers");
    const auto L = static_cast<Eigen::Index>(directions.size());
    std::vector<Vector> unit;
    for (const auto& w : directions) {
        require(w.size() == directions.front().size(), "layer_similarity: dimension mismatch");
        const double n = w.norm();
        if (!(n > 0)) throw ValidationError("layer_similarity: zero direction");
        unit.push_back(w / n);
    }
    Matrix s(L, L);
    for (Eigen::Index i = 0; i < L; ++i) {
        s(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < L; ++j) {
            const double v = std::min(1.0, std::abs(unit[static_cast<std::size_t>(i)].dot(unit[static_cast<std::size_t>(j)])));
            s(i, j) = s(j, i) = v;
        }
    }
    return s;
}

/// Phase of layer i of L given depth-fraction boundaries (depth = i / (L - 1)).
inline int layer_phase(Eigen::Index i, Eigen::Index L, std::span<const double> boundaries) {
    const double depth = L > 1 ? static_cast<double>(i) / static_cast<double>(L - 1) : 0.0;
    int p = 0;
    for (double b : boundaries)
        if (depth >= b) ++p;
    return p;
}

/// Mean similarity per pair of depth phases. Diagonal blocks exclude S_ii
/// unless the phase holds a single layer. Empty phases give NaN.
inline Matrix phase_blocks(const Matrix& s, std::span<const double> boundaries = std::array{0.30, 0.70}) {
    require(s.rows() == s.cols() && s.rows() >= 2, "phase_blocks: need a square matrix with >= 2 layers");
    const auto L = s.rows();
    const auto P = static_cast<Eigen::Index>(boundaries.size() + 1);
    Matrix sum = Matrix::Zero(P, P), cnt = Matrix::Zero(P, P);
    std::vector<int> phase(static_cast<std::size_t>(L));
    std::vector<int> size(static_cast<std::size_t>(P), 0);
    for (Eigen::Index i = 0; i < L; ++i) {
        phase[static_cast<std::size_t>(i)] = layer_phase(i, L, boundaries);
        size[static_cast<std::size_t>(phase[static_cast<std::size_t>(i)])]++;
    }
    for (Eigen::Index i = 0; i < L; ++i)
        for (Eigen::Index j = 0; j < L; ++j) {
            const int a = phase[static_cast<std::size_t>(i)], b = phase[static_cast<std::size_t>(j)];
            if (i == j && size[static_cast<std::size_t>(a)] > 1) continue;
            sum(a, b) += s(i, j);
            cnt(a, b) += 1;
        }
    Matrix out(P, P);
    for (Eigen::Index a = 0; a < P; ++a)
        for (Eigen::Index b = 0; b < P; ++b) out(a, b) = cnt(a, b) > 0 ? sum(a, b) / cnt(a, b) : std::nan("");
    return out;
}

struct ProcrustesResult {
    Matrix rotation;  // m x m orthogonal
    double residual = 0.0;  // ||W1 R - W2||_F
};

/// Orthogonal Procrustes: R = U V^T from the SVD of W1^T W2.
inline ProcrustesResult procrustes_align(const Matrix& w1, const Matrix& w2) {
    require(w1.rows() == w2.rows() && w1.cols() == w2.cols(), "procrustes_align: shapes differ");
    if (!(w1.norm() > 0) || !(w2.norm() > 0)) throw ValidationError("procrustes_align: degenerate (rank-0) input");
    Eigen::JacobiSVD<Matrix> svd(w1.transpose() * w2, Eigen::ComputeFullU | Eigen::ComputeFullV);
    ProcrustesResult r;
    r.rotation = svd.matrixU() * svd.matrixV().transpose();
    r.residual = (w1 * r.rotation - w2).norm();
    return r;
}

}  // namespace cmanifold
