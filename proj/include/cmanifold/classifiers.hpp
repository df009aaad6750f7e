#pragma once

#include <functional>
#include <limits>

#include "hull.hpp"
#include "neighbors.hpp"
#include "probe.hpp"
#include "svm.hpp"

namespace cmanifold {

namespace detail {

inline std::pair<Vector, Vector> class_means(const Matrix& x, std::span<const int> y) {
    require(static_cast<std::size_t>(x.rows()) == y.size(), "X and y row counts differ");
    require_both_classes(y);
    Vector mc = Vector::Zero(x.cols()), mi = Vector::Zero(x.cols());
    double nc = 0, ni = 0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        if (y[static_cast<std::size_t>(r)] == 1) {
            mc += x.row(r).transpose();
            ++nc;
        } else {
            mi += x.row(r).transpose();
            ++ni;
        }
    }
    return {mc / nc, mi / ni};
}

}  // namespace detail

struct CentroidModel {
    Vector mu_correct;
    Vector mu_incorrect;

    static CentroidModel fit(const Matrix& x, std::span<const int> y) {
        auto [c, i] = detail::class_means(x, y);
        return {std::move(c), std::move(i)};
    }

    /// ||x - mu_incorrect|| - ||x - mu_correct||.
    double margin(const Eigen::Ref<const Vector>& x) const { return (x - mu_incorrect).norm() - (x - mu_correct).norm(); }

    /// Softmin of the two distances, i.e. sigmoid(margin).
    double confidence(const Eigen::Ref<const Vector>& x) const { return sigmoid(margin(x)); }

    Vector score(const Matrix& x) const {
        Vector s(x.rows());
        for (Eigen::Index r = 0; r < x.rows(); ++r) s[r] = margin(x.row(r).transpose());
        return s;
    }
};

inline double centroid_confidence(const CentroidModel& m, const Eigen::Ref<const Vector>& x) { return m.confidence(x); }

struct MahalanobisModel {
    Vector mu_correct;
    Vector mu_incorrect;
    Matrix covariance;  // pooled, ridge included
    Eigen::LLT<Matrix> chol;
    double ridge = 0.0;

    static MahalanobisModel fit(const Matrix& x, std::span<const int> y) {
        MahalanobisModel m;
        std::tie(m.mu_correct, m.mu_incorrect) = detail::class_means(x, y);
        const auto d = x.cols();
        Matrix s = Matrix::Zero(d, d);
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            const Vector c = x.row(r).transpose() - (y[static_cast<std::size_t>(r)] == 1 ? m.mu_correct : m.mu_incorrect);
            s.noalias() += c * c.transpose();
        }
        const auto dof = std::max<Eigen::Index>(1, x.rows() - 2);
        s /= static_cast<double>(dof);
        const double tr = s.trace();
        m.ridge = tr > 0 ? 1e-6 * tr / static_cast<double>(d) : 1e-6;
        s.diagonal().array() += m.ridge;
        m.covariance = s;
        m.chol.compute(s);
        if (m.chol.info() != Eigen::Success) throw ComputeError("mahalanobis: covariance not positive definite after ridge");
        return m;
    }

    double sq_dist(const Eigen::Ref<const Vector>& x, const Vector& mu) const {
        const Vector z = chol.matrixL().solve(x - mu);
        return z.squaredNorm();
    }

    /// d^2(x, incorrect) - d^2(x, correct).
    double score_one(const Eigen::Ref<const Vector>& x) const { return sq_dist(x, mu_incorrect) - sq_dist(x, mu_correct); }

    Vector score(const Matrix& x) const {
        Vector s(x.rows());
        for (Eigen::Index r = 0; r < x.rows(); ++r) s[r] = score_one(x.row(r).transpose());
        return s;
    }
};

inline double mahalanobis_score(const MahalanobisModel& m, const Eigen::Ref<const Vector>& x) { return m.score_one(x); }

/// Fraction of the k nearest training rows labelled correct. Distance ties
/// are broken by record id.
inline double knn_score(const Matrix& train, std::span<const int> y, std::span<const std::int64_t> ids,
                        const Eigen::Ref<const Vector>& x, std::size_t k = 10) {
    require(static_cast<std::size_t>(train.rows()) == y.size(), "knn_score: X and y row counts differ");
    require(ids.empty() || ids.size() == y.size(), "knn_score: ids length mismatch");
    if (k == 0 || k > y.size()) throw ValidationError(fmt::format("knn_score: k={} exceeds N={}", k, y.size()));
    const auto nb = nearest(train, x, k, -1, ids);
    std::size_t pos = 0;
    for (const auto& n : nb) pos += y[static_cast<std::size_t>(n.index)] == 1;
    return static_cast<double>(pos) / static_cast<double>(k);
}

/// Product Gaussian KDE per class with Scott's rule bandwidth per dimension.
struct KdeModel {
    Matrix correct;
    Matrix incorrect;
    Vector h_correct;
    Vector h_incorrect;

    static Vector scott_bandwidth(const Matrix& x) {
        const auto n = static_cast<double>(x.rows());
        const auto d = static_cast<double>(x.cols());
        Vector h(x.cols());
        const double factor = std::pow(n, -1.0 / (d + 4.0));
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double m = x.col(j).mean();
            const double var = x.rows() > 1 ? (x.col(j).array() - m).square().sum() / (n - 1) : 0.0;
            h[j] = std::max(1e-6, factor * std::sqrt(var));
        }
        return h;
    }

    static KdeModel fit(const Matrix& x, std::span<const int> y) {
        require(static_cast<std::size_t>(x.rows()) == y.size(), "kde: X and y row counts differ");
        require_both_classes(y);
        std::vector<std::size_t> a, b;
        for (std::size_t i = 0; i < y.size(); ++i) (y[i] == 1 ? a : b).push_back(i);
        KdeModel m;
        m.correct = select_rows(x, a);
        m.incorrect = select_rows(x, b);
        m.h_correct = scott_bandwidth(m.correct);
        m.h_incorrect = scott_bandwidth(m.incorrect);
        return m;
    }

    static double log_density(const Matrix& pts, const Vector& h, const Eigen::Ref<const Vector>& x) {
        const auto n = pts.rows();
        const auto d = static_cast<double>(pts.cols());
        std::vector<double> e(static_cast<std::size_t>(n));
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < n; ++i) {
            const double q = ((x - pts.row(i).transpose()).array() / h.array()).square().sum();
            e[static_cast<std::size_t>(i)] = -0.5 * q;
            mx = std::max(mx, -0.5 * q);
        }
        double s = 0.0;
        for (double v : e) s += std::exp(v - mx);
        return mx + std::log(s) - std::log(static_cast<double>(n)) - h.array().log().sum() - 0.5 * d * std::log(2 * M_PI);
    }

    /// log p_correct(x) - log p_incorrect(x).
    double score_one(const Eigen::Ref<const Vector>& x) const {
        return log_density(correct, h_correct, x) - log_density(incorrect, h_incorrect, x);
    }

    Vector score(const Matrix& x) const {
        Vector s(x.rows());
        for (Eigen::Index r = 0; r < x.rows(); ++r) s[r] = score_one(x.row(r).transpose());
        return s;
    }
};

inline double kde_density_ratio(const KdeModel& m, const Eigen::Ref<const Vector>& x) { return m.score_one(x); }

/// Min-max normalization fitted on training scores.
struct MinMax {
    double lo = 0.0;
    double hi = 1.0;

    static MinMax fit(const Vector& s) { return {s.minCoeff(), s.maxCoeff()}; }

    Vector apply(const Vector& s) const {
        const double span = hi - lo;
        if (!(span > 0)) return Vector::Constant(s.size(), 0.5);
        return (s.array() - lo) / span;
    }
};

/// Mean of min-max-normalized member scores. `train_scores[m]` fixes member m's range.
inline Vector ensemble(const std::vector<Vector>& train_scores, const std::vector<Vector>& test_scores) {
    require(!test_scores.empty() && train_scores.size() == test_scores.size(), "ensemble: member count mismatch");
    Vector out = Vector::Zero(test_scores.front().size());
    for (std::size_t m = 0; m < test_scores.size(); ++m) {
        require(test_scores[m].size() == out.size(), "ensemble: member length mismatch");
        out += MinMax::fit(train_scores[m]).apply(test_scores[m]);
    }
    return out / static_cast<double>(test_scores.size());
}

enum class Method { linear, centroid, mahalanobis, nch, knn, svm_linear, svm_rbf, kde, ensemble };

inline const std::vector<Method>& all_methods() {
    static const std::vector<Method> m{Method::linear, Method::centroid, Method::mahalanobis, Method::nch, Method::knn,
                                       Method::svm_linear, Method::svm_rbf, Method::kde, Method::ensemble};
    return m;
}

inline std::string method_name(Method m) {
    switch (m) {
        case Method::linear: return "linear";
        case Method::centroid: return "centroid";
        case Method::mahalanobis: return "mahalanobis";
        case Method::nch: return "nch";
        case Method::knn: return "knn10";
        case Method::svm_linear: return "svm_linear";
        case Method::svm_rbf: return "svm_rbf";
        case Method::kde: return "kde";
        case Method::ensemble: return "ensemble";
    }
    return "?";
}

inline Method parse_method(const std::string& s) {
    for (auto m : all_methods())
        if (method_name(m) == s) return m;
    throw ValidationError("unknown method: " + s);
}

/// Fits `method` on (train, ytr) in an already-projected space and scores test rows.
/// Higher scores mean "more likely correct".
inline Vector fit_score(Method method, const Matrix& train, std::span<const int> ytr, std::span<const std::int64_t> ids_tr,
                        const Matrix& test, double C = kDefaultC) {
    auto per_row = [&](auto&& f) {
        Vector s(test.rows());
        for (Eigen::Index r = 0; r < test.rows(); ++r) s[r] = f(Eigen::Ref<const Vector>(test.row(r).transpose()));
        return s;
    };
    switch (method) {
        case Method::linear: return train_probe(train, ytr, C).decision(test);
        case Method::centroid: return CentroidModel::fit(train, ytr).score(test);
        case Method::mahalanobis: return MahalanobisModel::fit(train, ytr).score(test);
        case Method::nch: {
            const auto m = HullModel::fit(train, ytr);
            return per_row([&](const Eigen::Ref<const Vector>& x) { return m.score(x); });
        }
        case Method::knn:
            return per_row([&](const Eigen::Ref<const Vector>& x) { return knn_score(train, ytr, ids_tr, x, 10); });
        case Method::svm_linear: return train_svm(train, ytr, {.kernel = Kernel::linear}).decision(test);
        case Method::svm_rbf: return train_svm(train, ytr, {.kernel = Kernel::rbf}).decision(test);
        case Method::kde: return KdeModel::fit(train, ytr).score(test);
        case Method::ensemble: {
            const std::vector<Method> members{Method::linear, Method::centroid, Method::mahalanobis, Method::kde};
            std::vector<Vector> tr, te;
            for (auto m : members) {
                tr.push_back(fit_score(m, train, ytr, ids_tr, train, C));
                te.push_back(fit_score(m, train, ytr, ids_tr, test, C));
            }
            return ensemble(tr, te);
        }
    }
    throw ValidationError("unknown method");
}

}  // namespace cmanifold
