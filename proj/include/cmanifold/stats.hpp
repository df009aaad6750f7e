#pragma once

#include <algorithm>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "common.hpp"

namespace cmanifold {

/// ROC AUC via the Mann-Whitney U statistic with average ranks; ties count 1/2.
inline double auc(std::span<const double> scores, std::span<const int> y) {
    require(scores.size() == y.size(), "auc: scores and labels differ in length");
    require_both_classes(y);
    for (double s : scores) require(!std::isnan(s), "auc: NaN score");
    const auto n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t)
            if (y[order[t]] == 1) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    const auto n_pos = static_cast<double>(count_positive(y));
    const auto n_neg = static_cast<double>(n) - n_pos;
    return (rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

inline double auc(const Vector& scores, std::span<const int> y) {
    return auc(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())), y);
}

namespace detail {

inline void require_sample(std::span<const double> a, const char* name) {
    require(a.size() >= 2, std::string(name) + ": need at least 2 observations");
    for (double v : a) require(std::isfinite(v), std::string(name) + ": non-finite observation");
}

inline double mean(std::span<const double> a) { return std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size()); }

inline double sample_var(std::span<const double> a) {
    const double m = mean(a);
    double ss = 0.0;
    for (double v : a) ss += (v - m) * (v - m);
    return ss / static_cast<double>(a.size() - 1);
}

}  // namespace detail

inline double pearson_r(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), "pearson_r: length mismatch");
    detail::require_sample(a, "pearson_r");
    detail::require_sample(b, "pearson_r");
    const double ma = detail::mean(a), mb = detail::mean(b);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0 || sbb == 0) throw ComputeError("pearson_r: zero variance");
    return sab / std::sqrt(saa * sbb);
}

/// Average ranks (1-based), ties share the mean rank.
inline std::vector<double> average_ranks(std::span<const double> a) {
    const auto n = a.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return a[i] < a[j]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && a[order[j + 1]] == a[order[i]]) ++j;
        for (std::size_t t = i; t <= j; ++t) r[order[t]] = 0.5 * static_cast<double>(i + j) + 1.0;
        i = j + 1;
    }
    return r;
}

inline double spearman_rho(std::span<const double> a, std::span<const double> b) {
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    return pearson_r(ra, rb);
}

/// Cohen's d with pooled standard deviation: (mean(a) - mean(b)) / s_pooled.
inline double cohens_d(std::span<const double> a, std::span<const double> b) {
    detail::require_sample(a, "cohens_d");
    detail::require_sample(b, "cohens_d");
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double pooled = ((na - 1) * detail::sample_var(a) + (nb - 1) * detail::sample_var(b)) / (na + nb - 2);
    if (pooled == 0) throw ComputeError("cohens_d: zero pooled variance");
    return (detail::mean(a) - detail::mean(b)) / std::sqrt(pooled);
}

struct TTest {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;  // two-sided
};

/// Welch's unequal-variance t-test; p from the Student t CDF (regularized incomplete beta).
inline TTest welch_t(std::span<const double> a, std::span<const double> b) {
    detail::require_sample(a, "welch_t");
    detail::require_sample(b, "welch_t");
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double va = detail::sample_var(a) / na, vb = detail::sample_var(b) / nb;
    const double diff = detail::mean(a) - detail::mean(b);
    TTest r;
    if (va + vb == 0) {
        if (diff != 0) throw ComputeError("welch_t: zero variance with unequal means");
        r.t = 0;
        r.df = na + nb - 2;
        r.p = 1.0;
        return r;
    }
    r.t = diff / std::sqrt(va + vb);
    r.df = (va + vb) * (va + vb) / (va * va / (na - 1) + vb * vb / (nb - 1));
    boost::math::students_t dist(r.df);
    r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
    r.p = std::min(1.0, r.p);
    return r;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// AUC of the Bayes-optimal linear score for two equal-covariance Gaussians.
inline double gaussian_bayes_auc(double mahalanobis_distance) { return normal_cdf(mahalanobis_distance / std::sqrt(2.0)); }

}  // namespace cmanifold
