#pragma once

#include <map>

#include "evaluation.hpp"

namespace cmanifold {

struct AnovaResult {
    double within_var = 0.0;
    double between_var = 0.0;
    double f_ratio = 0.0;  // +inf when within_var is 0 and between_var > 0
    std::size_t cells = 0;
    std::size_t groups = 0;
};

/// between / within, with +inf for a zero denominator.
inline double anova_f(double between, double within) {
    require(between >= 0 && within >= 0, "anova: variances must be non-negative");
    if (within == 0) return between > 0 ? std::numeric_limits<double>::infinity() : std::numeric_limits<double>::quiet_NaN();
    return between / within;
}

/// Streaming mean and population variance.
struct Welford {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++n;
        const double delta = x - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (x - mean);
    }

    double variance() const { return n > 0 ? m2 / static_cast<double>(n) : 0.0; }
};

/// Variance decomposition of 1-D scores over (group, label) answer cells.
/// Within: mean over cells of the population variance across paraphrases.
/// Between: mean over groups of the population variance of that group's per-label cell means.
inline AnovaResult anova_from_scores(std::span<const double> scores, std::span<const std::int64_t> groups,
                                     std::span<const int> labels) {
    require(scores.size() == groups.size() && scores.size() == labels.size(), "anova: length mismatch");
    std::map<std::pair<std::int64_t, int>, Welford> cells;
    for (std::size_t i = 0; i < scores.size(); ++i) cells[{groups[i], labels[i]}].add(scores[i]);
    std::map<std::int64_t, Welford> between;
    Welford within;
    for (const auto& [key, w] : cells) {
        if (w.n < 2)
            throw ValidationError(fmt::format("anova: group {} label {} has {} paraphrase(s), need >= 2", key.first, key.second, w.n));
        within.add(w.variance());
        between[key.first].add(w.mean);
    }
    Welford pooled;
    for (const auto& [g, w] : between) pooled.add(w.variance());
    AnovaResult r;
    r.cells = cells.size();
    r.groups = between.size();
    r.within_var = within.mean;
    r.between_var = pooled.mean;
    r.f_ratio = anova_f(r.between_var, r.within_var);
    return r;
}

/// ANOVA on first-PLS-component scores of a PLS fit to every row of the layer.
inline AnovaResult paraphrase_anova(const ActivationDataset& ds, int layer, Eigen::Index dim = 1) {
    const auto d = LayerData::from(ds, layer);
    require(dim >= 1, "anova: dim must be >= 1");
    const auto pls = fit_pls(d.x, d.y, dim);
    const Vector t = pls.transform(d.x).col(0);
    return anova_from_scores(std::span<const double>(t.data(), static_cast<std::size_t>(t.size())), d.groups, d.y);
}

/// Train on paraphrase 0 of the training groups, test on paraphrases > 0 of the held-out groups.
inline AucSummary paraphrase_transfer(const ActivationDataset& ds, int layer, Eigen::Index dim = 8, const EvalOptions& opt = {}) {
    const auto d = LayerData::from(ds, layer);
    check_dims(std::array{dim}, d.x.cols(), d.x.rows());
    bool any = false;
    for (const auto& r : ds.records) any |= r.paraphrase_id > 0;
    require(any, "paraphrase transfer: dataset has no paraphrase_id > 0");
    const auto plans = fold_plans(d, opt);
    AucSummary out;
    std::vector<std::pair<std::size_t, int>> tasks;
    for (std::size_t s = 0; s < plans.size(); ++s)
        for (int f = 0; f < plans[s].n_folds; ++f) tasks.push_back({s, f});
    std::vector<double> vals(tasks.size(), std::nan(""));
    parallel_for(tasks.size(), opt.jobs, [&](std::size_t t) {
        const auto& plan = plans[tasks[t].first];
        std::vector<std::size_t> train, test;
        for (auto i : plan.train_indices(tasks[t].second))
            if (ds.records[i].paraphrase_id == 0) train.push_back(i);
        for (auto i : plan.test_indices(tasks[t].second))
            if (ds.records[i].paraphrase_id > 0) test.push_back(i);
        try {
            vals[t] = fold_auc(d, train, test, dim, opt.C);
        } catch (const std::exception&) {
        }
    });
    for (double v : vals) {
        if (std::isnan(v)) ++out.failed;
        else out.values.push_back(v);
    }
    out.finish();
    return out;
}

}  // namespace cmanifold
