#pragma once

#include <limits>
#include <map>
#include <tuple>

#include "activation_store.hpp"
#include "classifiers.hpp"
#include "folds.hpp"
#include "parallel.hpp"
#include "unsupervised.hpp"

namespace cmanifold {

/// One layer of a dataset in double precision with its metadata columns.
struct LayerData {
    int layer_index = 0;
    Matrix x;
    Labels y;
    std::vector<std::int64_t> groups;
    std::vector<std::int64_t> ids;

    static LayerData from(const ActivationDataset& ds, int layer) {
        LayerData d;
        d.layer_index = layer;
        d.x = ds.layer(layer).as_double();
        d.y = ds.labels();
        d.groups = ds.groups();
        for (const auto& r : ds.records) d.ids.push_back(r.record_id);
        return d;
    }

    LayerData subset(std::span<const std::size_t> rows) const {
        return {layer_index, select_rows(x, rows), select(y, rows), select(groups, rows), select(ids, rows)};
    }
};

struct EvalOptions {
    std::vector<std::uint64_t> seeds = default_seeds();
    Protocol protocol = Protocol::group_kfold;
    int folds = 0;  // 0 = protocol default
    double C = kDefaultC;
    int jobs = 1;
};

inline std::vector<FoldPlan> fold_plans(const LayerData& d, const EvalOptions& opt) {
    require(!opt.seeds.empty(), "at least one seed is required");
    std::vector<FoldPlan> plans;
    for (auto s : opt.seeds) plans.push_back(make_folds(opt.protocol, d.groups, d.y, s, opt.folds));
    return plans;
}

/// Fits standardizer (+ PLS when dim > 0) and probe on the train rows, returns held-out AUC.
inline double fold_auc(const LayerData& d, std::span<const std::size_t> train, std::span<const std::size_t> test,
                       Eigen::Index dim, double C = kDefaultC) {
    const auto tr = d.subset(train);
    const auto te = d.subset(test);
    const auto m = fit_probe_pipeline(tr.x, tr.y, dim, {.C = C});
    return auc(m.decision(te.x), te.y);
}

/// Mean and spread of a list of fold AUCs with failed cells counted separately.
struct AucSummary {
    std::vector<double> values;
    std::size_t failed = 0;
    double mean = std::numeric_limits<double>::quiet_NaN();
    double std = std::numeric_limits<double>::quiet_NaN();

    void finish() {
        if (values.empty()) return;
        const auto ms = mean_std(values);
        mean = ms.mean;
        std = ms.std;
    }
};

struct SweepCellResult {
    int layer = 0;
    Eigen::Index dim = 0;
    std::uint64_t seed = 0;
    int fold = 0;
    double auc = std::numeric_limits<double>::quiet_NaN();
    bool failed = false;
    std::string error;
};

struct SweepCell {
    int layer = 0;
    Eigen::Index dim = 0;
    AucSummary auc;
};

struct SweepResult {
    std::vector<int> layers;
    std::vector<Eigen::Index> dims;
    std::vector<std::uint64_t> seeds;
    std::vector<SweepCellResult> raw;  // layer-major, then dim, seed, fold
    std::vector<SweepCell> cells;      // layer-major, then dim

    const SweepCell& cell(int layer, Eigen::Index dim) const {
        for (const auto& c : cells)
            if (c.layer == layer && c.dim == dim) return c;
        throw ValidationError(fmt::format("no sweep cell for layer {} dim {}", layer, dim));
    }

    /// Highest mean held-out AUC; earlier cells (smaller layer, then dim) win ties.
    const SweepCell& best_cell() const {
        const SweepCell* best = nullptr;
        for (const auto& c : cells)
            if (!std::isnan(c.auc.mean) && (!best || c.auc.mean > best->auc.mean)) best = &c;
        if (!best) throw ComputeError("sweep: every cell failed");
        return *best;
    }
};

inline void check_dims(std::span<const Eigen::Index> dims, Eigen::Index d, std::size_t n) {
    require(!dims.empty(), "dimension grid is empty");
    const auto cap = std::min<Eigen::Index>(d, static_cast<Eigen::Index>(n) - 1);
    for (auto k : dims)
        require(k >= 0 && k <= cap, fmt::format("dimension {} outside [1, {}] (0 selects the full space)", k, cap));
}

/// Full grid over layers x dims x seeds x folds. Dim 0 is the standardized full space.
inline SweepResult layer_sweep(const ActivationDataset& ds, std::vector<int> layers, std::vector<Eigen::Index> dims,
                               const EvalOptions& opt = {}) {
    require(!layers.empty(), "layer list is empty");
    check_dims(dims, ds.hidden_dim(), ds.size());
    std::vector<LayerData> data;
    for (int l : layers) data.push_back(LayerData::from(ds, l));
    const auto plans = fold_plans(data.front(), opt);
    SweepResult r{layers, dims, opt.seeds, {}, {}};
    for (int l : layers)
        for (auto k : dims)
            for (std::size_t s = 0; s < plans.size(); ++s)
                for (int f = 0; f < plans[s].n_folds; ++f) {
                    SweepCellResult c;
                    c.layer = l;
                    c.dim = k;
                    c.seed = opt.seeds[s];
                    c.fold = f;
                    r.raw.push_back(std::move(c));
                }
    const std::size_t per_layer = dims.size() * plans.size() * static_cast<std::size_t>(plans.front().n_folds);
    parallel_for(r.raw.size(), opt.jobs, [&](std::size_t i) {
        auto& c = r.raw[i];
        const auto& d = data[i / per_layer];
        const auto s = std::find(opt.seeds.begin(), opt.seeds.end(), c.seed) - opt.seeds.begin();
        const auto& plan = plans[static_cast<std::size_t>(s)];
        try {
            c.auc = fold_auc(d, plan.train_indices(c.fold), plan.test_indices(c.fold), c.dim, opt.C);
        } catch (const std::exception& e) {
            c.failed = true;
            c.error = e.what();
        }
    });
    for (int l : layers)
        for (auto k : dims) {
            SweepCell cell{l, k, {}};
            for (const auto& c : r.raw)
                if (c.layer == l && c.dim == k) {
                    if (c.failed) ++cell.auc.failed;
                    else cell.auc.values.push_back(c.auc);
                }
            cell.auc.finish();
            r.cells.push_back(std::move(cell));
        }
    return r;
}

inline SweepResult dimension_sweep(const ActivationDataset& ds, int layer, std::vector<Eigen::Index> dims,
                                   const EvalOptions& opt = {}) {
    return layer_sweep(ds, {layer}, std::move(dims), opt);
}

inline const std::vector<Eigen::Index>& default_sweep_dims() {
    static const std::vector<Eigen::Index> d{1, 2, 3, 4, 5, 8, 16, 32};
    return d;
}

inline const std::vector<Eigen::Index>& default_nested_grid() {
    static const std::vector<Eigen::Index> d{1, 2, 3, 4, 5, 6, 7, 8, 12, 16};
    return d;
}

struct NestedFold {
    std::uint64_t seed = 0;
    int fold = 0;
    Eigen::Index chosen_dim = 0;
    double nested_auc = 0.0;
    double standard_auc = 0.0;
    std::vector<double> inner_auc;  // per grid entry
};

struct NestedResult {
    std::vector<Eigen::Index> grid;
    Eigen::Index standard_dim = 8;
    std::vector<NestedFold> folds;
    AucSummary nested;
    AucSummary standard;
    double bias = 0.0;  // standard - nested
};

/// Outer GroupKFold; inner stratified 3-fold on the outer training rows picks the
/// dimension (ties to the smaller one). The standard estimate uses a fixed dim on the same outer folds.
inline NestedResult nested_cv(const ActivationDataset& ds, int layer, std::vector<Eigen::Index> grid = default_nested_grid(),
                              Eigen::Index standard_dim = 8, const EvalOptions& opt = {}, int inner_folds = 3) {
    require(!grid.empty(), "nested_cv: grid is empty");
    for (auto k : grid) require(k >= 1, "nested_cv: grid dims must be >= 1");
    const auto d = LayerData::from(ds, layer);
    check_dims(grid, d.x.cols(), d.x.rows());
    check_dims(std::array{standard_dim}, d.x.cols(), d.x.rows());
    const auto plans = fold_plans(d, opt);
    NestedResult r;
    r.grid = grid;
    r.standard_dim = standard_dim;
    for (std::size_t s = 0; s < plans.size(); ++s)
        for (int f = 0; f < plans[s].n_folds; ++f) {
            NestedFold nf;
            nf.seed = opt.seeds[s];
            nf.fold = f;
            r.folds.push_back(std::move(nf));
        }
    parallel_for(r.folds.size(), opt.jobs, [&](std::size_t i) {
        auto& nf = r.folds[i];
        const auto& plan = plans[static_cast<std::size_t>(std::find(opt.seeds.begin(), opt.seeds.end(), nf.seed) - opt.seeds.begin())];
        const auto train = plan.train_indices(nf.fold);
        const auto test = plan.test_indices(nf.fold);
        const auto inner_data = d.subset(train);
        const auto inner = stratified_kfold(inner_data.y, inner_folds, stream_seed(nf.seed, {stream::folds, static_cast<std::uint64_t>(nf.fold)}));
        nf.inner_auc.assign(grid.size(), 0.0);
        double best = -1;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            double s = 0;
            for (int f = 0; f < inner.n_folds; ++f) s += fold_auc(inner_data, inner.train_indices(f), inner.test_indices(f), grid[g], opt.C);
            nf.inner_auc[g] = s / inner.n_folds;
            if (nf.inner_auc[g] > best || (nf.inner_auc[g] == best && grid[g] < nf.chosen_dim)) {
                best = nf.inner_auc[g];
                nf.chosen_dim = grid[g];
            }
        }
        nf.nested_auc = fold_auc(d, train, test, nf.chosen_dim, opt.C);
        nf.standard_auc = fold_auc(d, train, test, standard_dim, opt.C);
    });
    for (const auto& nf : r.folds) {
        r.nested.values.push_back(nf.nested_auc);
        r.standard.values.push_back(nf.standard_auc);
    }
    r.nested.finish();
    r.standard.finish();
    r.bias = r.standard.mean - r.nested.mean;
    return r;
}

inline const std::vector<std::size_t>& default_budgets() {
    static const std::vector<std::size_t> b{5, 25, 100, 200};
    return b;
}

struct FewshotOptions {
    std::vector<std::size_t> budgets = default_budgets();  // per class; 0 = all training rows
    std::vector<Method> methods{Method::linear, Method::centroid, Method::mahalanobis};
    Eigen::Index pls_dim = 5;
    int resamples = 10;
};

struct FewshotRow {
    std::size_t budget = 0;
    Method method = Method::linear;
    AucSummary auc;
};

/// Per budget N: N rows per class drawn from each training fold, PLS and method fit on
/// those rows only, AUC on the whole test fold.
inline std::vector<FewshotRow> fewshot_curve(const ActivationDataset& ds, int layer, const FewshotOptions& fo = {},
                                             const EvalOptions& opt = {}) {
    require(!fo.budgets.empty() && !fo.methods.empty(), "fewshot: empty budget or method list");
    require(fo.resamples >= 1, "fewshot: resamples must be >= 1");
    const auto d = LayerData::from(ds, layer);
    const auto plans = fold_plans(d, opt);
    for (const auto& plan : plans)
        for (int f = 0; f < plan.n_folds; ++f) {
            const auto tr = plan.train_indices(f);
            const auto pos = count_positive(select(d.y, tr));
            const auto smaller = std::min(pos, tr.size() - pos);
            for (auto b : fo.budgets)
                if (b > 0 && b > smaller)
                    throw ValidationError(fmt::format("fewshot: budget {} per class exceeds the {} rows available", b, smaller));
        }
    struct Task {
        std::size_t seed_index, budget_index;
        int fold, resample;
    };
    std::vector<Task> tasks;
    for (std::size_t bi = 0; bi < fo.budgets.size(); ++bi)
        for (std::size_t s = 0; s < plans.size(); ++s)
            for (int f = 0; f < plans[s].n_folds; ++f)
                for (int r = 0; r < (fo.budgets[bi] == 0 ? 1 : fo.resamples); ++r) tasks.push_back({s, bi, f, r});
    std::vector<std::vector<double>> out(tasks.size(), std::vector<double>(fo.methods.size(), std::nan("")));
    parallel_for(tasks.size(), opt.jobs, [&](std::size_t t) {
        const auto& task = tasks[t];
        const auto& plan = plans[task.seed_index];
        const auto budget = fo.budgets[task.budget_index];
        auto train = plan.train_indices(task.fold);
        if (budget > 0) {
            auto rng = make_stream(opt.seeds[task.seed_index], {stream::fewshot, static_cast<std::uint64_t>(task.fold), budget,
                                                                 static_cast<std::uint64_t>(task.resample)});
            std::vector<std::size_t> pos, neg;
            for (auto i : train) (d.y[i] == 1 ? pos : neg).push_back(i);
            seeded_shuffle(pos.begin(), pos.end(), rng);
            seeded_shuffle(neg.begin(), neg.end(), rng);
            train.assign(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(budget));
            train.insert(train.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(budget));
            std::sort(train.begin(), train.end());
        }
        const auto tr = d.subset(train);
        const auto te = d.subset(plan.test_indices(task.fold));
        const auto pls = fit_pls(tr.x, tr.y, std::min<Eigen::Index>(fo.pls_dim, static_cast<Eigen::Index>(train.size()) - 1));
        const Matrix ptr = pls.transform(tr.x), pte = pls.transform(te.x);
        for (std::size_t m = 0; m < fo.methods.size(); ++m) {
            try {
                out[t][m] = auc(fit_score(fo.methods[m], ptr, tr.y, tr.ids, pte, opt.C), te.y);
            } catch (const ComputeError&) {
            }
        }
    });
    std::vector<FewshotRow> rows;
    for (std::size_t bi = 0; bi < fo.budgets.size(); ++bi)
        for (std::size_t m = 0; m < fo.methods.size(); ++m) {
            FewshotRow row{fo.budgets[bi], fo.methods[m], {}};
            for (std::size_t t = 0; t < tasks.size(); ++t)
                if (tasks[t].budget_index == bi) {
                    if (std::isnan(out[t][m])) ++row.auc.failed;
                    else row.auc.values.push_back(out[t][m]);
                }
            row.auc.finish();
            rows.push_back(std::move(row));
        }
    return rows;
}

struct TransferRow {
    std::string dataset;
    std::size_t n = 0;
    double full_auc = 0.0;
    double pls_auc = 0.0;
};

/// Probes fit once on every row of the training dataset (full space and PLS-dim),
/// then applied unchanged to each test dataset.
inline std::vector<TransferRow> transfer_eval(const ActivationDataset& train, const std::vector<ActivationDataset>& tests,
                                              int layer, Eigen::Index dim = 5, double C = kDefaultC) {
    require(!tests.empty(), "transfer: no test datasets");
    const auto d = LayerData::from(train, layer);
    check_dims(std::array{dim}, d.x.cols(), d.x.rows());
    const auto full = fit_probe_pipeline(d.x, d.y, 0, {.C = C});
    const auto pls = fit_probe_pipeline(d.x, d.y, dim, {.C = C});
    std::vector<TransferRow> rows;
    for (const auto& t : tests) {
        if (t.hidden_dim() != train.hidden_dim())
            throw ValidationError(fmt::format("transfer: hidden_dim {} does not match training hidden_dim {}", t.hidden_dim(),
                                              train.hidden_dim()));
        const auto td = LayerData::from(t, layer);
        const std::string name = t.records.empty() ? t.model_tag : t.records.front().dataset_tag;
        rows.push_back({name, t.size(), auc(full.decision(td.x), td.y), auc(pls.decision(td.x), td.y)});
    }
    return rows;
}

struct ConfoundResult {
    AucSummary raw;
    AucSummary length_only;
    AucSummary residualized;
    double r_l2_norm = 0.0;
    double r_mean_activation = 0.0;
    double r_sparsity = 0.0;
};

/// Per-dimension least-squares fit x_j = a_j + b_j * length on the given rows.
struct LengthRegression {
    Vector intercept;
    Vector slope;

    static LengthRegression fit(const Matrix& x, const Vector& len) {
        const double lm = len.mean();
        const Vector lc = len.array() - lm;
        const double var = lc.squaredNorm();
        if (!(var > 0)) throw ValidationError("confounds: answer_length is constant");
        const Vector xm = x.colwise().mean();
        LengthRegression r;
        r.slope = (x.rowwise() - xm.transpose()).transpose() * lc / var;
        r.intercept = xm - r.slope * lm;
        return r;
    }

    Matrix residual(const Matrix& x, const Vector& len) const {
        return (x - len * slope.transpose()).rowwise() - intercept.transpose();
    }
};

inline Vector gather(const Vector& v, std::span<const std::size_t> idx) {
    Vector out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(idx[i])];
    return out;
}

inline double pearson_or_nan(std::span<const double> a, std::span<const double> b) {
    try {
        return pearson_r(a, b);
    } catch (const ComputeError&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

/// Length-only probe, length-residualized probe, and correlations of the
/// out-of-fold probe score with surface statistics of the activations.
inline ConfoundResult confound_controls(const ActivationDataset& ds, int layer, Eigen::Index dim = 8,
                                        const EvalOptions& opt = {}) {
    const auto d = LayerData::from(ds, layer);
    check_dims(std::array{dim}, d.x.cols(), d.x.rows());
    Vector len(d.x.rows());
    for (std::size_t i = 0; i < ds.size(); ++i) len[static_cast<Eigen::Index>(i)] = ds.records[i].answer_length;
    if (len.maxCoeff() == len.minCoeff()) throw ValidationError("confounds: answer_length is constant");
    const auto plans = fold_plans(d, opt);
    struct Task {
        std::size_t s;
        int f;
    };
    std::vector<Task> tasks;
    for (std::size_t s = 0; s < plans.size(); ++s)
        for (int f = 0; f < plans[s].n_folds; ++f) tasks.push_back({s, f});
    std::vector<std::array<double, 3>> res(tasks.size());
    // Out-of-fold probe scores from the first seed feed the surface correlations.
    Vector oof = Vector::Zero(d.x.rows());
    parallel_for(tasks.size(), opt.jobs, [&](std::size_t t) {
        const auto& plan = plans[tasks[t].s];
        const auto train = plan.train_indices(tasks[t].f), test = plan.test_indices(tasks[t].f);
        const auto tr = d.subset(train), te = d.subset(test);
        const Vector ltr = gather(len, train), lte = gather(len, test);

        const auto raw = fit_probe_pipeline(tr.x, tr.y, dim, {.C = opt.C});
        const Vector raw_scores = raw.decision(te.x);
        res[t][0] = auc(raw_scores, te.y);
        if (tasks[t].s == 0)
            for (std::size_t i = 0; i < test.size(); ++i) oof[static_cast<Eigen::Index>(test[i])] = raw_scores[static_cast<Eigen::Index>(i)];

        const auto lp = fit_probe_pipeline(Matrix(ltr), tr.y, 0, {.C = opt.C});
        res[t][1] = auc(lp.decision(Matrix(lte)), te.y);

        const auto reg = LengthRegression::fit(tr.x, ltr);
        const auto rp = fit_probe_pipeline(reg.residual(tr.x, ltr), tr.y, dim, {.C = opt.C});
        res[t][2] = auc(rp.decision(reg.residual(te.x, lte)), te.y);
    });
    ConfoundResult r;
    for (const auto& v : res) {
        r.raw.values.push_back(v[0]);
        r.length_only.values.push_back(v[1]);
        r.residualized.values.push_back(v[2]);
    }
    r.raw.finish();
    r.length_only.finish();
    r.residualized.finish();
    std::vector<double> s(oof.data(), oof.data() + oof.size()), norm, mean, sparsity;
    for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
        norm.push_back(d.x.row(i).norm());
        mean.push_back(d.x.row(i).mean());
        sparsity.push_back(static_cast<double>((d.x.row(i).array().abs() < 1e-6).count()) / static_cast<double>(d.x.cols()));
    }
    r.r_l2_norm = pearson_or_nan(s, norm);
    r.r_mean_activation = pearson_or_nan(s, mean);
    r.r_sparsity = pearson_or_nan(s, sparsity);
    return r;
}

struct ClassifierRow {
    Method method = Method::linear;
    AucSummary auc;
};

/// Every method fit in the same per-fold PLS space (standardizer and PLS fit on the train rows).
inline std::vector<ClassifierRow> classifier_comparison(const ActivationDataset& ds, int layer, std::vector<Method> methods,
                                                        Eigen::Index dim = 8, const EvalOptions& opt = {}) {
    require(!methods.empty(), "classifiers: method list is empty");
    const auto d = LayerData::from(ds, layer);
    check_dims(std::array{dim}, d.x.cols(), d.x.rows());
    require(dim >= 1, "classifiers: projection dim must be >= 1");
    const auto plans = fold_plans(d, opt);
    struct Split {
        std::size_t s;
        int f;
        Matrix ptr, pte;
        LayerData tr, te;
    };
    std::vector<Split> splits;
    for (std::size_t s = 0; s < plans.size(); ++s)
        for (int f = 0; f < plans[s].n_folds; ++f) splits.push_back({s, f, {}, {}, {}, {}});
    parallel_for(splits.size(), opt.jobs, [&](std::size_t i) {
        auto& sp = splits[i];
        sp.tr = d.subset(plans[sp.s].train_indices(sp.f));
        sp.te = d.subset(plans[sp.s].test_indices(sp.f));
        const auto pls = fit_pls(sp.tr.x, sp.tr.y, dim);
        sp.ptr = pls.transform(sp.tr.x);
        sp.pte = pls.transform(sp.te.x);
    });
    std::vector<double> out(splits.size() * methods.size(), std::nan(""));
    parallel_for(out.size(), opt.jobs, [&](std::size_t t) {
        const auto& sp = splits[t / methods.size()];
        const auto m = methods[t % methods.size()];
        try {
            out[t] = auc(fit_score(m, sp.ptr, sp.tr.y, sp.tr.ids, sp.pte, opt.C), sp.te.y);
        } catch (const ComputeError&) {
        }
    });
    std::vector<ClassifierRow> rows;
    for (std::size_t m = 0; m < methods.size(); ++m) {
        ClassifierRow row{methods[m], {}};
        for (std::size_t i = 0; i < splits.size(); ++i) {
            const double v = out[i * methods.size() + m];
            if (std::isnan(v)) ++row.auc.failed;
            else row.auc.values.push_back(v);
        }
        row.auc.finish();
        rows.push_back(std::move(row));
    }
    return rows;
}

struct FeatureRow {
    std::string feature;
    AucSummary auc;
};

/// Held-out AUC of each label-free feature, with extractors fit on the training rows.
inline std::vector<FeatureRow> unsupervised_eval(const ActivationDataset& ds, int layer, UnsupervisedOptions uo = {},
                                                 const EvalOptions& opt = {}) {
    const auto d = LayerData::from(ds, layer);
    const auto plans = fold_plans(d, opt);
    std::vector<std::vector<double>> per_split;
    uo.jobs = opt.jobs;
    for (std::size_t s = 0; s < plans.size(); ++s)
        for (int f = 0; f < plans[s].n_folds; ++f) {
            const auto tr = d.subset(plans[s].train_indices(f));
            const auto te = d.subset(plans[s].test_indices(f));
            uo.seed = opt.seeds[s];
            const auto model = UnsupervisedModel::fit(tr.x, uo);
            const Matrix feats = model.features(te.x);
            std::vector<double> row;
            for (Eigen::Index c = 0; c < feats.cols(); ++c) row.push_back(auc(Vector(feats.col(c)), te.y));
            per_split.push_back(std::move(row));
        }
    std::vector<FeatureRow> rows;
    for (std::size_t c = 0; c < kUnsupervisedFeatures.size(); ++c) {
        FeatureRow row{kUnsupervisedFeatures[c], {}};
        for (const auto& v : per_split) row.auc.values.push_back(v[c]);
        row.auc.finish();
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace cmanifold
