#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace cmanifold;
using fixtures::gaussian;

namespace {

/// Brute-force pairwise AUC with ties credited one half.
double auc_pairs(const Vector& s, const Labels& y) {
    double num = 0, den = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        for (Eigen::Index j = 0; j < s.size(); ++j)
            if (y[i] == 1 && y[j] == 0) {
                den += 1;
                num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
            }
    return num / den;
}

/// Gradient of mean cross-entropy + ||w||^2 / (2 C N), written independently of the library.
Vector objective_gradient(const Matrix& x, const Labels& y, const Vector& w, double b, double C) {
    const double n = static_cast<double>(x.rows());
    Vector g = Vector::Zero(x.cols() + 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double p = 1.0 / (1.0 + std::exp(-(x.row(i).dot(w) + b)));
        g.head(x.cols()) += (p - y[static_cast<std::size_t>(i)]) * x.row(i).transpose() / n;
        g[x.cols()] += (p - y[static_cast<std::size_t>(i)]) / n;
    }
    g.head(x.cols()) += w / (C * n);
    return g;
}

Labels alternating(Eigen::Index n) {
    Labels y(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = static_cast<int>(i % 2);
    return y;
}

}  // namespace

TEST(Standardizer, TwoPointExample) {
    Matrix x(2, 1);
    x << 0, 2;
    const auto s = Standardizer::fit(x);
    EXPECT_DOUBLE_EQ(s.mean[0], 1.0);
    EXPECT_DOUBLE_EQ(s.scale[0], 1.0);
    const Matrix t = s.apply(x);
    EXPECT_DOUBLE_EQ(t(0, 0), -1.0);
    EXPECT_DOUBLE_EQ(t(1, 0), 1.0);
}

TEST(Standardizer, ConstantColumnBecomesZeros) {
    Matrix x = gaussian(10, 2, 1);
    x.col(1).setConstant(3.0);
    const auto s = Standardizer::fit(x);
    EXPECT_DOUBLE_EQ(s.scale[1], kScaleFloor);
    EXPECT_TRUE(s.apply(x).col(1).isZero(0.0));
}

TEST(Standardizer, RandomColumnsCentred) {
    const Matrix x = gaussian(100, 5, 2, 3.0).array() + 7.0;
    const Matrix t = Standardizer::fit(x).apply(x);
    for (Eigen::Index j = 0; j < 5; ++j) {
        EXPECT_LT(std::abs(t.col(j).mean()), 1e-9);
        EXPECT_NEAR(std::sqrt(t.col(j).squaredNorm() / 100.0), 1.0, 1e-9);
    }
}

TEST(Pls, FirstWeightIsNormalizedCovarianceDirection) {
    const Matrix x = gaussian(300, 6, 3);
    const auto y = alternating(300);
    const auto p = fit_pls(x, y, 3);
    // Oracle: w1 is proportional to Xs' (y - ybar), sign-canonicalized.
    const Matrix xs = Standardizer::fit(x).apply(x);
    Vector yc = labels_as_vector(y);
    yc.array() -= yc.mean();
    Vector w1 = xs.transpose() * yc;
    w1.normalize();
    Eigen::Index arg;
    w1.cwiseAbs().maxCoeff(&arg);
    if (w1[arg] < 0) w1 = -w1;
    EXPECT_LT((p.x_weights.col(0) - w1).norm(), 1e-10);
    // Weights orthonormal; scores of distinct components uncorrelated.
    EXPECT_LT((p.x_weights.transpose() * p.x_weights - Matrix::Identity(3, 3)).norm(), 1e-8);
    const Matrix t = p.transform(x);
    const Matrix tt = t.transpose() * t;
    EXPECT_LT(std::abs(tt(0, 1)) / std::sqrt(tt(0, 0) * tt(1, 1)), 1e-8);
    for (Eigen::Index c = 0; c < 3; ++c) {
        Eigen::Index a;
        p.x_weights.col(c).cwiseAbs().maxCoeff(&a);
        EXPECT_GT(p.x_weights(a, c), 0);
    }
}

TEST(Pls, RecoversTheInformativeCoordinate) {
    Matrix x = gaussian(1000, 10, 4);
    const auto y = alternating(1000);
    for (Eigen::Index i = 0; i < 1000; ++i) x(i, 0) += y[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
    const auto p = fit_pls(x, y, 1);
    EXPECT_GT(std::abs(p.x_weights(0, 0)), 0.95);
}

TEST(Pls, OneComponentMatchesFullProbeOnMeanShift) {
    const auto ds = gen_synthetic(fixtures::mean_shift());
    const auto r = dimension_sweep(ds, 0, {0, 1}, {.seeds = {42}});
    EXPECT_NEAR(r.cells[0].auc.mean, r.cells[1].auc.mean, 0.02);
}

TEST(Pls, Errors) {
    const Matrix x = gaussian(20, 4, 5);
    Labels ones(20, 1);
    try {
        fit_pls(x, ones, 1);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_STREQ(e.what(), "single-class target");
    }
    EXPECT_THROW(fit_pls(x, alternating(20), 0), ValidationError);
    EXPECT_THROW(fit_pls(x, alternating(20), 5), ValidationError);
}

TEST(Pls, NoLeakPoisonedTestRowsAreNeverRead) {
    const auto ds = gen_synthetic(fixtures::mean_shift());
    auto d = LayerData::from(ds, 0);
    const auto plan = group_kfold(d.groups, 5, 42);
    for (auto i : plan.test_indices(0)) d.x.row(static_cast<Eigen::Index>(i)).setConstant(std::nan(""));
    const auto tr = d.subset(plan.train_indices(0));
    EXPECT_NO_THROW(fit_probe_pipeline(tr.x, tr.y, 5));
    EXPECT_NO_THROW(fit_probe_pipeline(tr.x, tr.y, 0));
    EXPECT_NO_THROW(fit_pca(tr.x, 8));
}

TEST(Pca, OrthonormalNonIncreasingAndExactInSpan) {
    const Matrix x = gaussian(200, 8, 6) * Eigen::Vector<double, 8>::LinSpaced(8, 3.0, 0.5).asDiagonal();
    const auto p = fit_pca(x, 4);
    EXPECT_LT((p.components.transpose() * p.components - Matrix::Identity(4, 4)).norm(), 1e-8);
    for (Eigen::Index i = 1; i < 4; ++i) EXPECT_LE(p.explained_variance[i], p.explained_variance[i - 1]);
    const Vector inspan = p.mean + p.components * Vector::LinSpaced(4, -1, 2);
    EXPECT_LT(p.reconstruction_error(inspan), 1e-8);
}

TEST(Pca, ExactRankTwo) {
    const Matrix x = gaussian(100, 2, 7) * gaussian(2, 6, 8);
    const auto p = fit_pca(x, 2);
    for (Eigen::Index i = 0; i < x.rows(); ++i) EXPECT_LT(p.reconstruction_error(x.row(i).transpose()), 1e-6);
    EXPECT_THROW(fit_pca(x, 7), ValidationError);
}

TEST(Pca, IsotropicResidual) {
    const Matrix x = gaussian(5000, 10, 9);
    const auto p = fit_pca(x, 5);
    double mse = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) mse += std::pow(p.reconstruction_error(x.row(i).transpose()), 2);
    mse /= 5000;
    EXPECT_NEAR(mse, 5.0, 0.5);
}

TEST(Probe, SeparableOneDimensional) {
    Matrix x(200, 1);
    Labels y(200);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd(0, 0.01);
    for (int i = 0; i < 200; ++i) {
        y[static_cast<std::size_t>(i)] = i % 2;
        x(i, 0) = 4.0 * (i % 2) + nd(rng);
    }
    const auto m = train_probe(x.topRows(100), Labels(y.begin(), y.begin() + 100));
    EXPECT_GT(m.weights[0], 0);
    EXPECT_DOUBLE_EQ(auc(m.decision(x.bottomRows(100)), Labels(y.begin() + 100, y.end())), 1.0);
}

TEST(Probe, StationaryPointOfTheStatedObjective) {
    const Matrix x = gaussian(400, 5, 10);
    Labels y(400);
    for (Eigen::Index i = 0; i < 400; ++i) y[static_cast<std::size_t>(i)] = x(i, 0) + 0.5 * x(i, 1) > 0.2 ? 1 : 0;
    for (double C : {0.1, 1.0, 10.0}) {
        const auto m = train_probe(x, y, C);
        EXPECT_LT(objective_gradient(x, y, m.weights, m.bias, C).norm(), 1e-6) << "C=" << C;
    }
    // The wide path (L-BFGS) satisfies the same condition.
    const Matrix wide = gaussian(300, 300, 11);
    Labels yw(300);
    for (Eigen::Index i = 0; i < 300; ++i) yw[static_cast<std::size_t>(i)] = wide(i, 0) > 0;
    const auto mw = train_probe(wide, yw, 0.1);
    EXPECT_LT(objective_gradient(wide, yw, mw.weights, mw.bias, 0.1).norm(), 1e-6);
}

TEST(Probe, RecoversPlantedDirection) {
    const auto c = fixtures::mean_shift();
    const auto ds = gen_synthetic(c);
    const Vector u = synth_basis(c).signal.col(0);
    const auto m = train_probe(ds.layers[0].as_double(), ds.labels());
    EXPECT_GT(std::abs(m.weights.normalized().dot(u)), 0.95);
}

TEST(Probe, SingleClassIsAnError) {
    EXPECT_THROW(train_probe(gaussian(10, 2, 1), Labels(10, 0)), ValidationError);
}

TEST(Probe, ScoreClosedForms) {
    ProbeModel zero;
    zero.weights = Vector::Zero(3);
    const Vector s = score(zero, gaussian(5, 3, 1));
    for (Eigen::Index i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(s[i], 0.5);

    ProbeModel m;
    m.weights = Vector::Ones(2);
    m.bias = 0.0;
    Matrix x(1, 2);
    x << std::log(3.0) / 2, std::log(3.0) / 2;
    EXPECT_NEAR(score(m, x)[0], 0.75, 1e-15);

    ProbeModel padded = m;
    padded.weights.conservativeResize(4);
    padded.weights.tail(2).setZero();
    Matrix xp(1, 4);
    xp << x(0, 0), x(0, 1), 9.0, -9.0;
    EXPECT_EQ(score(padded, xp)[0], score(m, x)[0]);
    EXPECT_THROW(score(m, xp), ValidationError);
}

TEST(Probe, WeakerRegularizationNeverLowersTrainLikelihood) {
    const Matrix x = gaussian(300, 6, 12);
    Labels y(300);
    for (Eigen::Index i = 0; i < 300; ++i) y[static_cast<std::size_t>(i)] = x(i, 2) - x(i, 4) > 0.3;
    double prev = -INFINITY;
    for (double C : {0.001, 0.01, 0.1, 1.0, 10.0}) {
        const double ll = log_likelihood(train_probe(x, y, C), x, y);
        EXPECT_GE(ll, prev - 1e-12);
        prev = ll;
    }
}

TEST(Probe, RawLinearFormReproducesDecision) {
    const auto ds = gen_synthetic(fixtures::mean_shift());
    const Matrix x = ds.layers[0].as_double();
    for (Eigen::Index k : {0, 5}) {
        const auto m = fit_probe_pipeline(x, ds.labels(), k);
        const auto f = raw_linear_form(m);
        const Vector direct = m.decision(x.topRows(50));
        const Vector viaform = (x.topRows(50) * f.direction).array() + f.offset;
        EXPECT_LT((direct - viaform).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(Probe, SaveLoadRoundTrip) {
    const auto ds = gen_synthetic(fixtures::mean_shift());
    const Matrix x = ds.layers[0].as_double();
    auto m = fit_probe_pipeline(x, ds.labels(), 0);
    m.layer_index = 0;
    const auto dir = fixtures::scratch("probe");
    save_probe(m, dir);
    const auto back = load_probe(dir);
    EXPECT_EQ(back.weights, m.weights);
    EXPECT_EQ(back.layer_index, 0);
    EXPECT_EQ(back.decision(x), m.decision(x));
}

TEST(Auc, Examples) {
    const Vector s = (Vector(4) << 0.9, 0.8, 0.3, 0.2).finished();
    EXPECT_DOUBLE_EQ(auc(s, Labels{1, 1, 0, 0}), 1.0);
    EXPECT_DOUBLE_EQ(auc(Vector::Constant(6, 0.3), Labels{1, 0, 1, 0, 1, 0}), 0.5);
    EXPECT_THROW(auc(s, Labels{1, 1, 1, 1}), ValidationError);
}

TEST(Auc, MatchesPairCountingAndComplement) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> coarse(0, 9);
    Vector s(300);
    Labels y(300);
    for (int i = 0; i < 300; ++i) {
        s[i] = coarse(rng);  // many ties
        y[static_cast<std::size_t>(i)] = (coarse(rng) + static_cast<int>(s[i])) > 9;
    }
    EXPECT_NEAR(auc(s, y), auc_pairs(s, y), 1e-12);
    EXPECT_NEAR(auc(s, y) + auc(Vector(-s), y), 1.0, 1e-12);
    const Vector mono = s.array().exp() * 3.0 - 1.0;
    EXPECT_DOUBLE_EQ(auc(mono, y), auc(s, y));
}

TEST(Auc, RandomScoresNearHalf) {
    const Matrix s = gaussian(10000, 1, 99);
    EXPECT_NEAR(auc(Vector(s.col(0)), alternating(10000)), 0.5, 0.02);
}

TEST(Stats, PearsonCases) {
    const std::vector<double> a{1, 2, 3, 4, 5};
    EXPECT_DOUBLE_EQ(pearson_r(a, a), 1.0);
    const std::vector<double> b{1, -1, 0, 1, -1};  // centred, orthogonal to centred a
    const std::vector<double> ac{-2, -1, 0, 1, 2};
    EXPECT_NEAR(pearson_r(ac, std::vector<double>{1, 0, -2, 0, 1}), 0.0, 1e-12);
    EXPECT_THROW(pearson_r(a, std::vector<double>(5, 1.0)), ComputeError);
    (void)b;
}

TEST(Stats, CohensDAndWelchOnShiftedNormals) {
    const Matrix a = gaussian(10000, 1, 21), b = gaussian(10000, 1, 22).array() + 1.0;
    const std::vector<double> va(a.data(), a.data() + a.size()), vb(b.data(), b.data() + b.size());
    EXPECT_NEAR(cohens_d(vb, va), 1.0, 0.05);
    const auto t = welch_t(va, vb);
    EXPECT_LT(t.p, 1e-10);
    EXPECT_LT(t.t, 0);
}

TEST(Stats, WelchAgainstHandComputation) {
    const std::vector<double> a{1, 2, 3, 4}, b{2, 4, 6, 8, 10};
    // mean a 2.5 var 5/3; mean b 6 var 10
    const double se2 = (5.0 / 3) / 4 + 10.0 / 5;
    const auto t = welch_t(a, b);
    EXPECT_NEAR(t.t, -3.5 / std::sqrt(se2), 1e-12);
    const double df = se2 * se2 / (std::pow(5.0 / 12, 2) / 3 + std::pow(2.0, 2) / 4);
    EXPECT_NEAR(t.df, df, 1e-12);
    // Two-sided p at these values, from an independent t CDF evaluation.
    EXPECT_NEAR(t.p, 0.06913359319239236, 1e-9);
    EXPECT_THROW(welch_t(std::vector<double>{1}, b), ValidationError);
}

TEST(Stats, SpearmanAndBayesAuc) {
    EXPECT_DOUBLE_EQ(spearman_rho(std::vector<double>{1, 2, 3, 4}, std::vector<double>{10, 20, 25, 100}), 1.0);
    EXPECT_NEAR(gaussian_bayes_auc(2.0), 0.9213503964748575, 1e-12);
}
