#pragma once

#include <limits>

#include "common.hpp"

namespace cmanifold {

enum class Kernel { linear, rbf };

struct SvmOptions {
    Kernel kernel = Kernel::linear;
    double C = 1.0;
    /// RBF width; <= 0 selects 1 / (d * Var(X)).
    double gamma = 0.0;
    double eps = 1e-3;
    long max_iter = 10'000'000;
};

/// Soft-margin SVM trained by SMO with second-order working-set selection.
struct SvmModel {
    Kernel kernel = Kernel::linear;
    double gamma = 0.0;
    Matrix support;        // rows are support vectors
    Vector coef;           // alpha_i * y_i
    double rho = 0.0;
    Vector linear_weights; // set for the linear kernel

    double k(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) const {
        if (kernel == Kernel::linear) return a.dot(b);
        return std::exp(-gamma * (a - b).squaredNorm());
    }

    /// Signed margin f(x) = sum_i coef_i K(sv_i, x) - rho. Positive favours the correct class.
    double decision_one(const Eigen::Ref<const Vector>& x) const {
        if (kernel == Kernel::linear) return linear_weights.dot(x) - rho;
        double s = 0.0;
        for (Eigen::Index i = 0; i < support.rows(); ++i) s += coef[i] * k(support.row(i).transpose(), x);
        return s - rho;
    }

    Vector decision(const Matrix& x) const {
        Vector out(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = decision_one(x.row(i).transpose());
        return out;
    }
};

inline double default_rbf_gamma(const Matrix& x) {
    const double mean = x.mean();
    const double var = (x.array() - mean).square().mean();
    return var > 0 ? 1.0 / (static_cast<double>(x.cols()) * var) : 1.0;
}

inline SvmModel train_svm(const Matrix& x, std::span<const int> labels, SvmOptions opt = {}) {
    require(static_cast<std::size_t>(x.rows()) == labels.size(), "train_svm: X and y row counts differ");
    require_both_classes(labels);
    require(opt.C > 0, "train_svm: C must be positive");
    const auto n = x.rows();
    Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = labels[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;

    SvmModel m;
    m.kernel = opt.kernel;
    m.gamma = opt.kernel == Kernel::rbf ? (opt.gamma > 0 ? opt.gamma : default_rbf_gamma(x)) : 0.0;

    Matrix q(n, n);
    if (opt.kernel == Kernel::linear) {
        q = x * x.transpose();
    } else {
        const Vector sq = x.rowwise().squaredNorm();
        q = x * x.transpose();
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) q(i, j) = std::exp(-m.gamma * std::max(0.0, sq[i] + sq[j] - 2 * q(i, j)));
    }
    const Vector kdiag = q.diagonal();
    q = (y.asDiagonal() * q) * y.asDiagonal();

    constexpr double tau = 1e-12;
    const double C = opt.C;
    Vector alpha = Vector::Zero(n);
    Vector grad = -Vector::Ones(n);
    auto is_upper = [&](Eigen::Index t) { return alpha[t] >= C; };
    auto is_lower = [&](Eigen::Index t) { return alpha[t] <= 0; };
    auto in_up = [&](Eigen::Index t) { return (y[t] > 0 && !is_upper(t)) || (y[t] < 0 && !is_lower(t)); };
    auto in_low = [&](Eigen::Index t) { return (y[t] > 0 && !is_lower(t)) || (y[t] < 0 && !is_upper(t)); };

    long iter = 0;
    for (; iter < opt.max_iter; ++iter) {
        double gmax = -std::numeric_limits<double>::infinity(), gmax2 = -std::numeric_limits<double>::infinity();
        Eigen::Index i = -1, j = -1;
        for (Eigen::Index t = 0; t < n; ++t)
            if (in_up(t) && -y[t] * grad[t] >= gmax) {
                gmax = -y[t] * grad[t];
                i = t;
            }
        if (i < 0) break;
        double obj_min = std::numeric_limits<double>::infinity();
        for (Eigen::Index t = 0; t < n; ++t) {
            if (!in_low(t)) continue;
            const double b = gmax + y[t] * grad[t];
            gmax2 = std::max(gmax2, y[t] * grad[t]);
            if (b > 0) {
                double a = kdiag[i] + kdiag[t] - 2.0 * y[i] * y[t] * q(i, t);
                if (a <= 0) a = tau;
                if (-(b * b) / a <= obj_min) {
                    obj_min = -(b * b) / a;
                    j = t;
                }
            }
        }
        if (gmax + gmax2 < opt.eps || j < 0) break;

        const double old_i = alpha[i], old_j = alpha[j];
        if (y[i] != y[j]) {
            double a = kdiag[i] + kdiag[j] + 2.0 * q(i, j);
            if (a <= 0) a = tau;
            const double delta = (-grad[i] - grad[j]) / a;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0 && alpha[j] < 0) {
                alpha[j] = 0;
                alpha[i] = diff;
            } else if (diff <= 0 && alpha[i] < 0) {
                alpha[i] = 0;
                alpha[j] = -diff;
            }
            if (diff > 0 && alpha[i] > C) {
                alpha[i] = C;
                alpha[j] = C - diff;
            } else if (diff <= 0 && alpha[j] > C) {
                alpha[j] = C;
                alpha[i] = C + diff;
            }
        } else {
            double a = kdiag[i] + kdiag[j] - 2.0 * q(i, j);
            if (a <= 0) a = tau;
            const double delta = (grad[i] - grad[j]) / a;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > C && alpha[i] > C) {
                alpha[i] = C;
                alpha[j] = sum - C;
            } else if (sum <= C && alpha[j] < 0) {
                alpha[j] = 0;
                alpha[i] = sum;
            }
            if (sum > C && alpha[j] > C) {
                alpha[j] = C;
                alpha[i] = sum - C;
            } else if (sum <= C && alpha[i] < 0) {
                alpha[i] = 0;
                alpha[j] = sum;
            }
        }
        const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
        grad += q.col(i) * di + q.col(j) * dj;
    }
    if (iter >= opt.max_iter) throw ComputeError(fmt::format("train_svm: no convergence after {} iterations", opt.max_iter));

    // rho: average of y_t grad_t over free vectors, midpoint of bounds otherwise.
    double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity(), sum_free = 0;
    int nfree = 0;
    for (Eigen::Index t = 0; t < n; ++t) {
        const double yg = y[t] * grad[t];
        if (is_upper(t)) {
            if (y[t] < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (is_lower(t)) {
            if (y[t] > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++nfree;
            sum_free += yg;
        }
    }
    m.rho = nfree > 0 ? sum_free / nfree : (ub + lb) / 2;

    std::vector<Eigen::Index> sv;
    for (Eigen::Index t = 0; t < n; ++t)
        if (alpha[t] > 0) sv.push_back(t);
    m.support.resize(static_cast<Eigen::Index>(sv.size()), x.cols());
    m.coef.resize(static_cast<Eigen::Index>(sv.size()));
    for (std::size_t s = 0; s < sv.size(); ++s) {
        m.support.row(static_cast<Eigen::Index>(s)) = x.row(sv[s]);
        m.coef[static_cast<Eigen::Index>(s)] = alpha[sv[s]] * y[sv[s]];
    }
    m.linear_weights = m.support.transpose() * m.coef;
    return m;
}

}  // namespace cmanifold
