#pragma once

#include <deque>
#include <optional>

#include "projection.hpp"
#include "stats.hpp"

namespace cmanifold {

inline constexpr double kDefaultC = 0.1;

/// L2-regularized logistic regression, optionally behind a fitted
/// preprocessing chain (standardizer, or PLS which carries its own).
/// p(y=1|x) = sigmoid(w . f(x) + b), with f the chain.
struct ProbeModel {
    Vector weights;
    double bias = 0.0;
    double C = kDefaultC;
    std::optional<Standardizer> standardizer;
    std::optional<PlsProjector> pls;
    /// Layer the probe was trained on; -1 when unknown.
    int layer_index = -1;

    Eigen::Index input_dim() const {
        if (pls) return pls->input_dim();
        if (standardizer) return standardizer->dim();
        return weights.size();
    }

    Matrix features(const Matrix& x) const {
        if (x.cols() != input_dim())
            throw ValidationError(fmt::format("probe: input has {} columns, expected {}", x.cols(), input_dim()));
        if (pls) return pls->transform(x);
        if (standardizer) return standardizer->apply(x);
        return x;
    }

    /// Logit w . f(x) + b for each row.
    Vector decision(const Matrix& x) const { return (features(x) * weights).array() + bias; }
};

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

/// Probability of the correct class. Values stay strictly inside (0, 1) for
/// |logit| < ~36; beyond that double precision saturates.
inline Vector score(const ProbeModel& m, const Matrix& x) {
    Vector z = m.decision(x);
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = sigmoid(z[i]);
    return z;
}

struct ProbeOptions {
    double C = kDefaultC;
    double grad_tol = 1e-6;
    int max_iter = 1000;
    /// Above this many features, L-BFGS replaces Newton's method.
    Eigen::Index newton_max_dim = 256;
};

namespace detail {

/// Mean cross-entropy + ||w||^2 / (2 C N); bias unpenalized. theta = [w; b].
struct LogisticObjective {
    const Matrix& x;
    const Vector& y;
    double lambda;  // 1 / (C N)

    double value(const Vector& theta) const {
        const auto d = x.cols();
        const Vector z = (x * theta.head(d)).array() + theta[d];
        double loss = 0.0;
        for (Eigen::Index i = 0; i < z.size(); ++i) loss += softplus(z[i]) - y[i] * z[i];
        return loss / static_cast<double>(x.rows()) + 0.5 * lambda * theta.head(d).squaredNorm();
    }

    Vector gradient(const Vector& theta, Vector* probs = nullptr) const {
        const auto d = x.cols();
        const Vector z = (x * theta.head(d)).array() + theta[d];
        Vector p(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) p[i] = sigmoid(z[i]);
        const Vector r = (p - y) / static_cast<double>(x.rows());
        Vector g(d + 1);
        g.head(d) = x.transpose() * r + lambda * theta.head(d);
        g[d] = r.sum();
        if (probs) *probs = std::move(p);
        return g;
    }
};

inline double backtrack(const LogisticObjective& f, const Vector& theta, double f0, const Vector& g, const Vector& step,
                        Vector& out) {
    const double slope = g.dot(step);
    double t = 1.0;
    for (int i = 0; i < 60; ++i) {
        out = theta + t * step;
        const double fv = f.value(out);
        if (fv <= f0 + 1e-4 * t * slope) return fv;
        t *= 0.5;
    }
    out = theta;
    return f0;
}

inline Vector newton(const LogisticObjective& f, Vector theta, const ProbeOptions& opt) {
    const auto d = f.x.cols();
    const auto n = static_cast<double>(f.x.rows());
    for (int it = 0; it < opt.max_iter; ++it) {
        Vector p;
        const Vector g = f.gradient(theta, &p);
        if (g.norm() < opt.grad_tol) break;
        const Vector wgt = (p.array() * (1.0 - p.array())) / n;
        Matrix h(d + 1, d + 1);
        const Matrix xw = f.x.transpose() * wgt.asDiagonal();
        h.topLeftCorner(d, d) = xw * f.x;
        h.topLeftCorner(d, d).diagonal().array() += f.lambda;
        h.topRightCorner(d, 1) = xw.rowwise().sum();
        h.bottomLeftCorner(1, d) = h.topRightCorner(d, 1).transpose();
        h(d, d) = wgt.sum() + 1e-12;
        const Vector step = -h.ldlt().solve(g);
        Vector next;
        const double f0 = f.value(theta);
        const double f1 = backtrack(f, theta, f0, g, step, next);
        if (f1 >= f0 && (next - theta).norm() == 0) break;
        theta = std::move(next);
    }
    return theta;
}

inline Vector lbfgs(const LogisticObjective& f, Vector theta, const ProbeOptions& opt, int memory = 10) {
    std::deque<Vector> s_hist, y_hist;
    Vector g = f.gradient(theta);
    double fv = f.value(theta);
    for (int it = 0; it < opt.max_iter && g.norm() >= opt.grad_tol; ++it) {
        Vector q = g;
        std::vector<double> alpha(s_hist.size());
        for (std::size_t i = s_hist.size(); i-- > 0;) {
            alpha[i] = s_hist[i].dot(q) / y_hist[i].dot(s_hist[i]);
            q -= alpha[i] * y_hist[i];
        }
        if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            const double beta = y_hist[i].dot(q) / y_hist[i].dot(s_hist[i]);
            q += s_hist[i] * (alpha[i] - beta);
        }
        Vector step = -q;
        if (g.dot(step) >= 0) step = -g;
        Vector next;
        const double fn = backtrack(f, theta, fv, g, step, next);
        if ((next - theta).norm() == 0) break;
        const Vector gn = f.gradient(next);
        Vector s = next - theta, yv = gn - g;
        if (s.dot(yv) > 1e-12) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(yv));
            if (static_cast<int>(s_hist.size()) > memory) {
                s_hist.pop_front();
                y_hist.pop_front();
            }
        }
        theta = std::move(next);
        g = gn;
        fv = fn;
    }
    return theta;
}

}  // namespace detail

/// Fits the probe on features as given (no preprocessing). Deterministic: zero
/// initialization, full-batch Newton (or L-BFGS for wide inputs).
inline ProbeModel train_probe(const Matrix& x, std::span<const int> y, ProbeOptions opt = {}) {
    require(static_cast<std::size_t>(x.rows()) == y.size(), "train_probe: X and y row counts differ");
    require_both_classes(y);
    require(opt.C > 0, "train_probe: C must be positive");
    require(x.allFinite(), "train_probe: non-finite input");
    const Vector yv = labels_as_vector(y);
    const detail::LogisticObjective f{x, yv, 1.0 / (opt.C * static_cast<double>(x.rows()))};
    Vector theta = Vector::Zero(x.cols() + 1);
    theta = x.cols() <= opt.newton_max_dim ? detail::newton(f, theta, opt) : detail::lbfgs(f, theta, opt);
    if (!theta.allFinite()) throw ComputeError("train_probe: optimizer diverged");
    ProbeModel m;
    m.weights = theta.head(x.cols());
    m.bias = theta[x.cols()];
    m.C = opt.C;
    return m;
}

inline ProbeModel train_probe(const Matrix& x, std::span<const int> y, double C) {
    ProbeOptions opt;
    opt.C = C;
    return train_probe(x, y, opt);
}

/// Mean training log-likelihood (negative cross-entropy) of a probe.
inline double log_likelihood(const ProbeModel& m, const Matrix& x, std::span<const int> y) {
    const Vector z = m.decision(x);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) ll -= softplus(z[i]) - y[static_cast<std::size_t>(i)] * z[i];
    return ll / static_cast<double>(z.size());
}

/// Standardize (+ optional PLS with `pls_dim` components), then train the probe.
/// Every fitted piece sees only the rows passed in.
inline ProbeModel fit_probe_pipeline(const Matrix& x, std::span<const int> y, Eigen::Index pls_dim = 0,
                                     ProbeOptions opt = {}) {
    if (pls_dim > 0) {
        auto pls = fit_pls(x, y, pls_dim);
        auto m = train_probe(pls.transform(x), y, opt);
        m.pls = std::move(pls);
        return m;
    }
    auto st = Standardizer::fit(x);
    auto m = train_probe(st.apply(x), y, opt);
    m.standardizer = std::move(st);
    return m;
}

/// Effective linear map in raw input space: decision(x) = direction . x + offset.
struct LinearForm {
    Vector direction;
    double offset = 0.0;
};

inline LinearForm raw_linear_form(const ProbeModel& m) {
    LinearForm f;
    if (m.pls) {
        const auto& st = m.pls->standardizer;
        const Vector v = m.pls->rotations * m.weights;
        f.direction = v.array() / st.scale.array();
        f.offset = m.bias - f.direction.dot(st.mean);
    } else if (m.standardizer) {
        f.direction = m.weights.array() / m.standardizer->scale.array();
        f.offset = m.bias - f.direction.dot(m.standardizer->mean);
    } else {
        f.direction = m.weights;
        f.offset = m.bias;
    }
    return f;
}

/// Writes probe.json plus f32le blobs into dir.
inline void save_probe(const ProbeModel& m, const fs::path& dir) {
    fs::create_directories(dir);
    write_file(dir / "probe_weights.f32", f32_bytes(m.weights));
    json j{{"weights", {{"length", m.weights.size()}, {"blob", "probe_weights.f32"}}},
           {"bias", m.bias},
           {"C", m.C},
           {"layer_index", m.layer_index}};
    // Weights are also kept in full precision so reloaded probes score identically.
    j["weights_f64"] = std::vector<double>(m.weights.data(), m.weights.data() + m.weights.size());
    if (m.standardizer) j["standardizer"] = to_json(*m.standardizer);
    if (m.pls) j["pls"] = save_pls(*m.pls, dir, "pls");
    write_json(dir / "probe.json", j);
}

inline ProbeModel load_probe(const fs::path& dir) {
    const auto j = read_json(dir / "probe.json");
    ProbeModel m;
    try {
        const auto w = j.at("weights_f64").get<std::vector<double>>();
        m.weights = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
        m.bias = j.at("bias").get<double>();
        m.C = j.at("C").get<double>();
        m.layer_index = j.at("layer_index").get<int>();
        if (j.contains("standardizer")) m.standardizer = standardizer_from_json(j.at("standardizer"));
        if (j.contains("pls")) m.pls = load_pls(j.at("pls"), dir);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("probe.json: ") + e.what());
    }
    return m;
}

}  // namespace cmanifold
