#pragma once

#include <optional>

#include "common.hpp"
#include "io.hpp"

namespace cmanifold {

inline constexpr double kScaleFloor = 1e-8;

/// Per-column centering and scaling, fit on training rows only.
struct Standardizer {
    Vector mean;
    Vector scale;

    static Standardizer fit(const Matrix& x) {
        require(x.rows() >= 2, "standardizer needs at least 2 rows");
        require(x.allFinite(), "non-finite values in standardizer input");
        Standardizer s;
        s.mean = x.colwise().mean().transpose();
        s.scale.resize(x.cols());
        const auto n = static_cast<double>(x.rows());
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double var = (x.col(j).array() - s.mean[j]).square().sum() / n;
            s.scale[j] = std::max(std::sqrt(var), kScaleFloor);
        }
        return s;
    }

    Matrix apply(const Matrix& x) const {
        if (x.cols() != mean.size()) throw ValidationError("standardizer: dimension mismatch");
        return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
    }

    Eigen::Index dim() const { return mean.size(); }
};

/// Flips each column so its largest-magnitude entry is positive. Returns the signs applied.
inline Vector canonicalize_signs(Matrix& w) {
    Vector signs = Vector::Ones(w.cols());
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
        Eigen::Index arg = 0;
        w.col(j).cwiseAbs().maxCoeff(&arg);
        if (w(arg, j) < 0) {
            w.col(j) *= -1.0;
            signs[j] = -1.0;
        }
    }
    return signs;
}

/// Single-target PLS (PLS1, NIPALS, X-only deflation) on standardized inputs.
struct PlsProjector {
    Standardizer standardizer;
    Matrix x_weights;   // d x k
    Matrix x_loadings;  // d x k
    Matrix rotations;   // d x k, maps standardized x to scores directly

    Eigen::Index n_components() const { return x_weights.cols(); }
    Eigen::Index input_dim() const { return standardizer.dim(); }

    Matrix transform(const Matrix& x) const { return standardizer.apply(x) * rotations; }
};

struct PlsOptions {
    double tolerance = 1e-10;
    int max_iter = 500;
};

inline PlsProjector fit_pls(const Matrix& x, std::span<const int> y, Eigen::Index k, PlsOptions opt = {}) {
    require(static_cast<std::size_t>(x.rows()) == y.size(), "fit_pls: X and y row counts differ");
    require_both_classes(y);
    const auto n = x.rows();
    const auto d = x.cols();
    if (k < 1 || k > std::min<Eigen::Index>(d, n - 1))
        throw ValidationError(fmt::format("fit_pls: n_components {} outside [1, min(d={}, N-1={})]", k, d, n - 1));

    PlsProjector p;
    p.standardizer = Standardizer::fit(x);
    Matrix xk = p.standardizer.apply(x);
    Vector yk = labels_as_vector(y);
    yk.array() -= yk.mean();

    p.x_weights.resize(d, k);
    p.x_loadings.resize(d, k);
    for (Eigen::Index c = 0; c < k; ++c) {
        // NIPALS inner loop; with a single target it settles after one pass.
        Vector u = yk;
        Vector w = Vector::Zero(d);
        Vector t;
        for (int it = 0; it < opt.max_iter; ++it) {
            Vector w_new = xk.transpose() * u;
            const double norm = w_new.norm();
            if (!(norm > 1e-14)) throw ComputeError(fmt::format("fit_pls: component {} is degenerate (X'y = 0)", c + 1));
            w_new /= norm;
            t = xk * w_new;
            const double tt = t.squaredNorm();
            if (!(tt > 0)) throw ComputeError(fmt::format("fit_pls: component {} has zero scores", c + 1));
            const double q = yk.dot(t) / tt;
            u = yk / q;
            const bool done = (w_new - w).norm() < opt.tolerance;
            w = w_new;
            if (done) break;
        }
        Eigen::Index arg = 0;
        w.cwiseAbs().maxCoeff(&arg);
        if (w[arg] < 0) {
            w = -w;
            t = -t;
        }
        const Vector load = xk.transpose() * t / t.squaredNorm();
        xk -= t * load.transpose();
        p.x_weights.col(c) = w;
        p.x_loadings.col(c) = load;
    }
    const Matrix ptw = p.x_loadings.transpose() * p.x_weights;
    p.rotations = p.x_weights * ptw.partialPivLu().inverse();
    return p;
}

struct PcaProjector {
    Vector mean;
    Matrix components;           // d x k, orthonormal columns
    Vector explained_variance;   // k, non-increasing

    Eigen::Index n_components() const { return components.cols(); }

    Matrix transform(const Matrix& x) const { return (x.rowwise() - mean.transpose()) * components; }

    /// Distance from x to the fitted affine subspace.
    double reconstruction_error(const Vector& x) const {
        const Vector c = x - mean;
        return (c - components * (components.transpose() * c)).norm();
    }
};

inline PcaProjector fit_pca(const Matrix& x, Eigen::Index k) {
    const auto n = x.rows();
    const auto d = x.cols();
    if (k < 1 || k > std::min(d, n)) throw ValidationError(fmt::format("fit_pca: k={} outside [1, min(d={}, N={})]", k, d, n));
    require(x.allFinite(), "fit_pca: non-finite input");
    PcaProjector p;
    p.mean = x.colwise().mean().transpose();
    const Matrix centered = x.rowwise() - p.mean.transpose();
    Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
    p.components = svd.matrixV().leftCols(k);
    canonicalize_signs(p.components);
    const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
    p.explained_variance = svd.singularValues().head(k).array().square() / denom;
    return p;
}

// ---------------------------------------------------------------------------
// JSON (+ f32le blob) serialization. Matrices are stored column by column.

inline json matrix_meta(const Matrix& m, const std::string& blob) {
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"blob", blob}};
}

inline std::string matrix_blob(const Matrix& m) {
    return f32_bytes(Eigen::Map<const Vector>(m.data(), m.size()));
}

inline Matrix read_matrix_blob(const fs::path& dir, const json& meta) {
    const auto rows = meta.at("rows").get<Eigen::Index>();
    const auto cols = meta.at("cols").get<Eigen::Index>();
    const auto blob = meta.at("blob").get<std::string>();
    const Vector flat = f32_vector(read_file(dir / blob), rows * cols, blob);
    return Eigen::Map<const Matrix>(flat.data(), rows, cols);
}

inline json to_json(const Standardizer& s) {
    return json{{"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
                {"scale", std::vector<double>(s.scale.data(), s.scale.data() + s.scale.size())}};
}

inline Standardizer standardizer_from_json(const json& j) {
    Standardizer s;
    const auto m = j.at("mean").get<std::vector<double>>();
    const auto sc = j.at("scale").get<std::vector<double>>();
    require(m.size() == sc.size(), "standardizer: mean/scale length mismatch");
    s.mean = Eigen::Map<const Vector>(m.data(), static_cast<Eigen::Index>(m.size()));
    s.scale = Eigen::Map<const Vector>(sc.data(), static_cast<Eigen::Index>(sc.size()));
    return s;
}

/// Writes `<prefix>_weights.f32`, `<prefix>_loadings.f32`, `<prefix>_rotations.f32` into dir and
/// returns the JSON descriptor referencing them.
inline json save_pls(const PlsProjector& p, const fs::path& dir, const std::string& prefix) {
    write_file(dir / (prefix + "_weights.f32"), matrix_blob(p.x_weights));
    write_file(dir / (prefix + "_loadings.f32"), matrix_blob(p.x_loadings));
    write_file(dir / (prefix + "_rotations.f32"), matrix_blob(p.rotations));
    return json{{"type", "pls"},
                {"n_components", p.n_components()},
                {"standardizer", to_json(p.standardizer)},
                {"x_weights", matrix_meta(p.x_weights, prefix + "_weights.f32")},
                {"x_loadings", matrix_meta(p.x_loadings, prefix + "_loadings.f32")},
                {"rotations", matrix_meta(p.rotations, prefix + "_rotations.f32")}};
}

inline PlsProjector load_pls(const json& j, const fs::path& dir) {
    PlsProjector p;
    p.standardizer = standardizer_from_json(j.at("standardizer"));
    p.x_weights = read_matrix_blob(dir, j.at("x_weights"));
    p.x_loadings = read_matrix_blob(dir, j.at("x_loadings"));
    p.rotations = read_matrix_blob(dir, j.at("rotations"));
    return p;
}

}  // namespace cmanifold
