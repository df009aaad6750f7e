#pragma once

#include <Eigen/Dense>
#include <fmt/format.h>

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmanifold {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Binary labels: 1 = correct, 0 = incorrect.
using Labels = std::vector<int>;

/// Bad input, broken invariant, or schema violation. Maps to CLI exit code 1.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed on otherwise valid input. Maps to CLI exit code 2.
class ComputeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw ValidationError(what);
}

inline void check_binary(std::span<const int> y) {
    for (int v : y) require(v == 0 || v == 1, "labels must be 0 or 1");
}

inline std::size_t count_positive(std::span<const int> y) {
    std::size_t n = 0;
    for (int v : y) n += (v == 1);
    return n;
}

inline void require_both_classes(std::span<const int> y) {
    check_binary(y);
    const auto pos = count_positive(y);
    if (pos == 0 || pos == y.size()) throw ValidationError("single-class target");
}

inline Matrix select_rows(const Matrix& x, std::span<const std::size_t> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

template <class T>
std::vector<T> select(const std::vector<T>& v, std::span<const std::size_t> idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(v[i]);
    return out;
}

inline Vector labels_as_vector(std::span<const int> y) {
    Vector v(static_cast<Eigen::Index>(y.size()));
    for (std::size_t i = 0; i < y.size(); ++i) v[static_cast<Eigen::Index>(i)] = y[i];
    return v;
}

inline bool all_finite(const Matrix& x) { return x.allFinite(); }

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
    std::size_t n = 0;
};

/// Population (ddof = 0) standard deviation, matching numpy's default.
inline MeanStd mean_std(std::span<const double> v) {
    MeanStd r;
    r.n = v.size();
    if (v.empty()) return r;
    double s = 0.0;
    for (double x : v) s += x;
    r.mean = s / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(v.size()));
    return r;
}

}  // namespace cmanifold
