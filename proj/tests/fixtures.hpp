#pragma once

#include <cmanifold.hpp>

#include <filesystem>
#include <random>
#include <string>

namespace fixtures {

using namespace cmanifold;

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("cmanifold_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

/// d=64, rank 1, delta 2, isotropic sigma 1, 1000 groups x 2 records.
inline SynthConfig mean_shift(std::uint64_t seed = 42) {
    SynthConfig c;
    c.hidden_dim = 64;
    c.signal_rank = 1;
    c.mean_shift = 2.0;
    c.noise_sigma = 1.0;
    c.num_groups = 1000;
    c.records_per_group = 2;
    c.seed = seed;
    return c;
}

/// Rank-3 signal under strong noise spikes on the signal directions, GPT-2-sized width.
inline SynthConfig rank3(std::uint64_t seed = 42) {
    SynthConfig c;
    c.hidden_dim = 768;
    c.signal_rank = 3;
    c.mean_shift = 1.5;
    c.spike_sd = {0.5, 1.0, 2.0};
    c.num_groups = 400;
    c.seed = seed;
    return c;
}

/// Rank-5 signal with graded spikes on the signal directions.
inline SynthConfig rank5(std::uint64_t seed = 42) {
    SynthConfig c;
    c.hidden_dim = 768;
    c.signal_rank = 5;
    c.mean_shift = 0.8;
    c.spike_sd = {0.3, 0.5, 0.8, 1.2, 2.0};
    c.num_groups = 500;
    c.seed = seed;
    return c;
}

/// Few large groups sharing strong per-group offsets.
inline SynthConfig group_offsets(std::uint64_t seed = 42) {
    SynthConfig c;
    c.hidden_dim = 64;
    c.mean_shift = 2.0;
    c.num_groups = 25;
    c.records_per_group = 80;
    c.group_offset_scale = 5.0;
    c.seed = seed;
    return c;
}

inline std::vector<double> geomspace(double a, double b, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = a * std::pow(b / a, static_cast<double>(i) / (n - 1));
    return v;
}

/// Shared signal direction; large nuisance variance in a 32-dim block that
/// contains it, with the block's spectrum reversed between train and test.
inline SynthConfig shifted(bool test_side, std::uint64_t seed) {
    SynthConfig c;
    c.hidden_dim = 64;
    c.mean_shift = 2.0;
    c.num_groups = 1000;
    c.seed = seed;
    c.basis_seed = 7;
    c.spike_span = 32;
    c.spike_seed = 11;
    c.spike_sd = geomspace(0.1, 5.0, 32);
    if (test_side) std::reverse(c.spike_sd.begin(), c.spike_sd.end());
    c.dataset_tag = test_side ? "shifted" : "source";
    return c;
}

inline Matrix gaussian(Eigen::Index n, Eigen::Index d, std::uint64_t seed, double sd = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, sd);
    Matrix m(n, d);
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index i = 0; i < n; ++i) m(i, j) = nd(rng);
    return m;
}

inline Matrix random_orthogonal(Eigen::Index d, std::uint64_t seed) {
    Eigen::HouseholderQR<Matrix> qr(gaussian(d, d, seed));
    return qr.householderQ() * Matrix::Identity(d, d);
}

/// Closed curve (trefoil-like) in 3 coordinates, embedded isometrically in 50-D.
inline Matrix curve_in_50d(Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 2 * M_PI);
    Matrix low(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = u(rng);
        low.row(i) << std::sin(t) + 2 * std::sin(2 * t), std::cos(t) - 2 * std::cos(2 * t), -std::sin(3 * t);
    }
    return low * random_orthogonal(50, seed + 1).leftCols(3).transpose();
}

/// Standard Gaussian in 5 coordinates, embedded isometrically in 50-D.
inline Matrix gaussian5_in_50d(Eigen::Index n, std::uint64_t seed) {
    return gaussian(n, 5, seed) * random_orthogonal(50, seed + 1).leftCols(5).transpose();
}

}  // namespace fixtures
