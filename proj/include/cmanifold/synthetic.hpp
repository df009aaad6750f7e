#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "activation_store.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace cmanifold {

/// Ground-truth generator: two Gaussian classes separated by a mean shift
/// along `signal_rank` orthonormal directions, plus shared per-group offsets,
/// per-answer noise, and per-paraphrase jitter.
///
/// Noise for one answer is `sigma * z + sum_j (spike_sd[j] - sigma) * (d_j . z) * d_j`
/// for orthonormal spike directions d_j, i.e. the standard deviation along d_j
/// is exactly spike_sd[j]. Spike directions are basis columns starting at
/// `spike_offset`, or (when `spike_span > 0`) a seeded random rotation inside
/// the span of `spike_span` basis columns starting there.
struct SynthConfig {
    int hidden_dim = 64;
    int signal_rank = 1;
    /// First basis column used for signal directions.
    int signal_offset = 0;
    double mean_shift = 2.0;
    double noise_sigma = 1.0;

    std::vector<double> spike_sd;
    int spike_offset = 0;
    int spike_span = 0;
    std::uint64_t spike_seed = 0;

    int num_groups = 1000;
    int records_per_group = 2;
    /// Paraphrases per answer; records of one answer share its noise draw.
    int paraphrases = 1;
    double group_offset_scale = 0.0;
    double paraphrase_jitter = 0.0;

    int num_layers = 1;
    /// Mean-shift fraction at layer 0, rising linearly to 1 at the last layer.
    double attenuation_start = 0.2;
    /// When > 0, noise in coordinates >= active_dims(layer) is scaled by
    /// `compression_floor`; active dims fall linearly from d to this value.
    int compression_final_dims = 0;
    double compression_floor = 0.1;

    std::uint64_t seed = 42;
    /// Seed of the orthonormal basis; defaults to `seed`. Datasets sharing it share signal directions.
    std::optional<std::uint64_t> basis_seed;

    int length_min = 5;
    int length_max = 60;
    /// Added to answer_length for label 1 records (confound fixtures).
    double length_label_shift = 0.0;

    std::string model_tag = "synthetic";
    std::string dataset_tag = "synthetic";
    bool contrastive = true;
};

inline void validate_config(const SynthConfig& c) {
    require(c.hidden_dim >= 1, "hidden_dim must be >= 1");
    require(c.signal_rank >= 1, "signal_rank must be >= 1");
    require(c.signal_offset >= 0 && c.signal_offset + c.signal_rank <= c.hidden_dim, "signal directions exceed hidden_dim");
    require(c.mean_shift >= 0 && c.noise_sigma >= 0, "scales must be >= 0");
    require(c.group_offset_scale >= 0 && c.paraphrase_jitter >= 0, "scales must be >= 0");
    for (double s : c.spike_sd) require(s >= 0, "spike_sd entries must be >= 0");
    require(c.spike_offset >= 0, "spike_offset must be >= 0");
    if (c.spike_span > 0) {
        require(static_cast<int>(c.spike_sd.size()) <= c.spike_span, "spike_span must be >= number of spikes");
        require(c.spike_offset + c.spike_span <= c.hidden_dim, "spike span exceeds hidden_dim");
    } else {
        require(c.spike_offset + static_cast<int>(c.spike_sd.size()) <= c.hidden_dim, "spike columns exceed hidden_dim");
    }
    require(c.num_groups >= 1, "num_groups must be >= 1");
    require(c.records_per_group >= 2 && c.records_per_group % 2 == 0, "records_per_group must be an even integer >= 2");
    require(c.paraphrases >= 1 && (c.records_per_group / 2) % c.paraphrases == 0,
            "paraphrases must divide records_per_group / 2");
    require(c.num_layers >= 1, "num_layers must be >= 1");
    require(c.attenuation_start >= 0, "attenuation_start must be >= 0");
    require(c.compression_final_dims >= 0 && c.compression_final_dims <= c.hidden_dim, "compression_final_dims out of range");
    require(c.compression_floor >= 0, "compression_floor must be >= 0");
    require(c.length_min >= 0 && c.length_max >= c.length_min, "invalid answer length range");
}

/// `count` orthonormal d-vectors (columns) from a seeded Gaussian draw, via
/// Householder QR.
inline Matrix seeded_orthonormal(Eigen::Index d, Eigen::Index count, std::uint64_t seed, std::uint64_t tag) {
    auto rng = make_stream(seed, {tag});
    std::normal_distribution<double> nd;
    Matrix g(d, count);
    for (Eigen::Index j = 0; j < count; ++j)
        for (Eigen::Index i = 0; i < d; ++i) g(i, j) = nd(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(d, count);
    // Fix signs so the result does not depend on the QR's sign convention.
    const Matrix r = qr.matrixQR().topRows(count).triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < count; ++j)
        if (r(j, j) < 0) q.col(j) *= -1.0;
    return q;
}

struct SynthBasis {
    Matrix signal;  // d x r
    Matrix spikes;  // d x m
};

inline SynthBasis synth_basis(const SynthConfig& c) {
    validate_config(c);
    const auto bseed = c.basis_seed.value_or(c.seed);
    const int spike_cols = c.spike_span > 0 ? c.spike_span : static_cast<int>(c.spike_sd.size());
    const int needed = std::max(c.signal_offset + c.signal_rank, c.spike_offset + spike_cols);
    const Matrix basis = seeded_orthonormal(c.hidden_dim, needed, bseed, stream::basis);
    SynthBasis b;
    b.signal = basis.middleCols(c.signal_offset, c.signal_rank);
    const auto m = static_cast<Eigen::Index>(c.spike_sd.size());
    if (c.spike_span > 0) {
        const Matrix rot = seeded_orthonormal(c.spike_span, m, c.spike_seed, stream::spikes);
        b.spikes = basis.middleCols(c.spike_offset, c.spike_span) * rot;
    } else {
        b.spikes = basis.middleCols(c.spike_offset, m);
    }
    return b;
}

inline double layer_attenuation(const SynthConfig& c, int layer) {
    if (c.num_layers == 1) return 1.0;
    const double t = static_cast<double>(layer) / (c.num_layers - 1);
    return c.attenuation_start + (1.0 - c.attenuation_start) * t;
}

inline int layer_active_dims(const SynthConfig& c, int layer) {
    if (c.compression_final_dims == 0 || c.num_layers == 1) return c.hidden_dim;
    const double t = static_cast<double>(layer) / (c.num_layers - 1);
    return static_cast<int>(std::lround(c.hidden_dim - (c.hidden_dim - c.compression_final_dims) * t));
}

inline ActivationDataset gen_synthetic(const SynthConfig& c, int jobs = 1) {
    const auto basis = synth_basis(c);
    const auto d = static_cast<Eigen::Index>(c.hidden_dim);
    const int R = c.records_per_group;
    const int half = R / 2;
    const auto n = static_cast<std::size_t>(c.num_groups) * static_cast<std::size_t>(R);
    const Vector direction = basis.signal.rowwise().sum();
    const Vector spike_sd = Eigen::Map<const Vector>(c.spike_sd.data(), static_cast<Eigen::Index>(c.spike_sd.size()));

    ActivationDataset ds;
    ds.model_tag = c.model_tag;
    ds.num_layers = c.num_layers;
    ds.contrastive = c.contrastive;
    ds.records.resize(n);
    ds.layers.resize(static_cast<std::size_t>(c.num_layers));
    for (int l = 0; l < c.num_layers; ++l) {
        ds.layers[static_cast<std::size_t>(l)].layer_index = l;
        ds.layers[static_cast<std::size_t>(l)].matrix.resize(static_cast<Eigen::Index>(n), d);
    }

    parallel_for(static_cast<std::size_t>(c.num_groups), jobs, [&](std::size_t g) {
        std::normal_distribution<double> nd;
        auto grng = make_stream(c.seed, {stream::group, g});
        Vector offset(d);
        for (Eigen::Index i = 0; i < d; ++i) offset[i] = c.group_offset_scale * nd(grng);

        for (int j = 0; j < R; ++j) {
            const std::size_t rid = g * static_cast<std::size_t>(R) + static_cast<std::size_t>(j);
            const int label = j < half ? 1 : 0;
            const int within = j % half;
            const int answer = within / c.paraphrases;
            auto arng = make_stream(c.seed, {stream::answer, g, static_cast<std::uint64_t>(label), static_cast<std::uint64_t>(answer)});
            Vector z(d);
            for (Eigen::Index i = 0; i < d; ++i) z[i] = nd(arng);
            auto rrng = make_stream(c.seed, {stream::record, rid});
            Vector jitter(d);
            for (Eigen::Index i = 0; i < d; ++i) jitter[i] = c.paraphrase_jitter * nd(rrng);
            std::uniform_int_distribution<int> len(c.length_min, c.length_max);
            const int length = len(rrng) + static_cast<int>(std::lround(c.length_label_shift * label));

            auto& meta = ds.records[rid];
            meta.record_id = static_cast<std::int64_t>(rid);
            meta.group_id = static_cast<std::int64_t>(g);
            meta.label = label;
            meta.paraphrase_id = within % c.paraphrases;
            meta.dataset_tag = c.dataset_tag;
            meta.answer_length = length;

            const double sign = label == 1 ? 1.0 : -1.0;
            for (int l = 0; l < c.num_layers; ++l) {
                Vector zl = z;
                const int active = layer_active_dims(c, l);
                if (active < d) zl.tail(d - active) *= c.compression_floor;
                Vector noise = c.noise_sigma * zl;
                if (spike_sd.size() > 0) {
                    const Vector proj = basis.spikes.transpose() * zl;
                    noise += basis.spikes * ((spike_sd.array() - c.noise_sigma) * proj.array()).matrix();
                }
                const Vector x = sign * 0.5 * c.mean_shift * layer_attenuation(c, l) * direction + offset + noise + jitter;
                ds.layers[static_cast<std::size_t>(l)].matrix.row(static_cast<Eigen::Index>(rid)) = x.cast<float>().transpose();
            }
        }
    });
    return ds;
}

}  // namespace cmanifold
