#pragma once

#include <map>
#include <sstream>

#include "activation_store.hpp"
#include "probe.hpp"
#include "rng.hpp"
#include "stats.hpp"
#include "unsupervised.hpp"

namespace cmanifold {

inline constexpr double kScaleFraction = 0.05;
inline constexpr int kAlphaCount = 20;
inline constexpr double kAlphaMax = 5.0;

inline const std::array<const char*, 3> kDirections{"learned", "random", "orthogonal"};

/// 20 evenly spaced values from -5 to 5 inclusive.
inline std::vector<double> alpha_schedule(int count = kAlphaCount, double amax = kAlphaMax) {
    require(count >= 2, "alpha schedule needs at least 2 values");
    std::vector<double> a(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) a[static_cast<std::size_t>(i)] = -amax + 2.0 * amax * i / (count - 1);
    a.back() = amax;
    return a;
}

struct SteeringBundle {
    int layer_index = 0;
    Vector learned;
    Vector random;
    Vector orthogonal;
    double mean_norm = 0.0;
    double scale = 0.0;
    std::vector<double> alphas;
    std::uint64_t seed = 0;

    Eigen::Index hidden_dim() const { return learned.size(); }

    const Vector& direction(const std::string& name) const {
        if (name == "learned") return learned;
        if (name == "random") return random;
        if (name == "orthogonal") return orthogonal;
        throw ValidationError("unknown steering direction: " + name);
    }
};

/// Standard normal vector from 53-bit uniforms (Box-Muller).
inline Vector gaussian_vector(Eigen::Index d, std::mt19937_64& rng) {
    Vector v(d);
    for (Eigen::Index i = 0; i < d; i += 2) {
        double u1 = unit_uniform(rng);
        while (u1 <= 0) u1 = unit_uniform(rng);
        const double u2 = unit_uniform(rng);
        const double r = std::sqrt(-2.0 * std::log(u1));
        v[i] = r * std::cos(2 * M_PI * u2);
        if (i + 1 < d) v[i + 1] = r * std::sin(2 * M_PI * u2);
    }
    return v;
}

inline double mean_row_norm(const LayerActivations& layer) {
    require(layer.matrix.rows() > 0, "steering: layer has no rows");
    double s = 0.0;
    for (Eigen::Index i = 0; i < layer.matrix.rows(); ++i) s += layer.matrix.row(i).cast<double>().norm();
    return s / static_cast<double>(layer.matrix.rows());
}

/// Learned direction (probe mapped back to raw space), a Gaussian random control,
/// and that control with the learned component removed.
inline SteeringBundle build_bundle(const ProbeModel& probe, const LayerActivations& layer, std::uint64_t seed) {
    if (probe.layer_index >= 0 && probe.layer_index != layer.layer_index)
        throw ValidationError(fmt::format("steering: probe was trained on layer {}, refusing layer {}", probe.layer_index,
                                          layer.layer_index));
    require(probe.input_dim() == layer.hidden_dim(),
            fmt::format("steering: probe expects {} inputs, layer has {}", probe.input_dim(), layer.hidden_dim()));
    const auto form = raw_linear_form(probe);
    const double wn = form.direction.norm();
    if (!(wn > 0) || !std::isfinite(wn)) throw ValidationError("steering: probe weights are zero");
    SteeringBundle b;
    b.layer_index = layer.layer_index;
    b.seed = seed;
    b.learned = form.direction / wn;
    b.mean_norm = mean_row_norm(layer);
    b.scale = kScaleFraction * b.mean_norm;
    b.alphas = alpha_schedule();
    const auto d = b.learned.size();
    for (std::uint64_t attempt = 0;; ++attempt) {
        if (attempt >= 16) throw ComputeError("steering: random draws kept landing parallel to the learned direction");
        auto rng = make_stream(seed, {stream::steering, attempt});
        const Vector r = gaussian_vector(d, rng);
        const double rn = r.norm();
        Vector perp = r - r.dot(b.learned) * b.learned;
        perp -= perp.dot(b.learned) * b.learned;
        const double pn = perp.norm();
        if (!(rn > 0) || pn < 1e-6 * rn) continue;
        b.random = r / rn;
        b.orthogonal = perp / pn;
        break;
    }
    return b;
}

inline void check_bundle(const SteeringBundle& b, double norm_tol) {
    for (const char* name : kDirections) {
        const auto& v = b.direction(name);
        require(v.size() == b.learned.size(), fmt::format("bundle: {} direction has length {}", name, v.size()));
        require(std::abs(v.norm() - 1.0) < norm_tol, fmt::format("bundle: {} direction is not unit norm", name));
    }
    require(std::abs(b.orthogonal.dot(b.learned)) < 1e-6, "bundle: orthogonal control is not orthogonal to the learned direction");
    require(static_cast<int>(b.alphas.size()) >= 2, "bundle: alpha schedule has fewer than 2 values");
}

/// bundle.json plus learned.f32, random.f32, orthogonal.f32 in dir.
inline void export_bundle(const SteeringBundle& b, const fs::path& dir) {
    check_bundle(b, 1e-9);
    fs::create_directories(dir);
    json dirs = json::object(), sums = json::object();
    for (const char* name : kDirections) {
        const auto file = std::string(name) + ".f32";
        const auto bytes = f32_bytes(b.direction(name));
        write_file(dir / file, bytes);
        dirs[name] = file;
        sums[file] = sha256_hex(bytes);
    }
    json j{{"format_version", 1},
           {"layer_index", b.layer_index},
           {"hidden_dim", b.hidden_dim()},
           {"scale", b.scale},
           {"mean_norm", b.mean_norm},
           {"scale_fraction", kScaleFraction},
           {"alpha_values", b.alphas},
           {"seed", b.seed},
           {"dtype", "f32le"},
           {"directions", dirs},
           {"sha256", sums}};
    write_json(dir / "bundle.json", j);
}

/// Reads a bundle back. Directions come from f32 blobs, so unit norms hold to ~1e-6.
inline SteeringBundle import_bundle(const fs::path& dir) {
    const auto j = read_json(dir / "bundle.json");
    SteeringBundle b;
    try {
        b.layer_index = j.at("layer_index").get<int>();
        const auto d = j.at("hidden_dim").get<Eigen::Index>();
        b.scale = j.at("scale").get<double>();
        b.mean_norm = j.at("mean_norm").get<double>();
        b.alphas = j.at("alpha_values").get<std::vector<double>>();
        b.seed = j.at("seed").get<std::uint64_t>();
        const auto& dirs = j.at("directions");
        for (const char* name : kDirections) {
            const auto file = dirs.at(name).get<std::string>();
            const auto bytes = read_file(dir / file);
            if (j.contains("sha256") && j["sha256"].contains(file) && j["sha256"][file].get<std::string>() != sha256_hex(bytes))
                throw ValidationError("bundle: checksum mismatch for " + file);
            Vector v = f32_vector(bytes, d, file);
            if (std::string(name) == "learned") b.learned = std::move(v);
            else if (std::string(name) == "random") b.random = std::move(v);
            else b.orthogonal = std::move(v);
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bundle.json: ") + e.what());
    }
    check_bundle(b, 1e-6);
    return b;
}

struct OutcomeRow {
    std::int64_t item = 0;
    std::string direction;
    double alpha = 0.0;
    int correct = 0;
};

/// Per direction, per alpha: item -> correct bit.
struct SweepOutcome {
    std::map<std::string, std::map<double, std::map<std::int64_t, int>>> bits;

    std::size_t items() const {
        std::size_t n = 0;
        for (const auto& [dir, by_alpha] : bits)
            for (const auto& [a, m] : by_alpha) n = std::max(n, m.size());
        return n;
    }
};

inline SweepOutcome outcome_from_rows(const std::vector<OutcomeRow>& rows,
                                      std::span<const char* const> required = kDirections) {
    SweepOutcome o;
    for (const auto& r : rows) {
        require(r.correct == 0 || r.correct == 1, fmt::format("outcome: item {} has correct={}", r.item, r.correct));
        require(std::isfinite(r.alpha), fmt::format("outcome: item {} has a non-finite alpha", r.item));
        auto [it, fresh] = o.bits[r.direction][r.alpha].emplace(r.item, r.correct);
        require(fresh, fmt::format("outcome: duplicate row for item {} direction {} alpha {}", r.item, r.direction, r.alpha));
    }
    for (const char* name : required) require(o.bits.count(name) > 0, fmt::format("outcome: direction '{}' missing", name));
    return o;
}

/// outcome.jsonl: one {"item", "direction", "alpha", "correct"} object per line.
inline SweepOutcome import_outcome(const fs::path& path, std::span<const char* const> required = kDirections) {
    std::istringstream in(read_file(path));
    std::string line;
    std::vector<OutcomeRow> rows;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = json::parse(line);
            for (const char* key : {"item", "direction", "alpha", "correct"})
                if (!j.contains(key)) throw ValidationError(fmt::format("outcome line {}: missing key '{}'", lineno, key));
            rows.push_back({j.at("item").get<std::int64_t>(), j.at("direction").get<std::string>(), j.at("alpha").get<double>(),
                            j.at("correct").get<int>()});
        } catch (const json::exception& e) {
            throw ValidationError(fmt::format("outcome line {}: {}", lineno, e.what()));
        }
    }
    return outcome_from_rows(rows, required);
}

inline std::string outcome_jsonl(const std::vector<OutcomeRow>& rows) {
    std::string out;
    for (const auto& r : rows)
        out += json{{"item", r.item}, {"direction", r.direction}, {"alpha", r.alpha}, {"correct", r.correct}}.dump() + "\n";
    return out;
}

struct DirectionAnalysis {
    std::string direction;
    std::vector<double> alphas;
    std::vector<double> error_rate;
    std::vector<std::size_t> n;
    double total_effect_pp = 0.0;  // error(alpha_min) - error(alpha_max), percentage points
    double spearman = 0.0;         // error rate vs alpha
    TTest endpoint;                // Welch t on per-item error bits, alpha_min vs alpha_max
};

struct SweepAnalysis {
    std::vector<DirectionAnalysis> directions;
    std::size_t items = 0;

    const DirectionAnalysis& direction(const std::string& name) const {
        for (const auto& d : directions)
            if (d.direction == name) return d;
        throw ValidationError("analysis: no direction " + name);
    }
};

inline SweepAnalysis analyze_sweep(const SweepOutcome& o) {
    SweepAnalysis r;
    r.items = o.items();
    for (const auto& [name, by_alpha] : o.bits) {
        if (by_alpha.size() < 2) throw ValidationError(fmt::format("analysis: direction '{}' needs both alpha endpoints", name));
        DirectionAnalysis d;
        d.direction = name;
        for (const auto& [a, items] : by_alpha) {
            std::size_t wrong = 0;
            for (const auto& [item, c] : items) wrong += c == 0;
            d.alphas.push_back(a);
            d.n.push_back(items.size());
            d.error_rate.push_back(items.empty() ? 0.0 : static_cast<double>(wrong) / static_cast<double>(items.size()));
        }
        d.total_effect_pp = 100.0 * (d.error_rate.front() - d.error_rate.back());
        try {
            d.spearman = spearman_rho(d.alphas, d.error_rate);
        } catch (const ComputeError&) {
            d.spearman = std::numeric_limits<double>::quiet_NaN();
        }
        auto bits = [](const std::map<std::int64_t, int>& m) {
            std::vector<double> v;
            for (const auto& [item, c] : m) v.push_back(1.0 - c);
            return v;
        };
        const auto lo = bits(by_alpha.begin()->second), hi = bits(by_alpha.rbegin()->second);
        try {
            d.endpoint = welch_t(lo, hi);
        } catch (const ComputeError&) {
            // Both endpoints constant but different: a perfect separation.
            d.endpoint.t = d.error_rate.front() > d.error_rate.back() ? std::numeric_limits<double>::infinity()
                                                                      : -std::numeric_limits<double>::infinity();
            d.endpoint.df = static_cast<double>(lo.size() + hi.size() - 2);
            d.endpoint.p = 0.0;
        }
        r.directions.push_back(std::move(d));
    }
    return r;
}

}  // namespace cmanifold
