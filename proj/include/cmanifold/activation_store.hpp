#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "common.hpp"
#include "io.hpp"
#include "sha256.hpp"

namespace cmanifold {

struct RecordMeta {
    std::int64_t record_id = 0;
    std::int64_t group_id = 0;
    int label = 0;  // 1 = correct, 0 = incorrect
    int paraphrase_id = 0;
    std::string dataset_tag;
    int answer_length = 0;
    std::optional<std::string> text;

    bool operator==(const RecordMeta&) const = default;
};

/// Last-token hidden states of one layer; row i belongs to records[i].
struct LayerActivations {
    int layer_index = 0;
    RowMatrixF matrix;

    Eigen::Index hidden_dim() const { return matrix.cols(); }
    Matrix as_double() const { return matrix.cast<double>(); }

    bool operator==(const LayerActivations& o) const {
        return layer_index == o.layer_index && matrix.rows() == o.matrix.rows() &&
               matrix.cols() == o.matrix.cols() &&
               std::memcmp(matrix.data(), o.matrix.data(), sizeof(float) * static_cast<std::size_t>(matrix.size())) == 0;
    }
};

struct ActivationDataset {
    std::string model_tag;
    int num_layers = 0;
    bool contrastive = false;
    std::vector<RecordMeta> records;
    std::vector<LayerActivations> layers;

    std::size_t size() const { return records.size(); }
    Eigen::Index hidden_dim() const { return layers.empty() ? 0 : layers.front().hidden_dim(); }

    const LayerActivations& layer(int layer_index) const {
        for (const auto& l : layers)
            if (l.layer_index == layer_index) return l;
        throw ValidationError("layer " + std::to_string(layer_index) + " not present in dataset");
    }

    std::vector<int> layer_indices() const {
        std::vector<int> out;
        for (const auto& l : layers) out.push_back(l.layer_index);
        return out;
    }

    Labels labels() const {
        Labels y;
        y.reserve(records.size());
        for (const auto& r : records) y.push_back(r.label);
        return y;
    }

    std::vector<std::int64_t> groups() const {
        std::vector<std::int64_t> g;
        g.reserve(records.size());
        for (const auto& r : records) g.push_back(r.group_id);
        return g;
    }

    bool operator==(const ActivationDataset&) const = default;
};

struct ValidationReport {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    bool ok() const { return errors.empty(); }
};

/// Groups lacking one of the two labels.
inline std::vector<std::int64_t> unpaired_groups(const std::vector<RecordMeta>& records) {
    std::map<std::int64_t, std::array<int, 2>> seen;
    for (const auto& r : records) seen[r.group_id][r.label == 1 ? 1 : 0]++;
    std::vector<std::int64_t> out;
    for (const auto& [g, c] : seen)
        if (c[0] == 0 || c[1] == 0) out.push_back(g);
    return out;
}

inline ValidationReport validate(const ActivationDataset& ds) {
    ValidationReport rep;
    auto err = [&](std::string s) { rep.errors.push_back(std::move(s)); };

    std::set<std::int64_t> ids;
    for (const auto& r : ds.records) {
        if (!ids.insert(r.record_id).second) err(fmt::format("duplicate record_id {}", r.record_id));
        if (r.label != 0 && r.label != 1) err(fmt::format("record {}: label must be 0 or 1", r.record_id));
        if (r.paraphrase_id < 0) err(fmt::format("record {}: negative paraphrase_id", r.record_id));
        if (r.answer_length < 0) err(fmt::format("record {}: negative answer_length", r.record_id));
    }
    if (ds.layers.empty()) err("dataset has no layers");
    if (ds.num_layers < 1) err("num_layers must be positive");

    int prev = -1;
    const auto d = ds.hidden_dim();
    for (const auto& l : ds.layers) {
        if (l.layer_index <= prev) err(fmt::format("layer_index values must be strictly increasing (at {})", l.layer_index));
        prev = l.layer_index;
        if (l.layer_index < 0 || l.layer_index >= ds.num_layers)
            err(fmt::format("layer_index {} outside [0, {})", l.layer_index, ds.num_layers));
        if (static_cast<std::size_t>(l.matrix.rows()) != ds.records.size())
            err(fmt::format("layer {}: {} rows but {} records", l.layer_index, l.matrix.rows(), ds.records.size()));
        if (l.hidden_dim() != d) err(fmt::format("layer {}: hidden_dim {} differs from {}", l.layer_index, l.hidden_dim(), d));
        if (!l.matrix.allFinite()) {
            for (Eigen::Index i = 0; i < l.matrix.rows(); ++i)
                if (!l.matrix.row(i).allFinite()) {
                    err(fmt::format("non-finite activation in layer {} row {}", l.layer_index, i));
                    break;
                }
        }
    }
    if (ds.contrastive) {
        const auto bad = unpaired_groups(ds.records);
        if (!bad.empty()) {
            std::string list;
            for (std::size_t i = 0; i < bad.size(); ++i) list += (i ? "," : "") + std::to_string(bad[i]);
            rep.warnings.push_back("contrastive dataset has groups without both labels: " + list);
        }
    }
    return rep;
}

inline void require_valid(const ActivationDataset& ds) {
    const auto rep = validate(ds);
    if (!rep.ok()) throw ValidationError(rep.errors.front());
}

struct DatasetSummary {
    std::size_t num_records = 0;
    std::size_t num_correct = 0;
    std::size_t num_incorrect = 0;
    std::size_t num_groups = 0;
    Eigen::Index hidden_dim = 0;
    std::vector<int> layer_indices;
    std::map<int, std::size_t> paraphrase_counts;
    /// Answer-length histogram over bins of width `length_bin_width`.
    std::map<int, std::size_t> length_histogram;
    int length_bin_width = 10;
    std::vector<std::string> warnings;

    bool operator==(const DatasetSummary&) const = default;
};

inline DatasetSummary summarize(const ActivationDataset& ds) {
    DatasetSummary s;
    s.num_records = ds.records.size();
    std::set<std::int64_t> groups;
    for (const auto& r : ds.records) {
        (r.label == 1 ? s.num_correct : s.num_incorrect)++;
        groups.insert(r.group_id);
        s.paraphrase_counts[r.paraphrase_id]++;
        s.length_histogram[(r.answer_length / s.length_bin_width) * s.length_bin_width]++;
    }
    s.num_groups = groups.size();
    s.hidden_dim = ds.hidden_dim();
    s.layer_indices = ds.layer_indices();
    s.warnings = validate(ds).warnings;
    return s;
}

inline json summary_json(const DatasetSummary& s) {
    json hist = json::object();
    for (const auto& [bin, c] : s.length_histogram) hist[std::to_string(bin)] = c;
    json para = json::object();
    for (const auto& [p, c] : s.paraphrase_counts) para[std::to_string(p)] = c;
    return json{{"num_records", s.num_records},     {"num_correct", s.num_correct},
                {"num_incorrect", s.num_incorrect}, {"num_groups", s.num_groups},
                {"hidden_dim", s.hidden_dim},       {"layer_indices", s.layer_indices},
                {"paraphrase_counts", para},        {"length_histogram", hist},
                {"length_bin_width", s.length_bin_width}, {"warnings", s.warnings}};
}

// ---------------------------------------------------------------------------
// Dump format: manifest.json + meta.jsonl + layer_<k>.f32 (N*d f32le, record-major)

inline constexpr int kDumpFormatVersion = 1;

inline std::string layer_file_name(int layer_index) { return "layer_" + std::to_string(layer_index) + ".f32"; }

inline std::string meta_jsonl(const std::vector<RecordMeta>& records) {
    std::string out;
    for (const auto& r : records) {
        json j{{"record_id", r.record_id}, {"group_id", r.group_id},       {"label", r.label},
               {"paraphrase_id", r.paraphrase_id}, {"dataset_tag", r.dataset_tag}, {"answer_length", r.answer_length}};
        if (r.text) j["text"] = *r.text;
        out += j.dump();
        out += '\n';
    }
    return out;
}

inline std::string layer_bytes(const LayerActivations& l) {
    return std::string(reinterpret_cast<const char*>(l.matrix.data()), sizeof(float) * static_cast<std::size_t>(l.matrix.size()));
}

inline void write_dump(const ActivationDataset& ds, const fs::path& dir) {
    require_valid(ds);
    fs::create_directories(dir);
    json sums = json::object();
    const auto meta = meta_jsonl(ds.records);
    sums["meta.jsonl"] = sha256_hex(meta);
    write_file(dir / "meta.jsonl", meta);
    for (const auto& l : ds.layers) {
        const auto bytes = layer_bytes(l);
        sums[layer_file_name(l.layer_index)] = sha256_hex(bytes);
        write_file(dir / layer_file_name(l.layer_index), bytes);
    }
    json manifest{{"format_version", kDumpFormatVersion},
                  {"model_tag", ds.model_tag},
                  {"num_records", ds.records.size()},
                  {"hidden_dim", ds.hidden_dim()},
                  {"num_layers", ds.num_layers},
                  {"layer_indices", ds.layer_indices()},
                  {"dtype", "f32le"},
                  {"contrastive", ds.contrastive},
                  {"sha256", sums}};
    write_json(dir / "manifest.json", manifest);
}

namespace detail {

template <class T>
T get_field(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ValidationError(where + ": missing key '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(where + ": key '" + key + "' has the wrong type");
    }
}

inline RecordMeta parse_record(const json& j, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + ": expected a JSON object");
    RecordMeta r;
    r.record_id = get_field<std::int64_t>(j, "record_id", where);
    r.group_id = get_field<std::int64_t>(j, "group_id", where);
    r.label = get_field<int>(j, "label", where);
    r.paraphrase_id = get_field<int>(j, "paraphrase_id", where);
    r.dataset_tag = get_field<std::string>(j, "dataset_tag", where);
    r.answer_length = get_field<int>(j, "answer_length", where);
    if (j.contains("text") && !j.at("text").is_null()) r.text = get_field<std::string>(j, "text", where);
    return r;
}

}  // namespace detail

inline ActivationDataset read_dump(const fs::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path)) throw ValidationError("missing file: " + manifest_path.string());
    const auto m = read_json(manifest_path);
    const std::string where = "manifest.json";
    if (detail::get_field<int>(m, "format_version", where) != kDumpFormatVersion)
        throw ValidationError("unsupported format_version");
    if (detail::get_field<std::string>(m, "dtype", where) != "f32le") throw ValidationError("unsupported dtype (expected f32le)");

    ActivationDataset ds;
    ds.model_tag = detail::get_field<std::string>(m, "model_tag", where);
    ds.num_layers = detail::get_field<int>(m, "num_layers", where);
    ds.contrastive = detail::get_field<bool>(m, "contrastive", where);
    const auto n = detail::get_field<std::int64_t>(m, "num_records", where);
    const auto d = detail::get_field<std::int64_t>(m, "hidden_dim", where);
    const auto indices = detail::get_field<std::vector<int>>(m, "layer_indices", where);
    const auto sums = detail::get_field<json>(m, "sha256", where);
    if (n < 0 || d < 1) throw ValidationError("manifest: invalid num_records/hidden_dim");

    auto checked = [&](const std::string& name) {
        const auto bytes = read_file(dir / name);
        if (!sums.contains(name)) throw ValidationError("manifest: no sha256 entry for " + name);
        if (sha256_hex(bytes) != sums.at(name).get<std::string>()) throw ValidationError("checksum mismatch: " + name);
        return bytes;
    };

    const auto meta = checked("meta.jsonl");
    std::istringstream lines(meta);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error&) {
            throw ValidationError(fmt::format("meta.jsonl line {}: malformed JSON", lineno));
        }
        ds.records.push_back(detail::parse_record(j, fmt::format("meta.jsonl line {}", lineno)));
    }
    if (static_cast<std::int64_t>(ds.records.size()) != n)
        throw ValidationError(fmt::format("shape mismatch: manifest num_records {} but meta.jsonl has {}", n, ds.records.size()));

    for (int k : indices) {
        const auto name = layer_file_name(k);
        const auto bytes = read_file(dir / name);
        const auto expected = static_cast<std::size_t>(n) * static_cast<std::size_t>(d) * sizeof(float);
        if (bytes.size() != expected)
            throw ValidationError(fmt::format("shape mismatch: {} has {} bytes, expected {} (N={}, d={})", name,
                                              bytes.size(), expected, n, d));
        if (!sums.contains(name) || sha256_hex(bytes) != sums.at(name).get<std::string>())
            throw ValidationError("checksum mismatch: " + name);
        LayerActivations l;
        l.layer_index = k;
        l.matrix.resize(n, d);
        std::memcpy(l.matrix.data(), bytes.data(), bytes.size());
        ds.layers.push_back(std::move(l));
    }
    require_valid(ds);
    return ds;
}

}  // namespace cmanifold
