#pragma once

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "common.hpp"

namespace cmanifold {

namespace fs = std::filesystem;
using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little, "f32le blobs assume a little-endian host");

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ValidationError("missing file: " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& p, const std::string& data) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw ComputeError("cannot open for writing: " + p.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw ComputeError("write failed: " + p.string());
}

inline json read_json(const fs::path& p) {
    try {
        return json::parse(read_file(p));
    } catch (const json::parse_error& e) {
        throw ValidationError("malformed JSON in " + p.string() + ": " + e.what());
    }
}

inline void write_json(const fs::path& p, const json& j) { write_file(p, j.dump(2) + "\n"); }

/// Serializes doubles as little-endian float32.
inline std::string f32_bytes(const Vector& v) {
    std::string out(static_cast<std::size_t>(v.size()) * 4, '\0');
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const float f = static_cast<float>(v[i]);
        std::memcpy(out.data() + 4 * i, &f, 4);
    }
    return out;
}

inline Vector f32_vector(const std::string& bytes, Eigen::Index expected, const std::string& what) {
    if (static_cast<Eigen::Index>(bytes.size()) != expected * 4)
        throw ValidationError(fmt::format("{}: expected {} bytes, found {}", what, expected * 4, bytes.size()));
    Vector v(expected);
    for (Eigen::Index i = 0; i < expected; ++i) {
        float f;
        std::memcpy(&f, bytes.data() + 4 * i, 4);
        v[i] = f;
    }
    return v;
}

/// Minimal CSV writer: fixed-precision numerics so repeated runs are byte-identical.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : cols_(header.size()) { row(header); }

    void row(const std::vector<std::string>& cells) {
        if (cells.size() != cols_) throw ComputeError("csv row width mismatch");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) buf_ += ',';
            buf_ += cells[i];
        }
        buf_ += '\n';
    }

    const std::string& str() const { return buf_; }
    void save(const fs::path& p) const { write_file(p, buf_); }

private:
    std::size_t cols_;
    std::string buf_;
};

inline std::string num(double v, int precision = 6) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    auto s = fmt::format("{:.{}f}", v, precision);
    if (s == fmt::format("-{:.{}f}", 0.0, precision)) s.erase(0, 1);
    return s;
}

/// JSON value for a double that may be non-finite (JSON has no inf/nan).
inline json json_number(double v) {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

}  // namespace cmanifold
