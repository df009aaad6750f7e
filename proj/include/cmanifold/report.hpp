#pragma once

#include <map>
#include <sstream>

#include "io.hpp"
#include "plot.hpp"

namespace cmanifold {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw ValidationError("csv: no column " + name);
    }

    std::vector<double> numbers(const std::string& name) const {
        const auto c = column(name);
        std::vector<double> out;
        for (const auto& r : rows) out.push_back(std::strtod(r[c].c_str(), nullptr));
        return out;
    }
};

/// Plain comma-separated (no quoting) as written by CsvWriter.
inline CsvTable read_csv(const fs::path& p) {
    std::istringstream in(read_file(p));
    CsvTable t;
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::string cur;
        for (char c : s) {
            if (c == ',') {
                cells.push_back(cur);
                cur.clear();
            } else if (c != '\r') {
                cur += c;
            }
        }
        cells.push_back(cur);
        return cells;
    };
    if (!std::getline(in, line)) throw ValidationError("csv: empty file " + p.string());
    t.header = split(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split(line);
        if (cells.size() != t.header.size()) throw ValidationError("csv: ragged row in " + p.string());
        t.rows.push_back(std::move(cells));
    }
    return t;
}

inline std::string markdown_table(const CsvTable& t, std::size_t max_rows = 40) {
    std::string s = "|";
    for (const auto& h : t.header) s += " " + h + " |";
    s += "\n|";
    for (std::size_t i = 0; i < t.header.size(); ++i) s += "---|";
    s += "\n";
    for (std::size_t r = 0; r < t.rows.size() && r < max_rows; ++r) {
        s += "|";
        for (const auto& c : t.rows[r]) s += " " + c + " |";
        s += "\n";
    }
    if (t.rows.size() > max_rows) s += fmt::format("\n({} more rows in the CSV)\n", t.rows.size() - max_rows);
    return s;
}

struct ReportSection {
    const char* file;
    const char* title;
};

inline const std::vector<ReportSection>& report_sections() {
    static const std::vector<ReportSection> s{
        {"validate.json", "Dataset validation"},
        {"dim_sweep.csv", "Layer and dimension sweep"},
        {"classifiers.csv", "Classifier comparison"},
        {"unsupervised.csv", "Unsupervised features"},
        {"fewshot.csv", "Few-shot budgets"},
        {"nested_cv.json", "Nested cross-validation"},
        {"nested_cv.csv", "Nested cross-validation folds"},
        {"transfer.csv", "Cross-dataset transfer"},
        {"confounds.json", "Confound controls"},
        {"anova.json", "Paraphrase variance decomposition"},
        {"id_curve.csv", "Intrinsic dimension by layer"},
        {"phase_blocks.csv", "Layer similarity by depth phase"},
        {"steering.csv", "Steering sweep"},
        {"steering.json", "Steering summary"},
    };
    return s;
}

/// Writes report.md and SVG figures derived from the artifacts already in `dir`.
/// Reads nothing it writes, so repeated runs produce identical bytes.
inline std::vector<std::string> write_report(const fs::path& dir) {
    require(fs::is_directory(dir), "report: not a directory: " + dir.string());
    std::vector<std::string> written;
    std::string md = "# Run report\n";
    bool any = false;
    for (const auto& sec : report_sections()) {
        const auto p = dir / sec.file;
        if (!fs::exists(p)) continue;
        any = true;
        md += fmt::format("\n## {}\n\nSource: `{}`\n\n", sec.title, sec.file);
        if (p.extension() == ".csv") md += markdown_table(read_csv(p));
        else md += "```json\n" + read_json(p).dump(2) + "\n```\n";
    }
    if (!any) throw ValidationError("report: no known artifacts in " + dir.string());

    auto figure = [&](const std::string& name, const std::string& svg_text, const std::string& caption) {
        write_file(dir / name, svg_text);
        written.push_back(name);
        md += fmt::format("\n![{}]({})\n", caption, name);
    };
    md += "\n## Figures\n";
    if (fs::exists(dir / "dim_sweep.csv")) {
        const auto t = read_csv(dir / "dim_sweep.csv");
        std::map<std::string, Series> by_layer;
        const auto lc = t.column("layer"), dc = t.column("dim"), mc = t.column("mean_auc");
        for (const auto& r : t.rows) {
            if (r[mc] == "nan") continue;
            auto& s = by_layer[r[lc]];
            s.name = "layer " + r[lc];
            s.x.push_back(std::strtod(r[dc].c_str(), nullptr));
            s.y.push_back(std::strtod(r[mc].c_str(), nullptr));
        }
        std::vector<Series> series;
        for (auto& [k, s] : by_layer) series.push_back(std::move(s));
        if (!series.empty()) figure("dim_sweep.svg", line_plot(series, "Held-out AUC by projection dimension", "PLS dimension (0 = full)", "AUC"), "dimension sweep");
    }
    if (fs::exists(dir / "id_curve.csv")) {
        const auto t = read_csv(dir / "id_curve.csv");
        figure("id_curve.svg", line_plot({{"MLE", t.numbers("layer"), t.numbers("id_mle")}}, "Intrinsic dimension by layer", "layer", "intrinsic dimension"), "intrinsic dimension");
    }
    if (fs::exists(dir / "similarity.csv")) {
        const auto t = read_csv(dir / "similarity.csv");
        const auto li = t.numbers("layer_i"), lj = t.numbers("layer_j"), v = t.numbers("similarity");
        std::vector<double> layers(li.begin(), li.end());
        std::sort(layers.begin(), layers.end());
        layers.erase(std::unique(layers.begin(), layers.end()), layers.end());
        const auto L = static_cast<Eigen::Index>(layers.size());
        Matrix m = Matrix::Zero(L, L);
        auto pos = [&](double l) { return std::lower_bound(layers.begin(), layers.end(), l) - layers.begin(); };
        for (std::size_t r = 0; r < v.size(); ++r) m(pos(li[r]), pos(lj[r])) = v[r];
        std::vector<std::string> labels;
        for (double l : layers) labels.push_back(num(l, 0));
        figure("similarity.svg", heatmap(m, "|cos| between layer probe directions", labels), "layer similarity");
    }
    if (fs::exists(dir / "steering.csv")) {
        const auto t = read_csv(dir / "steering.csv");
        std::map<std::string, Series> by_dir;
        const auto dc = t.column("direction"), ac = t.column("alpha"), ec = t.column("error_rate");
        for (const auto& r : t.rows) {
            auto& s = by_dir[r[dc]];
            s.name = r[dc];
            s.x.push_back(std::strtod(r[ac].c_str(), nullptr));
            s.y.push_back(std::strtod(r[ec].c_str(), nullptr));
        }
        std::vector<Series> series;
        for (auto& [k, s] : by_dir) series.push_back(std::move(s));
        figure("steering.svg", line_plot(series, "Error rate under steering", "alpha", "error rate"), "steering");
    }
    write_file(dir / "report.md", md);
    written.insert(written.begin(), "report.md");
    return written;
}

}  // namespace cmanifold
