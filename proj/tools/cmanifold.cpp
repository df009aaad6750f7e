#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>

#include <Eigen/Core>

#include "cmanifold.hpp"

using namespace cmanifold;

namespace {

constexpr const char* kVersion = "0.1.0";

template <class T>
std::vector<T> parse_list(const std::string& s, const std::string& what) {
    std::vector<T> out;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) throw ValidationError(fmt::format("{}: empty entry in '{}'", what, s));
        try {
            std::size_t used = 0;
            if constexpr (std::is_same_v<T, double>) out.push_back(std::stod(cur, &used));
            else if constexpr (std::is_unsigned_v<T>) out.push_back(static_cast<T>(std::stoull(cur, &used)));
            else out.push_back(static_cast<T>(std::stoll(cur, &used)));
            if (used != cur.size()) throw std::invalid_argument(cur);
        } catch (const std::logic_error&) {
            throw ValidationError(fmt::format("{}: cannot parse '{}'", what, cur));
        }
        cur.clear();
    };
    for (char c : s) {
        if (c == ',') flush();
        else if (c != ' ') cur += c;
    }
    flush();
    return out;
}

std::vector<std::string> split_names(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

/// "all", "a..b" (inclusive) or "i,j,k", checked against the dataset's layers.
std::vector<int> parse_layers(const std::string& spec, const std::vector<int>& available) {
    std::vector<int> out;
    if (spec == "all") {
        out = available;
    } else if (const auto dots = spec.find(".."); dots != std::string::npos) {
        const auto a = parse_list<int>(spec.substr(0, dots), "--layers");
        const auto b = parse_list<int>(spec.substr(dots + 2), "--layers");
        if (a.size() != 1 || b.size() != 1 || b[0] < a[0]) throw ValidationError("--layers: bad range '" + spec + "'");
        for (int l = a[0]; l <= b[0]; ++l) out.push_back(l);
    } else {
        out = parse_list<int>(spec, "--layers");
    }
    for (int l : out)
        if (std::find(available.begin(), available.end(), l) == available.end())
            throw ValidationError(fmt::format("--layers: layer {} not present in dump", l));
    return out;
}

struct Common {
    std::string dump;
    std::string out = "out";
    int jobs = 1;
    std::string seeds = "42,123,456";
    std::string protocol = "group_kfold";
    int folds = 0;
    double C = kDefaultC;
    int layer = -1;

    EvalOptions eval() const {
        EvalOptions e;
        e.seeds = parse_list<std::uint64_t>(seeds, "--seed-list");
        e.protocol = parse_protocol(protocol);
        e.folds = folds;
        e.C = C;
        e.jobs = std::max(1, jobs);
        require(C > 0, "--C must be positive");
        return e;
    }

    int pick_layer(const ActivationDataset& ds) const {
        if (layer < 0) return ds.layer_indices().back();
        ds.layer(layer);
        return layer;
    }
};

void add_common(CLI::App* sub, Common& c, bool needs_dump = true, bool single_layer = true) {
    if (needs_dump) sub->add_option("--dump", c.dump, "Activation dump directory")->required()->check(CLI::ExistingDirectory);
    sub->add_option("--out", c.out, "Output directory");
    sub->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::Range(1, 1024));
    sub->add_option("--seed-list", c.seeds, "Comma-separated CV seeds");
    sub->add_option("--protocol", c.protocol, "group_kfold | stratified_kfold | holdout");
    sub->add_option("--folds", c.folds, "Fold count (0 = protocol default)");
    sub->add_option("--C", c.C, "Inverse L2 regularization strength");
    if (single_layer) sub->add_option("--layer", c.layer, "Layer index (default: last layer in the dump)");
}

json options_json(const CLI::App* sub) {
    json j = json::object();
    for (const auto* opt : sub->get_options()) {
        if (opt->get_name() == "--help" || opt->get_name() == "-h") continue;
        std::string name = opt->get_single_name();
        if (opt->count() > 0) {
            const auto& r = opt->results();
            std::string v;
            if (opt->get_multi_option_policy() == CLI::MultiOptionPolicy::TakeLast) {
                v = r.back();
            } else {
                for (std::size_t i = 0; i < r.size(); ++i) v += (i ? "," : "") + r[i];
            }
            j[name] = v;
        } else {
            j[name] = opt->get_default_str();
        }
    }
    return j;
}

json library_versions() {
    return json{{"cmanifold", kVersion},
                {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
                {"fmt", FMT_VERSION},
                {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR, NLOHMANN_JSON_VERSION_MINOR,
                                              NLOHMANN_JSON_VERSION_PATCH)},
                {"cli11", CLI11_VERSION}};
}

std::string auc_values(const AucSummary& a) {
    std::string s;
    for (std::size_t i = 0; i < a.values.size(); ++i) s += (i ? ";" : "") + num(a.values[i]);
    return s;
}

ActivationDataset load(const Common& c) {
    auto ds = read_dump(c.dump);
    require_valid(ds);
    return ds;
}

fs::path out_dir(const Common& c) {
    fs::create_directories(c.out);
    return c.out;
}

// ---------------------------------------------------------------------------

struct GenSynth {
    SynthConfig cfg;
    std::string spike_sd;
    std::uint64_t basis_seed = 0;
    std::string out;
    int jobs = 1;
};

void cmd_gen_synth(GenSynth& g) {
    auto& c = g.cfg;
    if (!g.spike_sd.empty()) c.spike_sd = parse_list<double>(g.spike_sd, "--spike-sd");
    if (g.basis_seed != 0) c.basis_seed = g.basis_seed;
    const auto ds = gen_synthetic(c, g.jobs);
    write_dump(ds, g.out);
    std::cout << fmt::format("wrote {} records x {} layers (d={}) to {}\n", ds.size(), ds.layers.size(), ds.hidden_dim(), g.out);
}

int cmd_validate(const Common& c) {
    ActivationDataset ds;
    try {
        ds = read_dump(c.dump);
    } catch (const ValidationError& e) {
        std::cerr << "invalid dump: " << e.what() << "\n";
        return 1;
    }
    const auto rep = validate(ds);
    auto j = summary_json(summarize(ds));
    j["errors"] = rep.errors;
    j["valid"] = rep.ok();
    if (!c.out.empty() && c.out != "-") write_json(out_dir(c) / "validate.json", j);
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& e : rep.errors) std::cerr << "error: " << e << "\n";
    std::cout << fmt::format("{} records, {} layers, hidden_dim {}: {}\n", ds.size(), ds.layers.size(), ds.hidden_dim(),
                             rep.ok() ? "valid" : "INVALID");
    return rep.ok() ? 0 : 1;
}

void cmd_sweep(const Common& c, const std::string& layers, const std::string& dims) {
    const auto ds = load(c);
    const auto ls = parse_layers(layers, ds.layer_indices());
    const auto ks = parse_list<Eigen::Index>(dims, "--dims");
    const auto r = layer_sweep(ds, ls, ks, c.eval());
    const auto dir = out_dir(c);
    CsvWriter cells({"layer", "dim", "seed", "fold", "auc", "status"});
    for (const auto& x : r.raw)
        cells.row({std::to_string(x.layer), std::to_string(x.dim), std::to_string(x.seed), std::to_string(x.fold), num(x.auc),
                   x.failed ? "failed" : "ok"});
    cells.save(dir / "sweep_cells.csv");
    CsvWriter sum({"layer", "dim", "mean_auc", "std_auc", "n", "failed"});
    for (const auto& x : r.cells)
        sum.row({std::to_string(x.layer), std::to_string(x.dim), num(x.auc.mean), num(x.auc.std), std::to_string(x.auc.values.size()),
                 std::to_string(x.auc.failed)});
    sum.save(dir / "dim_sweep.csv");
    const auto& best = r.best_cell();
    std::cout << fmt::format("best: layer {} dim {} auc {:.4f} +/- {:.4f}\n", best.layer, best.dim, best.auc.mean, best.auc.std);
}

void cmd_classifiers(const Common& c, const std::string& methods, Eigen::Index dim) {
    const auto ds = load(c);
    std::vector<Method> ms;
    for (const auto& n : split_names(methods)) ms.push_back(parse_method(n));
    const auto rows = classifier_comparison(ds, c.pick_layer(ds), ms, dim, c.eval());
    CsvWriter w({"model_tag", "method", "mean_auc", "std_auc", "n", "failed", "fold_aucs"});
    for (const auto& r : rows)
        w.row({ds.model_tag, method_name(r.method), num(r.auc.mean), num(r.auc.std), std::to_string(r.auc.values.size()),
               std::to_string(r.auc.failed), auc_values(r.auc)});
    w.save(out_dir(c) / "classifiers.csv");
    for (const auto& r : rows) std::cout << fmt::format("{:12s} {:.4f} +/- {:.4f}\n", method_name(r.method), r.auc.mean, r.auc.std);
}

void cmd_unsup(const Common& c) {
    const auto ds = load(c);
    UnsupervisedOptions uo;
    const auto rows = unsupervised_eval(ds, c.pick_layer(ds), uo, c.eval());
    CsvWriter w({"model_tag", "feature", "mean_auc", "std_auc", "n", "fold_aucs"});
    for (const auto& r : rows)
        w.row({ds.model_tag, r.feature, num(r.auc.mean), num(r.auc.std), std::to_string(r.auc.values.size()), auc_values(r.auc)});
    w.save(out_dir(c) / "unsupervised.csv");
    for (const auto& r : rows) std::cout << fmt::format("{:20s} {:.4f} +/- {:.4f}\n", r.feature, r.auc.mean, r.auc.std);
}

void cmd_fewshot(const Common& c, const std::string& budgets, const std::string& methods, int resamples, Eigen::Index dim) {
    const auto ds = load(c);
    FewshotOptions fo;
    fo.budgets.clear();
    for (const auto& b : split_names(budgets)) fo.budgets.push_back(b == "full" ? 0 : parse_list<std::size_t>(b, "--budgets")[0]);
    fo.methods.clear();
    for (const auto& n : split_names(methods)) fo.methods.push_back(parse_method(n));
    fo.resamples = resamples;
    fo.pls_dim = dim;
    const auto rows = fewshot_curve(ds, c.pick_layer(ds), fo, c.eval());
    CsvWriter w({"budget", "method", "mean_auc", "std_auc", "n", "failed"});
    for (const auto& r : rows)
        w.row({r.budget == 0 ? "full" : std::to_string(r.budget), method_name(r.method), num(r.auc.mean), num(r.auc.std),
               std::to_string(r.auc.values.size()), std::to_string(r.auc.failed)});
    w.save(out_dir(c) / "fewshot.csv");
    for (const auto& r : rows)
        std::cout << fmt::format("{:>5s} {:12s} {:.4f} +/- {:.4f}\n", r.budget == 0 ? "full" : std::to_string(r.budget),
                                 method_name(r.method), r.auc.mean, r.auc.std);
}

void cmd_nested(const Common& c, const std::string& grid, Eigen::Index standard_dim) {
    const auto ds = load(c);
    const auto r = nested_cv(ds, c.pick_layer(ds), parse_list<Eigen::Index>(grid, "--grid"), standard_dim, c.eval());
    const auto dir = out_dir(c);
    CsvWriter w({"seed", "fold", "chosen_dim", "nested_auc", "standard_auc"});
    for (const auto& f : r.folds)
        w.row({std::to_string(f.seed), std::to_string(f.fold), std::to_string(f.chosen_dim), num(f.nested_auc), num(f.standard_auc)});
    w.save(dir / "nested_cv.csv");
    write_json(dir / "nested_cv.json", json{{"grid", r.grid},
                                            {"standard_dim", r.standard_dim},
                                            {"nested_mean", json_number(r.nested.mean)},
                                            {"nested_std", json_number(r.nested.std)},
                                            {"standard_mean", json_number(r.standard.mean)},
                                            {"standard_std", json_number(r.standard.std)},
                                            {"bias", json_number(r.bias)}});
    std::cout << fmt::format("nested {:.4f} +/- {:.4f}, standard(dim {}) {:.4f}, bias {:+.4f}\n", r.nested.mean, r.nested.std,
                             r.standard_dim, r.standard.mean, r.bias);
}

void cmd_transfer(const Common& c, const std::vector<std::string>& tests, Eigen::Index dim) {
    const auto train = load(c);
    std::vector<ActivationDataset> ts;
    for (const auto& t : tests) {
        ts.push_back(read_dump(t));
        require_valid(ts.back());
    }
    const auto rows = transfer_eval(train, ts, c.pick_layer(train), dim, c.C);
    const std::string train_name = train.records.empty() ? train.model_tag : train.records.front().dataset_tag;
    CsvWriter w({"train_dataset", "test_dataset", "n", "full_auc", "pls_auc", "gain"});
    double fsum = 0, psum = 0;
    for (const auto& r : rows) {
        w.row({train_name, r.dataset, std::to_string(r.n), num(r.full_auc), num(r.pls_auc), num(r.pls_auc - r.full_auc)});
        fsum += r.full_auc;
        psum += r.pls_auc;
    }
    const double k = static_cast<double>(rows.size());
    w.row({train_name, "cross", "0", num(fsum / k), num(psum / k), num((psum - fsum) / k)});
    w.save(out_dir(c) / "transfer.csv");
    for (const auto& r : rows)
        std::cout << fmt::format("{}: full {:.4f}  pls-{} {:.4f}\n", r.dataset, r.full_auc, dim, r.pls_auc);
}

json auc_json(const AucSummary& a) {
    return json{{"mean", json_number(a.mean)}, {"std", json_number(a.std)}, {"n", a.values.size()}};
}

void cmd_confounds(const Common& c, Eigen::Index dim) {
    const auto ds = load(c);
    const int layer = c.pick_layer(ds);
    const auto r = confound_controls(ds, layer, dim, c.eval());
    write_json(out_dir(c) / "confounds.json",
               json{{"layer", layer},
                    {"dim", dim},
                    {"raw_auc", auc_json(r.raw)},
                    {"length_only_auc", auc_json(r.length_only)},
                    {"length_residualized_auc", auc_json(r.residualized)},
                    {"surface_correlations",
                     {{"l2_norm", json_number(r.r_l2_norm)},
                      {"mean_activation", json_number(r.r_mean_activation)},
                      {"sparsity", json_number(r.r_sparsity)}}}});
    std::cout << fmt::format("raw {:.4f}  length-only {:.4f}  residualized {:.4f}\n", r.raw.mean, r.length_only.mean,
                             r.residualized.mean);
}

void cmd_anova(const Common& c, Eigen::Index dim, Eigen::Index transfer_dim) {
    const auto ds = load(c);
    const int layer = c.pick_layer(ds);
    const auto a = paraphrase_anova(ds, layer, dim);
    const auto t = paraphrase_transfer(ds, layer, transfer_dim, c.eval());
    write_json(out_dir(c) / "anova.json", json{{"layer", layer},
                                               {"dim", dim},
                                               {"within_var", json_number(a.within_var)},
                                               {"between_var", json_number(a.between_var)},
                                               {"f_ratio", json_number(a.f_ratio)},
                                               {"cells", a.cells},
                                               {"groups", a.groups},
                                               {"paraphrase_transfer_auc", auc_json(t)},
                                               {"transfer_dim", transfer_dim}});
    std::cout << fmt::format("within {:.4f} between {:.4f} F {}  paraphrase transfer {:.4f}\n", a.within_var, a.between_var,
                             num(a.f_ratio, 2), t.mean);
}

std::vector<Vector> layer_directions(const ActivationDataset& ds, const std::vector<int>& layers, double C) {
    std::vector<Vector> dirs(layers.size());
    const auto y = ds.labels();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto m = fit_probe_pipeline(ds.layer(layers[i]).as_double(), y, 0, {.C = C});
        dirs[i] = raw_linear_form(m).direction;
    }
    return dirs;
}

void cmd_geometry(const Common& c, const std::string& layers, int k_min, int k_max, const std::string& align) {
    const auto ds = load(c);
    const auto ls = parse_layers(layers, ds.layer_indices());
    const auto dir = out_dir(c);
    CsvWriter id({"layer", "id_mle", "samples", "skipped"});
    for (int l : ls) {
        const auto e = intrinsic_dim_mle(ds.layer(l).as_double(), k_min, k_max, c.jobs);
        id.row({std::to_string(l), num(e.pooled), std::to_string(e.samples), std::to_string(e.skipped)});
    }
    id.save(dir / "id_curve.csv");
    if (ls.size() < 2) return;
    const auto dirs = layer_directions(ds, ls, c.C);
    const Matrix s = layer_similarity(dirs);
    CsvWriter sim({"layer_i", "layer_j", "similarity", "grassmann"});
    for (std::size_t i = 0; i < ls.size(); ++i)
        for (std::size_t j = 0; j < ls.size(); ++j)
            sim.row({std::to_string(ls[i]), std::to_string(ls[j]), num(s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))),
                     num(grassmann_dist(dirs[i], dirs[j]))});
    sim.save(dir / "similarity.csv");
    const Matrix blocks = phase_blocks(s);
    CsvWriter pb({"phase_a", "phase_b", "mean_similarity"});
    const char* names[] = {"early", "middle", "late"};
    for (Eigen::Index a = 0; a < blocks.rows(); ++a)
        for (Eigen::Index b = 0; b < blocks.cols(); ++b) pb.row({names[a], names[b], num(blocks(a, b))});
    pb.save(dir / "phase_blocks.csv");
    if (!align.empty()) {
        auto other = read_dump(align);
        require_valid(other);
        require(other.hidden_dim() == ds.hidden_dim(), "geometry: --align-dump hidden_dim differs (pad or project first)");
        const auto odirs = layer_directions(other, ls, c.C);
        Matrix w1(ds.hidden_dim(), static_cast<Eigen::Index>(ls.size())), w2 = w1;
        for (std::size_t i = 0; i < ls.size(); ++i) {
            w1.col(static_cast<Eigen::Index>(i)) = dirs[i].normalized();
            w2.col(static_cast<Eigen::Index>(i)) = odirs[i].normalized();
        }
        const auto p = procrustes_align(w1, w2);
        write_json(dir / "procrustes.json", json{{"layers", ls}, {"residual", p.residual}, {"unaligned", (w1 - w2).norm()}});
    }
}

void cmd_steer_bundle(const Common& c, std::uint64_t seed, Eigen::Index dim, const std::string& probe_dir) {
    const auto ds = load(c);
    const int layer = c.pick_layer(ds);
    const auto dir = out_dir(c);
    ProbeModel probe;
    if (!probe_dir.empty()) {
        probe = load_probe(probe_dir);
    } else {
        probe = fit_probe_pipeline(ds.layer(layer).as_double(), ds.labels(), dim, {.C = c.C});
        probe.layer_index = layer;
        save_probe(probe, dir / "probe");
    }
    const auto b = build_bundle(probe, ds.layer(layer), seed);
    export_bundle(b, dir);
    std::cout << fmt::format("bundle for layer {}: scale {:.6f} (mean norm {:.6f}), {} alphas\n", b.layer_index, b.scale,
                             b.mean_norm, b.alphas.size());
}

void cmd_steer_analyze(const Common& c, const std::string& outcome) {
    const auto o = import_outcome(outcome);
    const auto a = analyze_sweep(o);
    const auto dir = out_dir(c);
    CsvWriter w({"direction", "alpha", "n", "error_rate"});
    json summary = json::object();
    for (const auto& d : a.directions) {
        for (std::size_t i = 0; i < d.alphas.size(); ++i)
            w.row({d.direction, num(d.alphas[i]), std::to_string(d.n[i]), num(d.error_rate[i])});
        summary[d.direction] = json{{"total_effect_pp", json_number(d.total_effect_pp)},
                                    {"spearman", json_number(d.spearman)},
                                    {"endpoint_t", json_number(d.endpoint.t)},
                                    {"endpoint_df", json_number(d.endpoint.df)},
                                    {"endpoint_p", json_number(d.endpoint.p)}};
        std::cout << fmt::format("{:10s} effect {:+.2f}pp  rho {:+.3f}  p {:.3g}\n", d.direction, d.total_effect_pp, d.spearman,
                                 d.endpoint.p);
    }
    w.save(dir / "steering.csv");
    write_json(dir / "steering.json", json{{"items", a.items}, {"directions", summary}});
}

/// Rebuilds argv as: prog, subcommand, <config-file tokens>, <remaining CLI tokens>.
/// With the take-last policy, flags given on the command line override the file.
std::vector<std::string> expand_config(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    if (args.size() < 2) return args;
    std::string path;
    std::vector<std::string> rest;
    for (std::size_t i = 2; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
        }
    }
    std::vector<std::string> out{args[0], args[1]};
    if (!path.empty()) {
        const auto j = read_json(path);
        require(j.is_object(), "config file must hold a JSON object");
        for (const auto& [key, value] : j.items()) {
            const std::string flag = "--" + key;
            if (value.is_boolean()) {
                if (value.get<bool>()) out.push_back(flag);
            } else if (value.is_array()) {
                for (const auto& v : value) {
                    out.push_back(flag);
                    out.push_back(v.is_string() ? v.get<std::string>() : v.dump());
                }
            } else {
                out.push_back(flag);
                out.push_back(value.is_string() ? value.get<std::string>() : value.dump());
            }
        }
    }
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Geometry and probing toolkit for activation dumps"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    std::string config_path;

    GenSynth gs;
    auto* gen = app.add_subcommand("gen-synth", "Write a synthetic activation dump");
    gen->add_option("--out", gs.out, "Dump directory")->required();
    gen->add_option("--dim", gs.cfg.hidden_dim, "Hidden dimension");
    gen->add_option("--rank", gs.cfg.signal_rank, "Planted signal rank");
    gen->add_option("--signal-offset", gs.cfg.signal_offset, "First basis column of the signal");
    gen->add_option("--delta", gs.cfg.mean_shift, "Class mean separation along each signal direction");
    gen->add_option("--sigma", gs.cfg.noise_sigma, "Isotropic noise standard deviation");
    gen->add_option("--spike-sd", gs.spike_sd, "Comma-separated noise SDs along spike directions");
    gen->add_option("--spike-offset", gs.cfg.spike_offset, "First basis column of the spike block");
    gen->add_option("--spike-span", gs.cfg.spike_span, "Spike block width (0 = axis-aligned spikes)");
    gen->add_option("--spike-seed", gs.cfg.spike_seed, "Seed of the rotation inside the spike block");
    gen->add_option("--groups", gs.cfg.num_groups, "Number of groups (questions)");
    gen->add_option("--records-per-group", gs.cfg.records_per_group, "Records per group, half of them correct");
    gen->add_option("--paraphrases", gs.cfg.paraphrases, "Paraphrases per answer");
    gen->add_option("--paraphrase-jitter", gs.cfg.paraphrase_jitter, "Per-record noise SD");
    gen->add_option("--group-offset", gs.cfg.group_offset_scale, "Per-group offset SD");
    gen->add_option("--num-layers", gs.cfg.num_layers, "Number of layers");
    gen->add_option("--attenuation-start", gs.cfg.attenuation_start, "Signal fraction at layer 0");
    gen->add_option("--compression-final-dims", gs.cfg.compression_final_dims, "Active noise dims at the last layer (0 = off)");
    gen->add_option("--compression-floor", gs.cfg.compression_floor, "Noise scale outside the active dims");
    gen->add_option("--length-shift", gs.cfg.length_label_shift, "Answer-length shift for correct records");
    gen->add_option("--seed", gs.cfg.seed, "Generator seed");
    gen->add_option("--basis-seed", gs.basis_seed, "Basis seed (0 = same as --seed)");
    gen->add_option("--model-tag", gs.cfg.model_tag, "Model tag");
    gen->add_option("--dataset-tag", gs.cfg.dataset_tag, "Dataset tag");
    gen->add_option("--jobs", gs.jobs, "Worker threads")->check(CLI::Range(1, 1024));

    Common common;
    auto* val = app.add_subcommand("validate", "Check a dump against the format invariants");
    val->add_option("--dump", common.dump, "Activation dump directory")->required();
    val->add_option("--out", common.out, "Output directory for validate.json ('-' = none)");

    std::string layers = "all", dims = "1,2,3,4,5,8,16,32";
    auto* sweep = app.add_subcommand("sweep", "Layer x PLS-dimension grid of held-out probe AUC");
    add_common(sweep, common, true, false);
    sweep->add_option("--layers", layers, "all | a..b | i,j,k");
    sweep->add_option("--dims", dims, "Comma-separated PLS dimensions (0 = full space)");

    std::string methods = "linear,centroid,mahalanobis,nch,knn10,svm_linear,svm_rbf,kde,ensemble";
    Eigen::Index dim = 8;
    auto* cls = app.add_subcommand("classifiers", "Geometric classifier comparison in PLS space");
    add_common(cls, common);
    cls->add_option("--methods", methods, "Comma-separated methods");
    cls->add_option("--dim", dim, "PLS dimension");

    auto* uns = app.add_subcommand("unsup", "Held-out AUC of label-free features");
    add_common(uns, common);

    std::string budgets = "5,25,100,200,full";
    std::string fs_methods = "linear,centroid,mahalanobis";
    int resamples = 10;
    Eigen::Index fs_dim = 5;
    auto* few = app.add_subcommand("fewshot", "AUC against per-class training budget");
    add_common(few, common);
    few->add_option("--budgets", budgets, "Per-class budgets; 'full' uses every training row");
    few->add_option("--methods", fs_methods, "Comma-separated methods");
    few->add_option("--resamples", resamples, "Resamples per budget")->check(CLI::PositiveNumber);
    few->add_option("--dim", fs_dim, "PLS dimension");

    std::string grid = "1,2,3,4,5,6,7,8,12,16";
    Eigen::Index standard_dim = 8;
    auto* nest = app.add_subcommand("nested-cv", "Nested CV over the PLS dimension");
    add_common(nest, common);
    nest->add_option("--grid", grid, "Inner-loop dimension grid");
    nest->add_option("--standard-dim", standard_dim, "Fixed dimension of the standard estimate");

    std::vector<std::string> tests;
    Eigen::Index tr_dim = 5;
    auto* tr = app.add_subcommand("transfer", "Zero-shot transfer of probes to other dumps");
    add_common(tr, common);
    tr->add_option("--test", tests, "Test dump directory (repeatable)")
        ->required()
        ->check(CLI::ExistingDirectory)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    tr->add_option("--dim", tr_dim, "PLS dimension");

    Eigen::Index cf_dim = 8;
    auto* conf = app.add_subcommand("confounds", "Answer-length and surface-statistic controls");
    add_common(conf, common);
    conf->add_option("--dim", cf_dim, "PLS dimension of the probes (0 = full space)");

    Eigen::Index an_dim = 1, an_tr_dim = 8;
    auto* anova = app.add_subcommand("anova", "Paraphrase variance decomposition and paraphrase transfer");
    add_common(anova, common);
    anova->add_option("--dim", an_dim, "PLS components fitted (scores use the first)");
    anova->add_option("--transfer-dim", an_tr_dim, "PLS dimension of the paraphrase-transfer probe");

    int k_min = 5, k_max = 20;
    std::string align;
    auto* geo = app.add_subcommand("geometry", "Intrinsic dimension and cross-layer direction geometry");
    add_common(geo, common, true, false);
    geo->add_option("--layers", layers, "all | a..b | i,j,k");
    geo->add_option("--k-min", k_min, "Smallest neighbor count");
    geo->add_option("--k-max", k_max, "Largest neighbor count");
    geo->add_option("--align-dump", align, "Second dump for Procrustes alignment of layer directions");

    std::uint64_t bundle_seed = 42;
    Eigen::Index sb_dim = 0;
    std::string probe_dir;
    auto* sb = app.add_subcommand("steer-bundle", "Export a steering bundle from a probe");
    add_common(sb, common);
    sb->add_option("--seed", bundle_seed, "Seed of the control directions");
    sb->add_option("--dim", sb_dim, "PLS dimension of the trained probe (0 = full space)");
    sb->add_option("--probe", probe_dir, "Use a saved probe instead of training one")->check(CLI::ExistingDirectory);

    std::string outcome;
    auto* sa = app.add_subcommand("steer-analyze", "Analyze an outcome.jsonl error-rate sweep");
    sa->add_option("--outcome", outcome, "outcome.jsonl")->required()->check(CLI::ExistingFile);
    sa->add_option("--out", common.out, "Output directory");

    auto* rep = app.add_subcommand("report", "Markdown + SVG summary of an output directory");
    rep->add_option("--out", common.out, "Output directory to summarize")->required();

    for (auto* sub : app.get_subcommands({}))
        sub->add_option("--config", config_path, "JSON file of flag values (command-line flags take precedence)");

    const auto start = std::chrono::steady_clock::now();
    CLI::App* active = nullptr;
    int code = 0;
    try {
        auto args = expand_config(argc, argv);
        std::vector<char*> cargs;
        for (auto& a : args) cargs.push_back(a.data());
        try {
            app.parse(static_cast<int>(cargs.size()), cargs.data());
        } catch (const CLI::ParseError& e) {
            const int rc = app.exit(e);
            return rc == 0 ? 0 : 1;
        }
        active = app.get_subcommands().front();
        const auto name = active->get_name();
        if (name == "gen-synth") cmd_gen_synth(gs);
        else if (name == "validate") code = cmd_validate(common);
        else if (name == "sweep") cmd_sweep(common, layers, dims);
        else if (name == "classifiers") cmd_classifiers(common, methods, dim);
        else if (name == "unsup") cmd_unsup(common);
        else if (name == "fewshot") cmd_fewshot(common, budgets, fs_methods, resamples, fs_dim);
        else if (name == "nested-cv") cmd_nested(common, grid, standard_dim);
        else if (name == "transfer") cmd_transfer(common, tests, tr_dim);
        else if (name == "confounds") cmd_confounds(common, cf_dim);
        else if (name == "anova") cmd_anova(common, an_dim, an_tr_dim);
        else if (name == "geometry") cmd_geometry(common, layers, k_min, k_max, align);
        else if (name == "steer-bundle") cmd_steer_bundle(common, bundle_seed, sb_dim, probe_dir);
        else if (name == "steer-analyze") cmd_steer_analyze(common, outcome);
        else if (name == "report") {
            for (const auto& f : write_report(common.out)) std::cout << "wrote " << (fs::path(common.out) / f).string() << "\n";
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        code = 1;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        code = 1;
    } catch (const ComputeError& e) {
        std::cerr << "compute error: " << e.what() << "\n";
        code = 2;
    } catch (const std::exception& e) {
        std::cerr << "compute error: " << e.what() << "\n";
        code = 2;
    }
    if (active) {
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const auto name = active->get_name();
        fs::path dir = name == "gen-synth" ? fs::path(gs.out) : fs::path(common.out);
        if (name == "validate" && common.out == "-") return code;
        try {
            fs::create_directories(dir);
            write_json(dir / "run.json", json{{"command", name},
                                              {"config", options_json(active)},
                                              {"versions", library_versions()},
                                              {"wall_time_s", secs},
                                              {"exit_code", code}});
        } catch (const std::exception& e) {
            std::cerr << "warning: could not write run.json: " << e.what() << "\n";
        }
    }
    return code;
}
