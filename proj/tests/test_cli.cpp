#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>

#include "fixtures.hpp"

using namespace cmanifold;

namespace {

struct Run {
    int code = -1;
    std::string output;
};

Run cli(const std::string& args) {
    Run r;
    const std::string cmd = std::string(CMANIFOLD_CLI) + " " + args + " 2>&1";
    FILE* p = popen(cmd.c_str(), "r");
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), static_cast<int>(buf.size()), p)) r.output += buf.data();
    const int st = pclose(p);
    r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

/// Small three-layer dump shared by the tests in this file.
class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        root_ = new fs::path(fixtures::scratch("cli"));
        const auto r = cli("gen-synth --out " + dump() + " --dim 16 --groups 60 --num-layers 3 --seed 3");
        ASSERT_EQ(r.code, 0) << r.output;
    }
    static void TearDownTestSuite() { delete root_; }

    static std::string dump() { return (*root_ / "dump").string(); }
    static std::string out(const std::string& name) { return (*root_ / name).string(); }

    static fs::path* root_;
};

fs::path* Cli::root_ = nullptr;

}  // namespace

TEST_F(Cli, ValidatePassesOnGeneratedDump) {
    const auto r = cli("validate --dump " + dump() + " --out " + out("val"));
    EXPECT_EQ(r.code, 0) << r.output;
    const auto j = read_json(fs::path(out("val")) / "validate.json");
    EXPECT_TRUE(j.at("errors").empty());
    EXPECT_EQ(j.at("num_records").get<int>(), 120);
    EXPECT_EQ(read_json(fs::path(out("val")) / "run.json").at("exit_code").get<int>(), 0);
}

TEST_F(Cli, ValidateFailsOnCorruptDump) {
    const auto bad = fs::path(out("corrupt"));
    fs::copy(dump(), bad, fs::copy_options::recursive);
    fs::resize_file(bad / "layer_1.f32", fs::file_size(bad / "layer_1.f32") - 4);
    const auto r = cli("validate --dump " + bad.string() + " --out -");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("layer_1"), std::string::npos) << r.output;
}

TEST_F(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(cli("sweep --dump " + dump() + " --no-such-flag").code, 1);
    EXPECT_EQ(cli("sweep --dump /nonexistent/dump").code, 1);
    EXPECT_EQ(cli("sweep --dump " + dump() + " --out " + out("bad_dim") + " --dims 40").code, 1);
    EXPECT_EQ(cli("sweep --dump " + dump() + " --out " + out("bad_layers") + " --layers 7").code, 1);
    EXPECT_EQ(cli("classifiers --dump " + dump() + " --out " + out("bad_m") + " --methods forest").code, 1);
    EXPECT_EQ(cli("--help").code, 0);
}

TEST_F(Cli, SweepCsvShapeAndRepeatability) {
    for (const char* o : {"sweep_a", "sweep_b"}) {
        const auto r = cli("sweep --dump " + dump() + " --out " + out(o) + " --dims 1,2,0 --seed-list 42");
        ASSERT_EQ(r.code, 0) << r.output;
    }
    const auto t = read_csv(fs::path(out("sweep_a")) / "dim_sweep.csv");
    EXPECT_EQ(t.header, (std::vector<std::string>{"layer", "dim", "mean_auc", "std_auc", "n", "failed"}));
    EXPECT_EQ(t.rows.size(), 9u);
    EXPECT_EQ(t.rows[0][4], "5");
    EXPECT_EQ(slurp(fs::path(out("sweep_a")) / "dim_sweep.csv"), slurp(fs::path(out("sweep_b")) / "dim_sweep.csv"));
    EXPECT_EQ(slurp(fs::path(out("sweep_a")) / "sweep_cells.csv"), slurp(fs::path(out("sweep_b")) / "sweep_cells.csv"));
}

TEST_F(Cli, ConfigFileWithCommandLinePrecedence) {
    const auto cfg = fs::path(out("cfg.json"));
    write_json(cfg, json{{"dims", "1,2"}, {"seed-list", "42"}, {"layers", "0"}});
    ASSERT_EQ(cli("sweep --config " + cfg.string() + " --dump " + dump() + " --out " + out("cfg_a")).code, 0);
    EXPECT_EQ(read_csv(fs::path(out("cfg_a")) / "dim_sweep.csv").rows.size(), 2u);
    ASSERT_EQ(cli("sweep --config " + cfg.string() + " --dump " + dump() + " --out " + out("cfg_b") + " --dims 3").code, 0);
    const auto t = read_csv(fs::path(out("cfg_b")) / "dim_sweep.csv");
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_EQ(t.rows[0][1], "3");
    const auto run = read_json(fs::path(out("cfg_b")) / "run.json");
    EXPECT_EQ(run.at("command"), "sweep");
    EXPECT_EQ(run.at("config").at("dims"), "3");
}

TEST_F(Cli, AnalysisCommandsWriteTheirArtifacts) {
    const auto o = out("all");
    ASSERT_EQ(cli("classifiers --dump " + dump() + " --out " + o + " --dim 3 --seed-list 42").code, 0);
    ASSERT_EQ(cli("unsup --dump " + dump() + " --out " + o + " --seed-list 42").code, 0);
    ASSERT_EQ(cli("fewshot --dump " + dump() + " --out " + o + " --budgets 5,full --resamples 2 --seed-list 42").code, 0);
    ASSERT_EQ(cli("nested-cv --dump " + dump() + " --out " + o + " --grid 1,2 --standard-dim 2 --seed-list 42").code, 0);
    ASSERT_EQ(cli("confounds --dump " + dump() + " --out " + o + " --dim 2 --seed-list 42").code, 0);
    ASSERT_EQ(cli("geometry --dump " + dump() + " --out " + o + " --align-dump " + dump()).code, 0);
    ASSERT_EQ(cli("transfer --dump " + dump() + " --out " + o + " --test " + dump() + " --dim 2").code, 0);
    const auto dir = fs::path(o);
    EXPECT_EQ(read_csv(dir / "classifiers.csv").rows.size(), all_methods().size());
    EXPECT_EQ(read_csv(dir / "unsupervised.csv").rows.size(), 5u);
    const auto few = read_csv(dir / "fewshot.csv");
    EXPECT_EQ(few.rows.back()[few.column("budget")], "full");
    EXPECT_EQ(read_csv(dir / "id_curve.csv").rows.size(), 3u);
    EXPECT_EQ(read_csv(dir / "similarity.csv").rows.size(), 9u);
    EXPECT_NEAR(read_json(dir / "procrustes.json").at("residual").get<double>(), 0.0, 1e-9);
    EXPECT_TRUE(read_json(dir / "nested_cv.json").contains("bias"));
    EXPECT_TRUE(read_json(dir / "confounds.json").contains("length_only_auc"));
    const auto tr = read_csv(dir / "transfer.csv");
    EXPECT_EQ(tr.rows.back()[tr.column("test_dataset")], "cross");
    ASSERT_EQ(cli("report --out " + o).code, 0);
    EXPECT_TRUE(fs::exists(dir / "report.md"));
    EXPECT_TRUE(fs::exists(dir / "similarity.svg"));
}

TEST_F(Cli, AnovaNeedsParaphrases) {
    EXPECT_EQ(cli("anova --dump " + dump() + " --out " + out("anova_bad")).code, 1);
    const auto para = out("para_dump");
    ASSERT_EQ(cli("gen-synth --out " + para + " --dim 16 --groups 40 --records-per-group 6 --paraphrases 3 --paraphrase-jitter 0.2").code, 0);
    const auto r = cli("anova --dump " + para + " --out " + out("anova") + " --transfer-dim 2 --seed-list 42");
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_GT(read_json(fs::path(out("anova")) / "anova.json").at("f_ratio").get<double>(), 1.0);
}

TEST_F(Cli, SteeringBundleAndAnalysis) {
    const auto o = fs::path(out("steer"));
    ASSERT_EQ(cli("steer-bundle --dump " + dump() + " --out " + o.string() + " --layer 2").code, 0);
    const auto b = import_bundle(o);
    EXPECT_EQ(b.layer_index, 2);
    EXPECT_TRUE(fs::exists(o / "probe" / "probe.json"));
    // Reusing a probe from another layer is refused.
    EXPECT_EQ(cli("steer-bundle --dump " + dump() + " --out " + out("steer_bad") + " --layer 1 --probe " + (o / "probe").string()).code, 1);

    std::vector<OutcomeRow> rows;
    for (const char* d : {"learned", "random", "orthogonal"})
        for (double a : {-5.0, 5.0})
            for (int i = 0; i < 20; ++i) rows.push_back({i, d, a, (std::string(d) == "learned" && a < 0) ? (i < 15 ? 0 : 1) : (i < 5 ? 0 : 1)});
    write_file(o / "outcome.jsonl", outcome_jsonl(rows));
    ASSERT_EQ(cli("steer-analyze --outcome " + (o / "outcome.jsonl").string() + " --out " + o.string()).code, 0);
    const auto t = read_csv(o / "steering.csv");
    EXPECT_EQ(t.rows.size(), 6u);
    const auto j = read_json(o / "steering.json");
    EXPECT_NEAR(j.at("directions").at("learned").at("total_effect_pp").get<double>(), 50.0, 1e-9);

    std::erase_if(rows, [](const OutcomeRow& r) { return r.direction == "random"; });
    write_file(o / "partial.jsonl", outcome_jsonl(rows));
    const auto r = cli("steer-analyze --outcome " + (o / "partial.jsonl").string() + " --out " + out("steer_partial"));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("direction 'random' missing"), std::string::npos) << r.output;
}
