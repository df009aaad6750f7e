#include <gtest/gtest.h>

#include <fstream>

#include "fixtures.hpp"

using namespace cmanifold;
using fixtures::scratch;

namespace {

ActivationDataset tiny() {
    ActivationDataset ds;
    ds.model_tag = "toy";
    ds.num_layers = 1;
    ds.contrastive = true;
    ds.records = {{0, 0, 1, 0, "toy", 3, std::string("yes")}, {1, 0, 0, 0, "toy", 4, std::nullopt}};
    LayerActivations l;
    l.layer_index = 0;
    l.matrix.resize(2, 3);
    l.matrix << 1.5f, -2.0f, 3.25f, 0.1f, 1e-30f, -7.0f;
    ds.layers.push_back(l);
    return ds;
}

void overwrite(const fs::path& p, const std::string& bytes) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    f << bytes;
}

}  // namespace

TEST(Dump, TinyRoundTripIsBitExact) {
    const auto dir = scratch("tiny");
    const auto ds = tiny();
    write_dump(ds, dir);
    const auto back = read_dump(dir);
    EXPECT_EQ(back, ds);
    EXPECT_EQ(layer_bytes(back.layers[0]), layer_bytes(ds.layers[0]));
}

TEST(Dump, ManifestKeys) {
    const auto dir = scratch("manifest");
    write_dump(tiny(), dir);
    const auto m = read_json(dir / "manifest.json");
    for (const char* key : {"format_version", "model_tag", "num_records", "hidden_dim", "num_layers", "layer_indices", "dtype",
                            "contrastive", "sha256"})
        EXPECT_TRUE(m.contains(key)) << key;
    EXPECT_EQ(m["format_version"], 1);
    EXPECT_EQ(m["dtype"], "f32le");
    EXPECT_EQ(m["sha256"].size(), 2u);
}

TEST(Dump, RefusesNonFiniteRows) {
    auto ds = tiny();
    ds.layers[0].matrix(1, 2) = std::numeric_limits<float>::quiet_NaN();
    try {
        write_dump(ds, scratch("nan"));
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("non-finite activation"), std::string::npos);
    }
}

TEST(Dump, GptShapedManifestCounts) {
    SynthConfig c;
    c.hidden_dim = 768;
    c.num_groups = 320;
    c.num_layers = 12;
    const auto dir = scratch("gpt2shape");
    write_dump(gen_synthetic(c), dir);
    const auto m = read_json(dir / "manifest.json");
    EXPECT_EQ(m["num_records"], 640);
    EXPECT_EQ(m["hidden_dim"], 768);
    EXPECT_EQ(m["num_layers"], 12);
    EXPECT_EQ(m["layer_indices"].size(), 12u);
}

TEST(Dump, ShapeMismatchWhenLayerFileHasFewerColumns) {
    SynthConfig c;
    c.hidden_dim = 768;
    c.num_groups = 5;
    const auto dir = scratch("shape");
    write_dump(gen_synthetic(c), dir);
    auto m = read_json(dir / "manifest.json");
    // Rewrite the payload as d=767 with a matching checksum so only the shape differs.
    const auto bytes = read_file(dir / "layer_0.f32").substr(0, 10 * 767 * 4);
    overwrite(dir / "layer_0.f32", bytes);
    m["sha256"]["layer_0.f32"] = sha256_hex(bytes);
    write_json(dir / "manifest.json", m);
    try {
        read_dump(dir);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("shape mismatch"), std::string::npos) << e.what();
    }
}

TEST(Dump, TruncatedLayerFileIsRejected) {
    const auto dir = scratch("trunc");
    write_dump(tiny(), dir);
    const auto bytes = read_file(dir / "layer_0.f32");
    overwrite(dir / "layer_0.f32", bytes.substr(0, bytes.size() - 4));
    EXPECT_THROW(read_dump(dir), ValidationError);
}

TEST(Dump, FlippedByteIsAChecksumMismatch) {
    const auto dir = scratch("flip");
    write_dump(tiny(), dir);
    auto bytes = read_file(dir / "layer_0.f32");
    bytes[5] ^= 0x10;
    overwrite(dir / "layer_0.f32", bytes);
    try {
        read_dump(dir);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("checksum mismatch"), std::string::npos);
    }
}

TEST(Dump, MissingManifest) {
    const auto dir = scratch("missing");
    EXPECT_THROW(read_dump(dir), ValidationError);
}

TEST(Validate, DuplicateIdsAndBadLayerOrder) {
    auto ds = tiny();
    ds.records[1].record_id = 0;
    auto rep = validate(ds);
    ASSERT_FALSE(rep.ok());
    EXPECT_NE(rep.errors[0].find("duplicate record_id"), std::string::npos);

    ds = tiny();
    ds.num_layers = 3;
    auto l = ds.layers[0];
    l.layer_index = 2;
    ds.layers.insert(ds.layers.begin(), l);
    rep = validate(ds);
    ASSERT_FALSE(rep.ok());
    EXPECT_NE(rep.errors[0].find("strictly increasing"), std::string::npos);
}

TEST(Validate, RowCountMismatch) {
    auto ds = tiny();
    ds.records.push_back({2, 1, 1, 0, "toy", 1, std::nullopt});
    EXPECT_FALSE(validate(ds).ok());
}

TEST(Summarize, CountsAndUnpairedWarning) {
    SynthConfig c;
    c.hidden_dim = 4;
    c.num_groups = 10;
    auto ds = gen_synthetic(c);
    const auto s = summarize(ds);
    EXPECT_EQ(s.num_records, 20u);
    EXPECT_EQ(s.num_correct, 10u);
    EXPECT_EQ(s.num_incorrect, 10u);
    EXPECT_EQ(s.num_groups, 10u);
    EXPECT_TRUE(s.warnings.empty());
    std::size_t hist = 0;
    for (const auto& [bin, n] : s.length_histogram) hist += n;
    EXPECT_EQ(hist, 20u);

    ds.records[0].label = 0;  // group 0 now holds two incorrect records
    const auto w = summarize(ds).warnings;
    ASSERT_EQ(w.size(), 1u);
    EXPECT_NE(w[0].find(": 0"), std::string::npos);
    EXPECT_TRUE(validate(ds).ok());
}

TEST(Summarize, DeterministicForSeed) {
    SynthConfig c;
    c.num_groups = 50;
    EXPECT_EQ(summarize(gen_synthetic(c)), summarize(gen_synthetic(c)));
}

TEST(Synthetic, DeterministicAcrossThreadCounts) {
    SynthConfig c;
    c.hidden_dim = 32;
    c.num_groups = 200;
    c.num_layers = 3;
    c.group_offset_scale = 1.0;
    c.paraphrase_jitter = 0.3;
    c.records_per_group = 4;
    c.paraphrases = 2;
    EXPECT_EQ(gen_synthetic(c, 1), gen_synthetic(c, 4));
}

TEST(Synthetic, ClassMeansSitAtPlusMinusHalfDelta) {
    auto c = fixtures::mean_shift();
    c.num_groups = 4000;
    const auto ds = gen_synthetic(c);
    const auto basis = synth_basis(c);
    const Vector u = basis.signal.col(0);
    const Matrix x = ds.layers[0].as_double();
    const auto y = ds.labels();
    double s1 = 0, s0 = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) (y[static_cast<std::size_t>(i)] ? s1 : s0) += x.row(i).dot(u);
    const double n = static_cast<double>(x.rows()) / 2;
    EXPECT_NEAR(s1 / n, 1.0, 0.05);
    EXPECT_NEAR(s0 / n, -1.0, 0.05);
    const Matrix centered = x.rowwise() - x.colwise().mean();
    // Off-signal variance stays at sigma^2 = 1.
    const Vector v = basis.signal.col(0);
    const Matrix resid = centered - (centered * v) * v.transpose();
    EXPECT_NEAR(resid.squaredNorm() / (x.rows() * 63.0), 1.0, 0.02);
}

TEST(Synthetic, AttenuationScheduleIsLinearFromStartToOne) {
    SynthConfig c;
    c.num_layers = 5;
    EXPECT_DOUBLE_EQ(layer_attenuation(c, 0), 0.2);
    EXPECT_DOUBLE_EQ(layer_attenuation(c, 4), 1.0);
    EXPECT_DOUBLE_EQ(layer_attenuation(c, 2), 0.6);
}

TEST(Synthetic, ZeroShiftMeansChance) {
    auto c = fixtures::mean_shift();
    c.mean_shift = 0.0;
    const auto ds = gen_synthetic(c);
    const auto r = dimension_sweep(ds, 0, {0}, {.seeds = {42}});
    EXPECT_NEAR(r.cells[0].auc.mean, 0.5, 0.03);
}

TEST(Synthetic, InvalidConfig) {
    SynthConfig c;
    c.signal_rank = 65;
    EXPECT_THROW(gen_synthetic(c), ValidationError);
    c = SynthConfig{};
    c.records_per_group = 3;
    EXPECT_THROW(gen_synthetic(c), ValidationError);
    c = SynthConfig{};
    c.noise_sigma = -1;
    EXPECT_THROW(gen_synthetic(c), ValidationError);
}

TEST(Synthetic, LengthShiftInducesConfound) {
    SynthConfig c;
    c.num_groups = 100;
    c.length_label_shift = 10;
    const auto ds = gen_synthetic(c);
    double m1 = 0, m0 = 0;
    for (const auto& r : ds.records) (r.label ? m1 : m0) += r.answer_length;
    EXPECT_NEAR((m1 - m0) / 100.0, 10.0, 4.0);
}

TEST(Rng, StreamsAreKeyedAndStable) {
    EXPECT_EQ(stream_seed(42, {1, 2}), stream_seed(42, {1, 2}));
    EXPECT_NE(stream_seed(42, {1, 2}), stream_seed(42, {2, 1}));
    EXPECT_NE(stream_seed(42, {1}), stream_seed(43, {1}));
    auto a = make_stream(7, {3});
    std::vector<int> v(10);
    std::iota(v.begin(), v.end(), 0);
    auto w = v;
    seeded_shuffle(v.begin(), v.end(), a);
    auto b = make_stream(7, {3});
    seeded_shuffle(w.begin(), w.end(), b);
    EXPECT_EQ(v, w);
}

TEST(Parallel, ResultsIndependentOfWorkerCount) {
    std::vector<double> a(1000), b(1000);
    parallel_for(a.size(), 1, [&](std::size_t i) { a[i] = std::sin(static_cast<double>(i)); });
    parallel_for(b.size(), 8, [&](std::size_t i) { b[i] = std::sin(static_cast<double>(i)); });
    EXPECT_EQ(a, b);
}

TEST(Parallel, RethrowsLowestFailingIndex) {
    try {
        parallel_for(100, 4, [](std::size_t i) {
            if (i == 17 || i == 60) throw ComputeError(std::to_string(i));
        });
        FAIL();
    } catch (const ComputeError& e) {
        EXPECT_STREQ(e.what(), "17");
    }
}

TEST(Io, NumberFormatting) {
    EXPECT_EQ(num(-0.0), "0.000000");
    EXPECT_EQ(num(-1e-9), "0.000000");
    EXPECT_EQ(num(std::nan("")), "nan");
    EXPECT_EQ(num(INFINITY), "inf");
    EXPECT_EQ(num(0.5, 2), "0.50");
    EXPECT_TRUE(json_number(std::nan("")).is_null());
    EXPECT_EQ(json_number(INFINITY), "inf");
}

TEST(Io, Sha256KnownVector) {
    EXPECT_EQ(sha256_hex(std::string("abc")), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
