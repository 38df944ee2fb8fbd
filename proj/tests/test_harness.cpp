#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <filesystem>

#include "lcmps/checkpoint.hpp"
#include "lcmps/harness.hpp"
#include "oracles.hpp"

using namespace lcmps;
namespace fs = std::filesystem;

namespace {

const MPSState& state_t1_k16() {
    static const MPSState st = [] {
        QuenchConfig cfg;
        cfg.k_max = 16;
        return evolve_to(neel_init(), 1.0, cfg);
    }();
    return st;
}

AggregateCurve curve_of(const std::vector<double>& t, const std::vector<double>& y) {
    AggregateCurve c;
    for (std::size_t i = 0; i < t.size(); ++i) c.grid.push_back({t[i], y[i], 0.01, 10});
    return c;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(LCMPS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "lcmps_harness_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

} // namespace

TEST(FormatDouble, RoundTripsAndNan) {
    for (double x : {0.1, 1.0 / 3.0, -2.5e-17, 0.0, 123456789.123456789, 0.0625})
        EXPECT_EQ(std::strtod(format_double(x).c_str(), nullptr), x);
    EXPECT_EQ(format_double(0.5), "0.5");
    EXPECT_EQ(format_double(std::nan("")), "nan");
}

TEST(GitBlobHash, KnownValues) {
    EXPECT_EQ(git_blob_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    EXPECT_EQ(git_blob_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST(RunItebd, InitialRowOnly) {
    QuenchConfig cfg;
    cfg.k_max = 8;
    const ItebdRun run = run_itebd(cfg);
    ASSERT_EQ(run.curve.size(), 1u);
    EXPECT_EQ(run.curve[0].time, 0.0);
    EXPECT_EQ(run.curve[0].sz0, 0.5);
    EXPECT_EQ(run.curve[0].sz1, -0.5);
}

// Same gate sequence on a 16-site open chain; its edges do not reach the
// centre within the tolerance by t = 2.
TEST(RunItebd, CurveMatchesDenseTrotterChain) {
    QuenchConfig cfg;
    cfg.k_max = 64;
    cfg.t_init = 2.0;
    const ItebdRun run = run_itebd(cfg);
    ASSERT_EQ(run.curve.size(), 33u);
    EXPECT_EQ(run.state.time, 2.0);
    for (int steps : {8, 16, 32}) {
        const auto sz = oracle::trotter_chain(16, 0.5, 0.0625, steps);
        EXPECT_NEAR(run.curve[static_cast<std::size_t>(steps)].sz0, sz[8], 1e-4) << steps;
        EXPECT_NEAR(run.curve[static_cast<std::size_t>(steps)].sz1, sz[9], 1e-4) << steps;
    }
    for (const auto& r : run.curve) EXPECT_NEAR(r.sz0, -r.sz1, 1e-9);
}

TEST(RunItebd, CsvLayout) {
    QuenchConfig cfg;
    cfg.k_max = 8;
    cfg.t_init = 0.25;
    const ItebdRun run = run_itebd(cfg);
    const CurveTable t = parse_curve_csv(itebd_curve_csv(cfg, run.curve));
    EXPECT_EQ(t.columns, (std::vector<std::string>{"t", "sz0", "sz1", "discarded_weight", "entropy_A", "entropy_B"}));
    EXPECT_EQ(t.meta.at("k_max"), 8);
    ASSERT_EQ(t.rows.size(), 5u);
    const AggregateCurve c = curve_from_table(t);
    for (std::size_t i = 0; i < c.grid.size(); ++i) EXPECT_EQ(c.grid[i].mean_sz0, run.curve[i].sz0);
}

TEST(RunMc, RejectsBadParameters) {
    McParams p;
    p.l = 2;
    p.t_fin = 2.0;
    p.n_samples = 0;
    EXPECT_THROW(run_mc(state_t1_k16(), 0.5, p), ConfigError);
    p.n_samples = 4;
    p.t_fin = 1.0;
    EXPECT_THROW(run_mc(state_t1_k16(), 0.5, p), ConfigError);
    p.t_fin = 1.5;
    EXPECT_THROW(run_mc(state_t1_k16(), 0.5, p), ConfigError);
    p.t_fin = 2.0;
    p.l = 0;
    EXPECT_THROW(run_mc(state_t1_k16(), 0.5, p), ConfigError);
}

TEST(RunMc, StreamingAgreesWithTwoPass) {
    McParams p;
    p.l = 2;
    p.t_fin = 3.0;
    p.n_samples = 300;
    p.master_seed = 17;
    const McResult r = run_mc(state_t1_k16(), 0.5, p);
    const AggregateCurve two = aggregate_records(r.records);
    ASSERT_EQ(two.grid.size(), 7u);
    for (std::size_t i = 0; i < two.grid.size(); ++i) {
        EXPECT_EQ(r.curve.grid[i].t, two.grid[i].t);
        EXPECT_NEAR(r.curve.grid[i].mean_sz0, two.grid[i].mean_sz0, 1e-12);
        EXPECT_NEAR(r.curve.grid[i].std_error, two.grid[i].std_error, 1e-12);
        EXPECT_EQ(r.curve.grid[i].n_samples, 300);
    }
    for (std::size_t k = 0; k < r.records.size(); ++k) EXPECT_EQ(r.records[k].sample_id, static_cast<long>(k));
}

TEST(RunMc, ResultIndependentOfWorkerCount) {
    McParams p;
    p.l = 2;
    p.t_fin = 2.0;
    p.n_samples = 101;
    p.master_seed = 5;
    const McResult one = run_mc(state_t1_k16(), 0.5, p);
    for (int w : {2, 3, 8}) {
        p.n_workers = w;
        const McResult many = run_mc(state_t1_k16(), 0.5, p);
        EXPECT_EQ(mc_curve_csv(one.curve, {}), mc_curve_csv(many.curve, {}));
        EXPECT_EQ(sample_records_csv(one.records), sample_records_csv(many.records));
    }
}

TEST(RunMc, SingleSampleHasUndefinedStderr) {
    McParams p;
    p.l = 1;
    p.t_fin = 2.0;
    p.n_samples = 1;
    const McResult r = run_mc(state_t1_k16(), 0.5, p);
    for (const auto& pt : r.curve.grid) EXPECT_TRUE(std::isnan(pt.std_error));
    EXPECT_NE(mc_curve_csv(r.curve, {}).find(",nan,1"), std::string::npos);
}

TEST(RunMc, EstimateAtCheckpointTimeIsUnbiased) {
    McParams p;
    p.l = 2;
    p.t_fin = 4.0 / 3.0;
    p.n_samples = 4000;
    p.master_seed = 23;
    const McResult r = run_mc(state_t1_k16(), 0.5, p);
    const CurvePoint& first = r.curve.grid.front();
    EXPECT_LT(std::abs(first.mean_sz0 - expect_sz(state_t1_k16(), Sublattice::A)), 4.0 * first.std_error);
}

TEST(CurveCsv, McRoundTrip) {
    AggregateCurve c = curve_of({1.0, 4.0 / 3.0, 5.0 / 3.0}, {0.1, -1.0 / 7.0, 0.3});
    c.grid[1].std_error = std::nan("");
    const AggregateCurve back = curve_from_table(parse_curve_csv(mc_curve_csv(c, {{"shift", 0.25}})));
    ASSERT_EQ(back.grid.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(back.grid[i].t, c.grid[i].t);
        EXPECT_EQ(back.grid[i].mean_sz0, c.grid[i].mean_sz0);
        EXPECT_EQ(back.grid[i].n_samples, 10);
    }
    EXPECT_TRUE(std::isnan(back.grid[1].std_error));
    EXPECT_EQ(back.shift, 0.25);
}

TEST(CurveCsv, RejectsRaggedAndHeaderless) {
    EXPECT_THROW(parse_curve_csv("t,mean_sz0\n1,2,3\n"), ConfigError);
    EXPECT_THROW(parse_curve_csv("# {}\n"), ConfigError);
    EXPECT_THROW(curve_from_table(parse_curve_csv("x,y\n1,2\n")), ConfigError);
}

TEST(Peaks, AbsCosine) {
    std::vector<double> t, y;
    for (int k = 0; k <= 100; ++k) {
        t.push_back(0.1 * k);
        y.push_back(std::cos(0.1 * k));
    }
    const auto peaks = extract_peaks(curve_of(t, y));
    ASSERT_EQ(peaks.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_NEAR(peaks[i].t, M_PI * static_cast<double>(i + 1), 0.05);
        EXPECT_NEAR(peaks[i].height, 1.0, 2e-3);
        EXPECT_EQ(peaks[i].std_error, 0.01);
    }
}

TEST(Peaks, MonotoneHasNone) {
    EXPECT_TRUE(extract_peaks(curve_of({0, 1, 2, 3}, {0.1, 0.2, 0.3, 0.4})).empty());
    EXPECT_TRUE(extract_peaks(curve_of({0, 1}, {0.1, 0.5})).empty());
    EXPECT_TRUE(extract_peaks(curve_of({0, 1, 2}, {0.2, 0.2, 0.2})).empty());
}

TEST(Peaks, HalfCosineOnCoarseGrid) {
    std::vector<double> t, y;
    for (int k = 6; k <= 30; ++k) {
        t.push_back(k / 3.0);
        y.push_back(0.5 * std::cos(k / 3.0));
    }
    const auto peaks = extract_peaks(curve_of(t, y));
    ASSERT_EQ(peaks.size(), 3u);
    EXPECT_DOUBLE_EQ(peaks[0].t, 3.0);
    EXPECT_DOUBLE_EQ(peaks[1].t, 19.0 / 3.0);
    EXPECT_DOUBLE_EQ(peaks[2].t, 28.0 / 3.0);
}

TEST(ShiftCorrection, ZeroOffsetIsNoOp) {
    const AggregateCurve ref = curve_of({2, 2.5, 3, 3.5}, {0.1, 0.2, 0.1, 0.0});
    const AggregateCurve out = shift_correction(ref, ref);
    EXPECT_EQ(out.shift, 0.0);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(out.grid[i].mean_sz0, ref.grid[i].mean_sz0);
}

TEST(ShiftCorrection, RemovesConstantOffset) {
    std::vector<double> t, y, y_off;
    for (int k = 0; k < 12; ++k) {
        t.push_back(2.0 + k / 3.0);
        y.push_back(0.5 * std::cos(k / 3.0));
        y_off.push_back(y.back() + 0.003);
    }
    AggregateCurve ref = curve_of(t, y);
    ref.grid.resize(4);
    const AggregateCurve out = shift_correction(curve_of(t, y_off), ref);
    EXPECT_NEAR(out.shift, -0.003, 1e-15);
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(out.grid[i].mean_sz0, y[i], 1e-15);
    const AggregateCurve twice = shift_correction(out, ref);
    EXPECT_NEAR(twice.shift, -0.003, 1e-15);
}

TEST(ShiftCorrection, RefusesEmptyOverlap) {
    const AggregateCurve mc = curve_of({2, 2.5, 3}, {0.1, 0.2, 0.1});
    const AggregateCurve ref = curve_of({0, 0.5, 1}, {0.1, 0.2, 0.1});
    EXPECT_THROW(shift_correction(mc, ref), ConfigError);
    EXPECT_THROW(shift_correction(mc, mc, 4), ConfigError);
}

TEST(Cli, EndToEndAndExitCodes) {
    const fs::path d = scratch_dir();
    const std::string ck = (d / "ck.bin").string();
    const std::string itebd_curve = (d / "itebd.csv").string();
    ASSERT_EQ(run_cli("itebd --t-end 1 --kmax 16 --out-checkpoint " + ck + " --out-curve " + itebd_curve), 0);
    EXPECT_TRUE(fs::exists(ck));

    const std::string a = (d / "a.csv").string(), b = (d / "b.csv").string(), recs = (d / "r.csv").string();
    const std::string common = "sample --checkpoint " + ck + " --l 2 --t-fin 3 --samples 40 --seed 3 ";
    ASSERT_EQ(run_cli(common + "--workers 1 --out " + a + " --records " + recs), 0);
    ASSERT_EQ(run_cli(common + "--workers 3 --out " + b), 0);
    EXPECT_EQ(read_file_bytes(a), read_file_bytes(b));
    const CurveTable t = parse_curve_csv(read_file_bytes(a));
    EXPECT_EQ(t.meta.at("checkpoint_hash"), git_blob_hash(read_file_bytes(ck)));
    EXPECT_EQ(t.rows.size(), 7u);
    EXPECT_TRUE(fs::exists(recs));

    EXPECT_EQ(run_cli("peaks --in " + a + " --reference " + itebd_curve + " --shift-correct --overlap 1 --out " +
                      (d / "p.csv").string()),
              0);
    EXPECT_EQ(run_cli("circuit-demo --n 6 --depth 4 --mode sum"), 0);

    EXPECT_EQ(run_cli(common + "--out " + a + " --delta 1.0"), 2);
    EXPECT_EQ(run_cli("sample --checkpoint " + (d / "missing.bin").string() + " --t-fin 2 --samples 2 --out -"), 4);
    EXPECT_EQ(run_cli("itebd --t-end 0.1 --out-checkpoint " + ck + " --out-curve -"), 2);
    EXPECT_EQ(run_cli("circuit-demo --n 5"), 2);
    EXPECT_EQ(run_cli("frobnicate"), 2);
    EXPECT_EQ(run_cli("peaks --in " + a + " --shift-correct"), 2);

    std::string bytes = read_file_bytes(ck);
    bytes[bytes.size() / 2] ^= 0x10;
    const std::string bad = (d / "bad.bin").string();
    write_text_file(bad, bytes);
    EXPECT_EQ(run_cli("sample --checkpoint " + bad + " --t-fin 2 --samples 2 --out -"), 4);
}

TEST(Cli, ExplicitFlagOverridesProfile) {
    const fs::path d = scratch_dir();
    const std::string ck = (d / "profile.bin").string();
    ASSERT_EQ(run_cli("itebd --t-end 0.25 --profile desk --kmax 3 --out-checkpoint " + ck + " --out-curve -"), 0);
    EXPECT_EQ(load_checkpoint(ck).second.k_max, 3);
    ASSERT_EQ(run_cli("itebd --t-end 0.25 --profile tiny --out-checkpoint " + ck + " --out-curve -"), 0);
    EXPECT_EQ(load_checkpoint(ck).second.k_max, 16);
}
