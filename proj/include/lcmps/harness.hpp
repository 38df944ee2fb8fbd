#pragma once
// Two-phase quench experiment: iTEBD up to t_init, then light-cone Monte Carlo
// from the saved state. Also curve post-processing (peaks, shift correction)
// and the CSV formats written by the command-line tool.
//
// Every CSV starts with one line "# {json metadata}", then a header row.

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cstdlib>
#include <exception>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "lcmps/checkpoint.hpp"
#include "lcmps/errors.hpp"
#include "lcmps/itebd.hpp"
#include "lcmps/rng.hpp"
#include "lcmps/sampler.hpp"
#include "lcmps/window.hpp"

namespace lcmps {

// Shortest round-trip decimal form; "nan" for NaN.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, x);
        if (std::strtod(buf, nullptr) == x) break;
    }
    return buf;
}

// Git blob id (SHA-1 of "blob <size>\0" + content), lowercase hex.
inline std::string git_blob_hash(const std::string& content) {
    const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr) throw std::runtime_error("git_blob_hash: EVP_MD_CTX_new failed");
    EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
    EVP_DigestUpdate(ctx, header.data(), header.size());
    EVP_DigestUpdate(ctx, content.data(), content.size());
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 15]);
    }
    return out;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << text;
    if (!f) throw IoError("write failed for " + path);
}

// ---------------------------------------------------------------------------
// Phase 1: iTEBD

struct ItebdRun {
    MPSState state;
    std::vector<StepRecord> curve;  // includes the initial row
};

inline ItebdRun run_itebd(const QuenchConfig& config, const MPSState& initial = neel_init()) {
    config.validate();
    ItebdRun run;
    run.curve.push_back(observe(initial));
    run.state = evolve_to(initial, config.t_init, config, [&](const StepRecord& r) { run.curve.push_back(r); });
    return run;
}

inline std::string itebd_curve_csv(const QuenchConfig& config, const std::vector<StepRecord>& curve) {
    nlohmann::json meta = {{"kind", "itebd"}, {"delta", config.delta}, {"dt", config.dt},
                           {"k_max", config.k_max}, {"t_end", config.t_init}};
    std::ostringstream os;
    os << "# " << meta.dump() << "\n";
    os << "t,sz0,sz1,discarded_weight,entropy_A,entropy_B\n";
    for (const auto& r : curve)
        os << format_double(r.time) << ',' << format_double(r.sz0) << ',' << format_double(r.sz1) << ','
           << format_double(r.discarded_step) << ',' << format_double(r.entropy_A) << ','
           << format_double(r.entropy_B) << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Phase 2: light-cone Monte Carlo

struct McParams {
    int l = 10;
    double t_fin = 0.0;
    double delta_t = 1.0 / 3.0;
    int n_max = 20;
    long n_samples = 1;
    std::uint64_t master_seed = 0;
    int n_workers = 1;
};

struct SampleRecord {
    long sample_id = 0;
    BondIndex alpha;
    BondIndex beta;
    std::vector<SzPoint> series;
    std::uint64_t worker_seed = 0;  // master seed of the stream family; stream id = sample_id
};

struct CurvePoint {
    double t = 0.0;
    double mean_sz0 = 0.0;
    double std_error = 0.0;
    long n_samples = 0;
};

struct AggregateCurve {
    std::vector<CurvePoint> grid;
    double shift = 0.0;  // constant added by shift_correction
};

// Running mean and variance (Welford), fed in sample-id order.
class StreamingAggregator {
  public:
    explicit StreamingAggregator(std::vector<double> times) : times_(std::move(times)),
        mean_(times_.size(), 0.0), m2_(times_.size(), 0.0) {}

    void add(const std::vector<SzPoint>& series) {
        if (series.size() != times_.size()) throw std::invalid_argument("StreamingAggregator: grid size mismatch");
        ++n_;
        for (std::size_t i = 0; i < series.size(); ++i) {
            const double x = series[i].sz0;
            const double d = x - mean_[i];
            mean_[i] += d / static_cast<double>(n_);
            m2_[i] += d * (x - mean_[i]);
        }
    }

    AggregateCurve curve() const {
        AggregateCurve c;
        for (std::size_t i = 0; i < times_.size(); ++i) {
            CurvePoint p{times_[i], mean_[i], std::numeric_limits<double>::quiet_NaN(), n_};
            if (n_ > 1) p.std_error = std::sqrt(m2_[i] / static_cast<double>(n_ - 1) / static_cast<double>(n_));
            c.grid.push_back(p);
        }
        return c;
    }

  private:
    std::vector<double> times_;
    std::vector<double> mean_, m2_;
    long n_ = 0;
};

// Two-pass recomputation from raw records.
inline AggregateCurve aggregate_records(const std::vector<SampleRecord>& records) {
    AggregateCurve c;
    if (records.empty()) return c;
    const std::size_t ng = records.front().series.size();
    const auto n = static_cast<long>(records.size());
    for (std::size_t i = 0; i < ng; ++i) {
        double s = 0.0;
        for (const auto& r : records) s += r.series[i].sz0;
        const double mean = s / static_cast<double>(n);
        double ss = 0.0;
        for (const auto& r : records) ss += (r.series[i].sz0 - mean) * (r.series[i].sz0 - mean);
        CurvePoint p{records.front().series[i].t, mean, std::numeric_limits<double>::quiet_NaN(), n};
        if (n > 1) p.std_error = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
        c.grid.push_back(p);
    }
    return c;
}

// Basis lists of every particle-number sector of a window, built once.
class WindowSectors {
  public:
    explicit WindowSectors(int l) : l_(l), rows_(static_cast<std::size_t>(2 * l + 2)) {
        const std::uint32_t dim = std::uint32_t{1} << (2 * l + 1);
        for (std::uint32_t c = 0; c < dim; ++c) rows_[static_cast<std::size_t>(std::popcount(c))].push_back(c);
    }
    const std::vector<std::uint32_t>& rows_for(const WindowState& psi) const {
        const int n_up = neel_window_ups(l_) + psi.total_sz_sector;
        if (n_up < 0 || n_up > 2 * l_ + 1) throw NumericalError("window state has an impossible Sz sector");
        return rows_[static_cast<std::size_t>(n_up)];
    }

  private:
    int l_;
    std::vector<std::vector<std::uint32_t>> rows_;
};

// One Monte Carlo sample: draw (alpha, beta), build the window state, evolve it.
inline SampleRecord run_sample(const MPSState& state, const SparseWindowHamiltonian& h, const WindowSectors& sectors,
                               const McParams& p, const EvolverParams& ev, long sample_id) {
    RandomStream rng(p.master_seed, static_cast<std::uint64_t>(sample_id));
    const WindowSpec spec{p.l, state.time, p.master_seed};
    const BondIndex alpha = sample_alpha(state, spec, rng);
    const BoundarySample bs = sample_spins_and_beta(state, spec, alpha, rng);
    WindowState psi = assemble_window_state(state, spec, bs);
    const auto& rows = sectors.rows_for(psi);

    SampleRecord rec;
    rec.sample_id = sample_id;
    rec.alpha = bs.alpha;
    rec.beta = bs.beta;
    rec.worker_seed = p.master_seed;
    const long n = ev.steps();
    rec.series.reserve(static_cast<std::size_t>(n + 1));
    rec.series.push_back({ev.time_at(0), expect_sz_center(psi)});
    for (long k = 1; k <= n; ++k) {
        taylor_step(psi.amplitudes, h, rows, ev.delta_t, ev.n_max);
        rec.series.push_back({ev.time_at(k), expect_sz_center(psi)});
    }
    return rec;
}

struct McResult {
    AggregateCurve curve;
    std::vector<SampleRecord> records;  // ordered by sample_id
};

// Samples are assigned to workers in contiguous blocks and reduced in
// sample-id order, so the result does not depend on n_workers.
inline McResult run_mc(const MPSState& state, double delta, const McParams& p) {
    if (p.n_samples < 1) throw ConfigError("run_mc: n_samples must be >= 1");
    if (p.n_workers < 1) throw ConfigError("run_mc: n_workers must be >= 1");
    WindowSpec{p.l, state.time, p.master_seed}.validate();
    if (!(p.t_fin > state.time)) throw ConfigError("run_mc: t_fin must exceed the checkpoint time");
    const EvolverParams ev{p.delta_t, p.n_max, state.time, p.t_fin};
    ev.steps();

    const SparseWindowHamiltonian h(p.l, delta);
    const WindowSectors sectors(p.l);
    McResult res;
    res.records.resize(static_cast<std::size_t>(p.n_samples));

    const long workers = std::min<long>(p.n_workers, p.n_samples);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    auto work = [&](long w) {
        const long begin = w * p.n_samples / workers;
        const long end = (w + 1) * p.n_samples / workers;
        try {
            for (long k = begin; k < end; ++k)
                res.records[static_cast<std::size_t>(k)] = run_sample(state, h, sectors, p, ev, k);
        } catch (...) {
            errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (long w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::vector<double> times;
    for (const auto& pt : res.records.front().series) times.push_back(pt.t);
    StreamingAggregator agg(times);
    for (const auto& r : res.records) agg.add(r.series);
    res.curve = agg.curve();
    return res;
}

inline std::string mc_curve_csv(const AggregateCurve& curve, const nlohmann::json& meta) {
    std::ostringstream os;
    os << "# " << meta.dump() << "\n";
    os << "t,mean_sz0,stderr,n_samples\n";
    for (const auto& p : curve.grid)
        os << format_double(p.t) << ',' << format_double(p.mean_sz0) << ',' << format_double(p.std_error) << ','
           << p.n_samples << '\n';
    return os.str();
}

inline std::string sample_records_csv(const std::vector<SampleRecord>& records) {
    std::ostringstream os;
    os << "sample_id,alpha_q,alpha_index,beta_q,beta_index,worker_seed,t,sz0\n";
    for (const auto& r : records)
        for (const auto& p : r.series)
            os << r.sample_id << ',' << r.alpha.q << ',' << r.alpha.index << ',' << r.beta.q << ','
               << r.beta.index << ',' << r.worker_seed << ',' << format_double(p.t) << ','
               << format_double(p.sz0) << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Curve files and post-processing

struct CurveTable {
    nlohmann::json meta;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        throw ConfigError("curve file has no column '" + name + "'");
    }
    bool has_column(const std::string& name) const {
        return std::find(columns.begin(), columns.end(), name) != columns.end();
    }
};

inline CurveTable parse_curve_csv(const std::string& text) {
    CurveTable t;
    std::istringstream is(text);
    std::string line;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            try {
                t.meta = nlohmann::json::parse(line.substr(1));
            } catch (const nlohmann::json::exception&) {
                t.meta = nlohmann::json::object();
            }
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!header) {
            t.columns = cells;
            header = true;
            continue;
        }
        if (cells.size() != t.columns.size()) throw ConfigError("curve file: ragged row");
        std::vector<double> row;
        for (const auto& c : cells) row.push_back(c == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(c));
        t.rows.push_back(std::move(row));
    }
    if (!header) throw ConfigError("curve file: missing header row");
    return t;
}

// Reads an aggregate curve ("mean_sz0") or an iTEBD curve ("sz0", stderr 0).
inline AggregateCurve curve_from_table(const CurveTable& t) {
    AggregateCurve c;
    const std::size_t it = t.column("t");
    const bool mc = t.has_column("mean_sz0");
    const std::size_t iv = mc ? t.column("mean_sz0") : t.column("sz0");
    for (const auto& r : t.rows) {
        CurvePoint p{r[it], r[iv], 0.0, 0};
        if (mc) {
            p.std_error = r[t.column("stderr")];
            p.n_samples = static_cast<long>(r[t.column("n_samples")]);
        }
        c.grid.push_back(p);
    }
    if (t.meta.contains("shift")) c.shift = t.meta["shift"].get<double>();
    return c;
}

struct Peak {
    double t = 0.0;
    double height = 0.0;
    double std_error = 0.0;
};

// Strict interior local maxima of |mean_sz0|.
inline std::vector<Peak> extract_peaks(const AggregateCurve& curve) {
    std::vector<Peak> out;
    const auto& g = curve.grid;
    for (std::size_t i = 1; i + 1 < g.size(); ++i) {
        const double a = std::abs(g[i - 1].mean_sz0);
        const double b = std::abs(g[i].mean_sz0);
        const double c = std::abs(g[i + 1].mean_sz0);
        if (b > a && b > c) out.push_back({g[i].t, b, g[i].std_error});
    }
    return out;
}

// Adds c = mean over the overlap window of (reference - mc) to every mean.
// The overlap window is the first `overlap_points` grid points (default: the
// first quarter of the grid, at least 3); each needs a reference value at the
// same time.
inline AggregateCurve shift_correction(const AggregateCurve& mc, const AggregateCurve& reference,
                                       std::size_t overlap_points = 0) {
    if (overlap_points == 0) overlap_points = std::max<std::size_t>(3, mc.grid.size() / 4);
    if (overlap_points > mc.grid.size()) throw ConfigError("shift_correction: overlap window longer than the curve");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < overlap_points; ++i) {
        const double t = mc.grid[i].t;
        auto it = std::find_if(reference.grid.begin(), reference.grid.end(),
                               [t](const CurvePoint& p) { return std::abs(p.t - t) < 1e-9; });
        if (it == reference.grid.end()) continue;
        sum += it->mean_sz0 - mc.grid[i].mean_sz0;
        ++n;
    }
    if (n == 0) throw ConfigError("shift_correction: reference and curve share no grid points in the overlap window");
    const double c = sum / static_cast<double>(n);
    AggregateCurve out = mc;
    for (auto& p : out.grid) p.mean_sz0 += c;
    out.shift = mc.shift + c;
    return out;
}

inline std::string peaks_csv(const std::vector<Peak>& peaks, const nlohmann::json& meta) {
    std::ostringstream os;
    os << "# " << meta.dump() << "\n";
    os << "t_peak,height,stderr\n";
    for (const auto& p : peaks)
        os << format_double(p.t) << ',' << format_double(p.height) << ',' << format_double(p.std_error) << '\n';
    return os.str();
}

} // namespace lcmps
