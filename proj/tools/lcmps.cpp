// Command-line driver: iTEBD phase, light-cone Monte Carlo phase, curve
// post-processing and the circuit verification demo.

#include <cstdio>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "lcmps/checkpoint.hpp"
#include "lcmps/circuit.hpp"
#include "lcmps/errors.hpp"
#include "lcmps/harness.hpp"

namespace {

using namespace lcmps;

struct Profile {
    Index k_max;
    int l;
};

// Named parameter presets. "full" is the full-size run, far beyond desk scale.
const std::map<std::string, Profile>& profiles() {
    static const std::map<std::string, Profile> p{
        {"tiny", {16, 2}}, {"desk", {128, 4}}, {"desk-large", {256, 6}}, {"full", {4096, 10}}};
    return p;
}

struct ItebdArgs {
    QuenchConfig config;
    double t_end = 0.0;
    std::string out_checkpoint, out_curve, profile;
    bool kmax_given = false;
};

struct SampleArgs {
    std::string checkpoint, out, records, profile;
    bool l_given = false;
    McParams mc;
    double delta = std::numeric_limits<double>::quiet_NaN();
};

struct PeaksArgs {
    std::string in, reference, out;
    bool shift = false;
    std::size_t overlap = 0;
};

struct CircuitArgs {
    int n = 8;
    int depth = 4;
    std::uint64_t seed = 1;
    std::string mode = "direct";
    long samples = 1000;
};

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-")
        std::cout << text;
    else
        write_text_file(path, text);
}

int run_itebd_cmd(ItebdArgs a) {
    if (!a.profile.empty() && !a.kmax_given) a.config.k_max = profiles().at(a.profile).k_max;
    a.config.t_init = a.t_end;
    const ItebdRun run = run_itebd(a.config);
    save_checkpoint(run.state, a.config, a.out_checkpoint);
    emit(a.out_curve, itebd_curve_csv(a.config, run.curve));
    const auto& last = run.curve.back();
    std::fprintf(stderr, "t=%g sz0=%.10f cumulative discarded=%.3e bond dims A=%lld B=%lld\n", last.time, last.sz0,
                 last.discarded_cumulative, static_cast<long long>(run.state.lambda_A.size()),
                 static_cast<long long>(run.state.lambda_B.size()));
    if (last.discard_warning) std::fprintf(stderr, "warning: cumulative discarded weight exceeds %g\n", a.config.discard_warn);
    return 0;
}

int run_sample_cmd(SampleArgs a) {
    if (!a.profile.empty() && !a.l_given) a.mc.l = profiles().at(a.profile).l;
    const std::string bytes = read_file_bytes(a.checkpoint);
    const auto [state, config] = deserialize_checkpoint(bytes);
    if (!std::isnan(a.delta) && a.delta != config.delta)
        throw ConfigError("checkpoint was evolved with delta=" + format_double(config.delta) +
                          ", requested delta=" + format_double(a.delta));
    const McResult res = run_mc(state, config.delta, a.mc);
    nlohmann::json meta = {{"kind", "mc"},
                           {"delta", config.delta},
                           {"dt", config.dt},
                           {"k_max", config.k_max},
                           {"t_init", state.time},
                           {"l", a.mc.l},
                           {"t_fin", a.mc.t_fin},
                           {"delta_t", a.mc.delta_t},
                           {"n_max", a.mc.n_max},
                           {"n_samples", a.mc.n_samples},
                           {"seed", a.mc.master_seed},
                           {"checkpoint_hash", git_blob_hash(bytes)},
                           {"shift", 0.0},
                           {"stderr_defined", a.mc.n_samples > 1}};
    emit(a.out, mc_curve_csv(res.curve, meta));
    if (!a.records.empty()) write_text_file(a.records, sample_records_csv(res.records));
    return 0;
}

int run_peaks_cmd(const PeaksArgs& a) {
    const CurveTable table = parse_curve_csv(read_file_bytes(a.in));
    AggregateCurve curve = curve_from_table(table);
    nlohmann::json meta = table.meta.is_object() ? table.meta : nlohmann::json::object();
    if (a.shift) {
        if (a.reference.empty()) throw ConfigError("--shift-correct requires --reference");
        const AggregateCurve ref = curve_from_table(parse_curve_csv(read_file_bytes(a.reference)));
        curve = shift_correction(curve, ref, a.overlap);
        meta["shift"] = curve.shift;
    }
    if (curve.grid.size() < 3) throw ConfigError("peaks: curve needs at least 3 grid points");
    meta["kind"] = "peaks";
    emit(a.out, peaks_csv(extract_peaks(curve), meta));
    return 0;
}

int run_circuit_cmd(const CircuitArgs& a) {
    validate_circuit_size(a.n, kMaxCircuitQubits);
    const BrickworkCircuit circ = random_brickwork(a.n, a.depth, a.seed);
    const auto init = circuit_neel_state(a.n);
    if (a.mode == "direct") {
        std::printf("direct %.17g\n", direct_expectation(circ, init));
    } else if (a.mode == "sum") {
        const ExhaustiveResult r = lightcone_expectation_sum(circ, init);
        std::printf("sum %.17g total_weight %.17g\n", r.value, r.total_weight);
    } else {
        const SampledEstimate e = lightcone_expectation_sampled(circ, init, a.samples, a.seed);
        std::printf("sample %.17g stderr %s n %ld\n", e.mean, format_double(e.std_error).c_str(), e.n_samples);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Light-cone Monte Carlo for infinite matrix product states"};
    app.require_subcommand(1);

    std::vector<std::string> profile_names;
    for (const auto& [k, v] : profiles()) profile_names.push_back(k);

    ItebdArgs ia;
    auto* itebd = app.add_subcommand("itebd", "evolve the Neel state with iTEBD and write a checkpoint");
    itebd->add_option("--delta", ia.config.delta, "anisotropy")->capture_default_str();
    itebd->add_option("--dt", ia.config.dt, "Trotter step")->capture_default_str();
    auto* kmax_opt = itebd->add_option("--kmax", ia.config.k_max, "maximum bond dimension")->capture_default_str();
    itebd->add_option("--t-end", ia.t_end, "final time (multiple of dt)")->required();
    itebd->add_option("--out-checkpoint", ia.out_checkpoint)->required();
    itebd->add_option("--out-curve", ia.out_curve, "curve CSV ('-' for stdout)")->required();
    itebd->add_option("--profile", ia.profile, "preset for kmax")->check(CLI::IsMember(profile_names));

    SampleArgs sa;
    auto* sample = app.add_subcommand("sample", "light-cone Monte Carlo from a checkpoint");
    sample->add_option("--checkpoint", sa.checkpoint)->required();
    auto* l_opt = sample->add_option("--l", sa.mc.l, "window half-width")->capture_default_str();
    sample->add_option("--t-fin", sa.mc.t_fin)->required();
    sample->add_option("--delta-t", sa.mc.delta_t, "coarse time step")->capture_default_str();
    sample->add_option("--nmax", sa.mc.n_max, "Taylor order")->capture_default_str();
    sample->add_option("--samples", sa.mc.n_samples)->required();
    sample->add_option("--seed", sa.mc.master_seed)->capture_default_str();
    sample->add_option("--workers", sa.mc.n_workers)->capture_default_str();
    sample->add_option("--out", sa.out, "curve CSV ('-' for stdout)")->required();
    sample->add_option("--records", sa.records, "also write per-sample records");
    sample->add_option("--delta", sa.delta, "expected anisotropy; refuse if the checkpoint differs");
    sample->add_option("--profile", sa.profile, "preset for l")->check(CLI::IsMember(profile_names));

    PeaksArgs pa;
    auto* peaks = app.add_subcommand("peaks", "peak heights of a curve, optionally shift-corrected");
    peaks->add_option("--in", pa.in)->required();
    peaks->add_option("--reference", pa.reference, "trusted curve for the shift correction");
    peaks->add_flag("--shift-correct", pa.shift);
    peaks->add_option("--overlap", pa.overlap, "number of leading grid points in the overlap window");
    peaks->add_option("--out", pa.out, "peaks CSV (default stdout)");

    CircuitArgs ca;
    auto* circuit = app.add_subcommand("circuit-demo", "light-cone identity on a random brickwork circuit");
    circuit->add_option("--n", ca.n)->capture_default_str();
    circuit->add_option("--depth", ca.depth)->capture_default_str();
    circuit->add_option("--seed", ca.seed)->capture_default_str();
    circuit->add_option("--mode", ca.mode)->check(CLI::IsMember({"direct", "sum", "sample"}))->capture_default_str();
    circuit->add_option("--samples", ca.samples)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ExitCode::config);
    }

    ia.kmax_given = kmax_opt->count() > 0;
    sa.l_given = l_opt->count() > 0;
    try {
        if (*itebd) return run_itebd_cmd(ia);
        if (*sample) return run_sample_cmd(sa);
        if (*peaks) return run_peaks_cmd(pa);
        if (*circuit) return run_circuit_cmd(ca);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return static_cast<int>(ExitCode::config);
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return static_cast<int>(ExitCode::numerical);
    } catch (const IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return static_cast<int>(ExitCode::io);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return static_cast<int>(ExitCode::config);
    }
    return 0;
}
