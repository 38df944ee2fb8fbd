#pragma once
// Exact evolution of a (2l+1)-site window under the open-boundary XXZ
// Hamiltonian, and a brute-force state-vector reference evolver.
//
// Basis convention: site -l is the most significant bit, spin up is bit 1.

#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "lcmps/errors.hpp"
#include "lcmps/graded.hpp"

namespace lcmps {

inline constexpr int kMaxHalfWidth = 14;

// v_sw = (pi/2) sin(theta)/theta with cos(theta) = delta, for |delta| < 1.
inline double spin_wave_velocity(double delta) {
    if (!(delta > -1.0 && delta < 1.0)) throw ConfigError("spin_wave_velocity: need |delta| < 1");
    const double theta = std::acos(delta);
    return std::numbers::pi / 2.0 * std::sin(theta) / theta;
}

struct WindowState {
    int l = 0;
    std::vector<Complex> amplitudes;  // length 2^(2l+1)
    // Up spins in the window minus up spins of the Neel pattern on the window.
    int total_sz_sector = 0;

    int sites() const { return 2 * l + 1; }
};

// Number of up spins of the Neel pattern (site 0 up) on sites -l..l.
inline int neel_window_ups(int l) {
    int n = 0;
    for (int i = -l; i <= l; ++i) n += (i % 2 == 0) ? 1 : 0;
    return n;
}

inline std::uint64_t neel_window_config(int l) {
    std::uint64_t c = 0;
    const int n = 2 * l + 1;
    for (int j = 0; j < n; ++j) {
        const int site = j - l;
        if (site % 2 == 0) c |= std::uint64_t{1} << (n - 1 - j);
    }
    return c;
}

// Sum over configurations of |amp|^2 times +-1/2 for the given bit.
inline double expect_sz_bit(const std::vector<Complex>& amps, int bit) {
    double s = 0.0;
    const std::uint64_t mask = std::uint64_t{1} << bit;
    for (std::size_t c = 0; c < amps.size(); ++c)
        s += std::norm(amps[c]) * ((c & mask) ? 0.5 : -0.5);
    return s;
}

inline double expect_sz_center(const WindowState& psi) { return expect_sz_bit(psi.amplitudes, psi.l); }

// Open-boundary XXZ on 2l+1 sites stored as packed rows of (column, value).
class SparseWindowHamiltonian {
  public:
    struct Entry {
        std::uint32_t col;
        double value;
    };

    SparseWindowHamiltonian(int l, double delta, bool hopping = true) : l_(l), delta_(delta) {
        if (l < 1 || l > kMaxHalfWidth) throw ConfigError("build_hloc: need 1 <= l <= 14");
        const int n = 2 * l + 1;
        const std::size_t dim = std::size_t{1} << n;
        row_start_.reserve(dim + 1);
        entries_.reserve(dim * static_cast<std::size_t>(n));
        row_start_.push_back(0);
        for (std::size_t c = 0; c < dim; ++c) {
            double diag = 0.0;
            const std::size_t first = entries_.size();
            entries_.push_back({static_cast<std::uint32_t>(c), 0.0});
            for (int b = 0; b + 1 < n; ++b) {
                const bool x = (c >> b) & 1u;
                const bool y = (c >> (b + 1)) & 1u;
                diag += (x == y) ? delta / 4.0 : -delta / 4.0;
                if (hopping && x != y) {
                    const std::size_t flipped = c ^ (std::size_t{3} << b);
                    entries_.push_back({static_cast<std::uint32_t>(flipped), 0.5});
                }
            }
            entries_[first].value = diag;
            row_start_.push_back(entries_.size());
        }
    }

    int l() const { return l_; }
    double delta() const { return delta_; }
    std::size_t dimension() const { return row_start_.size() - 1; }
    std::size_t row_nonzeros(std::size_t row) const { return row_start_[row + 1] - row_start_[row]; }

    const Entry* row_begin(std::size_t row) const { return entries_.data() + row_start_[row]; }
    const Entry* row_end(std::size_t row) const { return entries_.data() + row_start_[row + 1]; }

    // out[r] = sum_c H[r, c] in[c] for the rows listed in `rows` only.
    void apply(const std::vector<std::uint32_t>& rows, const std::vector<Complex>& in,
               std::vector<Complex>& out) const {
        for (std::uint32_t r : rows) {
            Complex acc(0.0, 0.0);
            for (const Entry* e = row_begin(r); e != row_end(r); ++e) acc += e->value * in[e->col];
            out[r] = acc;
        }
    }

    Matrix dense() const {
        const auto n = static_cast<Index>(dimension());
        Matrix h = Matrix::Zero(n, n);
        for (std::size_t r = 0; r < dimension(); ++r)
            for (const Entry* e = row_begin(r); e != row_end(r); ++e)
                h(static_cast<Index>(r), static_cast<Index>(e->col)) += e->value;
        return h;
    }

  private:
    int l_;
    double delta_;
    std::vector<std::size_t> row_start_;
    std::vector<Entry> entries_;
};

inline SparseWindowHamiltonian build_hloc(int l, double delta) { return SparseWindowHamiltonian(l, delta); }

// Basis states of a window with a fixed number of up spins.
inline std::vector<std::uint32_t> sector_basis(int l, int n_up) {
    std::vector<std::uint32_t> rows;
    const std::uint32_t dim = std::uint32_t{1} << (2 * l + 1);
    for (std::uint32_t c = 0; c < dim; ++c)
        if (std::popcount(c) == n_up) rows.push_back(c);
    return rows;
}

struct TaylorResult {
    double norm_drift = 0.0;
};

// psi <- sum_{n=0}^{n_max} (-i dt)^n H^n psi / n!, then renormalized.
// `rows` must list the basis states of the sector psi lives in.
inline TaylorResult taylor_step(std::vector<Complex>& psi, const SparseWindowHamiltonian& h,
                                const std::vector<std::uint32_t>& rows, double delta_t, int n_max,
                                double max_drift = 1e-9) {
    std::vector<Complex> term = psi;
    std::vector<Complex> next(psi.size(), Complex(0.0, 0.0));
    std::vector<Complex> acc = psi;
    const Complex minus_i_dt(0.0, -delta_t);
    for (int n = 1; n <= n_max; ++n) {
        h.apply(rows, term, next);
        const Complex f = minus_i_dt / static_cast<double>(n);
        for (std::uint32_t r : rows) {
            term[r] = f * next[r];
            acc[r] += term[r];
        }
    }
    double nrm2 = 0.0;
    for (std::uint32_t r : rows) nrm2 += std::norm(acc[r]);
    const double nrm = std::sqrt(nrm2);
    TaylorResult res{std::abs(1.0 - nrm)};
    if (!(res.norm_drift < max_drift))
        throw NumericalError("taylor_step: norm drift " + std::to_string(res.norm_drift) +
                             " exceeds tolerance; increase n_max or reduce delta_t");
    for (std::uint32_t r : rows) psi[r] = acc[r] / nrm;
    return res;
}

inline TaylorResult taylor_step(WindowState& psi, const SparseWindowHamiltonian& h, double delta_t, int n_max) {
    if (psi.l != h.l()) throw ConfigError("taylor_step: window size does not match Hamiltonian");
    const auto rows = sector_basis(psi.l, neel_window_ups(psi.l) + psi.total_sz_sector);
    return taylor_step(psi.amplitudes, h, rows, delta_t, n_max);
}

struct EvolverParams {
    double delta_t = 1.0 / 3.0;
    int n_max = 20;
    double t_init = 0.0;
    double t_fin = 0.0;

    long steps() const {
        if (!(delta_t > 0.0)) throw ConfigError("delta_t must be positive");
        if (n_max < 4) throw ConfigError("n_max must be >= 4");
        const double s = (t_fin - t_init) / delta_t;
        const long n = std::lround(s);
        if (n < 0 || std::abs(s - static_cast<double>(n)) > 1e-9)
            throw ConfigError("(t_fin - t_init) must be a non-negative integer multiple of delta_t");
        return n;
    }
    double time_at(long k) const { return t_init + static_cast<double>(k) * delta_t; }
};

struct SzPoint {
    double t;
    double sz0;
};

// <Sz_0> at t_init and after every coarse step up to t_fin.
inline std::vector<SzPoint> evolve_and_measure(WindowState psi, const SparseWindowHamiltonian& h,
                                               const EvolverParams& params) {
    const long n = params.steps();
    if (psi.l != h.l()) throw ConfigError("evolve_and_measure: window size does not match Hamiltonian");
    const auto rows = sector_basis(psi.l, neel_window_ups(psi.l) + psi.total_sz_sector);
    std::vector<SzPoint> out;
    out.reserve(static_cast<std::size_t>(n + 1));
    out.push_back({params.time_at(0), expect_sz_center(psi)});
    for (long k = 1; k <= n; ++k) {
        taylor_step(psi.amplitudes, h, rows, params.delta_t, params.n_max);
        out.push_back({params.time_at(k), expect_sz_center(psi)});
    }
    return out;
}

inline constexpr int kMaxReferenceSites = 20;

struct ReferencePoint {
    double t;
    std::vector<double> sz;  // per site, site 0 first
};

// Brute-force open-chain evolution on L <= 20 sites. The Hamiltonian is applied
// on the fly by bit manipulation (no stored matrix) with fine Taylor substeps
// summed until the terms fall below machine precision. `up[i]` gives the
// initial spin of chain site i; t_grid must be non-decreasing and start >= 0.
inline std::vector<ReferencePoint> dense_reference_evolve(const std::vector<bool>& up, double delta,
                                                          const std::vector<double>& t_grid,
                                                          double max_substep = 0.05) {
    const int L = static_cast<int>(up.size());
    if (L < 2 || L > kMaxReferenceSites) throw ConfigError("dense_reference_evolve: need 2 <= L <= 20");
    const std::size_t dim = std::size_t{1} << L;
    auto bit_of_site = [L](int i) { return L - 1 - i; };
    std::size_t init = 0;
    for (int i = 0; i < L; ++i)
        if (up[static_cast<std::size_t>(i)]) init |= std::size_t{1} << bit_of_site(i);

    std::vector<Complex> psi(dim, Complex(0.0, 0.0));
    psi[init] = 1.0;

    auto apply_h = [&](const std::vector<Complex>& in, std::vector<Complex>& out) {
        std::fill(out.begin(), out.end(), Complex(0.0, 0.0));
        for (std::size_t c = 0; c < dim; ++c) {
            const Complex a = in[c];
            if (a == Complex(0.0, 0.0)) continue;
            double diag = 0.0;
            for (int b = 0; b + 1 < L; ++b) {
                const bool x = (c >> b) & 1u;
                const bool y = (c >> (b + 1)) & 1u;
                if (x == y) {
                    diag += delta / 4.0;
                } else {
                    diag -= delta / 4.0;
                    out[c ^ (std::size_t{3} << b)] += 0.5 * a;
                }
            }
            out[c] += diag * a;
        }
    };

    auto measure = [&](double t) {
        ReferencePoint p{t, std::vector<double>(static_cast<std::size_t>(L), 0.0)};
        for (int i = 0; i < L; ++i) p.sz[static_cast<std::size_t>(i)] = expect_sz_bit(psi, bit_of_site(i));
        return p;
    };

    std::vector<Complex> term(dim), next(dim), acc(dim);
    auto advance = [&](double h) {
        term = psi;
        acc = psi;
        const Complex f0(0.0, -h);
        for (int n = 1; n < 200; ++n) {
            apply_h(term, next);
            const Complex f = f0 / static_cast<double>(n);
            double tn = 0.0;
            for (std::size_t c = 0; c < dim; ++c) {
                term[c] = f * next[c];
                acc[c] += term[c];
                tn += std::norm(term[c]);
            }
            if (tn < 1e-34) break;
        }
        psi.swap(acc);
    };

    std::vector<ReferencePoint> out;
    double t = 0.0;
    for (double target : t_grid) {
        if (target < t - 1e-12) throw ConfigError("dense_reference_evolve: t_grid must be non-decreasing");
        const double span = target - t;
        const long n = static_cast<long>(std::ceil(span / max_substep - 1e-9));
        for (long k = 0; k < n; ++k) advance(span / static_cast<double>(n));
        t = target;
        out.push_back(measure(t));
    }
    return out;
}

} // namespace lcmps
