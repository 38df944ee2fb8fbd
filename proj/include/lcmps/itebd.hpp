#pragma once
// Infinite-chain MPS with a period-2 unit cell, evolved by the division-free
// iTEBD update.
//
// The state stores right-normalized site matrices A(s) = Gamma(s) lambda_right
// for the two sublattices together with the Schmidt spectra of both bonds.
// Gamma is never formed. A bond update computes
//
//   C(sA, sB)  = sum_{sA', sB'} U[sA sB; sA' sB'] A_L(sA') A_R(sB')
//   Theta      = lambda_left * C
//   Theta      = X diag(lambda_mid) Y              (bipartition (alpha sA | sB gamma))
//   A_R(sB)    = Y[:, sB gamma]
//   A_L(sA)    = sum_{sB gamma} C(sA, sB) Y^*[:, sB gamma]
//
// so no Schmidt value is ever inverted.
//
// Site 0 is an A-site and carries spin up in the Neel reference state. Bond
// charges count spin flips to the left of the bond relative to that reference.

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>

#include "lcmps/errors.hpp"
#include "lcmps/graded.hpp"

namespace lcmps {

// Physical spin index; also the row/column order of two-site gates.
enum class Spin : int { up = 0, down = 1 };
enum class Sublattice { A, B };
enum class BondPair { AB, BA };

constexpr std::array<Spin, 2> kSpins{Spin::up, Spin::down};

inline int spin_index(Spin s) { return static_cast<int>(s); }
inline double sz_value(Spin s) { return s == Spin::up ? 0.5 : -0.5; }

inline Sublattice sublattice_of(long site) { return (site % 2 == 0) ? Sublattice::A : Sublattice::B; }

// Charge carried across a site: +1 for an up spin on a site that is down in the
// Neel reference, -1 for a down spin on a reference-up site, otherwise 0.
inline int site_shift(Sublattice sl, Spin s) {
    const int up = (s == Spin::up) ? 1 : 0;
    const int ref_up = (sl == Sublattice::A) ? 1 : 0;
    return up - ref_up;
}

struct QuenchConfig {
    double delta = 0.5;
    double dt = 0.0625;
    Index k_max = 64;
    double t_init = 0.0;
    // Cumulative discarded weight above which observer records carry a warning.
    double discard_warn = 1e-3;

    void validate() const {
        if (!std::isfinite(delta)) throw ConfigError("delta must be finite");
        if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
        if (k_max < 2) throw ConfigError("k_max must be >= 2");
        if (!(t_init >= 0.0)) throw ConfigError("t_init must be >= 0");
        const double n = t_init / dt;
        if (std::abs(n - std::round(n)) > 1e-9)
            throw ConfigError("t_init must be an integer multiple of dt");
    }
};

struct TwoSiteGate {
    // u(2*sA + sB, 2*sA' + sB'), basis {up-up, up-down, down-up, down-down}.
    Eigen::Matrix4cd u;
    double step = 0.0;
};

// exp(-i step h) for h = SxSx + SySy + delta SzSz, in closed form per Sz block.
inline TwoSiteGate build_gate(double delta, double step) {
    TwoSiteGate g;
    g.step = step;
    g.u.setZero();
    const Complex i(0.0, 1.0);
    const Complex corner = std::exp(-i * (delta * step / 4.0));
    const Complex mid = std::exp(i * (delta * step / 4.0));
    const double c = std::cos(step / 2.0);
    const double s = std::sin(step / 2.0);
    g.u(0, 0) = corner;
    g.u(3, 3) = corner;
    g.u(1, 1) = mid * c;
    g.u(2, 2) = mid * c;
    g.u(1, 2) = mid * Complex(0.0, -s);
    g.u(2, 1) = mid * Complex(0.0, -s);
    return g;
}

struct SiteTensor {
    std::array<GradedMatrix, 2> a;  // indexed by spin_index

    const GradedMatrix& operator[](Spin s) const { return a[static_cast<std::size_t>(spin_index(s))]; }
    GradedMatrix& operator[](Spin s) { return a[static_cast<std::size_t>(spin_index(s))]; }
};

struct MPSState {
    SiteTensor A_A;  // left bond: B-bond, right bond: A-bond
    SiteTensor A_B;  // left bond: A-bond, right bond: B-bond
    SchmidtSpectrum lambda_A;  // bond right of A-sites
    SchmidtSpectrum lambda_B;  // bond right of B-sites
    double time = 0.0;

    const SiteTensor& site(Sublattice sl) const { return sl == Sublattice::A ? A_A : A_B; }
    // Spectrum on the bond to the right of a site of the given sublattice.
    const SchmidtSpectrum& lambda_right(Sublattice sl) const {
        return sl == Sublattice::A ? lambda_A : lambda_B;
    }
    const SchmidtSpectrum& lambda_left(Sublattice sl) const {
        return sl == Sublattice::A ? lambda_B : lambda_A;
    }
    // Largest bond dimension over the two bonds.
    Index bond_dim() const { return std::max(lambda_A.size(), lambda_B.size()); }
};

inline MPSState neel_init() {
    MPSState st;
    const SectorDims one{{0, 1}};
    for (Spin s : kSpins) {
        st.A_A[s] = GradedMatrix(one, one, site_shift(Sublattice::A, s));
        st.A_B[s] = GradedMatrix(one, one, site_shift(Sublattice::B, s));
    }
    st.A_A[Spin::up].set_block(0, Matrix::Ones(1, 1));
    st.A_B[Spin::down].set_block(0, Matrix::Ones(1, 1));
    st.lambda_A = SchmidtSpectrum({{0, RealVector::Ones(1)}});
    st.lambda_B = SchmidtSpectrum({{0, RealVector::Ones(1)}});
    st.time = 0.0;
    return st;
}

namespace detail {

// Scales row block q of m by the Schmidt values of sector q.
inline Matrix scale_rows(const Matrix& m, const RealVector& lam) { return lam.asDiagonal() * m; }

struct Segment {
    Spin spin;
    Charge bond_q;
    Index offset;
    Index dim;
};

} // namespace detail

// One division-free update of the bond between a left and a right site.
// which == AB updates the bond right of A-sites, BA the bond right of B-sites.
inline std::pair<MPSState, TruncationReport> update_bond(const MPSState& state, const TwoSiteGate& gate,
                                                         BondPair which, Index k_max) {
    if (k_max < 1) throw ConfigError("update_bond: k_max must be >= 1");
    const Sublattice sl_left = (which == BondPair::AB) ? Sublattice::A : Sublattice::B;
    const Sublattice sl_right = (which == BondPair::AB) ? Sublattice::B : Sublattice::A;
    const SiteTensor& L = state.site(sl_left);
    const SiteTensor& R = state.site(sl_right);
    const SchmidtSpectrum& lam_left = state.lambda_left(sl_left);
    const SectorDims outer = lam_left.dims();

    // Step 1: C(sA, sB) and, implicitly, Theta = lambda_left C.
    std::array<std::array<GradedMatrix, 2>, 2> prod;
    for (Spin s1 : kSpins)
        for (Spin s2 : kSpins) prod[spin_index(s1)][spin_index(s2)] = L[s1] * R[s2];

    std::array<std::array<GradedMatrix, 2>, 2> C;
    for (Spin sa : kSpins)
        for (Spin sb : kSpins) {
            const int shift = site_shift(sl_left, sa) + site_shift(sl_right, sb);
            GradedMatrix c(outer, outer, shift);
            for (Spin s1 : kSpins)
                for (Spin s2 : kSpins) {
                    const Complex coeff = gate.u(2 * spin_index(sa) + spin_index(sb),
                                                 2 * spin_index(s1) + spin_index(s2));
                    if (coeff == Complex(0.0, 0.0)) continue;
                    const GradedMatrix& p = prod[spin_index(s1)][spin_index(s2)];
                    if (p.charge_shift() != shift)
                        throw ConfigError("update_bond: gate does not conserve total Sz");
                    c.add_scaled(coeff, p);
                }
            C[spin_index(sa)][spin_index(sb)] = std::move(c);
        }

    // Group (alpha, sA) rows and (sB, gamma) columns by the charge of the new bond.
    std::map<Charge, std::vector<detail::Segment>> row_segs, col_segs;
    for (Spin sa : kSpins)
        for (const auto& [qa, d] : outer) {
            const Charge Q = qa + site_shift(sl_left, sa);
            auto& segs = row_segs[Q];
            const Index off = segs.empty() ? 0 : segs.back().offset + segs.back().dim;
            segs.push_back({sa, qa, off, d});
        }
    for (Spin sb : kSpins)
        for (const auto& [qg, d] : outer) {
            const Charge Q = qg - site_shift(sl_right, sb);
            auto& segs = col_segs[Q];
            const Index off = segs.empty() ? 0 : segs.back().offset + segs.back().dim;
            segs.push_back({sb, qg, off, d});
        }

    SectorDims theta_rows, theta_cols;
    std::map<Charge, Matrix> c_blocks;
    for (const auto& [Q, rs] : row_segs) {
        auto cit = col_segs.find(Q);
        if (cit == col_segs.end()) continue;
        const auto& cs = cit->second;
        const Index nr = rs.back().offset + rs.back().dim;
        const Index nc = cs.back().offset + cs.back().dim;
        Matrix cq = Matrix::Zero(nr, nc);
        for (const auto& r : rs)
            for (const auto& c : cs) {
                const Matrix* b = C[spin_index(r.spin)][spin_index(c.spin)].block(r.bond_q);
                if (b != nullptr) cq.block(r.offset, c.offset, r.dim, c.dim) = *b;
            }
        theta_rows[Q] = nr;
        theta_cols[Q] = nc;
        c_blocks.emplace(Q, std::move(cq));
    }

    GradedMatrix theta(theta_rows, theta_cols, 0);
    Index largest = 0;
    for (const auto& [Q, cq] : c_blocks) {
        Matrix tq = cq;
        for (const auto& r : row_segs.at(Q))
            tq.middleRows(r.offset, r.dim) = detail::scale_rows(cq.middleRows(r.offset, r.dim),
                                                                lam_left.sector(r.bond_q));
        largest = std::max({largest, tq.rows(), tq.cols()});
        theta.set_block(Q, std::move(tq));
    }

    // Step 2: block SVD and merged truncation.
    BlockSvd svd = block_svd(theta);
    auto [lam_mid, report] = merged_truncate(svd.lambda, k_max);
    report.largest_block_dim = largest;
    const double discarded_total = report.discarded_weight;
    const double rescale = discarded_total > 0.0 ? 1.0 / std::sqrt(svd.lambda.total_weight() - discarded_total) : 1.0;
    if (!std::isfinite(rescale)) throw NumericalError("update_bond: all Schmidt weight discarded");

    // Step 3: new site matrices without dividing by any Schmidt value.
    const SectorDims mid = lam_mid.dims();
    SiteTensor newL, newR;
    for (Spin s : kSpins) {
        newL[s] = GradedMatrix(outer, mid, site_shift(sl_left, s));
        newR[s] = GradedMatrix(mid, outer, site_shift(sl_right, s));
    }
    for (const auto& [Q, n] : mid) {
        const Matrix y = svd.y.block(Q)->topRows(n);
        for (const auto& c : col_segs.at(Q)) newR[c.spin].set_block(Q, y.middleCols(c.offset, c.dim));
        const Matrix ctilde = c_blocks.at(Q) * y.adjoint();
        for (const auto& r : row_segs.at(Q)) {
            Matrix blk = ctilde.middleRows(r.offset, r.dim);
            if (discarded_total > 0.0) blk *= rescale;
            newL[r.spin].set_block(r.bond_q, std::move(blk));
        }
    }

    MPSState out = state;
    if (which == BondPair::AB) {
        out.A_A = std::move(newL);
        out.A_B = std::move(newR);
        out.lambda_A = std::move(lam_mid);
    } else {
        out.A_B = std::move(newL);
        out.A_A = std::move(newR);
        out.lambda_B = std::move(lam_mid);
    }
    return {std::move(out), std::move(report)};
}

// <Sz> on a site of the given sublattice from its one-site reduced density matrix.
inline double expect_sz(const MPSState& state, Sublattice sl) {
    const SiteTensor& t = state.site(sl);
    const SchmidtSpectrum& lam = state.lambda_left(sl);
    double num = 0.0, norm = 0.0;
    for (Spin s : kSpins)
        for (const auto& [q, m] : t[s].blocks()) {
            const RealVector& l = lam.sector(q);
            const double w = (l.array().square() * m.rowwise().squaredNorm().array()).sum();
            num += sz_value(s) * w;
            norm += w;
        }
    if (norm == 0.0) throw NumericalError("expect_sz: zero norm");
    return num / norm;
}

// Largest entry of |sum_s A(s) A(s)^dagger - I| over the left bond space.
inline double right_normalization_deviation(const SiteTensor& t) {
    std::map<Charge, Matrix> acc;
    for (Spin s : kSpins)
        for (const auto& [q, m] : t[s].blocks()) {
            Matrix g = m * m.adjoint();
            auto it = acc.find(q);
            if (it == acc.end())
                acc.emplace(q, std::move(g));
            else
                it->second += g;
        }
    double dev = 0.0;
    for (const auto& [q, d] : t[Spin::up].row_space()) {
        auto it = acc.find(q);
        const Matrix g = it == acc.end() ? Matrix::Zero(d, d) : it->second;
        dev = std::max(dev, (g - Matrix::Identity(d, d)).cwiseAbs().maxCoeff());
    }
    return dev;
}

struct StepRecord {
    double time = 0.0;
    double sz0 = 0.0;
    double sz1 = 0.0;
    double discarded_step = 0.0;        // summed over the updates of this step
    double discarded_cumulative = 0.0;  // since the start of evolve_to
    double entropy_A = 0.0;
    double entropy_B = 0.0;
    Index largest_block_dim = 0;
    bool discard_warning = false;
};

using StepObserver = std::function<void(const StepRecord&)>;

inline StepRecord observe(const MPSState& st) {
    StepRecord r;
    r.time = st.time;
    r.sz0 = expect_sz(st, Sublattice::A);
    r.sz1 = expect_sz(st, Sublattice::B);
    r.entropy_A = st.lambda_A.entropy();
    r.entropy_B = st.lambda_B.entropy();
    return r;
}

// Second-order Trotter evolution: AB(dt/2) BA(dt) AB(dt/2) per step. When no
// observer is attached the closing half-step of one step and the opening
// half-step of the next are fused into a single AB(dt) update.
inline MPSState evolve_to(const MPSState& state, double t_end, const QuenchConfig& config,
                          const StepObserver& observer = {}) {
    config.validate();
    if (t_end < state.time - 1e-12) throw ConfigError("evolve_to: t_end is before the state time");
    const double steps_real = (t_end - state.time) / config.dt;
    const long n_steps = std::lround(steps_real);
    if (std::abs(steps_real - static_cast<double>(n_steps)) > 1e-9)
        throw ConfigError("evolve_to: (t_end - time) must be an integer multiple of dt");
    if (n_steps == 0) return state;

    const TwoSiteGate half = build_gate(config.delta, config.dt / 2.0);
    const TwoSiteGate full = build_gate(config.delta, config.dt);
    const double t0 = state.time;
    MPSState st = state;
    double cumulative = 0.0;

    auto apply = [&](const TwoSiteGate& g, BondPair which, StepRecord& rec) {
        auto [next, rep] = update_bond(st, g, which, config.k_max);
        st = std::move(next);
        rec.discarded_step += rep.discarded_weight;
        rec.largest_block_dim = std::max(rec.largest_block_dim, rep.largest_block_dim);
        cumulative += rep.discarded_weight;
    };

    if (observer) {
        for (long k = 1; k <= n_steps; ++k) {
            StepRecord rec;
            apply(half, BondPair::AB, rec);
            apply(full, BondPair::BA, rec);
            apply(half, BondPair::AB, rec);
            st.time = t0 + static_cast<double>(k) * config.dt;
            StepRecord obs = observe(st);
            obs.discarded_step = rec.discarded_step;
            obs.largest_block_dim = rec.largest_block_dim;
            obs.discarded_cumulative = cumulative;
            obs.discard_warning = cumulative > config.discard_warn;
            observer(obs);
        }
    } else {
        StepRecord rec;
        apply(half, BondPair::AB, rec);
        for (long k = 1; k <= n_steps; ++k) {
            apply(full, BondPair::BA, rec);
            apply(k == n_steps ? half : full, BondPair::AB, rec);
        }
        st.time = t0 + static_cast<double>(n_steps) * config.dt;
    }
    return st;
}

} // namespace lcmps
