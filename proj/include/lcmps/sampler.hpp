#pragma once
// Monte Carlo sampling of the boundary Schmidt states (alpha, beta) of a
// light-cone window and construction of the projected window state.
//
// alpha lives on the bond between sites -l-1 and -l, beta on the bond between
// sites l and l+1. The joint weight <psi|P_alpha P_beta|psi> is sampled as
// P(alpha) times a chain of single-site conditionals followed by
// P(beta | s_l ... s_-l, alpha). Each conditional is a ratio of squared norms
// of the running row vector <alpha| A(s_-l) ... A(s_i), which is valid because
// the site matrices are right-normalized. The sampled window spins only steer
// the choice of beta; the window state itself sums all of them coherently.
//
// Propagating the conditional density matrix through the two sublattice CP
// maps would give the same distribution for beta, but costs matrix-matrix
// products per site instead of matrix-vector products, so it is not provided.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lcmps/errors.hpp"
#include "lcmps/graded.hpp"
#include "lcmps/itebd.hpp"
#include "lcmps/rng.hpp"
#include "lcmps/window.hpp"

namespace lcmps {

struct WindowSpec {
    int l = 10;
    double t_init = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (l < 1 || l > kMaxHalfWidth) throw ConfigError("window half-width l must be in [1, 14]");
    }
};

// A basis state of a bond: sector charge and index within the sector.
struct BondIndex {
    Charge q = 0;
    Index index = 0;

    friend bool operator==(const BondIndex&, const BondIndex&) = default;
    friend auto operator<=>(const BondIndex&, const BondIndex&) = default;
};

struct BoundarySample {
    BondIndex alpha;
    BondIndex beta;
    // Conditional probability of each drawn spin, then of beta. Diagnostic only.
    std::vector<double> conditionals;
};

inline const SchmidtSpectrum& left_boundary_spectrum(const MPSState& state, int l) {
    return state.lambda_left(sublattice_of(-l));
}

inline const SchmidtSpectrum& right_boundary_spectrum(const MPSState& state, int l) {
    return state.lambda_right(sublattice_of(l));
}

// Draws alpha with probability lambda_alpha^2 on the left boundary bond.
inline BondIndex sample_alpha(const MPSState& state, const WindowSpec& spec, RandomStream& rng) {
    const SchmidtSpectrum& lam = left_boundary_spectrum(state, spec.l);
    const double total = lam.total_weight();
    const double u = rng.uniform() * total;
    double acc = 0.0;
    BondIndex last{};
    bool any = false;
    for (const auto& [q, v] : lam.sectors())
        for (Index i = 0; i < v.size(); ++i) {
            const double w = v(i) * v(i);
            if (w == 0.0) continue;
            acc += w;
            last = {q, i};
            any = true;
            if (u < acc) return last;
        }
    if (!any) throw NumericalError("sample_alpha: empty boundary spectrum");
    return last;
}

namespace detail {

// Draws an index of `weights` proportionally; the weights need not be normalized.
inline std::size_t draw_index(const std::vector<double>& weights, RandomStream& rng) {
    double total = 0.0;
    for (double w : weights) total += w;
    const double u = rng.uniform() * total;
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        acc += weights[i];
        last = i;
        if (u < acc) return i;
    }
    return last;
}

} // namespace detail

inline BoundarySample sample_spins_and_beta(const MPSState& state, const WindowSpec& spec, const BondIndex& alpha,
                                            RandomStream& rng) {
    spec.validate();
    const SectorDims left_dims = left_boundary_spectrum(state, spec.l).dims();
    auto it = left_dims.find(alpha.q);
    if (it == left_dims.end() || alpha.index < 0 || alpha.index >= it->second)
        throw ConfigError("sample_spins_and_beta: alpha is not a state of the left boundary bond");

    BoundarySample out;
    out.alpha = alpha;
    GradedVector v = GradedVector::unit(alpha.q, it->second, alpha.index);
    for (int i = -spec.l; i <= spec.l; ++i) {
        const SiteTensor& t = state.site(sublattice_of(i));
        GradedVector up = graded_matvec(t[Spin::up], v, Side::left);
        GradedVector dn = graded_matvec(t[Spin::down], v, Side::left);
        double nu = up.norm2();
        double nd = dn.norm2();
        if (nu < 1e-28 * nd) nu = 0.0;
        if (nd < 1e-28 * nu) nd = 0.0;
        if (nu + nd == 0.0 || !std::isfinite(nu + nd))
            throw NumericalError("sample_spins_and_beta: both continuations vanish at site " + std::to_string(i) +
                                 " (alpha sector " + std::to_string(alpha.q) + ", index " +
                                 std::to_string(alpha.index) + ")");
        const double p_up = nu / (nu + nd);
        if (rng.uniform() < p_up) {
            out.conditionals.push_back(p_up);
            v = std::move(up);
        } else {
            out.conditionals.push_back(1.0 - p_up);
            v = std::move(dn);
        }
    }

    std::vector<double> w;
    std::vector<BondIndex> idx;
    for (const auto& [q, x] : v.blocks())
        for (Index i = 0; i < x.size(); ++i) {
            w.push_back(std::norm(x(i)));
            idx.push_back({q, i});
        }
    double total = 0.0;
    for (double x : w) total += x;
    const std::size_t k = detail::draw_index(w, rng);
    out.beta = idx[k];
    out.conditionals.push_back(w[k] / total);
    return out;
}

namespace detail {

inline Complex graded_dot(const GradedVector& row, const GradedVector& col) {
    Complex s(0.0, 0.0);
    for (const auto& [q, x] : row.blocks()) {
        const Vector* y = col.block(q);
        if (y != nullptr) s += x.cwiseProduct(*y).sum();
    }
    return s;
}

inline WindowState finish_window(int l, std::vector<Complex> amps, int sector) {
    double n2 = 0.0;
    for (const auto& a : amps) n2 += std::norm(a);
    if (!(n2 > 0.0) || !std::isfinite(n2))
        throw NumericalError("assemble_window_state: projected state has zero norm (inconsistent sample)");
    const double inv = 1.0 / std::sqrt(n2);
    for (auto& a : amps) a *= inv;
    return WindowState{l, std::move(amps), sector};
}

} // namespace detail

// Meet-in-the-middle construction of the normalized window state
// P_alpha P_beta |psi> restricted to sites -l..l.
inline WindowState assemble_window_state(const MPSState& state, const WindowSpec& spec,
                                         const BoundarySample& sample) {
    spec.validate();
    const int l = spec.l;
    const SectorDims left_dims = left_boundary_spectrum(state, l).dims();
    const SectorDims right_dims = right_boundary_spectrum(state, l).dims();
    if (!left_dims.count(sample.alpha.q) || !right_dims.count(sample.beta.q))
        throw ConfigError("assemble_window_state: sample does not belong to this state");

    // Row vectors <alpha| A(s_-l) ... A(s_0); index bits s_-l (MSB) .. s_0, up = 1.
    std::vector<GradedVector> left{GradedVector::unit(sample.alpha.q, left_dims.at(sample.alpha.q), sample.alpha.index)};
    for (int i = -l; i <= 0; ++i) {
        const SiteTensor& t = state.site(sublattice_of(i));
        std::vector<GradedVector> next(left.size() * 2);
        for (std::size_t k = 0; k < left.size(); ++k) {
            next[2 * k + 1] = graded_matvec(t[Spin::up], left[k], Side::left);
            next[2 * k] = graded_matvec(t[Spin::down], left[k], Side::left);
        }
        left.swap(next);
    }

    // Column vectors A(s_1) ... A(s_l) |beta>; index bits s_1 (MSB) .. s_l.
    std::vector<GradedVector> right{GradedVector::unit(sample.beta.q, right_dims.at(sample.beta.q), sample.beta.index)};
    for (int i = l; i >= 1; --i) {
        const SiteTensor& t = state.site(sublattice_of(i));
        const std::size_t high = right.size();
        std::vector<GradedVector> next(right.size() * 2);
        for (std::size_t k = 0; k < right.size(); ++k) {
            next[high + k] = graded_matvec(t[Spin::up], right[k], Side::right);
            next[k] = graded_matvec(t[Spin::down], right[k], Side::right);
        }
        right.swap(next);
    }

    std::vector<Complex> amps(std::size_t{1} << (2 * l + 1), Complex(0.0, 0.0));
    for (std::size_t a = 0; a < left.size(); ++a) {
        if (left[a].empty()) continue;
        for (std::size_t b = 0; b < right.size(); ++b) amps[(a << l) | b] = detail::graded_dot(left[a], right[b]);
    }
    return detail::finish_window(l, std::move(amps), sample.beta.q - sample.alpha.q);
}

// Same amplitudes with all sector structure discarded: dense site matrices and
// dense boundary vectors. Used to check that blocking changes nothing.
inline WindowState assemble_window_state_unblocked(const MPSState& state, const WindowSpec& spec,
                                                   const BoundarySample& sample) {
    spec.validate();
    const int l = spec.l;
    const SectorDims left_dims = left_boundary_spectrum(state, l).dims();
    const SectorDims right_dims = right_boundary_spectrum(state, l).dims();
    std::array<std::array<Matrix, 2>, 2> dense;  // [sublattice][spin]
    for (Sublattice sl : {Sublattice::A, Sublattice::B})
        for (Spin s : kSpins)
            dense[sl == Sublattice::A ? 0 : 1][static_cast<std::size_t>(spin_index(s))] = state.site(sl)[s].dense();
    auto mat = [&](int site, Spin s) -> const Matrix& {
        return dense[sublattice_of(site) == Sublattice::A ? 0 : 1][static_cast<std::size_t>(spin_index(s))];
    };

    Vector a0 = Vector::Zero(total_dim(left_dims));
    a0(sector_offsets(left_dims).at(sample.alpha.q) + sample.alpha.index) = 1.0;
    Vector b0 = Vector::Zero(total_dim(right_dims));
    b0(sector_offsets(right_dims).at(sample.beta.q) + sample.beta.index) = 1.0;

    std::vector<Vector> left{a0};
    for (int i = -l; i <= 0; ++i) {
        std::vector<Vector> next(left.size() * 2);
        for (std::size_t k = 0; k < left.size(); ++k) {
            next[2 * k + 1] = mat(i, Spin::up).transpose() * left[k];
            next[2 * k] = mat(i, Spin::down).transpose() * left[k];
        }
        left.swap(next);
    }
    std::vector<Vector> right{b0};
    for (int i = l; i >= 1; --i) {
        const std::size_t high = right.size();
        std::vector<Vector> next(right.size() * 2);
        for (std::size_t k = 0; k < right.size(); ++k) {
            next[high + k] = mat(i, Spin::up) * right[k];
            next[k] = mat(i, Spin::down) * right[k];
        }
        right.swap(next);
    }
    std::vector<Complex> amps(std::size_t{1} << (2 * l + 1));
    for (std::size_t a = 0; a < left.size(); ++a)
        for (std::size_t b = 0; b < right.size(); ++b) amps[(a << l) | b] = left[a].cwiseProduct(right[b]).sum();
    return detail::finish_window(l, std::move(amps), sample.beta.q - sample.alpha.q);
}

} // namespace lcmps
