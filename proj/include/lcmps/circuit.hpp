#pragma once
// Light-cone evaluation of <Sz> after a brickwork circuit.
//
// Qubits 0..N-1 stand for sites -N/2..N/2-1; the measured qubit is N/2 (site 0).
// Odd layers (1st, 3rd, ...) couple (0,1), (2,3), ...; even layers couple
// (1,2), (3,4), .... State vectors use qubit 0 as the most significant bit and
// spin up as bit 1. Gate matrices use the two-site order {uu, ud, du, dd}.
//
// Gates are split into regions:
//   A  late gates (second half of the layers) inside the backward light cone
//   C  early gates that cross the cut between qubits N/2-1 and N/2, together
//      with every early gate causally after one of them
//   B  remaining early cone gates left of the cut
//   D  remaining early cone gates right of the cut
// The window is the span of qubits touched by A and C. Then
//   <Sz> = sum_{alpha,beta} w(alpha) w(beta) <Psi_ab| C^+ A^+ Sz A C |Psi_ab>
// with alpha, beta the computational states of the qubits outside the window.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "lcmps/errors.hpp"
#include "lcmps/graded.hpp"
#include "lcmps/rng.hpp"
#include "lcmps/window.hpp"

namespace lcmps {

inline constexpr int kMaxCircuitQubits = 20;
inline constexpr int kMaxExhaustiveQubits = 16;

struct CircuitGate {
    int qubit = 0;  // acts on (qubit, qubit + 1)
    Eigen::Matrix4cd u = Eigen::Matrix4cd::Identity();
};

struct BrickworkCircuit {
    int n_qubits = 0;
    std::vector<std::vector<CircuitGate>> layers;  // layers[t] is layer t + 1

    int depth() const { return static_cast<int>(layers.size()); }
    int measured_qubit() const { return n_qubits / 2; }
};

inline std::vector<int> layer_pairs(int n_qubits, int layer_index) {
    std::vector<int> q;
    for (int a = (layer_index % 2 == 0) ? 0 : 1; a + 1 < n_qubits; a += 2) q.push_back(a);
    return q;
}

inline void validate_circuit_size(int n_qubits, int max_qubits) {
    if (n_qubits < 2 || n_qubits % 2 != 0 || n_qubits > max_qubits)
        throw ConfigError("circuit: n_qubits must be even and in [2, " + std::to_string(max_qubits) + "]");
}

// Haar-distributed two-qubit unitary: QR of a complex Gaussian matrix with the
// phases of R's diagonal moved into Q.
inline Eigen::Matrix4cd haar_unitary4(RandomStream& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::Matrix4cd z;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const double re = normal(rng);
            const double im = normal(rng);
            z(i, j) = Complex(re, im);
        }
    Eigen::HouseholderQR<Eigen::Matrix4cd> qr(z);
    Eigen::Matrix4cd q = qr.householderQ();
    Eigen::Matrix4cd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < 4; ++j) {
        const double a = std::abs(r(j, j));
        if (a > 0.0) q.col(j) *= r(j, j) / a;
    }
    return q;
}

inline BrickworkCircuit random_brickwork(int n_qubits, int depth, std::uint64_t seed) {
    validate_circuit_size(n_qubits, kMaxCircuitQubits);
    if (depth < 0) throw ConfigError("circuit: depth must be >= 0");
    RandomStream rng(seed, 0);
    BrickworkCircuit c;
    c.n_qubits = n_qubits;
    for (int t = 0; t < depth; ++t) {
        std::vector<CircuitGate> layer;
        for (int q : layer_pairs(n_qubits, t)) layer.push_back({q, haar_unitary4(rng)});
        c.layers.push_back(std::move(layer));
    }
    return c;
}

inline BrickworkCircuit uniform_brickwork(int n_qubits, int depth, const Eigen::Matrix4cd& u) {
    validate_circuit_size(n_qubits, kMaxCircuitQubits);
    BrickworkCircuit c;
    c.n_qubits = n_qubits;
    for (int t = 0; t < depth; ++t) {
        std::vector<CircuitGate> layer;
        for (int q : layer_pairs(n_qubits, t)) layer.push_back({q, u});
        c.layers.push_back(std::move(layer));
    }
    return c;
}

// Neel product state with the measured qubit up.
inline std::vector<bool> circuit_neel_state(int n_qubits) {
    std::vector<bool> up(static_cast<std::size_t>(n_qubits));
    for (int i = 0; i < n_qubits; ++i) up[static_cast<std::size_t>(i)] = ((i - n_qubits / 2) % 2 == 0);
    return up;
}

// Applies a two-qubit gate to qubits (q, q+1) of an n-qubit state vector.
inline void apply_gate(std::vector<Complex>& psi, int n, int q, const Eigen::Matrix4cd& u) {
    const int bit_hi = n - 1 - q;  // qubit q
    const int bit_lo = n - 2 - q;  // qubit q + 1
    const std::size_t mhi = std::size_t{1} << bit_hi;
    const std::size_t mlo = std::size_t{1} << bit_lo;
    // Gate index 2*a + b with a, b = 0 for up, i.e. bit value 1.
    auto cfg = [&](std::size_t base, int k) {
        std::size_t c = base;
        if ((k >> 1) == 0) c |= mhi;
        if ((k & 1) == 0) c |= mlo;
        return c;
    };
    for (std::size_t base = 0; base < psi.size(); ++base) {
        if (base & (mhi | mlo)) continue;
        Complex in[4], out[4];
        for (int k = 0; k < 4; ++k) in[k] = psi[cfg(base, k)];
        for (int r = 0; r < 4; ++r) {
            out[r] = 0.0;
            for (int k = 0; k < 4; ++k) out[r] += u(r, k) * in[k];
        }
        for (int k = 0; k < 4; ++k) psi[cfg(base, k)] = out[k];
    }
}

inline std::vector<Complex> product_state(const std::vector<bool>& up) {
    const int n = static_cast<int>(up.size());
    std::size_t c = 0;
    for (int i = 0; i < n; ++i)
        if (up[static_cast<std::size_t>(i)]) c |= std::size_t{1} << (n - 1 - i);
    std::vector<Complex> psi(std::size_t{1} << n, Complex(0.0, 0.0));
    psi[c] = 1.0;
    return psi;
}

// Full state-vector simulation of every gate; <Sz> on the measured qubit.
inline double direct_expectation(const BrickworkCircuit& circ, const std::vector<bool>& initial) {
    validate_circuit_size(circ.n_qubits, kMaxCircuitQubits);
    if (static_cast<int>(initial.size()) != circ.n_qubits) throw ConfigError("circuit: initial state size mismatch");
    auto psi = product_state(initial);
    for (const auto& layer : circ.layers)
        for (const auto& g : layer) apply_gate(psi, circ.n_qubits, g.qubit, g.u);
    return expect_sz_bit(psi, circ.n_qubits - 1 - circ.measured_qubit());
}

enum class Region { outside, A, B, C, D };

struct CircuitRegions {
    std::vector<std::vector<Region>> region;  // per layer, per gate
    int window_lo = 0;                        // inclusive qubit range of the window
    int window_hi = 0;
    int early_layers = 0;
};

inline CircuitRegions compute_regions(const BrickworkCircuit& circ) {
    const int n = circ.n_qubits;
    const int m = circ.measured_qubit();
    const int T = circ.depth();
    CircuitRegions reg;
    reg.early_layers = T / 2;
    reg.region.resize(static_cast<std::size_t>(T));

    std::vector<char> in_cone(static_cast<std::size_t>(n), 0);
    in_cone[static_cast<std::size_t>(m)] = 1;
    std::vector<std::vector<char>> cone(static_cast<std::size_t>(T));
    for (int t = T - 1; t >= 0; --t) {
        const auto& layer = circ.layers[static_cast<std::size_t>(t)];
        cone[static_cast<std::size_t>(t)].assign(layer.size(), 0);
        for (std::size_t g = 0; g < layer.size(); ++g) {
            const auto q = static_cast<std::size_t>(layer[g].qubit);
            if (in_cone[q] || in_cone[q + 1]) cone[static_cast<std::size_t>(t)][g] = 1;
        }
        for (std::size_t g = 0; g < layer.size(); ++g)
            if (cone[static_cast<std::size_t>(t)][g]) {
                const auto q = static_cast<std::size_t>(layer[g].qubit);
                in_cone[q] = in_cone[q + 1] = 1;
            }
    }

    std::vector<char> tainted(static_cast<std::size_t>(n), 0);
    int lo = m, hi = m;
    for (int t = 0; t < T; ++t) {
        const auto& layer = circ.layers[static_cast<std::size_t>(t)];
        auto& out = reg.region[static_cast<std::size_t>(t)];
        out.assign(layer.size(), Region::outside);
        for (std::size_t g = 0; g < layer.size(); ++g) {
            if (!cone[static_cast<std::size_t>(t)][g]) continue;
            const int q = layer[g].qubit;
            Region r;
            if (t >= reg.early_layers) {
                r = Region::A;
            } else if (q == m - 1 || tainted[static_cast<std::size_t>(q)] || tainted[static_cast<std::size_t>(q + 1)]) {
                r = Region::C;
            } else {
                r = (q + 1 < m) ? Region::B : Region::D;
            }
            out[g] = r;
            if (r == Region::C) tainted[static_cast<std::size_t>(q)] = tainted[static_cast<std::size_t>(q + 1)] = 1;
            if (r == Region::A || r == Region::C) {
                lo = std::min(lo, q);
                hi = std::max(hi, q + 1);
            }
        }
    }
    reg.window_lo = lo;
    reg.window_hi = hi;
    return reg;
}

// <Sz> using only the gates inside the backward light cone.
inline double cone_only_expectation(const BrickworkCircuit& circ, const std::vector<bool>& initial) {
    const auto reg = compute_regions(circ);
    auto psi = product_state(initial);
    for (int t = 0; t < circ.depth(); ++t)
        for (std::size_t g = 0; g < circ.layers[static_cast<std::size_t>(t)].size(); ++g)
            if (reg.region[static_cast<std::size_t>(t)][g] != Region::outside)
                apply_gate(psi, circ.n_qubits, circ.layers[static_cast<std::size_t>(t)][g].qubit,
                           circ.layers[static_cast<std::size_t>(t)][g].u);
    return expect_sz_bit(psi, circ.n_qubits - 1 - circ.measured_qubit());
}

// Precomputed pieces of the light-cone evaluation: U_B Psi_L, U_D Psi_R and the
// outer-region weight distributions.
class LightConeEvaluator {
  public:
    LightConeEvaluator(const BrickworkCircuit& circ, const std::vector<bool>& initial, int max_qubits)
        : circ_(circ), reg_(compute_regions(circ)) {
        validate_circuit_size(circ.n_qubits, max_qubits);
        if (static_cast<int>(initial.size()) != circ.n_qubits) throw ConfigError("circuit: initial state size mismatch");
        n_ = circ.n_qubits;
        m_ = circ.measured_qubit();
        lo_ = reg_.window_lo;
        hi_ = reg_.window_hi;

        std::vector<bool> left(initial.begin(), initial.begin() + m_);
        std::vector<bool> right(initial.begin() + m_, initial.end());
        phi_l_ = product_state(left);
        phi_r_ = product_state(right);
        for (int t = 0; t < circ.depth(); ++t)
            for (std::size_t g = 0; g < circ.layers[static_cast<std::size_t>(t)].size(); ++g) {
                const auto& gate = circ.layers[static_cast<std::size_t>(t)][g];
                const Region r = reg_.region[static_cast<std::size_t>(t)][g];
                if (r == Region::B) apply_gate(phi_l_, m_, gate.qubit, gate.u);
                if (r == Region::D) apply_gate(phi_r_, n_ - m_, gate.qubit - m_, gate.u);
            }

        // Left half: outer qubits [0, lo) are the high bits, window part [lo, m) the low bits.
        left_in_ = m_ - lo_;
        right_in_ = hi_ - m_ + 1;
        weight_l_.assign(std::size_t{1} << lo_, 0.0);
        for (std::size_t c = 0; c < phi_l_.size(); ++c) weight_l_[c >> left_in_] += std::norm(phi_l_[c]);
        const int right_out = n_ - 1 - hi_;
        weight_r_.assign(std::size_t{1} << right_out, 0.0);
        for (std::size_t c = 0; c < phi_r_.size(); ++c)
            weight_r_[c & ((std::size_t{1} << right_out) - 1)] += std::norm(phi_r_[c]);
    }

    const CircuitRegions& regions() const { return reg_; }
    const std::vector<double>& left_weights() const { return weight_l_; }
    const std::vector<double>& right_weights() const { return weight_r_; }

    // <Psi_ab| C^+ A^+ Sz A C |Psi_ab> for outer configurations alpha, beta.
    double conditional_expectation(std::size_t alpha, std::size_t beta) const {
        const int right_out = n_ - 1 - hi_;
        const std::size_t nl = std::size_t{1} << left_in_;
        const std::size_t nr = std::size_t{1} << right_in_;
        const int nw = hi_ - lo_ + 1;
        std::vector<Complex> psi(nl * nr);
        double n2 = 0.0;
        for (std::size_t a = 0; a < nl; ++a)
            for (std::size_t b = 0; b < nr; ++b) {
                const Complex v = phi_l_[(alpha << left_in_) | a] * phi_r_[(b << right_out) | beta];
                psi[(a << right_in_) | b] = v;
                n2 += std::norm(v);
            }
        if (n2 == 0.0) throw NumericalError("circuit: projected state has zero weight");
        const double inv = 1.0 / std::sqrt(n2);
        for (auto& v : psi) v *= inv;
        for (Region which : {Region::C, Region::A})
            for (int t = 0; t < circ_.depth(); ++t)
                for (std::size_t g = 0; g < circ_.layers[static_cast<std::size_t>(t)].size(); ++g)
                    if (reg_.region[static_cast<std::size_t>(t)][g] == which) {
                        const auto& gate = circ_.layers[static_cast<std::size_t>(t)][g];
                        apply_gate(psi, nw, gate.qubit - lo_, gate.u);
                    }
        return expect_sz_bit(psi, nw - 1 - (m_ - lo_));
    }

  private:
    const BrickworkCircuit& circ_;
    CircuitRegions reg_;
    int n_ = 0, m_ = 0, lo_ = 0, hi_ = 0, left_in_ = 0, right_in_ = 0;
    std::vector<Complex> phi_l_, phi_r_;
    std::vector<double> weight_l_, weight_r_;
};

struct ExhaustiveResult {
    double value = 0.0;
    double total_weight = 0.0;
};

// Weighted sum over every outer configuration pair (alpha, beta).
inline ExhaustiveResult lightcone_expectation_sum(const BrickworkCircuit& circ, const std::vector<bool>& initial) {
    LightConeEvaluator ev(circ, initial, kMaxExhaustiveQubits);
    ExhaustiveResult r;
    const auto& wl = ev.left_weights();
    const auto& wr = ev.right_weights();
    for (std::size_t a = 0; a < wl.size(); ++a) {
        if (wl[a] == 0.0) continue;
        for (std::size_t b = 0; b < wr.size(); ++b) {
            if (wr[b] == 0.0) continue;
            const double w = wl[a] * wr[b];
            r.value += w * ev.conditional_expectation(a, b);
            r.total_weight += w;
        }
    }
    return r;
}

struct SampledEstimate {
    double mean = 0.0;
    double std_error = std::numeric_limits<double>::quiet_NaN();
    long n_samples = 0;
};

inline SampledEstimate lightcone_expectation_sampled(const BrickworkCircuit& circ, const std::vector<bool>& initial,
                                                     long n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw ConfigError("circuit: n_samples must be >= 1");
    LightConeEvaluator ev(circ, initial, kMaxCircuitQubits);
    auto draw = [](const std::vector<double>& w, RandomStream& rng) {
        double total = 0.0;
        for (double x : w) total += x;
        const double u = rng.uniform() * total;
        double acc = 0.0;
        std::size_t last = 0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (w[i] <= 0.0) continue;
            acc += w[i];
            last = i;
            if (u < acc) return i;
        }
        return last;
    };
    std::vector<double> values(static_cast<std::size_t>(n_samples));
    for (long k = 0; k < n_samples; ++k) {
        RandomStream rng(seed, static_cast<std::uint64_t>(k));
        const std::size_t a = draw(ev.left_weights(), rng);
        const std::size_t b = draw(ev.right_weights(), rng);
        values[static_cast<std::size_t>(k)] = ev.conditional_expectation(a, b);
    }
    SampledEstimate est;
    est.n_samples = n_samples;
    double s = 0.0;
    for (double v : values) s += v;
    est.mean = s / static_cast<double>(n_samples);
    if (n_samples > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - est.mean) * (v - est.mean);
        est.std_error = std::sqrt(ss / static_cast<double>(n_samples - 1) / static_cast<double>(n_samples));
    }
    return est;
}

} // namespace lcmps
