#include <gtest/gtest.h>

#include <bit>
#include <map>

#include "lcmps/sampler.hpp"
#include "oracles.hpp"

using namespace lcmps;

namespace {

const MPSState& state_t1_k16() {
    static const MPSState st = [] {
        QuenchConfig cfg;
        cfg.k_max = 16;
        return evolve_to(neel_init(), 1.0, cfg);
    }();
    return st;
}

const MPSState& state_t2_k64() {
    static const MPSState st = [] {
        QuenchConfig cfg;
        cfg.k_max = 64;
        return evolve_to(neel_init(), 2.0, cfg);
    }();
    return st;
}

// Upper 0.1% point of the chi-square distribution (Wilson-Hilferty).
double chi2_critical_0001(int dof) {
    const double k = dof;
    const double z = 3.0902;
    const double a = 1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k));
    return k * a * a * a;
}

} // namespace

TEST(WindowSpec, Validation) {
    EXPECT_THROW((WindowSpec{0, 0.0, 0}.validate()), ConfigError);
    EXPECT_THROW((WindowSpec{15, 0.0, 0}.validate()), ConfigError);
    EXPECT_NO_THROW((WindowSpec{14, 0.0, 0}.validate()));
}

TEST(BoundaryBonds, ParityOfHalfWidth) {
    const MPSState& st = state_t1_k16();
    // l even: site -l is an A-site, its left bond is the bond right of B-sites.
    EXPECT_EQ(&left_boundary_spectrum(st, 2), &st.lambda_B);
    EXPECT_EQ(&left_boundary_spectrum(st, 10), &st.lambda_B);
    EXPECT_EQ(&left_boundary_spectrum(st, 1), &st.lambda_A);
    EXPECT_EQ(&right_boundary_spectrum(st, 2), &st.lambda_A);
    EXPECT_EQ(&right_boundary_spectrum(st, 1), &st.lambda_B);
}

TEST(SampleAlpha, SingleEntryIsCertain) {
    RandomStream rng(1);
    const WindowSpec spec{2, 0.0, 1};
    for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_alpha(neel_init(), spec, rng), (BondIndex{0, 0}));
}

TEST(SampleAlpha, EqualWeightsBinomial) {
    MPSState st = neel_init();
    st.lambda_B = SchmidtSpectrum({{0, RealVector::Constant(1, std::sqrt(0.5))}, {1, RealVector::Constant(1, std::sqrt(0.5))}});
    RandomStream rng(2);
    const WindowSpec spec{2, 0.0, 2};
    const int n = 100000;
    int zeros = 0;
    for (int i = 0; i < n; ++i) zeros += sample_alpha(st, spec, rng).q == 0 ? 1 : 0;
    EXPECT_LT(std::abs(zeros - 0.5 * n), 3.0 * std::sqrt(0.25 * n));
}

TEST(SampleAlpha, ChiSquareAgainstSpectrum) {
    const MPSState& st = state_t2_k64();
    const WindowSpec spec{2, 2.0, 3};
    const SchmidtSpectrum& lam = left_boundary_spectrum(st, spec.l);
    RandomStream rng(3);
    const int n = 100000;
    std::map<BondIndex, int> counts;
    for (int i = 0; i < n; ++i) ++counts[sample_alpha(st, spec, rng)];

    // Bins with small expectation are pooled into one.
    double chi2 = 0.0, pooled_exp = 0.0, pooled_obs = 0.0;
    int bins = 0;
    for (const auto& [q, v] : lam.sectors())
        for (Index i = 0; i < v.size(); ++i) {
            const double e = n * v(i) * v(i) / lam.total_weight();
            const double o = counts.count({q, i}) ? counts.at({q, i}) : 0;
            if (e < 5.0) {
                pooled_exp += e;
                pooled_obs += o;
                continue;
            }
            chi2 += (o - e) * (o - e) / e;
            ++bins;
        }
    if (pooled_exp > 0.0) {
        chi2 += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
        ++bins;
    }
    ASSERT_GE(bins, 5);
    EXPECT_LT(chi2, chi2_critical_0001(bins - 1)) << "bins=" << bins;
}

TEST(SampleSpins, NeelIsDeterministic) {
    RandomStream rng(4);
    const WindowSpec spec{3, 0.0, 4};
    const BoundarySample s = sample_spins_and_beta(neel_init(), spec, {0, 0}, rng);
    ASSERT_EQ(s.conditionals.size(), 2u * 3 + 2);
    for (double p : s.conditionals) EXPECT_EQ(p, 1.0);
    EXPECT_EQ(s.beta, (BondIndex{0, 0}));
    const WindowState w = assemble_window_state(neel_init(), spec, s);
    for (std::size_t c = 0; c < w.amplitudes.size(); ++c)
        EXPECT_EQ(w.amplitudes[c], Complex(c == neel_window_config(3) ? 1.0 : 0.0, 0.0));
    EXPECT_EQ(w.total_sz_sector, 0);
}

TEST(SampleSpins, ConditionalsAreProbabilities) {
    const MPSState& st = state_t2_k64();
    const WindowSpec spec{3, 2.0, 5};
    RandomStream rng(5);
    for (int k = 0; k < 200; ++k) {
        const BondIndex a = sample_alpha(st, spec, rng);
        const BoundarySample s = sample_spins_and_beta(st, spec, a, rng);
        for (double p : s.conditionals) {
            EXPECT_GT(p, 0.0);
            EXPECT_LE(p, 1.0);
        }
    }
}

TEST(SampleSpins, RejectsForeignAlpha) {
    RandomStream rng(6);
    EXPECT_THROW(sample_spins_and_beta(neel_init(), WindowSpec{2, 0.0, 6}, {5, 0}, rng), ConfigError);
    EXPECT_THROW(sample_spins_and_beta(neel_init(), WindowSpec{2, 0.0, 6}, {0, 1}, rng), ConfigError);
}

TEST(SampleSpins, SameSeedSameStream) {
    const MPSState& st = state_t1_k16();
    const WindowSpec spec{2, 1.0, 9};
    for (std::uint64_t id = 0; id < 20; ++id) {
        RandomStream r1(9, id), r2(9, id);
        const BoundarySample a = sample_spins_and_beta(st, spec, sample_alpha(st, spec, r1), r1);
        const BoundarySample b = sample_spins_and_beta(st, spec, sample_alpha(st, spec, r2), r2);
        EXPECT_EQ(a.alpha, b.alpha);
        EXPECT_EQ(a.beta, b.beta);
        EXPECT_EQ(a.conditionals, b.conditionals);
    }
}

TEST(SampleSpins, JointAlphaBetaDistributionMatchesEnumeration) {
    const MPSState& st = state_t1_k16();
    const int l = 2;
    const WindowSpec spec{l, 1.0, 7};
    std::map<std::pair<BondIndex, BondIndex>, double> exact;
    double total = 0.0;
    for (const auto& p : oracle::enumerate_pairs(st, l)) {
        exact[{{p.qa, p.ia}, {p.qb, p.ib}}] = p.weight;
        total += p.weight;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);

    const int n = 100000;
    std::map<std::pair<BondIndex, BondIndex>, int> counts;
    for (int k = 0; k < n; ++k) {
        RandomStream rng(7, static_cast<std::uint64_t>(k));
        const BondIndex a = sample_alpha(st, spec, rng);
        const BoundarySample s = sample_spins_and_beta(st, spec, a, rng);
        ++counts[{s.alpha, s.beta}];
    }
    double tv = 0.0;
    for (const auto& [key, w] : exact) {
        const double f = counts.count(key) ? counts.at(key) / static_cast<double>(n) : 0.0;
        tv += std::abs(f - w);
    }
    for (const auto& [key, c] : counts) EXPECT_TRUE(exact.count(key));
    EXPECT_LT(0.5 * tv, 0.01);
}

TEST(AssembleWindow, MatchesNaiveContraction) {
    const MPSState& st = state_t1_k16();
    const int l = 2;
    const WindowSpec spec{l, 1.0, 8};
    int checked = 0;
    for (const auto& p : oracle::enumerate_pairs(st, l)) {
        if (p.weight < 1e-20) continue;
        BoundarySample s;
        s.alpha = {p.qa, p.ia};
        s.beta = {p.qb, p.ib};
        const WindowState w = assemble_window_state(st, spec, s);
        double diff = 0.0;
        for (std::size_t c = 0; c < w.amplitudes.size(); ++c) diff = std::max(diff, std::abs(w.amplitudes[c] - p.amps[c]));
        EXPECT_LT(diff, 1e-12);
        EXPECT_EQ(w.total_sz_sector, p.qb - p.qa);
        for (std::size_t c = 0; c < w.amplitudes.size(); ++c)
            if (std::popcount(c) != neel_window_ups(l) + w.total_sz_sector) EXPECT_EQ(w.amplitudes[c], Complex(0.0, 0.0));
        double n2 = 0.0;
        for (const auto& a : w.amplitudes) n2 += std::norm(a);
        EXPECT_NEAR(n2, 1.0, 1e-12);
        ++checked;
    }
    EXPECT_GT(checked, 20);
}

TEST(AssembleWindow, BlockedEqualsUnblocked) {
    const MPSState& st = state_t2_k64();
    for (int l : {2, 3, 4}) {
        const WindowSpec spec{l, 2.0, 10};
        for (std::uint64_t id = 0; id < 10; ++id) {
            RandomStream rng(10, id);
            const BoundarySample s = sample_spins_and_beta(st, spec, sample_alpha(st, spec, rng), rng);
            const WindowState a = assemble_window_state(st, spec, s);
            const WindowState b = assemble_window_state_unblocked(st, spec, s);
            double diff = 0.0;
            for (std::size_t c = 0; c < a.amplitudes.size(); ++c) diff = std::max(diff, std::abs(a.amplitudes[c] - b.amplitudes[c]));
            EXPECT_LT(diff, 1e-12);
        }
    }
}

TEST(AssembleWindow, ZeroWeightPairIsRejected) {
    const MPSState& st = state_t1_k16();
    const int l = 2;
    bool found = false;
    for (const auto& p : oracle::enumerate_pairs(st, l)) {
        if (p.weight != 0.0) continue;
        BoundarySample s;
        s.alpha = {p.qa, p.ia};
        s.beta = {p.qb, p.ib};
        EXPECT_THROW(assemble_window_state(st, WindowSpec{l, 1.0, 0}, s), NumericalError);
        found = true;
        break;
    }
    EXPECT_TRUE(found);
}

// Sum over every (alpha, beta) of weight times the window expectation
// reproduces the infinite-chain value, both at t_init and after evolving the
// windows (compared against the window density matrix evolved densely).
TEST(Unbiasedness, ExhaustiveSumEqualsDirect) {
    const MPSState& st = state_t1_k16();
    const int l = 2;
    const WindowSpec spec{l, 1.0, 0};
    const SparseWindowHamiltonian h(l, 0.5);
    const EvolverParams ev{1.0 / 3.0, 20, 1.0, 2.0};
    std::vector<double> sum(4, 0.0);
    for (const auto& p : oracle::enumerate_pairs(st, l)) {
        if (p.weight == 0.0) continue;
        BoundarySample s;
        s.alpha = {p.qa, p.ia};
        s.beta = {p.qb, p.ib};
        const auto series = evolve_and_measure(assemble_window_state(st, spec, s), h, ev);
        for (std::size_t k = 0; k < series.size(); ++k) sum[k] += p.weight * series[k].sz0;
    }
    EXPECT_NEAR(sum[0], expect_sz(st, Sublattice::A), 1e-10);

    const Matrix rho0 = oracle::window_rdm(st, l);
    EXPECT_NEAR(rho0.trace().real(), 1.0, 1e-12);
    const Matrix sz = oracle::embed(oracle::pauli_sz(), l, 2 * l + 1);
    const Matrix hd = oracle::chain_hamiltonian(2 * l + 1, 0.5);
    for (std::size_t k = 0; k < 4; ++k) {
        const Matrix u = oracle::expm_hermitian(hd, k / 3.0);
        const double ref = (u * rho0 * u.adjoint() * sz).trace().real();
        EXPECT_NEAR(sum[k], ref, 1e-10) << "k=" << k;
    }
}
