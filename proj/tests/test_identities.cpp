#include <ucc2cc/fockoracle.hpp>
#include <ucc2cc/identities.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace ucc2cc;

namespace {

UCCFactor singles(int i, int a, const char* label, const OrbitalSpace& s)
{
    const std::vector<int> occ{i}, virt{a};
    return UCCFactor(label, make_excitation(occ, virt, s));
}

UCCFactor random_factor(std::mt19937& rng, const OrbitalSpace& s, int rank, const char* label)
{
    std::vector<int> occ(s.n_electrons), virt(s.n_orbitals - s.n_electrons);
    for (int p = 0; p < s.n_electrons; ++p) occ[p] = p;
    for (int p = s.n_electrons; p < s.n_orbitals; ++p) virt[p - s.n_electrons] = p;
    std::shuffle(occ.begin(), occ.end(), rng);
    std::shuffle(virt.begin(), virt.end(), rng);
    occ.resize(rank);
    virt.resize(rank);
    std::sort(occ.begin(), occ.end());
    std::sort(virt.begin(), virt.end());
    return UCCFactor(label, make_excitation(occ, virt, s));
}

DenseMatrix product_matrix(const std::array<ExpFactor, 3>& fs, int n, const AngleAssignment& v)
{
    return dense_matrix(fs[0], n, v) * dense_matrix(fs[1], n, v) * dense_matrix(fs[2], n, v);
}

} // namespace

TEST(Identities, SzOfSingles)
{
    const OrbitalSpace s{4, 2};
    const UCCFactor f = singles(0, 2, "t", s);
    EXPECT_EQ(sz_of(f).str(), "[(-1/2)] A(;|n0;h2) + [(+1/2)] A(;|n2;h0)");
}

TEST(Identities, TwiceSzIsCommutator)
{
    std::mt19937 rng(3);
    const OrbitalSpace s{8, 4};
    for (int rank = 1; rank <= 3; ++rank) {
        const UCCFactor f = random_factor(rng, s, rank, "t");
        EXPECT_EQ(ScalarExpr(2) * sz_of(f), commutator(f.t(), f.t_dagger()));
    }
}

TEST(Identities, PseudospinProjectorsAreProducts)
{
    std::mt19937 rng(4);
    const OrbitalSpace s{8, 4};
    for (int rank = 1; rank <= 3; ++rank) {
        const UCCFactor f = random_factor(rng, s, rank, "t");
        EXPECT_EQ(f.t() * f.t_dagger(), OperatorSum(f.p_plus()));
        EXPECT_EQ(f.t_dagger() * f.t(), OperatorSum(f.p_minus()));
    }
}

TEST(Identities, EulerFormAtZeroIsIdentity)
{
    const OrbitalSpace s{4, 2};
    const UCCFactor f = singles(1, 3, "t", s);
    EXPECT_TRUE(evaluate(euler_form(f), {{"t", 0.0}}) == NumericOperatorSum(AOperator{}, 1.0));
}

TEST(Identities, EulerFormSinglesRendering)
{
    const OrbitalSpace s{2, 1};
    const UCCFactor f = singles(0, 1, "t", s);
    EXPECT_EQ(euler_form(f).str(),
              "[(+1)] A(;|;) + [(-1) + (+1) cos(t)] A(;|n0;h1) + [(-1) + (+1) cos(t)] A(;|n1;h0) + "
              "[(-1) sin(t)] A(a0;i1|;) + [(+1) sin(t)] A(a1;i0|;)");
}

TEST(Identities, EulerFormMatchesMatrixExponential)
{
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> ang(-1.3, 1.3);
    const OrbitalSpace s{6, 3};
    for (int trial = 0; trial < 30; ++trial) {
        const UCCFactor f = random_factor(rng, s, 1 + trial % 3, "t");
        const AngleAssignment v{{"t", ang(rng)}};
        const DenseMatrix gen = dense_matrix(evaluate(ScalarExpr::atom("t", TrigFn::sin, 0) * (f.t() - f.t_dagger()), v), 6) *
                                v.at("t");
        const DenseMatrix euler = dense_matrix(evaluate(euler_form(f), v), 6);
        EXPECT_LT((euler - dense_exp(gen)).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((euler.transpose() * euler - DenseMatrix::Identity(64, 64)).cwiseAbs().maxCoeff(), 1e-13);
    }
}

TEST(Identities, GeneratorCubeIsMinusGenerator)
{
    std::mt19937 rng(6);
    const OrbitalSpace s{6, 3};
    for (int rank = 1; rank <= 3; ++rank) {
        const UCCFactor f = random_factor(rng, s, rank, "t");
        const OperatorSum g = f.t() - f.t_dagger();
        EXPECT_EQ(g * g * g, ScalarExpr(-1) * g);
    }
}

TEST(Identities, DisentangledProductsEqualEulerForm)
{
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> ang(-1.3, 1.3);
    const OrbitalSpace s{6, 3};
    for (int trial = 0; trial < 30; ++trial) {
        const UCCFactor f = random_factor(rng, s, 1 + trial % 3, "t");
        const AngleAssignment v{{"t", ang(rng)}};
        const DenseMatrix euler = dense_matrix(evaluate(euler_form(f), v), 6);
        EXPECT_LT((product_matrix(disentangle(f), 6, v) - euler).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((product_matrix(disentangle_reversed(f), 6, v) - euler).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Identities, DisentangleSmallCases)
{
    const OrbitalSpace s2{2, 1};
    const UCCFactor f = singles(0, 1, "t", s2);
    const AngleAssignment v{{"t", 0.3}};
    EXPECT_LT((product_matrix(disentangle(f), 2, v) - dense_matrix(evaluate(euler_form(f), v), 2)).cwiseAbs().maxCoeff(),
              1e-14);
    const OrbitalSpace s4{4, 2};
    const std::vector<int> occ{0, 1}, virt{2, 3};
    const UCCFactor d("t", make_excitation(occ, virt, s4));
    const AngleAssignment w{{"t", 0.4}};
    EXPECT_LT(
        (product_matrix(disentangle_reversed(d), 4, w) - dense_matrix(evaluate(euler_form(d), w), 4)).cwiseAbs().maxCoeff(),
        1e-14);
    for (const auto& e : disentangle(f)) EXPECT_TRUE(evaluate(e.exponent, {{"t", 0.0}}).empty());
}

TEST(Identities, DisentangleRendering)
{
    const OrbitalSpace s{2, 1};
    const auto fs = disentangle(singles(0, 1, "t", s));
    EXPECT_EQ(fs[0].str(), "exp([(+1) sin(t) cos(t)^-1] A(a1;i0|;))");
    EXPECT_EQ(fs[1].str(), "exp([(+1) lncos(t)] A(;|n0;h1) + [(-1) lncos(t)] A(;|n1;h0))");
    EXPECT_EQ(fs[2].str(), "exp([(-1) sin(t) cos(t)^-1] A(a0;i1|;))");
    EXPECT_EQ(fs[0].kind(s), FactorKind::excitation);
    EXPECT_EQ(fs[1].kind(s), FactorKind::projection);
    EXPECT_EQ(fs[2].kind(s), FactorKind::deexcitation);
}

TEST(Identities, CoefficientSolverReproducesTangentForm)
{
    for (double theta : {-1.2, -0.4, 0.0, 0.3, 0.7, 1.3}) {
        const Mat2 m = ucc_factor_2x2(theta);
        const auto k = solve_disentangle(m, DisentangleOrder::forward);
        const Complex half_i_tan(0, -0.5 * std::tan(theta));
        EXPECT_NEAR(std::abs(k.a - half_i_tan), 0.0, 1e-14);
        EXPECT_NEAR(std::abs(k.c - half_i_tan), 0.0, 1e-14);
        EXPECT_NEAR(std::abs(k.b - Complex(-std::log(std::cos(theta)), 0)), 0.0, 1e-14);
        EXPECT_LT((disentangled_product(k, DisentangleOrder::forward) - m).cwiseAbs().maxCoeff(), 1e-14);

        const auto r = solve_disentangle(m, DisentangleOrder::reversed);
        EXPECT_NEAR(std::abs(r.a - half_i_tan), 0.0, 1e-14);
        EXPECT_NEAR(std::abs(r.c - half_i_tan), 0.0, 1e-14);
        EXPECT_NEAR(std::abs(r.b - Complex(std::log(std::cos(theta)), 0)), 0.0, 1e-14);
        EXPECT_LT((disentangled_product(r, DisentangleOrder::reversed) - m).cwiseAbs().maxCoeff(), 1e-14);
    }
}

TEST(Identities, OutOfDomainAngle)
{
    const OrbitalSpace s{2, 1};
    const auto fs = disentangle(singles(0, 1, "t", s));
    EXPECT_THROW(evaluate(fs[0].exponent, {{"t", 1.6}}), AngleOutOfDomain);
    EXPECT_THROW(solve_disentangle(ucc_factor_2x2(std::numbers::pi / 2), DisentangleOrder::forward), AngleOutOfDomain);
}
