#include <ucc2cc/opalg.hpp>

#include "jw_matrices.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ucc2cc;

namespace {

constexpr int kModes = 6;

jw::Mat matrix_of(const AOperator& op)
{
    return jw::a_operator(kModes, op.a_indices(), op.b_indices(), op.c_indices(), op.d_indices());
}

jw::Mat matrix_of(const RawAOperator& r) { return jw::a_operator(kModes, r.a, r.b, r.c, r.d); }

jw::Mat matrix_of(const std::optional<SignedOp>& s)
{
    if (!s) return jw::Mat::Zero(1 << kModes, 1 << kModes);
    return s->sign * matrix_of(s->op);
}

// Random canonical operator on kModes modes.
AOperator random_op(std::mt19937& rng)
{
    std::uniform_int_distribution<int> role(0, 4);
    for (;;) {
        Mask cre = 0, ann = 0, num = 0, hole = 0;
        for (int p = 0; p < kModes; ++p) {
            switch (role(rng)) {
            case 1: cre |= bit(p); break;
            case 2: ann |= bit(p); break;
            case 3: num |= bit(p); break;
            case 4: hole |= bit(p); break;
            default: break;
            }
        }
        if (std::popcount(cre) == std::popcount(ann)) return AOperator::from_masks(cre, ann, num, hole);
    }
}

RawAOperator random_raw(std::mt19937& rng)
{
    std::uniform_int_distribution<int> len(0, 3), idx(0, kModes - 1), pl(0, 2);
    RawAOperator r;
    const int n = len(rng);
    for (int k = 0; k < n; ++k) {
        r.a.push_back(idx(rng));
        r.b.push_back(idx(rng));
    }
    for (int k = pl(rng); k > 0; --k) r.c.push_back(idx(rng));
    for (int k = pl(rng); k > 0; --k) r.d.push_back(idx(rng));
    return r;
}

} // namespace

TEST(AOperator, RenderingAndIdentity)
{
    const std::vector<int> a{3, 5}, b{0, 1}, c{2}, d{4};
    const AOperator op = AOperator::from_indices(a, b, c, d);
    EXPECT_EQ(op.str(), "A(a3,a5;i0,i1|n2;h4)");
    EXPECT_EQ(AOperator().str(), "A(;|;)");
    EXPECT_TRUE(AOperator().is_identity());
    EXPECT_EQ(op.rank(), 2);
}

TEST(AOperator, RejectsNonCanonicalIndexLists)
{
    const std::vector<int> unsorted{5, 3}, ok{0, 1}, dup{2, 2}, one{1};
    EXPECT_THROW(AOperator::from_indices(unsorted, ok), NonCanonicalInput);
    EXPECT_THROW(AOperator::from_indices(dup, ok), NonCanonicalInput);
    EXPECT_THROW(AOperator::from_indices(one, ok), NonCanonicalInput);
    const std::vector<int> a{3}, b{1}, c{3};
    EXPECT_THROW(AOperator::from_indices(a, b, c), NonCanonicalInput);
}

TEST(AOperator, ApplyMatchesDenseMatrix)
{
    std::mt19937 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const AOperator op = random_op(rng);
        const jw::Mat m = matrix_of(op);
        for (Mask det = 0; det < (Mask{1} << kModes); ++det) {
            const auto r = op.apply(det);
            for (int row = 0; row < (1 << kModes); ++row) {
                const double expect = r && static_cast<int>(r->second) == row ? r->first : 0.0;
                ASSERT_EQ(m(row, static_cast<int>(det)), expect) << op.str() << " on " << det;
            }
        }
    }
}

TEST(AOperator, ProductMatchesDenseMatrix)
{
    std::mt19937 rng(12);
    for (int trial = 0; trial < 400; ++trial) {
        const AOperator x = random_op(rng), y = random_op(rng);
        ASSERT_TRUE(matrix_of(product(x, y)).isApprox(matrix_of(x) * matrix_of(y)) ||
                    (matrix_of(x) * matrix_of(y)).isZero())
            << x.str() << " * " << y.str();
        if (!product(x, y)) { ASSERT_TRUE((matrix_of(x) * matrix_of(y)).isZero()); }
    }
}

TEST(AOperator, CanonicalizeMatchesDenseMatrix)
{
    std::mt19937 rng(13);
    int nonzero = 0;
    for (int trial = 0; trial < 600; ++trial) {
        const RawAOperator raw = random_raw(rng);
        const auto s = canonicalize(raw);
        const jw::Mat expect = matrix_of(raw);
        ASSERT_TRUE((matrix_of(s) - expect).isZero()) << trial;
        nonzero += s.has_value();
    }
    EXPECT_GT(nonzero, 50);
}

TEST(AOperator, CanonicalizeKnownReductions)
{
    // a+_1 a_1 -> n_1
    auto s = canonicalize({{1}, {1}, {}, {}});
    ASSERT_TRUE(s);
    EXPECT_EQ(s->op.str(), "A(;|n1;)");
    // a+_2 a_0 (1-n_0) vanishes
    EXPECT_FALSE(canonicalize({{2}, {0}, {}, {0}}));
    // a+_2 a+_3 a_1 a_0 with reversed creators flips sign
    auto t = canonicalize({{3, 2}, {0, 1}, {}, {}});
    ASSERT_TRUE(t);
    EXPECT_EQ(t->sign, -1);
    EXPECT_EQ(t->op.str(), "A(a2,a3;i0,i1|;)");
}

TEST(AOperator, AdjointMatchesTranspose)
{
    std::mt19937 rng(14);
    for (int trial = 0; trial < 200; ++trial) {
        const AOperator op = random_op(rng);
        const SignedOp adj = adjoint(op);
        ASSERT_TRUE((adj.sign * matrix_of(adj.op) - matrix_of(op).transpose()).isZero()) << op.str();
    }
}

TEST(AOperator, NilpotentWhenMoving)
{
    std::mt19937 rng(15);
    for (int trial = 0; trial < 200; ++trial) {
        const AOperator op = random_op(rng);
        const auto sq = product(op, op);
        if (op.is_projection()) {
            ASSERT_TRUE(sq);
            EXPECT_EQ(sq->op, op);
            EXPECT_EQ(sq->sign, 1);
        } else {
            EXPECT_FALSE(sq) << op.str();
        }
    }
}

TEST(AOperator, CommutatorPrefilterIsSound)
{
    std::mt19937 rng(16);
    for (int trial = 0; trial < 400; ++trial) {
        const AOperator x = random_op(rng), y = random_op(rng);
        const jw::Mat c = matrix_of(x) * matrix_of(y) - matrix_of(y) * matrix_of(x);
        if (!may_not_commute(x, y)) { ASSERT_TRUE(c.isZero()) << x.str() << " " << y.str(); }
        IntegerOperatorSum k = commutator<long long>(x, y);
        jw::Mat got = jw::Mat::Zero(1 << kModes, 1 << kModes);
        for (const auto& [op, v] : k.terms()) got += static_cast<double>(v) * matrix_of(op);
        ASSERT_TRUE((got - c).isZero());
    }
}

TEST(AOperator, MatchingAndClassification)
{
    const OrbitalSpace s{6, 2};
    const std::vector<int> i0{0}, i1{1}, a2{2}, a3{3}, oo{0, 1}, vv{2, 3};
    const AOperator t1 = make_excitation(i0, a2, s);
    const AOperator t2 = make_excitation(oo, vv, s);
    EXPECT_TRUE(t1.is_pure_excitation(s));
    EXPECT_TRUE(adjoint(t1).op.is_pure_deexcitation(s));
    EXPECT_TRUE(matches(adjoint(t1).op, t2));
    EXPECT_FALSE(matches(t1, t2));
    EXPECT_THROW(make_excitation(a2, i0, s), NonCanonicalInput);
}

TEST(OperatorSum, MergesLikeTermsAndDropsZeros)
{
    const std::vector<int> i0{0}, a2{2};
    const AOperator op = AOperator::from_indices(a2, i0);
    OperatorSum s(op, ScalarExpr::sin("t"));
    s.add(op, -ScalarExpr::sin("t"));
    EXPECT_TRUE(s.empty());
    EXPECT_EQ(s.str(), "0");
    OperatorSum u(op, ScalarExpr(2));
    EXPECT_EQ(u.str(), "[(+2)] A(a2;i0|;)");
}
