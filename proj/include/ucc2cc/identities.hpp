#pragma once

#include "opalg.hpp"
#include "symcoef.hpp"

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <string>
#include <vector>

namespace ucc2cc {

/// One factorized-UCC factor exp(theta (T - T+)) with T a pure excitation.
struct UCCFactor {
    AngleId angle;
    AOperator excitation;

    UCCFactor() = default;
    UCCFactor(AngleId a, AOperator t) : angle(std::move(a)), excitation(t)
    {
        if (excitation.rank() < 1 || excitation.has_projectors() || excitation.creators() & excitation.annihilators())
            throw NonCanonicalInput("UCC factor needs a pure excitation, got " + excitation.str());
    }

    OperatorSum t() const { return OperatorSum(excitation); }
    OperatorSum t_dagger() const
    {
        OperatorSum out;
        out.add(adjoint(excitation), ScalarExpr(1));
        return out;
    }
    /// P+ = T T+ : virtuals of the factor occupied, its occupieds empty.
    AOperator p_plus() const { return AOperator::projector(excitation.creators(), excitation.annihilators()); }
    /// P- = T+ T
    AOperator p_minus() const { return AOperator::projector(excitation.annihilators(), excitation.creators()); }
};

enum class FactorKind { identity, excitation, deexcitation, projection, mixed };

inline const char* to_string(FactorKind k)
{
    switch (k) {
    case FactorKind::identity: return "identity";
    case FactorKind::excitation: return "excitation";
    case FactorKind::deexcitation: return "deexcitation";
    case FactorKind::projection: return "projection";
    case FactorKind::mixed: return "mixed";
    }
    return "?";
}

/// exp(exponent)
struct ExpFactor {
    OperatorSum exponent;

    ExpFactor() = default;
    explicit ExpFactor(OperatorSum e) : exponent(std::move(e)) {}
    ExpFactor(const AOperator& op, ScalarExpr coeff) : exponent(op, std::move(coeff)) {}

    FactorKind kind(const OrbitalSpace& space) const
    {
        if (exponent.empty()) return FactorKind::identity;
        bool exc = true, dex = true, proj = true;
        for (const auto& [op, c] : exponent.terms()) {
            exc = exc && op.is_excitation(space);
            dex = dex && op.is_deexcitation(space);
            proj = proj && op.is_projection();
        }
        if (exc) return FactorKind::excitation;
        if (dex) return FactorKind::deexcitation;
        if (proj) return FactorKind::projection;
        return FactorKind::mixed;
    }

    std::string str() const { return "exp(" + exponent.str() + ")"; }

    friend bool operator==(const ExpFactor&, const ExpFactor&) = default;
};

/// 1/2 (P+ - P-)
inline OperatorSum sz_of(const UCCFactor& f)
{
    OperatorSum out;
    out.add(f.p_plus(), ScalarExpr(Rational(1, 2)));
    out.add(f.p_minus(), ScalarExpr(Rational(-1, 2)));
    return out;
}

/// I + sin(theta) (T - T+) + (cos(theta) - 1)(T T+ + T+ T)
inline OperatorSum euler_form(const UCCFactor& f)
{
    const ScalarExpr s = ScalarExpr::sin(f.angle);
    const ScalarExpr cm1 = ScalarExpr::cos(f.angle) - ScalarExpr(1);
    OperatorSum out = OperatorSum::identity();
    out += s * (f.t() - f.t_dagger());
    out += cm1 * (f.t() * f.t_dagger() + f.t_dagger() * f.t());
    return out;
}

/// exp(tan T) exp(-lncos (P+ - P-)) exp(-tan T+)
inline std::array<ExpFactor, 3> disentangle(const UCCFactor& f)
{
    const ScalarExpr tan = ScalarExpr::tan(f.angle);
    const ScalarExpr lc = ScalarExpr::lncos(f.angle);
    OperatorSum mid;
    mid.add(f.p_plus(), -lc);
    mid.add(f.p_minus(), lc);
    return {ExpFactor(tan * f.t()), ExpFactor(mid), ExpFactor(-tan * f.t_dagger())};
}

/// exp(-tan T+) exp(+lncos (P+ - P-)) exp(tan T)
inline std::array<ExpFactor, 3> disentangle_reversed(const UCCFactor& f)
{
    const ScalarExpr tan = ScalarExpr::tan(f.angle);
    const ScalarExpr lc = ScalarExpr::lncos(f.angle);
    OperatorSum mid;
    mid.add(f.p_plus(), lc);
    mid.add(f.p_minus(), -lc);
    return {ExpFactor(-tan * f.t_dagger()), ExpFactor(mid), ExpFactor(tan * f.t())};
}

// ---------------------------------------------------------------------------
// 2x2 coefficient solver with sigma+- = sigma_x +- i sigma_y.

using Complex = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;

inline Mat2 sigma_plus()
{
    Mat2 m;
    m << 0, 2, 0, 0;
    return m;
}
inline Mat2 sigma_minus()
{
    Mat2 m;
    m << 0, 0, 2, 0;
    return m;
}
inline Mat2 sigma_z()
{
    Mat2 m;
    m << 1, 0, 0, -1;
    return m;
}

enum class DisentangleOrder {
    forward,  // e^{a s+} e^{b sz} e^{c s-}
    reversed, // e^{c s-} e^{b sz} e^{a s+}
};

struct DisentangleCoefficients {
    Complex a, b, c;
};

inline Mat2 disentangled_product(const DisentangleCoefficients& k, DisentangleOrder order)
{
    // s+- are nilpotent and sz is diagonal, so each exponential is closed form.
    const Mat2 ep = Mat2::Identity() + k.a * sigma_plus();
    const Mat2 em = Mat2::Identity() + k.c * sigma_minus();
    Mat2 ez = Mat2::Zero();
    ez(0, 0) = std::exp(k.b);
    ez(1, 1) = std::exp(-k.b);
    return order == DisentangleOrder::forward ? Mat2(ep * ez * em) : Mat2(em * ez * ep);
}

/// Coefficients a, b, c reproducing a unimodular 2x2 target in the given order.
inline DisentangleCoefficients solve_disentangle(const Mat2& m, DisentangleOrder order)
{
    DisentangleCoefficients k;
    if (order == DisentangleOrder::forward) {
        if (std::abs(m(1, 1)) < 1e-12) throw AngleOutOfDomain("lower diagonal entry vanishes");
        k.b = -std::log(m(1, 1));
        const Complex eb = 1.0 / m(1, 1);
        k.a = m(0, 1) * eb / 2.0;
        k.c = m(1, 0) * eb / 2.0;
    } else {
        if (std::abs(m(0, 0)) < 1e-12) throw AngleOutOfDomain("upper diagonal entry vanishes");
        k.b = std::log(m(0, 0));
        k.a = m(0, 1) / (2.0 * m(0, 0));
        k.c = m(1, 0) / (2.0 * m(0, 0));
    }
    return k;
}

/// exp(-i theta sigma_x)
inline Mat2 ucc_factor_2x2(double theta)
{
    Mat2 m;
    const Complex mi(0, -1);
    m << std::cos(theta), mi * std::sin(theta), mi * std::sin(theta), std::cos(theta);
    return m;
}

} // namespace ucc2cc
