#pragma once

#include "errors.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace ucc2cc {

using Rational = boost::multiprecision::cpp_rational;

inline std::string to_string(const Rational& r)
{
    std::ostringstream os;
    if (r >= 0) os << '+';
    os << r;
    return os.str();
}

/// Names one UCC amplitude. A derived angle (Trotter slice, merged repeat)
/// carries the linear combination of primitive angles it stands for, so
/// numeric evaluation only ever needs primitive assignments.
struct AngleId {
    std::string label;
    std::vector<std::pair<std::string, Rational>> combination;

    AngleId() = default;
    AngleId(std::string l) : label(std::move(l)) {}
    AngleId(const char* l) : label(l) {}

    bool is_primitive() const { return combination.empty(); }

    static AngleId scaled(const AngleId& base, const Rational& factor, std::string label)
    {
        AngleId out(std::move(label));
        for (const auto& [name, w] : base.primitive_weights()) out.combination.emplace_back(name, w * factor);
        return out;
    }

    static AngleId sum(const AngleId& x, const AngleId& y, std::string label)
    {
        std::map<std::string, Rational> acc;
        for (const auto& [name, w] : x.primitive_weights()) acc[name] += w;
        for (const auto& [name, w] : y.primitive_weights()) acc[name] += w;
        AngleId out(std::move(label));
        for (auto& [name, w] : acc)
            if (w != 0) out.combination.emplace_back(name, w);
        return out;
    }

    std::vector<std::pair<std::string, Rational>> primitive_weights() const
    {
        if (is_primitive()) return {{label, Rational(1)}};
        return combination;
    }

    friend bool operator==(const AngleId& x, const AngleId& y) { return x.label == y.label; }
    friend auto operator<=>(const AngleId& x, const AngleId& y) { return x.label <=> y.label; }
};

using AngleAssignment = std::map<std::string, double>;

// poly and lnpoly atoms stand for a whole (non-monomial) expression p, as p
// and ln(p). They appear only when a mutual match is turned over.
enum class TrigFn : std::uint8_t { sin, cos, lncos, poly, lnpoly };

inline const char* to_string(TrigFn f)
{
    switch (f) {
    case TrigFn::sin: return "sin";
    case TrigFn::cos: return "cos";
    case TrigFn::lncos: return "lncos";
    case TrigFn::poly: return "poly";
    case TrigFn::lnpoly: return "ln";
    }
    return "?";
}

class ScalarExpr;

struct Atom {
    AngleId angle; // for poly atoms the label is the canonical rendering of *poly
    TrigFn fn;
    std::shared_ptr<const ScalarExpr> poly;

    bool is_poly() const { return fn == TrigFn::poly || fn == TrigFn::lnpoly; }

    friend bool operator==(const Atom& x, const Atom& y) { return x.angle == y.angle && x.fn == y.fn; }
    friend auto operator<=>(const Atom& x, const Atom& y)
    {
        if (auto c = x.angle <=> y.angle; c != 0) return c;
        return x.fn <=> y.fn;
    }
};

/// Atom -> nonzero integer exponent.
using Monomial = std::map<Atom, int>;

namespace detail {

struct AngleValues {
    double sin, cos, lncos;
};

inline double angle_value(const AngleId& id, const AngleAssignment& assign)
{
    double theta = 0.0;
    for (const auto& [name, w] : id.primitive_weights()) {
        auto it = assign.find(name);
        if (it == assign.end()) throw UnassignedAngle("no value assigned to angle '" + name + "'");
        theta += static_cast<double>(w) * it->second;
    }
    return theta;
}

inline AngleValues angle_values(const AngleId& id, const AngleAssignment& assign)
{
    const double theta = angle_value(id, assign);
    if (!(std::abs(theta) < std::numbers::pi / 2))
        throw AngleOutOfDomain("angle '" + id.label + "' = " + std::to_string(theta) + " outside (-pi/2, pi/2)");
    const double c = std::cos(theta);
    return {std::sin(theta), c, std::log(c)};
}

inline double ipow(double x, int k)
{
    if (k < 0) return 1.0 / ipow(x, -k);
    double r = 1.0;
    while (k) {
        if (k & 1) r *= x;
        x *= x;
        k >>= 1;
    }
    return r;
}

} // namespace detail

/// Exact coefficient: rational-weighted sum of monomials in sin, cos and
/// ln(cos) of named angles. tan and sec are stored as sin*cos^-1 and cos^-1.
class ScalarExpr {
public:
    ScalarExpr() = default;
    ScalarExpr(int c) : ScalarExpr(Rational(c)) {}
    ScalarExpr(const Rational& c)
    {
        if (c != 0) terms_.emplace(Monomial{}, c);
    }

    static ScalarExpr atom(const AngleId& a, TrigFn fn, int power = 1)
    {
        ScalarExpr out;
        if (power == 0) return ScalarExpr(1);
        out.terms_.emplace(Monomial{{Atom{a, fn, nullptr}, power}}, Rational(1));
        return out;
    }
    static ScalarExpr atom(const Atom& a, int power)
    {
        ScalarExpr out;
        if (power == 0) return ScalarExpr(1);
        out.terms_.emplace(Monomial{{a, power}}, Rational(1));
        return out;
    }
    static ScalarExpr sin(const AngleId& a) { return atom(a, TrigFn::sin); }
    static ScalarExpr cos(const AngleId& a, int power = 1) { return atom(a, TrigFn::cos, power); }
    static ScalarExpr lncos(const AngleId& a) { return atom(a, TrigFn::lncos); }
    static ScalarExpr tan(const AngleId& a) { return sin(a) * cos(a, -1); }
    static ScalarExpr sec(const AngleId& a, int power = 1) { return cos(a, -power); }

    const std::map<Monomial, Rational>& terms() const { return terms_; }

    bool is_zero() const { return terms_.empty(); }
    bool is_constant() const { return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first.empty()); }
    bool is_monomial() const { return terms_.size() == 1; }
    std::size_t size() const { return terms_.size(); }

    /// Monomial count including the expressions inside polynomial atoms.
    std::size_t complexity() const
    {
        std::size_t n = terms_.size();
        std::set<std::string> seen;
        for (const auto& [m, c] : terms_)
            for (const auto& [a, e] : m)
                if (a.is_poly() && seen.insert(a.angle.label).second) n += a.poly->complexity();
        return n;
    }

    Rational constant_value() const
    {
        auto it = terms_.find(Monomial{});
        return it == terms_.end() ? Rational(0) : it->second;
    }

    std::set<AngleId> angles() const
    {
        std::set<AngleId> out;
        for (const auto& [m, c] : terms_)
            for (const auto& [atom, e] : m) {
                if (atom.is_poly())
                    out.merge(atom.poly->angles());
                else
                    out.insert(atom.angle);
            }
        return out;
    }

    /// p^k. A non-monomial p is written as unit * core with unit a monomial and
    /// core a primitive trigonometric polynomial; core^k becomes an atom.
    static ScalarExpr power_of(const ScalarExpr& p, int k)
    {
        if (p.is_zero() && k < 0) throw std::domain_error("negative power of zero");
        if (p.is_monomial() || k == 0) return p.pow(k);
        ScalarExpr unit, core;
        if (!split(p, unit, core)) return opaque(p, TrigFn::poly, k);
        if (core == ScalarExpr(1)) return unit.pow(k);
        return unit.pow(k) * opaque(core, TrigFn::poly, k);
    }

    /// ln(p); cosine and polynomial-atom powers become logarithm atoms.
    static ScalarExpr log_of(const ScalarExpr& p)
    {
        if (p == ScalarExpr(1)) return ScalarExpr();
        ScalarExpr out;
        if (p.is_monomial() && log_of_unit(p, out)) return out;
        ScalarExpr unit, core;
        if (!p.is_monomial() && split(p, unit, core) && log_of_unit(unit, out))
            return out + opaque(core, TrigFn::lnpoly, 1);
        return opaque(p, TrigFn::lnpoly, 1);
    }

    ScalarExpr operator-() const
    {
        ScalarExpr out = *this;
        for (auto& [m, c] : out.terms_) c = -c;
        return out;
    }

    ScalarExpr& operator+=(const ScalarExpr& y)
    {
        for (const auto& [m, c] : y.terms_) add_term(m, c);
        return *this;
    }
    ScalarExpr& operator-=(const ScalarExpr& y)
    {
        for (const auto& [m, c] : y.terms_) add_term(m, -c);
        return *this;
    }
    ScalarExpr& operator*=(const ScalarExpr& y)
    {
        *this = *this * y;
        return *this;
    }

    friend ScalarExpr operator+(ScalarExpr x, const ScalarExpr& y) { return x += y; }
    friend ScalarExpr operator-(ScalarExpr x, const ScalarExpr& y) { return x -= y; }

    friend ScalarExpr operator*(const ScalarExpr& x, const ScalarExpr& y)
    {
        ScalarExpr out;
        for (const auto& [mx, cx] : x.terms_)
            for (const auto& [my, cy] : y.terms_) out.add_term(multiply(mx, my), cx * cy);
        return out;
    }

    /// Integer power; negative powers are only defined for monomials.
    ScalarExpr pow(int k) const
    {
        if (k < 0) {
            if (!is_monomial()) throw std::domain_error("negative power of a non-monomial ScalarExpr");
            const auto& [m, c] = *terms_.begin();
            ScalarExpr out;
            Monomial inv;
            for (const auto& [a, e] : m) inv.emplace(a, -e * -k);
            Rational rc = 1;
            for (int i = 0; i < -k; ++i) rc /= c;
            out.terms_.emplace(std::move(inv), rc);
            return out;
        }
        ScalarExpr out(1);
        for (int i = 0; i < k; ++i) out *= *this;
        return out;
    }

    /// Structural equality of canonical forms.
    friend bool operator==(const ScalarExpr& x, const ScalarExpr& y) { return x.terms_ == y.terms_; }

    double eval(const AngleAssignment& assign) const
    {
        std::map<AngleId, detail::AngleValues> cache;
        double total = 0.0;
        for (const auto& [m, c] : terms_) {
            double v = static_cast<double>(c);
            for (const auto& [atom, e] : m) {
                if (atom.is_poly()) {
                    const double pv = atom.poly->eval(assign);
                    if (atom.fn == TrigFn::lnpoly) {
                        if (!(pv > 0.0)) throw AngleOutOfDomain("logarithm of non-positive value " + std::to_string(pv));
                        v *= detail::ipow(std::log(pv), e);
                    } else {
                        v *= detail::ipow(pv, e);
                    }
                    continue;
                }
                auto it = cache.find(atom.angle);
                if (it == cache.end()) it = cache.emplace(atom.angle, detail::angle_values(atom.angle, assign)).first;
                const double base = atom.fn == TrigFn::sin ? it->second.sin
                                  : atom.fn == TrigFn::cos ? it->second.cos
                                                           : it->second.lncos;
                v *= detail::ipow(base, e);
            }
            total += v;
        }
        return total;
    }

    /// e.g. "(+1) sin(t1) cos(t1)^-1 cos(t2)^-1"; monomials joined by " + ".
    std::string str() const
    {
        if (terms_.empty()) return "0";
        std::string out;
        bool first = true;
        for (const auto& [m, c] : terms_) {
            if (!first) out += " + ";
            first = false;
            out += "(" + to_string(c) + ")";
            for (const auto& [atom, e] : m) {
                out += " ";
                if (atom.fn == TrigFn::poly)
                    out += "[" + atom.angle.label + "]";
                else if (atom.fn == TrigFn::lnpoly)
                    out += "ln[" + atom.angle.label + "]";
                else
                    out += std::string(to_string(atom.fn)) + "(" + atom.angle.label + ")";
                if (e != 1) out += "^" + std::to_string(e);
            }
        }
        return out;
    }

    nlohmann::json to_json() const
    {
        auto arr = nlohmann::json::array();
        for (const auto& [m, c] : terms_) {
            auto atoms = nlohmann::json::array();
            for (const auto& [atom, e] : m)
                atoms.push_back({{"angle", atom.angle.label}, {"fn", to_string(atom.fn)}, {"exp", e}});
            arr.push_back({{"coeff", to_string(c)}, {"atoms", atoms}});
        }
        return arr;
    }

private:
    static ScalarExpr opaque(const ScalarExpr& p, TrigFn fn, int k)
    {
        ScalarExpr out;
        if (k == 0) return ScalarExpr(1);
        out.terms_.emplace(Monomial{{Atom{AngleId(p.str()), fn, std::make_shared<const ScalarExpr>(p)}, k}},
                           Rational(1));
        return out;
    }

    static bool log_of_unit(const ScalarExpr& u, ScalarExpr& out)
    {
        if (!u.is_monomial() || u.terms_.begin()->second != 1) return false;
        out = ScalarExpr();
        for (const auto& [a, e] : u.terms_.begin()->first) {
            if (a.fn == TrigFn::cos)
                out += Rational(e) * lncos(a.angle);
            else if (a.fn == TrigFn::poly)
                out += Rational(e) * opaque(*a.poly, TrigFn::lnpoly, 1);
            else
                return false;
        }
        return true;
    }

    static ScalarExpr from_monomial(Monomial m, Rational c = 1)
    {
        ScalarExpr out;
        if (c != 0) out.terms_.emplace(std::move(m), c);
        return out;
    }

    /// p = unit * core: poly-atom denominators are cleared, positive poly-atom
    /// powers expanded, then the common monomial and leading coefficient pulled
    /// into unit. False if p holds logarithm atoms.
    static bool split(const ScalarExpr& p, ScalarExpr& unit, ScalarExpr& core)
    {
        Monomial denom;
        for (const auto& [m, c] : p.terms_)
            for (const auto& [a, e] : m) {
                if (a.fn == TrigFn::lnpoly || a.fn == TrigFn::lncos) return false;
                if (a.fn == TrigFn::poly && e < 0) {
                    auto [it, inserted] = denom.emplace(a, -e);
                    if (!inserted) it->second = std::max(it->second, -e);
                }
            }
        ScalarExpr flat;
        for (const auto& [m, c] : p.terms_) {
            ScalarExpr t = from_monomial({}, c);
            Monomial trig;
            for (const auto& [a, e] : multiply(m, denom)) {
                if (a.fn == TrigFn::poly)
                    t *= a.poly->pow(e);
                else
                    trig.emplace(a, e);
            }
            flat += t * from_monomial(std::move(trig));
        }
        if (flat.is_zero()) return false;
        Monomial common;
        std::set<Atom> seen;
        for (const auto& [m, c] : flat.terms_)
            for (const auto& [a, e] : m) seen.insert(a);
        for (const auto& a : seen) {
            int lo = 0;
            bool first = true;
            for (const auto& [m, c] : flat.terms_) {
                auto it = m.find(a);
                const int e = it == m.end() ? 0 : it->second;
                lo = first ? e : std::min(lo, e);
                first = false;
            }
            if (lo != 0) common.emplace(a, lo);
        }
        const Rational lead = flat.terms_.begin()->second;
        Monomial inv_common;
        for (const auto& [a, e] : common) inv_common.emplace(a, -e);
        core = flat * from_monomial(inv_common, 1 / lead);
        Monomial inv_denom;
        for (const auto& [a, e] : denom) inv_denom.emplace(a, -e);
        unit = from_monomial(multiply(common, inv_denom), lead);
        return true;
    }

    static Monomial multiply(const Monomial& x, const Monomial& y)
    {
        Monomial out = x;
        for (const auto& [atom, e] : y) {
            auto [it, inserted] = out.emplace(atom, e);
            if (!inserted) {
                it->second += e;
                if (it->second == 0) out.erase(it);
            }
        }
        return out;
    }

    void add_term(const Monomial& m, const Rational& c)
    {
        if (c == 0) return;
        auto [it, inserted] = terms_.emplace(m, c);
        if (!inserted) {
            it->second += c;
            if (it->second == 0) terms_.erase(it);
        }
    }

    std::map<Monomial, Rational> terms_;
};


inline double eval_numeric(const ScalarExpr& x, const AngleAssignment& assign) { return x.eval(assign); }

/// Structural equality backed by a numeric spot check at 8 random assignments
/// inside (-1.2, 1.2). Disagreement between the two means a canonicalization bug.
inline bool equal(const ScalarExpr& x, const ScalarExpr& y)
{
    const bool structural = x == y;
    std::set<AngleId> angles = x.angles();
    for (const auto& a : y.angles()) angles.insert(a);
    std::set<std::string> primitives;
    for (const auto& a : angles)
        for (const auto& [name, w] : a.primitive_weights()) primitives.insert(name);

    std::mt19937_64 rng(0x5eed);
    std::uniform_real_distribution<double> dist(-1.2, 1.2);
    bool numeric = true;
    for (int sample = 0; sample < 8 && numeric; ++sample) {
        AngleAssignment assign;
        for (const auto& p : primitives) assign[p] = dist(rng) / std::max<std::size_t>(1, angles.size());
        const double vx = x.eval(assign), vy = y.eval(assign);
        numeric = std::abs(vx - vy) <= 1e-9 * (1.0 + std::abs(vx) + std::abs(vy));
    }
    return structural && numeric;
}

/// exp(sum_k r_k ln cos(theta_k) + sum_l s_l ln p_l) = prod cos^r_k prod p_l^s_l,
/// for integer r_k, s_l. Any other exponent shape is outside the closed form and throws.
inline ScalarExpr exp_of_lncos_sum(const ScalarExpr& exponent)
{
    ScalarExpr out(1);
    for (const auto& [m, c] : exponent.terms()) {
        if (m.size() != 1 || m.begin()->second != 1 ||
            (m.begin()->first.fn != TrigFn::lncos && m.begin()->first.fn != TrigFn::lnpoly))
            throw std::domain_error("exponent is not a combination of logarithm atoms: " + exponent.str());
        if (denominator(c) != 1) throw std::domain_error("non-integer power in " + exponent.str());
        const Atom& a = m.begin()->first;
        const int k = static_cast<int>(numerator(c));
        out *= a.fn == TrigFn::lncos ? ScalarExpr::cos(a.angle, k) : ScalarExpr::power_of(*a.poly, k);
    }
    return out;
}

} // namespace ucc2cc
