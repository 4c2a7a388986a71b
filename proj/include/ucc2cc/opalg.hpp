#pragma once

#include "errors.hpp"
#include "symcoef.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ucc2cc {

using Mask = std::uint64_t;
inline constexpr int kMaxOrbitals = 64;

inline Mask bit(int p) { return Mask{1} << p; }

inline std::vector<int> indices_of(Mask m)
{
    std::vector<int> out;
    while (m) {
        out.push_back(std::countr_zero(m));
        m &= m - 1;
    }
    return out;
}

/// Reference determinant: orbitals 0..n_electrons-1 occupied.
struct OrbitalSpace {
    int n_orbitals = 0;
    int n_electrons = 0;

    Mask occupied() const { return n_electrons >= 64 ? ~Mask{0} : bit(n_electrons) - 1; }
    Mask all() const { return n_orbitals >= 64 ? ~Mask{0} : bit(n_orbitals) - 1; }
    Mask virtuals() const { return all() & ~occupied(); }
    bool is_occupied(int p) const { return p >= 0 && p < n_electrons; }
    bool is_virtual(int p) const { return p >= n_electrons && p < n_orbitals; }
};

/// Jordan-Wigner parity of the occupied orbitals strictly below p.
inline int jw_sign(Mask det, int p)
{
    return (std::popcount(det & (bit(p) - 1)) & 1) ? -1 : 1;
}

/// Canonical operator string
///   a+_{a1} .. a+_{an} a_{bn} .. a_{b1} n_{c1} .. n_{cm} (1-n_{d1}) .. (1-n_{dm'})
/// with the four index sets pairwise disjoint and each sorted ascending. The
/// index sets are held as bitmasks, so canonical ordering is implicit.
class AOperator {
public:
    AOperator() = default; // identity

    /// Build from already-canonical index lists; anything else is rejected.
    static AOperator from_indices(std::span<const int> creators, std::span<const int> annihilators,
                                  std::span<const int> numbers = {}, std::span<const int> holes = {})
    {
        if (creators.size() != annihilators.size())
            throw NonCanonicalInput("creator and annihilator counts differ");
        AOperator op;
        op.cre_ = strict_mask(creators, "creators");
        op.ann_ = strict_mask(annihilators, "annihilators");
        op.num_ = strict_mask(numbers, "number projectors");
        op.hole_ = strict_mask(holes, "hole projectors");
        const Mask sets[] = {op.cre_, op.ann_, op.num_, op.hole_};
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j)
                if (sets[i] & sets[j]) throw NonCanonicalInput("index sets overlap in " + op.str());
        return op;
    }

    static AOperator from_masks(Mask cre, Mask ann, Mask num, Mask hole)
    {
        AOperator op;
        op.cre_ = cre;
        op.ann_ = ann;
        op.num_ = num;
        op.hole_ = hole;
        return op;
    }

    static AOperator projector(Mask num, Mask hole) { return from_masks(0, 0, num, hole); }

    Mask creators() const { return cre_; }
    Mask annihilators() const { return ann_; }
    Mask numbers() const { return num_; }
    Mask holes() const { return hole_; }
    Mask support() const { return cre_ | ann_ | num_ | hole_; }
    Mask moved() const { return cre_ | ann_; }

    std::vector<int> a_indices() const { return indices_of(cre_); }
    std::vector<int> b_indices() const { return indices_of(ann_); }
    std::vector<int> c_indices() const { return indices_of(num_); }
    std::vector<int> d_indices() const { return indices_of(hole_); }

    int rank() const { return std::popcount(cre_); }
    bool is_identity() const { return support() == 0; }
    bool is_projection() const { return moved() == 0; }
    bool has_projectors() const { return (num_ | hole_) != 0; }

    /// Excitation type: creators virtual, annihilators occupied; projectors allowed.
    bool is_excitation(const OrbitalSpace& s) const
    {
        return cre_ != 0 && (cre_ & ~s.virtuals()) == 0 && (ann_ & ~s.occupied()) == 0;
    }
    bool is_pure_excitation(const OrbitalSpace& s) const { return is_excitation(s) && !has_projectors(); }
    bool is_deexcitation(const OrbitalSpace& s) const
    {
        return cre_ != 0 && (cre_ & ~s.occupied()) == 0 && (ann_ & ~s.virtuals()) == 0;
    }
    bool is_pure_deexcitation(const OrbitalSpace& s) const { return is_deexcitation(s) && !has_projectors(); }

    /// A|det> as (sign, det') when nonzero. Projectors filter first, then the
    /// annihilators a_{b1}, a_{b2}, ... act, then the creators a+_{an}, ..., a+_{a1}.
    std::optional<std::pair<int, Mask>> apply(Mask det) const
    {
        if ((det & num_) != num_ || (det & hole_) != 0) return std::nullopt;
        if ((det & ann_) != ann_) return std::nullopt;
        int sign = 1;
        for (Mask m = ann_; m; m &= m - 1) {
            const int p = std::countr_zero(m);
            sign *= jw_sign(det, p);
            det &= ~bit(p);
        }
        if (det & cre_) return std::nullopt;
        for (Mask m = cre_; m;) {
            const int p = 63 - std::countl_zero(m);
            sign *= jw_sign(det, p);
            det |= bit(p);
            m &= ~bit(p);
        }
        return std::pair{sign, det};
    }

    /// Smallest determinant on which this operator acts nonzero.
    Mask witness() const { return ann_ | num_; }

    /// "A(a3,a5;i0,i1|n2;h4)"
    std::string str() const
    {
        auto list = [](Mask m, char tag) {
            std::string s;
            for (int p : indices_of(m)) {
                if (!s.empty()) s += ',';
                s += tag;
                s += std::to_string(p);
            }
            return s;
        };
        return "A(" + list(cre_, 'a') + ";" + list(ann_, 'i') + "|" + list(num_, 'n') + ";" + list(hole_, 'h') + ")";
    }

    friend bool operator==(const AOperator&, const AOperator&) = default;

    /// Deterministic term order: rank, then a, b, c, d index lists.
    friend bool operator<(const AOperator& x, const AOperator& y)
    {
        if (x.rank() != y.rank()) return x.rank() < y.rank();
        if (x.cre_ != y.cre_) return x.a_indices() < y.a_indices();
        if (x.ann_ != y.ann_) return x.b_indices() < y.b_indices();
        if (x.num_ != y.num_) return x.c_indices() < y.c_indices();
        return x.d_indices() < y.d_indices();
    }

private:
    static Mask strict_mask(std::span<const int> idx, const char* what)
    {
        Mask m = 0;
        for (std::size_t k = 0; k < idx.size(); ++k) {
            if (idx[k] < 0 || idx[k] >= kMaxOrbitals)
                throw NonCanonicalInput(std::string(what) + ": orbital index out of range");
            if (k > 0 && idx[k] <= idx[k - 1])
                throw NonCanonicalInput(std::string(what) + " not strictly increasing");
            m |= bit(idx[k]);
        }
        return m;
    }

    Mask cre_ = 0, ann_ = 0, num_ = 0, hole_ = 0;
};

/// A canonical operator with a +-1 prefactor.
struct SignedOp {
    int sign;
    AOperator op;
};

namespace detail {

// Single-mode matrix units in the occupation basis {|0>, |1>}.
enum class Unit : std::uint8_t { id, cre, ann, num, hole, zero };

inline Unit unit_of(const AOperator& op, int p)
{
    const Mask b = bit(p);
    if (op.creators() & b) return Unit::cre;
    if (op.annihilators() & b) return Unit::ann;
    if (op.numbers() & b) return Unit::num;
    if (op.holes() & b) return Unit::hole;
    return Unit::id;
}

/// x*y on one mode (y acts first).
inline Unit compose(Unit x, Unit y)
{
    using enum Unit;
    if (x == zero || y == zero) return zero;
    if (x == id) return y;
    if (y == id) return x;
    // Encode each unit as |out><in|.
    auto out_of = [](Unit u) { return (u == cre || u == num) ? 1 : 0; };
    auto in_of = [](Unit u) { return (u == ann || u == num) ? 1 : 0; };
    if (in_of(x) != out_of(y)) return zero;
    const int o = out_of(x), i = in_of(y);
    if (o == 1 && i == 0) return cre;
    if (o == 0 && i == 1) return ann;
    return o == 1 ? num : hole;
}

struct UnitMasks {
    Mask cre = 0, ann = 0, num = 0, hole = 0;

    void set(int p, Unit u)
    {
        switch (u) {
        case Unit::cre: cre |= bit(p); break;
        case Unit::ann: ann |= bit(p); break;
        case Unit::num: num |= bit(p); break;
        case Unit::hole: hole |= bit(p); break;
        default: break;
        }
    }
};

/// Elementary fermionic factor used when evaluating raw (non-canonical) strings.
struct Elementary {
    Unit unit;
    int orbital;
};

inline std::optional<std::pair<int, Mask>> apply_string(std::span<const Elementary> ops, Mask det)
{
    int sign = 1;
    for (auto it = ops.rbegin(); it != ops.rend(); ++it) {
        const Mask b = bit(it->orbital);
        switch (it->unit) {
        case Unit::cre:
            if (det & b) return std::nullopt;
            sign *= jw_sign(det, it->orbital);
            det |= b;
            break;
        case Unit::ann:
            if (!(det & b)) return std::nullopt;
            sign *= jw_sign(det, it->orbital);
            det &= ~b;
            break;
        case Unit::num:
            if (!(det & b)) return std::nullopt;
            break;
        case Unit::hole:
            if (det & b) return std::nullopt;
            break;
        default: break;
        }
    }
    return std::pair{sign, det};
}

} // namespace detail

/// Product x*y of canonical operators: always a single signed canonical
/// operator or zero. The sign is read off by acting on a witness determinant.
inline std::optional<SignedOp> product(const AOperator& x, const AOperator& y)
{
    using detail::Unit;
    detail::UnitMasks masks;
    for (Mask m = x.support() | y.support(); m; m &= m - 1) {
        const int p = std::countr_zero(m);
        const Unit u = detail::compose(detail::unit_of(x, p), detail::unit_of(y, p));
        if (u == Unit::zero) return std::nullopt;
        masks.set(p, u);
    }
    const AOperator r = AOperator::from_masks(masks.cre, masks.ann, masks.num, masks.hole);
    const Mask w = r.witness();
    const auto ry = y.apply(w);
    const auto rxy = ry ? x.apply(ry->second) : std::nullopt;
    const auto rr = r.apply(w);
    if (!rxy || !rr || rxy->second != rr->second)
        throw std::logic_error("operator product evaluation inconsistent for " + x.str() + " * " + y.str());
    return SignedOp{ry->first * rxy->first * rr->first, r};
}

/// Raw index lists of an A-operator, possibly unsorted and with coincidences.
struct RawAOperator {
    std::vector<int> a, b, c, d;
};

/// Reduce a raw operator string to (sign, canonical operator), or nullopt for
/// zero. Each orbital's elementary factors are multiplied as 2x2 matrix units,
/// which applies every contraction rule at once (a+ a -> n, a (1-n) -> 0,
/// a+ (1-n) -> a+, repeated projectors collapse, ...). The sign is the fermionic
/// reordering parity, evaluated exactly on a witness determinant.
inline std::optional<SignedOp> canonicalize(const RawAOperator& raw, int sign = 1)
{
    if (raw.a.size() != raw.b.size()) throw NonCanonicalInput("creator and annihilator counts differ");
    using detail::Unit;
    std::vector<detail::Elementary> ops;
    for (int p : raw.a) ops.push_back({Unit::cre, p});
    for (auto it = raw.b.rbegin(); it != raw.b.rend(); ++it) ops.push_back({Unit::ann, *it});
    for (int p : raw.c) ops.push_back({Unit::num, p});
    for (int p : raw.d) ops.push_back({Unit::hole, p});
    for (const auto& e : ops)
        if (e.orbital < 0 || e.orbital >= kMaxOrbitals) throw NonCanonicalInput("orbital index out of range");

    std::map<int, Unit> per_mode;
    for (auto it = ops.rbegin(); it != ops.rend(); ++it) {
        auto [pos, inserted] = per_mode.emplace(it->orbital, it->unit);
        if (!inserted) pos->second = detail::compose(it->unit, pos->second);
    }
    detail::UnitMasks masks;
    for (const auto& [p, u] : per_mode) {
        if (u == Unit::zero) return std::nullopt;
        masks.set(p, u);
    }
    const AOperator r = AOperator::from_masks(masks.cre, masks.ann, masks.num, masks.hole);
    const Mask w = r.witness();
    const auto raw_action = detail::apply_string(ops, w);
    const auto canon_action = r.apply(w);
    if (!raw_action || !canon_action || raw_action->second != canon_action->second)
        throw std::logic_error("canonicalization evaluation inconsistent for " + r.str());
    return SignedOp{sign * raw_action->first * canon_action->first, r};
}

inline RawAOperator to_raw(const AOperator& op)
{
    return {op.a_indices(), op.b_indices(), op.c_indices(), op.d_indices()};
}

/// Pure excitation a+_{virt...} a_{occ...}; both lists strictly increasing.
inline AOperator make_excitation(std::span<const int> occ, std::span<const int> virt, const OrbitalSpace& space)
{
    if (occ.empty() || occ.size() != virt.size())
        throw NonCanonicalInput("excitation needs equal, nonzero numbers of occupied and virtual indices");
    for (int i : occ)
        if (!space.is_occupied(i)) throw NonCanonicalInput("index " + std::to_string(i) + " is not occupied");
    for (int a : virt)
        if (!space.is_virtual(a)) throw NonCanonicalInput("index " + std::to_string(a) + " is not virtual");
    return AOperator::from_indices(virt, occ);
}

/// Hermitian adjoint: creators and annihilators swap, projectors stay.
inline SignedOp adjoint(const AOperator& op)
{
    const AOperator r = AOperator::from_masks(op.annihilators(), op.creators(), op.numbers(), op.holes());
    // <d|A+|w> = <w|A|d>, so evaluate A on the image of the witness.
    const Mask w = r.witness();
    const auto rw = r.apply(w);
    const auto back = op.apply(rw->second);
    if (!back || back->second != w) throw std::logic_error("adjoint evaluation inconsistent for " + op.str());
    return SignedOp{rw->first * back->first, r};
}

/// A matches B when A's creators lie in B's annihilators and A's annihilators
/// lie in B's creators.
inline bool matches(const AOperator& a, const AOperator& b)
{
    return (a.creators() & ~b.annihilators()) == 0 && (a.annihilators() & ~b.creators()) == 0;
}

/// Necessary condition for a nonzero commutator: some index of one operator
/// meets a moved index of the other, and the shared-creator / shared-annihilator
/// shortcut does not apply.
inline bool may_not_commute(const AOperator& x, const AOperator& y)
{
    if ((x.moved() & y.support()) == 0 && (y.moved() & x.support()) == 0) return false;
    const bool cross = (x.creators() & y.annihilators()) || (x.annihilators() & y.creators());
    const bool shared = (x.creators() & y.creators()) || (x.annihilators() & y.annihilators());
    return !(shared && !cross);
}

// ---------------------------------------------------------------------------

template <typename Coeff>
struct CoeffTraits;

template <>
struct CoeffTraits<ScalarExpr> {
    static bool is_zero(const ScalarExpr& x) { return x.is_zero(); }
    static ScalarExpr from_int(int k) { return ScalarExpr(k); }
    static std::string str(const ScalarExpr& x) { return x.str(); }
};

template <>
struct CoeffTraits<double> {
    static bool is_zero(double x) { return x == 0.0; }
    static double from_int(int k) { return k; }
    static std::string str(double x)
    {
        std::ostringstream os;
        os.precision(17);
        os << x;
        return os.str();
    }
};

template <>
struct CoeffTraits<long long> {
    static bool is_zero(long long x) { return x == 0; }
    static long long from_int(int k) { return k; }
    static std::string str(long long x) { return std::to_string(x); }
};

/// Linear combination of canonical operators with like terms merged and zero
/// terms dropped.
template <typename Coeff>
class BasicOperatorSum {
public:
    using Traits = CoeffTraits<Coeff>;
    using Terms = std::map<AOperator, Coeff>;

    BasicOperatorSum() = default;
    BasicOperatorSum(const AOperator& op, Coeff c = Traits::from_int(1)) { add(op, std::move(c)); }

    static BasicOperatorSum identity() { return BasicOperatorSum(AOperator{}); }

    const Terms& terms() const { return terms_; }
    std::size_t size() const { return terms_.size(); }
    bool empty() const { return terms_.empty(); }

    void add(const AOperator& op, const Coeff& c)
    {
        if (Traits::is_zero(c)) return;
        auto [it, inserted] = terms_.emplace(op, c);
        if (!inserted) {
            it->second = it->second + c;
            if (Traits::is_zero(it->second)) terms_.erase(it);
        }
    }

    void add(const SignedOp& s, const Coeff& c) { add(s.op, s.sign > 0 ? c : Coeff(-c)); }

    Coeff coefficient(const AOperator& op) const
    {
        auto it = terms_.find(op);
        return it == terms_.end() ? Traits::from_int(0) : it->second;
    }

    BasicOperatorSum& operator+=(const BasicOperatorSum& y)
    {
        for (const auto& [op, c] : y.terms_) add(op, c);
        return *this;
    }
    BasicOperatorSum& operator-=(const BasicOperatorSum& y)
    {
        for (const auto& [op, c] : y.terms_) add(op, Coeff(-c));
        return *this;
    }
    friend BasicOperatorSum operator+(BasicOperatorSum x, const BasicOperatorSum& y) { return x += y; }
    friend BasicOperatorSum operator-(BasicOperatorSum x, const BasicOperatorSum& y) { return x -= y; }

    friend BasicOperatorSum operator*(const Coeff& s, const BasicOperatorSum& x)
    {
        BasicOperatorSum out;
        for (const auto& [op, c] : x.terms_) out.add(op, Coeff(s * c));
        return out;
    }

    friend BasicOperatorSum operator*(const BasicOperatorSum& x, const BasicOperatorSum& y)
    {
        BasicOperatorSum out;
        for (const auto& [ox, cx] : x.terms_)
            for (const auto& [oy, cy] : y.terms_)
                if (auto p = product(ox, oy)) out.add(*p, Coeff(cx * cy));
        return out;
    }

    friend bool operator==(const BasicOperatorSum&, const BasicOperatorSum&) = default;

    template <typename F>
    auto map_coefficients(F&& f) const
    {
        using Out = std::decay_t<decltype(f(std::declval<const Coeff&>()))>;
        BasicOperatorSum<Out> out;
        for (const auto& [op, c] : terms_) out.add(op, f(c));
        return out;
    }

    /// "(c1) A(...) + (c2) A(...)", "0" when empty.
    std::string str() const
    {
        if (terms_.empty()) return "0";
        std::string out;
        for (const auto& [op, c] : terms_) {
            if (!out.empty()) out += " + ";
            out += "[" + Traits::str(c) + "] " + op.str();
        }
        return out;
    }

private:
    Terms terms_;
};

using OperatorSum = BasicOperatorSum<ScalarExpr>;
using NumericOperatorSum = BasicOperatorSum<double>;
using IntegerOperatorSum = BasicOperatorSum<long long>;

/// [x, y] = xy - yx, expanded exactly; the commutation pre-filter short-circuits
/// the common vanishing cases.
template <typename Coeff = ScalarExpr>
BasicOperatorSum<Coeff> commutator(const AOperator& x, const AOperator& y)
{
    using Traits = CoeffTraits<Coeff>;
    BasicOperatorSum<Coeff> out;
    if (!may_not_commute(x, y)) return out;
    if (auto p = product(x, y)) out.add(*p, Traits::from_int(1));
    if (auto p = product(y, x)) out.add(*p, Traits::from_int(-1));
    return out;
}

template <typename Coeff>
BasicOperatorSum<Coeff> commutator(const BasicOperatorSum<Coeff>& x, const BasicOperatorSum<Coeff>& y)
{
    return x * y - y * x;
}

inline NumericOperatorSum evaluate(const OperatorSum& x, const AngleAssignment& assign)
{
    return x.map_coefficients([&](const ScalarExpr& c) { return c.eval(assign); });
}

} // namespace ucc2cc
