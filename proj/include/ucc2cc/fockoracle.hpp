#pragma once

#include "identities.hpp"
#include "opalg.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <nlohmann/json.hpp>

#include <cmath>
#include <map>
#include <optional>
#include <vector>

namespace ucc2cc {

using Determinant = Mask;

inline constexpr double kPruneThreshold = 1e-15;
inline constexpr double kSeriesThreshold = 1e-15;
inline constexpr int kMaxSeriesTerms = 1000;
inline constexpr int kMaxDenseOrbitals = 14;
inline constexpr double kCompareTolerance = 1e-11;

inline Determinant reference_determinant(const OrbitalSpace& s) { return s.occupied(); }

/// Excitation rank of d relative to the reference.
inline int excitation_rank(Determinant d, const OrbitalSpace& s) { return std::popcount(d & s.virtuals()); }

inline std::optional<std::pair<int, Determinant>> apply_aop(const AOperator& a, Determinant d) { return a.apply(d); }

template <typename Coeff>
struct StateTraits;

template <>
struct StateTraits<double> {
    static bool negligible(double x) { return std::abs(x) < kPruneThreshold; }
};

template <>
struct StateTraits<ScalarExpr> {
    static bool negligible(const ScalarExpr& x) { return x.is_zero(); }
};

/// Sparse determinant expansion, deterministic (ordered by bitmask).
template <typename Coeff>
class BasicStateVector {
public:
    using Amplitudes = std::map<Determinant, Coeff>;

    BasicStateVector() = default;
    explicit BasicStateVector(OrbitalSpace s) : space_(s) {}

    static BasicStateVector reference(OrbitalSpace s)
    {
        BasicStateVector v(s);
        v.amps_.emplace(reference_determinant(s), Coeff(1));
        return v;
    }

    const OrbitalSpace& space() const { return space_; }
    const Amplitudes& amplitudes() const { return amps_; }
    std::size_t size() const { return amps_.size(); }
    bool empty() const { return amps_.empty(); }

    Coeff coefficient(Determinant d) const
    {
        auto it = amps_.find(d);
        return it == amps_.end() ? Coeff(0) : it->second;
    }

    void add(Determinant d, const Coeff& c)
    {
        auto [it, inserted] = amps_.emplace(d, c);
        if (!inserted) it->second = it->second + c;
    }

    void set(Determinant d, const Coeff& c) { amps_[d] = c; }

    void prune()
    {
        std::erase_if(amps_, [](const auto& kv) { return StateTraits<Coeff>::negligible(kv.second); });
    }

    BasicStateVector& operator+=(const BasicStateVector& y)
    {
        for (const auto& [d, c] : y.amps_) add(d, c);
        prune();
        return *this;
    }

    BasicStateVector scaled(const Coeff& s) const
    {
        BasicStateVector out(space_);
        for (const auto& [d, c] : amps_) out.amps_.emplace(d, Coeff(s * c));
        out.prune();
        return out;
    }

private:
    OrbitalSpace space_;
    Amplitudes amps_;
};

using StateVector = BasicStateVector<double>;
using SymbolicStateVector = BasicStateVector<ScalarExpr>;

inline double norm2(const StateVector& s)
{
    double acc = 0.0;
    for (const auto& [d, c] : s.amplitudes()) acc += c * c;
    return std::sqrt(acc);
}

inline double max_abs(const StateVector& s)
{
    double m = 0.0;
    for (const auto& [d, c] : s.amplitudes()) m = std::max(m, std::abs(c));
    return m;
}

template <typename Coeff>
BasicStateVector<Coeff> apply(const BasicOperatorSum<Coeff>& x, const BasicStateVector<Coeff>& s)
{
    BasicStateVector<Coeff> out(s.space());
    for (const auto& [op, k] : x.terms())
        for (const auto& [d, c] : s.amplitudes())
            if (auto r = op.apply(d)) out.add(r->second, r->first > 0 ? Coeff(k * c) : Coeff(-(k * c)));
    out.prune();
    return out;
}

inline StateVector evaluate(const SymbolicStateVector& s, const AngleAssignment& assign)
{
    StateVector out(s.space());
    for (const auto& [d, c] : s.amplitudes()) out.add(d, c.eval(assign));
    out.prune();
    return out;
}

/// Euler closed form of one factor, applied term by term.
inline StateVector apply_euler(const UCCFactor& f, const StateVector& s, const AngleAssignment& assign)
{
    return apply(evaluate(euler_form(f), assign), s);
}

inline SymbolicStateVector apply_euler(const UCCFactor& f, const SymbolicStateVector& s)
{
    return apply(euler_form(f), s);
}

/// sum_k X^k / k! s, stopping once the increment is below threshold (or
/// exactly zero for nilpotent exponents).
inline StateVector apply_exp_series(const NumericOperatorSum& x, const StateVector& s)
{
    StateVector total = s;
    StateVector term = s;
    for (int k = 1; k <= kMaxSeriesTerms; ++k) {
        term = apply(x, term).scaled(1.0 / k);
        if (term.empty() || max_abs(term) < kSeriesThreshold) return total;
        total += term;
    }
    throw SeriesDivergence("exponential series did not converge within " + std::to_string(kMaxSeriesTerms) + " terms");
}

/// Symbolic series: only terminates when the exponent is nilpotent on s.
inline SymbolicStateVector apply_exp_series(const OperatorSum& x, const SymbolicStateVector& s, int max_terms = 64)
{
    SymbolicStateVector total = s;
    SymbolicStateVector term = s;
    for (int k = 1; k <= max_terms; ++k) {
        term = apply(x, term).scaled(ScalarExpr(Rational(1, k)));
        if (term.empty()) return total;
        total += term;
    }
    throw SeriesDivergence("symbolic exponential series does not terminate");
}

inline StateVector apply_exp_series(const ExpFactor& e, const StateVector& s, const AngleAssignment& assign)
{
    return apply_exp_series(evaluate(e.exponent, assign), s);
}

/// prod_k exp(X_k) s with the rightmost factor applied first.
inline StateVector apply_exp_sequence(const std::vector<ExpFactor>& factors, const StateVector& s,
                                      const AngleAssignment& assign)
{
    StateVector out = s;
    for (auto it = factors.rbegin(); it != factors.rend(); ++it) out = apply_exp_series(*it, out, assign);
    return out;
}

/// Factorized UCC product on the reference; the last factor acts first.
inline StateVector ucc_state(const std::vector<UCCFactor>& factors, const OrbitalSpace& space,
                             const AngleAssignment& assign)
{
    StateVector s = StateVector::reference(space);
    for (auto it = factors.rbegin(); it != factors.rend(); ++it) s = apply_euler(*it, s, assign);
    return s;
}

struct Comparison {
    double max_abs_diff = 0.0;
    bool matched = true;
};

inline Comparison compare(const StateVector& x, const StateVector& y, double tol = kCompareTolerance)
{
    Comparison out;
    for (const auto& [d, c] : x.amplitudes()) out.max_abs_diff = std::max(out.max_abs_diff, std::abs(c - y.coefficient(d)));
    for (const auto& [d, c] : y.amplitudes())
        if (!x.amplitudes().contains(d)) out.max_abs_diff = std::max(out.max_abs_diff, std::abs(c));
    out.matched = out.max_abs_diff <= tol;
    return out;
}

// ---------------------------------------------------------------------------
// Full Fock-space matrices, basis index == occupation bitmask.

using DenseMatrix = Eigen::MatrixXd;
using IntegerMatrix = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;
using SparseMatrix = Eigen::SparseMatrix<double>;

inline void check_dense_dimension(int n)
{
    if (n < 0 || n > kMaxDenseOrbitals)
        throw DimensionTooLarge("dense Fock matrix requested for " + std::to_string(n) + " orbitals (limit " +
                                std::to_string(kMaxDenseOrbitals) + ")");
}

template <typename Scalar, typename Coeff>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dense_matrix_of(const BasicOperatorSum<Coeff>& x, int n)
{
    check_dense_dimension(n);
    const Eigen::Index dim = Eigen::Index{1} << n;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> m =
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(dim, dim);
    for (const auto& [op, k] : x.terms()) {
        if (op.support() >> n) throw NonCanonicalInput(op.str() + " acts outside " + std::to_string(n) + " orbitals");
        for (Eigen::Index col = 0; col < dim; ++col)
            if (auto r = op.apply(static_cast<Mask>(col)))
                m(static_cast<Eigen::Index>(r->second), col) += static_cast<Scalar>(r->first) * static_cast<Scalar>(k);
    }
    return m;
}

inline IntegerMatrix dense_matrix(const AOperator& a, int n)
{
    return dense_matrix_of<long long>(IntegerOperatorSum(a), n);
}
inline IntegerMatrix dense_matrix(const IntegerOperatorSum& x, int n) { return dense_matrix_of<long long>(x, n); }
inline DenseMatrix dense_matrix(const NumericOperatorSum& x, int n) { return dense_matrix_of<double>(x, n); }

/// Matrix exponential by Taylor series (used for small dense checks).
inline DenseMatrix dense_exp(const DenseMatrix& x)
{
    DenseMatrix total = DenseMatrix::Identity(x.rows(), x.cols());
    DenseMatrix term = total;
    for (int k = 1; k <= kMaxSeriesTerms; ++k) {
        term = (term * x / k).eval();
        if (term.cwiseAbs().maxCoeff() < kSeriesThreshold) return total;
        total += term;
    }
    throw SeriesDivergence("dense matrix exponential did not converge");
}

inline DenseMatrix dense_matrix(const ExpFactor& e, int n, const AngleAssignment& assign)
{
    return dense_exp(dense_matrix(evaluate(e.exponent, assign), n));
}

/// Sparse counterpart of dense_matrix, for Fock spaces too large to hold densely.
inline SparseMatrix sparse_matrix(const NumericOperatorSum& x, int n)
{
    if (n < 0 || n > 30) throw DimensionTooLarge("sparse Fock matrix requested for " + std::to_string(n) + " orbitals");
    const Eigen::Index dim = Eigen::Index{1} << n;
    std::vector<Eigen::Triplet<double>> entries;
    for (const auto& [op, k] : x.terms()) {
        if (op.support() >> n) throw NonCanonicalInput(op.str() + " acts outside " + std::to_string(n) + " orbitals");
        // Only determinants containing the operator's annihilated and number
        // orbitals, and missing its hole orbitals, contribute.
        const Mask fixed = op.support() & ~op.creators();
        const Mask free = (static_cast<Mask>(dim) - 1) & ~fixed & ~op.creators();
        for (Mask sub = free;; sub = (sub - 1) & free) {
            const Mask det = sub | op.annihilators() | op.numbers();
            if (auto r = op.apply(det))
                entries.emplace_back(static_cast<Eigen::Index>(r->second), static_cast<Eigen::Index>(det), r->first * k);
            if (sub == 0) break;
        }
    }
    SparseMatrix m(dim, dim);
    m.setFromTriplets(entries.begin(), entries.end());
    return m;
}

/// exp of a sparse matrix by Taylor series, with drop tolerance on each term.
inline SparseMatrix sparse_exp(const SparseMatrix& x)
{
    SparseMatrix id(x.rows(), x.cols());
    id.setIdentity();
    SparseMatrix total = id;
    SparseMatrix term = id;
    for (int k = 1; k <= kMaxSeriesTerms; ++k) {
        term = (term * x).pruned() / static_cast<double>(k);
        double mx = 0.0;
        for (int j = 0; j < term.outerSize(); ++j)
            for (SparseMatrix::InnerIterator it(term, j); it; ++it) mx = std::max(mx, std::abs(it.value()));
        if (mx < kSeriesThreshold) return total;
        total += term;
    }
    throw SeriesDivergence("sparse matrix exponential did not converge");
}

inline double max_abs_difference(const SparseMatrix& x, const SparseMatrix& y)
{
    const SparseMatrix d = x - y;
    double mx = 0.0;
    for (int j = 0; j < d.outerSize(); ++j)
        for (SparseMatrix::InnerIterator it(d, j); it; ++it) mx = std::max(mx, std::abs(it.value()));
    return mx;
}

// ---------------------------------------------------------------------------

inline std::vector<int> occupied_list(Determinant d) { return indices_of(d); }

inline nlohmann::json to_json(const StateVector& s)
{
    auto amps = nlohmann::json::array();
    for (const auto& [d, c] : s.amplitudes()) amps.push_back({{"occ", occupied_list(d)}, {"coeff", c}});
    return {{"n_orbitals", s.space().n_orbitals}, {"n_electrons", s.space().n_electrons}, {"amplitudes", amps}};
}

inline StateVector state_from_json(const nlohmann::json& j)
{
    try {
        OrbitalSpace space{j.at("n_orbitals").get<int>(), j.at("n_electrons").get<int>()};
        if (space.n_orbitals < 1 || space.n_orbitals > kMaxOrbitals || space.n_electrons < 0 ||
            space.n_electrons > space.n_orbitals)
            throw InputError("invalid orbital or electron count");
        StateVector s(space);
        for (const auto& a : j.at("amplitudes")) {
            Mask d = 0;
            for (int p : a.at("occ").get<std::vector<int>>()) {
                if (p < 0 || p >= space.n_orbitals) throw InputError("occupied index out of range");
                if (d & bit(p)) throw InputError("repeated occupied index");
                d |= bit(p);
            }
            s.add(d, a.at("coeff").get<double>());
        }
        s.prune();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed state JSON: ") + e.what());
    }
}

} // namespace ucc2cc
