#pragma once

#include "fockoracle.hpp"
#include "identities.hpp"
#include "opalg.hpp"
#include "symcoef.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

namespace ucc2cc {

/// Ordered exponentials, leftmost applied last.
struct FactorProduct {
    std::vector<ExpFactor> factors;
};

struct DiagnosticStep {
    std::string rule;
    std::string detail;
};

struct Diagnostics {
    std::vector<DiagnosticStep> steps;
    std::vector<std::string> edge_cases;
    std::vector<std::string> notes;

    void record(std::string rule, std::string detail) { steps.push_back({std::move(rule), std::move(detail)}); }

    nlohmann::json to_json() const
    {
        auto s = nlohmann::json::array();
        for (const auto& st : steps) s.push_back({{"rule", st.rule}, {"detail", st.detail}});
        return {{"steps", s}, {"edge_cases", edge_cases}, {"notes", notes}};
    }
};

/// Amplitude whose value depends on the occupation sector of some spectator
/// orbitals: coefficient = base * weight(sector).
struct DressedAmplitude {
    ScalarExpr base;
    std::vector<std::pair<AOperator, ScalarExpr>> sectors; // projector -> weight

    bool is_plain() const { return sectors.empty(); }

    std::string str() const
    {
        if (is_plain()) return base.str();
        std::string out = base.str() + " x {";
        for (std::size_t k = 0; k < sectors.size(); ++k) {
            if (k) out += "; ";
            out += sectors[k].first.str() + ": " + sectors[k].second.str();
        }
        return out + "}";
    }

    nlohmann::json to_json() const
    {
        auto s = nlohmann::json::array();
        for (const auto& [p, w] : sectors) s.push_back({{"projector", p.str()}, {"weight", w.str()}});
        return {{"base", base.str()}, {"sectors", s}};
    }
};

struct CCTerm {
    AOperator op;
    DressedAmplitude amplitude;

    /// Sum of op * sector projector * base * weight.
    OperatorSum expanded() const
    {
        OperatorSum out;
        if (amplitude.is_plain()) {
            out.add(op, amplitude.base);
            return out;
        }
        for (const auto& [proj, w] : amplitude.sectors)
            if (auto p = product(op, proj)) out.add(*p, amplitude.base * w);
        return out;
    }

    std::string str() const { return "[" + amplitude.str() + "] " + op.str(); }
};

struct CCFactor {
    std::vector<CCTerm> terms;

    OperatorSum exponent() const
    {
        OperatorSum out;
        for (const auto& t : terms) out += t.expanded();
        return out;
    }

    std::string str() const
    {
        std::string out = "exp(";
        for (std::size_t k = 0; k < terms.size(); ++k) {
            if (k) out += " + ";
            out += terms[k].str();
        }
        return out + ")";
    }
};

struct CCResult {
    ScalarExpr prefactor{1};
    std::vector<CCFactor> excitation_factors;
    Diagnostics diagnostics;
    bool complete = true;
    std::string failure;
    std::vector<std::string> partial; // work list at the point of failure

    std::vector<ExpFactor> exp_factors() const
    {
        std::vector<ExpFactor> out;
        for (const auto& f : excitation_factors) out.emplace_back(f.exponent());
        return out;
    }

    std::string str() const
    {
        std::string out = "prefactor: " + prefactor.str() + "\n";
        for (const auto& f : excitation_factors) out += f.str() + "\n";
        return out;
    }

    nlohmann::json to_json() const
    {
        auto fs = nlohmann::json::array();
        for (const auto& f : excitation_factors) {
            auto ts = nlohmann::json::array();
            for (const auto& t : f.terms)
                ts.push_back({{"operator", t.op.str()},
                              {"rank", t.op.rank()},
                              {"occ", t.op.b_indices()},
                              {"virt", t.op.a_indices()},
                              {"amplitude", t.amplitude.to_json()}});
            fs.push_back({{"rendered", f.str()}, {"exponent", f.exponent().str()}, {"terms", ts}});
        }
        nlohmann::json j{{"complete", complete},
                         {"prefactor", prefactor.str()},
                         {"factors", fs},
                         {"diagnostics", diagnostics.to_json()}};
        if (!complete) {
            j["failure"] = failure;
            j["partial"] = partial;
        }
        return j;
    }
};

namespace detail {

/// exp(coeff * op) with op nilpotent, i.e. 1 + coeff * op.
struct Piece {
    AOperator op;
    ScalarExpr coeff;

    std::string str() const { return "exp([" + coeff.str() + "] " + op.str() + ")"; }
};

inline bool commutes(const AOperator& x, const AOperator& y) { return commutator<long long>(x, y).empty(); }

/// G undoes E on some sector: both GE and EG are nonzero projectors.
inline bool mutual_match(const AOperator& g, const AOperator& e)
{
    const auto ge = product(g, e);
    const auto eg = product(e, g);
    return ge && eg && ge->op.is_projection() && eg->op.is_projection();
}

/// e^{gG} (xE) e^{-gG} = x(E + g(GE - EG) - g^2 GEG), exact because G^2 = 0.
inline OperatorSum conjugate_nilpotent(const Piece& g, const AOperator& e, const ScalarExpr& x)
{
    OperatorSum out(e, x);
    const auto ge = product(g.op, e);
    const auto eg = product(e, g.op);
    const ScalarExpr gx = g.coeff * x;
    if (ge) out.add(*ge, gx);
    if (eg) out.add(*eg, -gx);
    if (ge)
        if (auto geg = product(ge->op, g.op)) out.add(SignedOp{ge->sign * geg->sign, geg->op}, -(g.coeff * gx));
    return out;
}

/// Order nilpotent pieces so that p_i p_j = 0 whenever i is left of j; then
/// exp(sum p) = prod (1 + p_i). Excitation-type pieces are placed first when free.
inline std::vector<Piece> split_nilpotent(const OperatorSum& s, const OrbitalSpace& space)
{
    std::vector<Piece> pieces;
    for (const auto& [op, c] : s.terms()) {
        if (op.is_projection())
            throw EdgeCaseMutualMatch("projection term " + op.str() + " generated inside a nilpotent exponent");
        pieces.push_back({op, c});
    }
    const std::size_t n = pieces.size();
    // before[b] lists pieces that must stand left of b.
    std::vector<std::vector<std::size_t>> after(n);
    std::vector<int> indegree(n, 0);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
            if (a == b) continue;
            // p_a p_b != 0 forbids a left of b, so b goes first.
            if (product(pieces[a].op, pieces[b].op)) {
                after[b].push_back(a);
                ++indegree[a];
            }
        }
    std::vector<Piece> out;
    std::vector<bool> used(n, false);
    for (std::size_t step = 0; step < n; ++step) {
        std::size_t pick = n;
        for (int pass = 0; pass < 2 && pick == n; ++pass)
            for (std::size_t k = 0; k < n; ++k)
                if (!used[k] && indegree[k] == 0 && (pass == 1 || pieces[k].op.is_excitation(space))) {
                    pick = k;
                    break;
                }
        if (pick == n) throw EdgeCaseMutualMatch("cannot order pieces of " + s.str() + " into nilpotent factors");
        used[pick] = true;
        for (std::size_t k : after[pick]) --indegree[k];
        out.push_back(pieces[pick]);
    }
    return out;
}

inline ScalarExpr projection_value(const OperatorSum& q, Mask det)
{
    ScalarExpr out;
    for (const auto& [p, c] : q.terms())
        if ((det & p.numbers()) == p.numbers() && (det & p.holes()) == 0) out += c;
    return out;
}

inline ScalarExpr exp_weight(const ScalarExpr& exponent)
{
    try {
        return exp_of_lncos_sum(exponent);
    } catch (const std::domain_error& e) {
        throw NormalizationStuck(std::string("projection exponent outside closed form: ") + e.what());
    }
}

/// e^{Q} (xA) e^{-Q} split over the joint occupations of the orbitals Q sees
/// but A does not fix. Sectors with equal weight are merged back.
inline std::vector<Piece> dress_by_projection(const OperatorSum& q, const AOperator& a, const ScalarExpr& x)
{
    Mask qsupport = 0;
    for (const auto& [p, c] : q.terms()) qsupport |= p.support();
    const Mask free = qsupport & ~a.support();
    const Mask before_fixed = a.annihilators() | a.numbers();
    const Mask after_fixed = a.creators() | a.numbers();

    struct Sector {
        Mask num, hole;
        ScalarExpr weight;
    };
    std::vector<Sector> sectors;
    for (Mask sub = free;; sub = (sub - 1) & free) {
        const ScalarExpr shift = projection_value(q, after_fixed | sub) - projection_value(q, before_fixed | sub);
        sectors.push_back({sub, free & ~sub, exp_weight(shift)});
        if (sub == 0) break;
    }
    for (bool merged = true; merged;) {
        merged = false;
        for (std::size_t i = 0; i < sectors.size() && !merged; ++i)
            for (std::size_t j = i + 1; j < sectors.size() && !merged; ++j) {
                const Mask dn = sectors[i].num ^ sectors[j].num;
                if (std::popcount(dn) == 1 && dn == (sectors[i].hole ^ sectors[j].hole) &&
                    sectors[i].weight == sectors[j].weight) {
                    sectors[i].num &= sectors[j].num;
                    sectors[i].hole &= sectors[j].hole;
                    sectors.erase(sectors.begin() + static_cast<std::ptrdiff_t>(j));
                    merged = true;
                }
            }
    }
    std::vector<Piece> out;
    for (const auto& s : sectors) {
        const auto p = product(a, AOperator::projector(s.num, s.hole));
        if (!p || p->sign != 1) throw std::logic_error("sector projector does not commute with " + a.str());
        out.push_back({p->op, x * s.weight});
    }
    return out;
}

/// One entry of the work list: a nilpotent single-term factor or exp(Q) with Q
/// a sum of projectors.
struct WorkItem {
    bool projection = false;
    Piece term;
    OperatorSum q;

    static WorkItem nilpotent(Piece p) { return {false, std::move(p), {}}; }
    static WorkItem proj(OperatorSum q) { return {true, {}, std::move(q)}; }

    bool is_excitation(const OrbitalSpace& s) const { return !projection && term.op.is_excitation(s); }
    std::string str() const { return projection ? "exp(" + q.str() + ")" : term.str(); }
};

inline std::vector<WorkItem> to_work_items(const ExpFactor& f, const OrbitalSpace& space)
{
    if (f.exponent.empty()) return {};
    if (f.kind(space) == FactorKind::projection) return {WorkItem::proj(f.exponent)};
    std::vector<WorkItem> out;
    for (const auto& [op, c] : f.exponent.terms()) {
        if (op.is_projection())
            throw NormalizationStuck("exponent mixes projections with moving terms: " + f.str());
        out.push_back(WorkItem::nilpotent({op, c}));
    }
    for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t j = i + 1; j < out.size(); ++j)
            if (!commutes(out[i].term.op, out[j].term.op))
                throw NormalizationStuck("exponent with non-commuting terms cannot be split: " + f.str());
    return out;
}

/// (1 + gG)(1 + xE) for a mutual match, G moving E's orbitals back. On the
/// shared spectator sector the pair is an SL(2) block and is turned over exactly:
/// (1 + gG_in)(1 + xE_in) = (1 + x' E_in) exp(L (GE - EG)) (1 + g' G_in),
/// k = g x s, x' = x/(1+k), g' = g/(1+k), L = ln(1+k). The parts outside the
/// sector commute with everything involved.
inline std::vector<WorkItem> turn_over(const Piece& g, const Piece& e)
{
    const auto ge = product(g.op, e.op);
    const auto eg = product(e.op, g.op);
    if (!ge || !eg || !ge->op.is_projection() || !eg->op.is_projection())
        throw std::logic_error("turn_over needs a mutual match: " + g.str() + ", " + e.str());
    const auto e_in = product(e.op, AOperator::projector(g.op.numbers() & ~e.op.numbers(), g.op.holes() & ~e.op.holes()));
    const auto g_in = product(g.op, AOperator::projector(e.op.numbers() & ~g.op.numbers(), e.op.holes() & ~g.op.holes()));
    if (!e_in || !g_in || e_in->sign != 1 || g_in->sign != 1)
        throw std::logic_error("spectator projectors do not factor out of " + g.str() + ", " + e.str());
    const ScalarExpr kappa = ScalarExpr(ge->sign) * g.coeff * e.coeff;
    const ScalarExpr one_plus = ScalarExpr(1) + kappa;
    const ScalarExpr inv = ScalarExpr::power_of(one_plus, -1);
    const ScalarExpr log = ScalarExpr::log_of(one_plus);
    OperatorSum q;
    q.add(ge->op, log);
    q.add(eg->op, -log);
    std::vector<WorkItem> out;
    if (!(e_in->op == e.op)) out.push_back(WorkItem::nilpotent(e));
    out.push_back(WorkItem::nilpotent({e_in->op, e.coeff * inv - (e_in->op == e.op ? ScalarExpr() : e.coeff)}));
    out.push_back(WorkItem::proj(q));
    out.push_back(WorkItem::nilpotent({g_in->op, g.coeff * inv - (g_in->op == g.op ? ScalarExpr() : g.coeff)}));
    if (!(g_in->op == g.op)) out.push_back(WorkItem::nilpotent(g));
    return out;
}

constexpr std::size_t kMaxCoefficientComplexity = 400;
constexpr std::size_t kMaxWorkItems = 4000;

/// Turnovers can cascade in small, dense orbital spaces; beyond these bounds the
/// run is reported as stuck instead of exhausting memory.
inline void check_budget(const std::vector<WorkItem>& fresh, std::size_t list_size, const WorkItem& mover,
                         const Piece& right)
{
    if (list_size > kMaxWorkItems)
        throw NormalizationStuck("work list exceeds " + std::to_string(kMaxWorkItems) + " factors while moving " +
                                 mover.str() + " past " + right.str());
    for (const auto& w : fresh) {
        std::size_t cx = w.term.coeff.complexity();
        for (const auto& [op, c] : w.q.terms()) cx = std::max(cx, c.complexity());
        if (cx > kMaxCoefficientComplexity)
            throw NormalizationStuck("coefficient growth beyond " + std::to_string(kMaxCoefficientComplexity) +
                                     " monomials while moving " + mover.term.op.str() + " past " + right.op.str());
    }
}

/// Orbitals that no factor to the right has moved still hold their reference
/// occupation, which fixes every projector and kills impossible moves.
inline void resolve_against_reference(std::vector<WorkItem>& items, const OrbitalSpace& space, ScalarExpr& prefactor,
                                      Diagnostics& diag)
{
    const Mask occ = space.occupied();
    Mask touched = 0;
    std::vector<WorkItem> kept;
    for (auto it = items.rbegin(); it != items.rend(); ++it) {
        WorkItem item = *it;
        if (item.projection) {
            OperatorSum nq;
            ScalarExpr scalar;
            for (const auto& [p, c] : item.q.terms()) {
                const Mask un_num = p.numbers() & ~touched, un_hole = p.holes() & ~touched;
                if ((un_num & ~occ) || (un_hole & occ)) continue;
                const AOperator r = AOperator::projector(p.numbers() & touched, p.holes() & touched);
                if (r.is_identity())
                    scalar += c;
                else
                    nq.add(r, c);
            }
            if (!scalar.is_zero()) {
                const ScalarExpr w = exp_weight(scalar);
                prefactor *= w;
                diag.record("projection_to_scalar", item.str() + " contributes " + w.str());
            }
            if (nq.empty()) continue;
            if (!(nq == item.q)) diag.record("ref_resolve", item.str() + " -> exp(" + nq.str() + ")");
            item.q = nq;
            kept.push_back(item);
            continue;
        }
        const AOperator& op = item.term.op;
        const Mask untouched = ~touched;
        if ((op.creators() & untouched & occ) || (op.annihilators() & untouched & ~occ) ||
            (op.numbers() & untouched & ~occ) || (op.holes() & untouched & occ)) {
            diag.record(op.is_excitation(space) ? "ref_resolve" : "drop_annihilating",
                        item.str() + " acts as identity on the states it meets");
            continue;
        }
        const Mask strip = (op.numbers() | op.holes()) & untouched;
        if (strip) {
            const AOperator r =
                AOperator::from_masks(op.creators(), op.annihilators(), op.numbers() & ~strip, op.holes() & ~strip);
            diag.record("ref_resolve", item.str() + " -> " + r.str());
            item.term.op = r;
        }
        touched |= item.term.op.moved();
        kept.push_back(item);
    }
    items.assign(kept.rbegin(), kept.rend());
}

/// Combine factors with identical operators when only commuting factors separate them.
inline bool merge_identical(std::vector<WorkItem>& items, Diagnostics& diag)
{
    for (std::size_t j = 1; j < items.size(); ++j) {
        if (items[j].projection) continue;
        for (std::size_t i = j; i-- > 0;) {
            if (items[i].projection) break;
            if (items[i].term.op == items[j].term.op) {
                diag.record("merge_identical", items[i].str() + " absorbs " + items[j].str());
                items[i].term.coeff += items[j].term.coeff;
                items.erase(items.begin() + static_cast<std::ptrdiff_t>(j));
                if (items[i].term.coeff.is_zero()) items.erase(items.begin() + static_cast<std::ptrdiff_t>(i));
                return true;
            }
            if (!commutes(items[i].term.op, items[j].term.op)) break;
        }
    }
    return false;
}

inline CCTerm make_term(const std::vector<Piece>& group)
{
    Mask cnum = ~Mask{0}, chole = ~Mask{0};
    for (const auto& p : group) {
        cnum &= p.op.numbers();
        chole &= p.op.holes();
    }
    const AOperator& first = group.front().op;
    CCTerm t{AOperator::from_masks(first.creators(), first.annihilators(), cnum, chole), {}};
    if (group.size() == 1) {
        t.amplitude.base = group.front().coeff;
        return t;
    }
    // Pull out the factor shared by every sector when all coefficients are
    // monomials with one rational prefactor.
    bool monomial = true;
    for (const auto& p : group) monomial = monomial && p.coeff.is_monomial();
    ScalarExpr base(1);
    if (monomial) {
        const Rational r = group.front().coeff.terms().begin()->second;
        std::map<Atom, std::vector<int>> exps;
        for (const auto& p : group) {
            const auto& [m, c] = *p.coeff.terms().begin();
            monomial = monomial && c == r;
            for (const auto& [a, e] : m) exps[a];
        }
        if (monomial) {
            base = ScalarExpr(r);
            for (auto& [a, v] : exps) {
                for (const auto& p : group) {
                    const auto& m = p.coeff.terms().begin()->first;
                    auto it = m.find(a);
                    v.push_back(it == m.end() ? 0 : it->second);
                }
                const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
                const int pick = (*lo <= 0 && *hi >= 0) ? 0 : (*lo > 0 ? *lo : *hi);
                if (pick) base *= ScalarExpr::atom(a, pick);
            }
        }
    }
    const ScalarExpr inv = base.pow(-1);
    for (const auto& p : group)
        t.amplitude.sectors.emplace_back(
            AOperator::projector(p.op.numbers() & ~cnum, p.op.holes() & ~chole), p.coeff * inv);
    std::sort(t.amplitude.sectors.begin(), t.amplitude.sectors.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    t.amplitude.base = base;
    return t;
}

inline std::vector<CCFactor> assemble(const std::vector<WorkItem>& items, Diagnostics& diag)
{
    std::vector<Piece> pieces;
    for (const auto& it : items) pieces.push_back(it.term);
    bool all_commute = true;
    for (std::size_t i = 0; i < pieces.size() && all_commute; ++i)
        for (std::size_t j = i + 1; j < pieces.size() && all_commute; ++j)
            all_commute = commutes(pieces[i].op, pieces[j].op);
    auto key = [](const Piece& p) { return std::pair{p.op.creators(), p.op.annihilators()}; };

    std::vector<CCFactor> out;
    if (all_commute) {
        std::map<std::pair<Mask, Mask>, std::vector<Piece>> groups;
        for (const auto& p : pieces) groups[key(p)].push_back(p);
        std::vector<CCTerm> terms;
        for (const auto& [k, g] : groups) terms.push_back(make_term(g));
        std::sort(terms.begin(), terms.end(), [](const CCTerm& x, const CCTerm& y) { return x.op < y.op; });
        if (!terms.empty()) out.push_back({terms});
        if (pieces.size() > 1) diag.record("merge_commuting", "all excitation factors commute; one exponential");
        return out;
    }
    for (std::size_t i = 0; i < pieces.size();) {
        std::size_t j = i + 1;
        while (j < pieces.size() && key(pieces[j]) == key(pieces[i])) ++j;
        out.push_back({{make_term(std::vector<Piece>(pieces.begin() + static_cast<std::ptrdiff_t>(i),
                                                     pieces.begin() + static_cast<std::ptrdiff_t>(j)))}});
        i = j;
    }
    diag.record("keep_ordered", "excitation factors do not all commute; " + std::to_string(out.size()) +
                                    " ordered exponentials kept");
    return out;
}

inline std::vector<std::string> render(const std::vector<WorkItem>& items)
{
    std::vector<std::string> out;
    for (const auto& it : items) out.push_back(it.str());
    return out;
}

} // namespace detail

/// e^{L} e^{R} = e^{e^L R e^-L} e^{L}, with the conjugated exponent split into
/// ordered single-term factors whenever possible.
inline std::vector<ExpFactor> reorder_pair(const ExpFactor& left, const ExpFactor& right, const OrbitalSpace& space)
{
    if (left.exponent.empty()) return {right, left};
    if (left.kind(space) == FactorKind::projection) {
        OperatorSum dressed;
        for (const auto& [op, c] : right.exponent.terms()) {
            if (op.is_projection()) {
                dressed.add(op, c);
                continue;
            }
            for (const auto& p : detail::dress_by_projection(left.exponent, op, c)) dressed.add(p.op, p.coeff);
        }
        return {ExpFactor(dressed), left};
    }
    if (left.exponent.size() != 1) throw NormalizationStuck("reorder_pair needs a single-term left factor");
    const auto& [gop, gc] = *left.exponent.terms().begin();
    const detail::Piece g{gop, gc};
    OperatorSum conj;
    bool right_projection = true;
    for (const auto& [op, c] : right.exponent.terms()) {
        conj += detail::conjugate_nilpotent(g, op, c);
        right_projection = right_projection && op.is_projection();
    }
    std::vector<ExpFactor> out;
    if (!right_projection) {
        for (const auto& [op, c] : conj.terms())
            if (op.is_projection())
                throw EdgeCaseMutualMatch("mutual match between " + left.str() + " and " + right.str());
        for (const auto& p : detail::split_nilpotent(conj, space)) out.emplace_back(p.op, p.coeff);
    } else {
        out.emplace_back(conj);
    }
    out.push_back(left);
    return out;
}

/// [dressed right, proj]
inline std::vector<ExpFactor> push_projection(const ExpFactor& proj, const ExpFactor& right, const OrbitalSpace& space)
{
    if (proj.kind(space) != FactorKind::projection && proj.kind(space) != FactorKind::identity)
        throw NonCanonicalInput("push_projection needs a projection factor, got " + proj.str());
    return reorder_pair(proj, right, space);
}

/// Drive an ordered product acting on the reference into
/// prefactor * (product of excitation exponentials) |ref>.
inline CCResult normalize_to_cc_report(const FactorProduct& p, const OrbitalSpace& space, Diagnostics diag = {},
                                       std::size_t max_steps = 20000)
{
    using namespace detail;
    CCResult result;
    std::vector<WorkItem> items;
    try {
        for (const auto& f : p.factors) {
            auto w = to_work_items(f, space);
            items.insert(items.end(), w.begin(), w.end());
        }
        for (std::size_t step = 0;; ++step) {
            if (step > max_steps) throw NormalizationStuck("step limit exceeded");
            resolve_against_reference(items, space, result.prefactor, diag);
            if (merge_identical(items, diag)) continue;
            std::size_t k = items.size();
            for (std::size_t i = items.size(); i-- > 0;)
                if (!items[i].is_excitation(space)) {
                    k = i;
                    break;
                }
            if (k == items.size()) break;
            if (k + 1 == items.size())
                throw std::logic_error("unresolved factor at the reference: " + items[k].str());
            const WorkItem mover = items[k];
            const Piece right = items[k + 1].term;
            std::vector<WorkItem> replacement;
            if (!mover.projection && mutual_match(mover.term.op, right.op)) {
                replacement = turn_over(mover.term, right);
                check_budget(replacement, items.size(), mover, right);
                diag.edge_cases.push_back("mutual match turned over: " + mover.str() + " against " + right.str());
                diag.record("turnover", mover.str() + " past " + right.str());
                items.erase(items.begin() + static_cast<std::ptrdiff_t>(k), items.begin() + static_cast<std::ptrdiff_t>(k + 2));
                items.insert(items.begin() + static_cast<std::ptrdiff_t>(k), replacement.begin(), replacement.end());
                continue;
            }
            if (mover.projection) {
                const auto pieces = dress_by_projection(mover.q, right.op, right.coeff);
                if (pieces.size() != 1 || !(pieces.front().coeff == right.coeff))
                    diag.record("push_projection", mover.str() + " dresses " + right.str() + " into " +
                                                       std::to_string(pieces.size()) + " sector(s)");
                for (const auto& pc : pieces) replacement.push_back(WorkItem::nilpotent(pc));
            } else {
                const OperatorSum conj = conjugate_nilpotent(mover.term, right.op, right.coeff);
                for (const auto& [op, c] : conj.terms())
                    if (op.is_projection()) {
                        diag.edge_cases.push_back("mutual match: " + mover.str() + " against " + right.str());
                        throw EdgeCaseMutualMatch("mutual match between " + mover.str() + " and " + right.str());
                    }
                const bool unchanged = conj == OperatorSum(right.op, right.coeff);
                diag.record(unchanged ? "reorder_commute"
                                      : (matches(mover.term.op, right.op) ? "reorder_match" : "reorder_nomatch"),
                            mover.str() + " past " + right.str() + (unchanged ? "" : " -> exp(" + conj.str() + ")"));
                for (const auto& pc : split_nilpotent(conj, space)) replacement.push_back(WorkItem::nilpotent(pc));
            }
            replacement.push_back(mover);
            check_budget(replacement, items.size(), mover, right);
            items.erase(items.begin() + static_cast<std::ptrdiff_t>(k), items.begin() + static_cast<std::ptrdiff_t>(k + 2));
            items.insert(items.begin() + static_cast<std::ptrdiff_t>(k), replacement.begin(), replacement.end());
        }
        result.excitation_factors = assemble(items, diag);
    } catch (const EdgeCaseMutualMatch& e) {
        result.complete = false;
        result.failure = std::string("EdgeCaseMutualMatch: ") + e.what();
        result.partial = render(items);
    } catch (const NormalizationStuck& e) {
        result.complete = false;
        result.failure = std::string("NormalizationStuck: ") + e.what();
        result.partial = render(items);
    }
    result.diagnostics = std::move(diag);
    return result;
}

inline CCResult normalize_to_cc(const FactorProduct& p, const OrbitalSpace& space)
{
    CCResult r = normalize_to_cc_report(p, space);
    if (!r.complete) throw NormalizationStuck(r.failure);
    return r;
}

/// Merge factors with identical generators when only commuting factors lie
/// between them: exp(x G) exp(y G) = exp((x + y) G).
inline std::vector<UCCFactor> merge_trotter_repeats(std::vector<UCCFactor> fs, Diagnostics& diag)
{
    auto generator = [](const UCCFactor& f) { return f.t() - f.t_dagger(); };
    for (bool merged = true; merged;) {
        merged = false;
        for (std::size_t j = 1; j < fs.size() && !merged; ++j)
            for (std::size_t i = j; i-- > 0;) {
                if (fs[i].excitation == fs[j].excitation) {
                    const AngleId sum = AngleId::sum(fs[i].angle, fs[j].angle, fs[i].angle.label + "+" + fs[j].angle.label);
                    diag.record("merge_trotter_repeat", fs[i].angle.label + " and " + fs[j].angle.label + " on " +
                                                            fs[i].excitation.str());
                    fs[i].angle = sum;
                    fs.erase(fs.begin() + static_cast<std::ptrdiff_t>(j));
                    merged = true;
                    break;
                }
                if (!commutator(generator(fs[i]), generator(fs[j])).empty()) break;
            }
    }
    return fs;
}

inline FactorProduct disentangle_all(const std::vector<UCCFactor>& fs, Diagnostics& diag)
{
    FactorProduct p;
    for (const auto& f : fs) {
        const auto d = disentangle(f);
        p.factors.insert(p.factors.end(), d.begin(), d.end());
        diag.record("disentangle", "factor " + f.angle.label + " on " + f.excitation.str());
    }
    return p;
}

inline void note_shared_index_singles(const std::vector<UCCFactor>& fs, Diagnostics& diag)
{
    for (std::size_t i = 0; i < fs.size(); ++i)
        for (std::size_t j = i + 1; j < fs.size(); ++j) {
            const AOperator &x = fs[i].excitation, &y = fs[j].excitation;
            if (x.rank() == 1 && y.rank() == 1 && !(x == y) && (x.support() & y.support())) {
                diag.notes.push_back("singles " + fs[i].angle.label + " and " + fs[j].angle.label +
                                     " share an index: amplitudes carry sector-exact secant dressing, not a "
                                     "first-order logarithmic correction");
                return;
            }
        }
}

/// Factorized UCC (last factor acts first) to CC form on the reference.
inline CCResult normalize_to_cc_report(const std::vector<UCCFactor>& fs, const OrbitalSpace& space)
{
    Diagnostics diag;
    const auto merged = merge_trotter_repeats(fs, diag);
    note_shared_index_singles(merged, diag);
    const FactorProduct p = disentangle_all(merged, diag);
    return normalize_to_cc_report(p, space, std::move(diag));
}

inline CCResult normalize_to_cc(const std::vector<UCCFactor>& fs, const OrbitalSpace& space)
{
    CCResult r = normalize_to_cc_report(fs, space);
    if (!r.complete) throw NormalizationStuck(r.failure);
    return r;
}

/// M-fold repetition of the factor sequence, every angle divided by M.
inline std::vector<UCCFactor> trotterize(const std::vector<UCCFactor>& fs, int m)
{
    if (m < 1) throw InputError("Trotter step count must be positive");
    if (m == 1) return fs;
    std::vector<UCCFactor> out;
    for (int step = 0; step < m; ++step)
        for (const auto& f : fs)
            out.emplace_back(AngleId::scaled(f.angle, Rational(1, m), f.angle.label + "/" + std::to_string(m)),
                             f.excitation);
    return out;
}

/// prefactor * prod exp(X_k) |ref>
inline StateVector apply_cc_result(const CCResult& r, const OrbitalSpace& space, const AngleAssignment& assign)
{
    return apply_exp_sequence(r.exp_factors(), StateVector::reference(space), assign).scaled(r.prefactor.eval(assign));
}

} // namespace ucc2cc
