#pragma once

#include "errors.hpp"
#include "fockoracle.hpp"
#include "opalg.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace ucc2cc {

inline constexpr double kReferenceFloor = 1e-12;
inline constexpr double kSupportThreshold = 1e-13;

/// Traditional CC amplitudes, reference amplitude implicitly 1.
struct CCAmplitudes {
    using Key = std::pair<std::vector<int>, std::vector<int>>; // (occ, virt)

    OrbitalSpace space;
    std::map<int, std::map<Key, double>> per_rank;
    double residual = 0.0; // largest mismatch above the extracted rank

    std::size_t count() const
    {
        std::size_t n = 0;
        for (const auto& [r, m] : per_rank) n += m.size();
        return n;
    }

    int max_rank() const { return per_rank.empty() ? 0 : per_rank.rbegin()->first; }

    void set(const std::vector<int>& occ, const std::vector<int>& virt, double value)
    {
        make_excitation(occ, virt, space);
        per_rank[static_cast<int>(occ.size())][{occ, virt}] = value;
    }

    double get(const std::vector<int>& occ, const std::vector<int>& virt) const
    {
        auto r = per_rank.find(static_cast<int>(occ.size()));
        if (r == per_rank.end()) return 0.0;
        auto it = r->second.find({occ, virt});
        return it == r->second.end() ? 0.0 : it->second;
    }

    /// Sum of t * A(virt; occ) over ranks below `below` (all ranks by default).
    NumericOperatorSum cluster_operator(int below = 1 << 30) const
    {
        NumericOperatorSum t;
        for (const auto& [rank, m] : per_rank) {
            if (rank >= below) break;
            for (const auto& [key, v] : m) t.add(make_excitation(key.first, key.second, space), v);
        }
        return t;
    }

    nlohmann::json to_json() const
    {
        auto out = nlohmann::json::array();
        for (const auto& [rank, m] : per_rank)
            for (const auto& [key, v] : m)
                out.push_back({{"rank", rank}, {"occ", key.first}, {"virt", key.second}, {"value", v}});
        return out;
    }

    static CCAmplitudes from_json(const nlohmann::json& j, const OrbitalSpace& space)
    {
        CCAmplitudes t{space, {}, 0.0};
        try {
            for (const auto& e : j) {
                const auto occ = e.at("occ").get<std::vector<int>>();
                const auto virt = e.at("virt").get<std::vector<int>>();
                if (e.contains("rank") && e.at("rank").get<int>() != static_cast<int>(occ.size()))
                    throw InputError("rank does not match index count");
                t.set(occ, virt, e.at("value").get<double>());
            }
        } catch (const nlohmann::json::exception& e) {
            throw InputError(std::string("malformed amplitude list: ") + e.what());
        }
        return t;
    }
};

inline StateVector intermediate_normalize(const StateVector& s)
{
    const double r = s.coefficient(reference_determinant(s.space()));
    if (std::abs(r) < kReferenceFloor) {
        std::ostringstream os;
        os << "reference coefficient " << r << " below " << kReferenceFloor;
        throw ReferenceDepleted(os.str());
    }
    return s.scaled(1.0 / r);
}

inline StateVector reconstruct(const CCAmplitudes& t)
{
    return apply_exp_series(t.cluster_operator(), StateVector::reference(t.space));
}

/// Rank-by-rank extraction: t_D = s_D - <D| exp(T_{<n}) |ref>, up to the sign of
/// A(virt; occ)|ref>. The input is intermediate-normalized first.
inline CCAmplitudes eliminate(const StateVector& state, int max_rank, bool allow_truncation = false)
{
    const OrbitalSpace& space = state.space();
    const StateVector s = intermediate_normalize(state);
    const Determinant ref = reference_determinant(space);
    CCAmplitudes t{space, {}, 0.0};

    for (const auto& [d, c] : s.amplitudes())
        if (excitation_rank(d, space) > max_rank && std::abs(c) > kSupportThreshold && !allow_truncation)
            throw RankOverflow("determinant " + std::to_string(d) + " has rank " +
                               std::to_string(excitation_rank(d, space)) + " > " + std::to_string(max_rank));

    for (int n = 1; n <= max_rank; ++n) {
        const StateVector generated = apply_exp_series(t.cluster_operator(n), StateVector::reference(space));
        std::map<CCAmplitudes::Key, Determinant> targets;
        auto collect = [&](const StateVector& v) {
            for (const auto& [d, c] : v.amplitudes())
                if (excitation_rank(d, space) == n) targets.emplace(CCAmplitudes::Key{indices_of(ref & ~d), indices_of(d & ~ref)}, d);
        };
        collect(s);
        collect(generated);
        for (const auto& [key, d] : targets) {
            const double delta = s.coefficient(d) - generated.coefficient(d);
            if (std::abs(delta) < kPruneThreshold) continue;
            const auto hit = make_excitation(key.first, key.second, space).apply(ref);
            t.per_rank[n][key] = delta * hit->first;
        }
    }

    const StateVector back = reconstruct(t);
    for (const auto& v : {s, back})
        for (const auto& [d, c] : v.amplitudes())
            if (excitation_rank(d, space) > max_rank)
                t.residual = std::max(t.residual, std::abs(s.coefficient(d) - back.coefficient(d)));
    return t;
}

inline CCAmplitudes eliminate(const StateVector& s)
{
    const OrbitalSpace& sp = s.space();
    return eliminate(s, std::min(sp.n_electrons, sp.n_orbitals - sp.n_electrons));
}

} // namespace ucc2cc
