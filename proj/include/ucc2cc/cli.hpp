#pragma once

#include "elimination.hpp"
#include "errors.hpp"
#include "fockoracle.hpp"
#include "identities.hpp"
#include "opalg.hpp"
#include "reorder.hpp"
#include "symcoef.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace ucc2cc {

inline constexpr const char* kEngineVersion = "1.0.0";
inline constexpr std::uint64_t kDefaultSeed = 20240607;

enum ExitCode : int { kExitOk = 0, kExitInput = 1, kExitStuck = 2, kExitDivergence = 3, kExitDepleted = 4 };

inline std::uint64_t fnv1a64(const std::string& bytes)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t x)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

inline std::string fmt_double(double x, int digits = 17)
{
    std::ostringstream os;
    os.precision(digits);
    os << x;
    return os.str();
}

/// t_{ij}^{ab}; indices are comma-separated once any of them has two digits.
inline std::string auto_angle_label(const std::vector<int>& occ, const std::vector<int>& virt)
{
    bool wide = false;
    for (const auto* v : {&occ, &virt})
        for (int p : *v) wide = wide || p > 9;
    auto join = [&](const std::vector<int>& v) {
        std::string out;
        for (std::size_t k = 0; k < v.size(); ++k) {
            if (k && wide) out += ",";
            out += std::to_string(v[k]);
        }
        return out;
    };
    return "t_{" + join(occ) + "}^{" + join(virt) + "}";
}

struct Ansatz {
    OrbitalSpace space;
    std::vector<UCCFactor> factors; // leftmost first; the last one acts first
    AngleAssignment angles;          // numeric values where given
    bool numeric = false;

    bool fully_assigned() const
    {
        for (const auto& f : factors)
            for (const auto& [name, w] : f.angle.primitive_weights())
                if (!angles.contains(name)) return false;
        return true;
    }

    std::set<std::string> primitive_angles() const
    {
        std::set<std::string> out;
        for (const auto& f : factors)
            for (const auto& [name, w] : f.angle.primitive_weights()) out.insert(name);
        return out;
    }
};

inline void check_numeric_angle(const std::string& label, double v)
{
    if (!std::isfinite(v) || std::abs(v) >= std::numbers::pi / 2)
        throw AngleOutOfDomain("angle " + label + " = " + fmt_double(v) + " is outside (-pi/2, pi/2)");
}

inline Ansatz parse_ansatz(const nlohmann::json& j)
{
    Ansatz a;
    try {
        a.space = OrbitalSpace{j.at("n_orbitals").get<int>(), j.at("n_electrons").get<int>()};
        if (a.space.n_orbitals < 1 || a.space.n_orbitals > kMaxOrbitals || a.space.n_electrons < 0 ||
            a.space.n_electrons > a.space.n_orbitals)
            throw InputError("invalid orbital or electron count");
        const auto& fs = j.at("factors");
        if (!fs.is_array()) throw InputError("factors must be a list");

        std::optional<bool> mode;
        if (j.contains("mode")) {
            const auto m = j.at("mode").get<std::string>();
            if (m != "numeric" && m != "symbolic") throw InputError("mode must be numeric or symbolic");
            mode = m == "numeric";
        }

        bool all_numeric = true;
        std::map<std::string, int> used;
        for (const auto& f : fs) {
            const auto occ = f.at("occ").get<std::vector<int>>();
            const auto virt = f.at("virt").get<std::vector<int>>();
            const AOperator t = make_excitation(occ, virt, a.space);

            std::string label;
            std::optional<double> value;
            if (f.contains("label")) label = f.at("label").get<std::string>();
            if (f.contains("angle")) {
                const auto& g = f.at("angle");
                if (g.is_number()) value = g.get<double>();
                else if (g.is_string()) {
                    if (!label.empty()) throw InputError("factor has both a label and a symbolic angle");
                    label = g.get<std::string>();
                } else
                    throw InputError("angle must be a number or a label");
            }
            if (label.empty()) {
                label = auto_angle_label(occ, virt);
                const int seen = used[label]++;
                if (seen) label += std::string(static_cast<std::size_t>(seen), '\'');
            }
            if (label.empty() || label.find_first_of("+/ ") != std::string::npos)
                throw InputError("invalid angle label '" + label + "'");
            if (value) {
                check_numeric_angle(label, *value);
                auto [it, fresh] = a.angles.emplace(label, *value);
                if (!fresh && it->second != *value)
                    throw InputError("angle " + label + " given two different values");
            } else
                all_numeric = false;
            a.factors.emplace_back(AngleId(label), t);
        }
        if (mode == true && !all_numeric) throw InputError("numeric mode needs a numeric angle on every factor");
        a.numeric = mode.value_or(all_numeric);
        // a label assigned a number on one factor and used bare on another
        if (a.numeric && !a.fully_assigned()) throw InputError("numeric mode needs every angle assigned");
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed ansatz: ") + e.what());
    }
    return a;
}

inline nlohmann::json parse_json_text(const std::string& text)
{
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("not valid JSON: ") + e.what());
    }
}

struct CommandOptions {
    std::uint64_t seed = kDefaultSeed;
    int samples = 50;
    double tol = 1e-10;
    std::string method = "euler";
    int steps = 1;
    std::optional<int> max_rank;
    bool round_trip = false;
    int factor = 0;
};

struct CommandResult {
    int exit_code = kExitOk;
    nlohmann::json report;
    std::string text;
    std::vector<std::string> warnings;
};

inline nlohmann::json report_header(const std::string& command, const std::string& input, const CommandOptions& o)
{
    return {{"engine", "ucc2cc"},
            {"version", kEngineVersion},
            {"command", command},
            {"spec_hash", "fnv1a64:" + hex64(fnv1a64(input))},
            {"seed", o.seed},
            {"tolerances",
             {{"verify", o.tol},
              {"compare", kCompareTolerance},
              {"prune", kPruneThreshold},
              {"series", kSeriesThreshold},
              {"support", kSupportThreshold}}}};
}

namespace detail {

inline std::string rendered_factors(const Ansatz& a)
{
    std::string out;
    for (const auto& f : a.factors) out += "exp(" + f.angle.label + " (T - T+)) T = " + f.excitation.str() + "\n";
    return out;
}

inline StateVector ansatz_state(const Ansatz& a, const AngleAssignment& v) { return ucc_state(a.factors, a.space, v); }

inline AngleAssignment draw_angles(const Ansatz& a, std::mt19937_64& rng, double bound)
{
    std::uniform_real_distribution<double> d(-bound, bound);
    AngleAssignment v;
    for (const auto& name : a.primitive_angles()) v[name] = d(rng);
    return v;
}

/// CC form of a UCC state via the numeric oracle: eliminate, then rebuild.
inline StateVector elimination_fallback(const StateVector& psi)
{
    const double r = psi.coefficient(reference_determinant(psi.space()));
    return reconstruct(eliminate(psi)).scaled(r);
}

inline NumericOperatorSum generator(const UCCFactor& f, const AngleAssignment& v)
{
    const double th = angle_value(f.angle, v);
    NumericOperatorSum x;
    x.add(f.excitation, th);
    const SignedOp d = adjoint(f.excitation);
    x.add(d.op, -th * d.sign);
    return x;
}

inline StateVector simulate_state(const Ansatz& a, const std::string& method, int steps)
{
    if (!a.fully_assigned()) throw UnassignedAngle("simulate needs a numeric angle on every factor");
    if (method == "euler") return ansatz_state(a, a.angles);
    if (method == "series") {
        StateVector s = StateVector::reference(a.space);
        for (auto it = a.factors.rbegin(); it != a.factors.rend(); ++it) s = apply_exp_series(generator(*it, a.angles), s);
        return s;
    }
    if (method == "trotter") return ucc_state(trotterize(a.factors, steps), a.space, a.angles);
    if (method == "exp-sum") {
        NumericOperatorSum x;
        for (const auto& f : a.factors) x += generator(f, a.angles);
        return apply_exp_series(x, StateVector::reference(a.space));
    }
    throw InputError("unknown method '" + method + "' (euler, series, trotter, exp-sum)");
}

inline std::string diagnostics_text(const Diagnostics& d)
{
    std::string out;
    for (const auto& s : d.steps) out += "  " + s.rule + ": " + s.detail + "\n";
    for (const auto& e : d.edge_cases) out += "  edge case: " + e + "\n";
    for (const auto& n : d.notes) out += "  note: " + n + "\n";
    return out;
}

} // namespace detail

inline CommandResult cmd_ucc2cc(const std::string& input, const CommandOptions& o = {})
{
    CommandResult out;
    out.report = report_header("ucc2cc", input, o);
    const Ansatz a = parse_ansatz(parse_json_text(input));
    const CCResult r = normalize_to_cc_report(a.factors, a.space);
    out.report["result"] = r.to_json();
    out.text = "ansatz:\n" + detail::rendered_factors(a) + "CC form on the reference:\n" + r.str() +
               "derivation:\n" + detail::diagnostics_text(r.diagnostics);
    if (!r.complete) {
        out.exit_code = kExitStuck;
        out.text += "FAILED: " + r.failure + "\npartial work list:\n";
        for (const auto& p : r.partial) out.text += "  " + p + "\n";
        return out;
    }
    if (a.fully_assigned() && !a.factors.empty()) {
        const Comparison c = compare(detail::ansatz_state(a, a.angles), apply_cc_result(r, a.space, a.angles));
        out.report["cross_check"] = {{"max_abs_diff", c.max_abs_diff}, {"matched", c.matched}};
        out.text += "numeric cross-check: max |diff| = " + fmt_double(c.max_abs_diff) +
                    (c.matched ? " (matched)\n" : " (MISMATCH)\n");
        if (!c.matched) out.warnings.push_back("symbolic and numeric results disagree");
    }
    return out;
}

inline CommandResult cmd_verify(const std::string& input, const CommandOptions& o = {})
{
    CommandResult out;
    out.report = report_header("verify", input, o);
    if (o.samples < 0) throw InputError("sample count must be non-negative");
    const Ansatz a = parse_ansatz(parse_json_text(input));
    const CCResult r = normalize_to_cc_report(a.factors, a.space);
    const std::string path = r.complete ? "symbolic" : "elimination-fallback";
    if (!r.complete) out.warnings.push_back("symbolic conversion incomplete (" + r.failure + "); verified the elimination fallback instead");
    if (o.samples == 0) out.warnings.push_back("zero samples: pass is vacuous");

    std::mt19937_64 rng(o.seed);
    double worst = 0.0, worst_norm = 0.0;
    for (int k = 0; k < o.samples; ++k) {
        const AngleAssignment v = (k == 0 && a.fully_assigned()) ? a.angles : detail::draw_angles(a, rng, std::numbers::pi / 4);
        const StateVector psi = detail::ansatz_state(a, v);
        const StateVector cc = r.complete ? apply_cc_result(r, a.space, v) : detail::elimination_fallback(psi);
        worst = std::max(worst, compare(psi, cc).max_abs_diff);
        worst_norm = std::max(worst_norm, std::abs(std::sqrt(norm2(psi)) - 1.0));
    }
    const bool pass = worst <= o.tol;
    out.report["verification"] = {{"samples", o.samples},
                                  {"path", path},
                                  {"max_abs_diff", worst},
                                  {"max_norm_defect", worst_norm},
                                  {"tol", o.tol},
                                  {"pass", pass}};
    if (!r.complete) out.report["verification"]["failure"] = r.failure;
    out.text = "verify: " + std::to_string(o.samples) + " sample(s) via " + path +
               ", max |UCC - CC| = " + fmt_double(worst) + ", tol " + fmt_double(o.tol, 6) +
               (pass ? " PASS\n" : " FAIL\n");
    out.exit_code = pass ? kExitOk : kExitInput;
    return out;
}

inline CommandResult cmd_simulate(const std::string& input, const CommandOptions& o = {})
{
    CommandResult out;
    out.report = report_header("simulate", input, o);
    const Ansatz a = parse_ansatz(parse_json_text(input));
    const StateVector s = detail::simulate_state(a, o.method, o.steps);
    out.report["method"] = o.method;
    if (o.method == "trotter") out.report["steps"] = o.steps;
    out.report["state"] = to_json(s);
    out.report["norm"] = std::sqrt(norm2(s));
    out.text = "state (" + o.method + "):\n";
    for (const auto& [d, c] : s.amplitudes()) {
        std::string occ;
        for (int p : occupied_list(d)) occ += (occ.empty() ? "" : ",") + std::to_string(p);
        out.text += "  |" + occ + "> " + fmt_double(c) + "\n";
    }
    return out;
}

inline CommandResult cmd_eliminate(const std::string& input, const CommandOptions& o = {})
{
    CommandResult out;
    out.report = report_header("eliminate", input, o);
    const nlohmann::json j = parse_json_text(input);
    StateVector psi = j.contains("amplitudes") ? state_from_json(j)
                                               : detail::simulate_state(parse_ansatz(j), "euler", 1);
    const OrbitalSpace& sp = psi.space();
    const int full = std::min(sp.n_electrons, sp.n_orbitals - sp.n_electrons);
    const int rank = o.max_rank.value_or(full);
    if (rank < 0) throw InputError("max rank must be non-negative");
    const CCAmplitudes t = eliminate(psi, rank, true);
    out.report["max_rank"] = rank;
    out.report["amplitudes"] = t.to_json();
    out.report["residual"] = t.residual;
    if (t.residual > kSupportThreshold)
        out.warnings.push_back("state has support above rank " + std::to_string(rank) + "; residual " +
                               fmt_double(t.residual));
    out.text = "CC amplitudes (reference amplitude 1):\n";
    for (const auto& [r, m] : t.per_rank)
        for (const auto& [key, v] : m) {
            std::string occ, virt;
            for (int p : key.first) occ += (occ.empty() ? "" : ",") + std::to_string(p);
            for (int p : key.second) virt += (virt.empty() ? "" : ",") + std::to_string(p);
            out.text += "  rank " + std::to_string(r) + " occ [" + occ + "] virt [" + virt + "] " + fmt_double(v) + "\n";
        }
    out.text += "residual above rank " + std::to_string(rank) + ": " + fmt_double(t.residual) + "\n";
    if (o.round_trip) {
        const Comparison c = compare(reconstruct(t), intermediate_normalize(psi), o.tol);
        out.report["round_trip"] = {{"max_abs_diff", c.max_abs_diff}, {"matched", c.matched}};
        out.text += "round trip: max |diff| = " + fmt_double(c.max_abs_diff) + (c.matched ? " matched\n" : " MISMATCH\n");
        if (!c.matched) out.warnings.push_back("round trip does not reproduce the state");
    }
    return out;
}

inline CommandResult cmd_disentangle(const std::string& input, const CommandOptions& o = {})
{
    CommandResult out;
    out.report = report_header("disentangle", input, o);
    const Ansatz a = parse_ansatz(parse_json_text(input));
    if (o.factor < 0 || o.factor >= static_cast<int>(a.factors.size()))
        throw InputError("factor index " + std::to_string(o.factor) + " out of range");
    const UCCFactor& f = a.factors[static_cast<std::size_t>(o.factor)];
    const auto fwd = disentangle(f);
    const auto rev = disentangle_reversed(f);
    auto chain = [](const std::array<ExpFactor, 3>& x) { return x[0].str() + " " + x[1].str() + " " + x[2].str(); };
    const std::string lhs = "exp(" + f.angle.label + " (T - T+))";
    out.report["factor"] = {{"angle", f.angle.label}, {"T", f.excitation.str()}};
    out.report["euler"] = euler_form(f).str();
    out.report["forward"] = chain(fwd);
    out.report["reversed"] = chain(rev);
    out.text = "T = " + f.excitation.str() + "\n" + lhs + " = " + euler_form(f).str() + "\n" + lhs + " = " +
               chain(fwd) + "\n" + lhs + " = " + chain(rev) + "\n";
    return out;
}

/// Runs one subcommand; every engine error becomes an exit code and a report.
inline CommandResult run_command(const std::string& command, const std::string& input, const CommandOptions& o = {})
{
    auto failed = [&](int code, const std::string& kind, const std::string& what) {
        CommandResult r;
        r.exit_code = code;
        r.report = report_header(command, input, o);
        r.report["error"] = {{"kind", kind}, {"message", what}};
        r.text = kind + ": " + what + "\n";
        return r;
    };
    try {
        if (command == "ucc2cc") return cmd_ucc2cc(input, o);
        if (command == "verify") return cmd_verify(input, o);
        if (command == "simulate") return cmd_simulate(input, o);
        if (command == "eliminate") return cmd_eliminate(input, o);
        if (command == "disentangle") return cmd_disentangle(input, o);
        return failed(kExitInput, "InputError", "unknown command '" + command + "'");
    } catch (const NormalizationStuck& e) {
        return failed(kExitStuck, "NormalizationStuck", e.what());
    } catch (const EdgeCaseMutualMatch& e) {
        return failed(kExitStuck, "EdgeCaseMutualMatch", e.what());
    } catch (const SeriesDivergence& e) {
        return failed(kExitDivergence, "SeriesDivergence", e.what());
    } catch (const ReferenceDepleted& e) {
        return failed(kExitDepleted, "ReferenceDepleted", e.what());
    } catch (const AngleOutOfDomain& e) {
        return failed(kExitInput, "AngleOutOfDomain", e.what());
    } catch (const Error& e) {
        return failed(kExitInput, "InputError", e.what());
    }
}

} // namespace ucc2cc
