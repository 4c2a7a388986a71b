#include <ucc2cc/cli.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace ucc2cc;

namespace {

const char* kThreeSingles = R"({"n_orbitals": 4, "n_electrons": 2, "mode": "symbolic", "factors": [
    {"occ": [1], "virt": [2], "angle": "ja"},
    {"occ": [1], "virt": [3], "angle": "jb"},
    {"occ": [0], "virt": [2], "angle": "ia"}]})";

const char* kTwoSingles = R"({"n_orbitals": 4, "n_electrons": 2, "factors": [
    {"occ": [1], "virt": [3], "angle": 0.3},
    {"occ": [0], "virt": [2], "angle": -0.7}]})";

const char* kThreeDoubles = R"({"n_orbitals": 8, "n_electrons": 4, "factors": [
    {"occ": [0, 2], "virt": [4, 6]},
    {"occ": [2, 3], "virt": [6, 7]},
    {"occ": [0, 1], "virt": [4, 5]}]})";

const char* kDense = R"({"n_orbitals": 4, "n_electrons": 2, "factors": [
    {"occ": [0, 1], "virt": [2, 3], "angle": 0.3},
    {"occ": [0], "virt": [2], "angle": -0.4},
    {"occ": [1], "virt": [3], "angle": 0.5},
    {"occ": [0], "virt": [3], "angle": 0.2},
    {"occ": [1], "virt": [2], "angle": -0.6}]})";

const char* kPair = R"({"n_orbitals": 4, "n_electrons": 2, "factors": [
    {"occ": [0, 1], "virt": [2, 3], "angle": 0.5},
    {"occ": [1], "virt": [3], "angle": 0.7}]})";

std::string single(double theta)
{
    return R"({"n_orbitals": 4, "n_electrons": 2, "factors": [{"occ": [1], "virt": [3], "angle": )" +
           fmt_double(theta) + "}]}";
}

std::set<std::string> amplitude_bases(const nlohmann::json& report)
{
    std::set<std::string> out;
    for (const auto& f : report.at("result").at("factors"))
        for (const auto& t : f.at("terms")) out.insert(t.at("amplitude").at("base").get<std::string>());
    return out;
}

} // namespace

TEST(Cli, AutoLabels)
{
    EXPECT_EQ(auto_angle_label({0, 1}, {4, 5}), "t_{01}^{45}");
    EXPECT_EQ(auto_angle_label({0}, {12}), "t_{0}^{12}");
    EXPECT_EQ(auto_angle_label({3, 9}, {10, 11}), "t_{3,9}^{10,11}");
    const Ansatz a = parse_ansatz(nlohmann::json::parse(kThreeDoubles));
    EXPECT_EQ(a.factors[0].angle.label, "t_{02}^{46}");
    EXPECT_FALSE(a.numeric);
}

TEST(Cli, RepeatedGeneratorsGetDistinctAutoLabels)
{
    const Ansatz a = parse_ansatz(nlohmann::json::parse(
        R"({"n_orbitals": 4, "n_electrons": 2, "factors": [{"occ": [0], "virt": [2], "angle": 0.1},
            {"occ": [0], "virt": [2], "angle": 0.2}]})"));
    EXPECT_NE(a.factors[0].angle.label, a.factors[1].angle.label);
    EXPECT_TRUE(a.numeric);
}

TEST(Cli, ParseErrors)
{
    const CommandOptions o;
    EXPECT_EQ(run_command("ucc2cc", "{", o).exit_code, kExitInput);
    EXPECT_EQ(run_command("ucc2cc", R"({"n_orbitals": 4})", o).exit_code, kExitInput);
    EXPECT_EQ(run_command("ucc2cc", R"({"n_orbitals": 4, "n_electrons": 2, "factors": [{"occ": [2], "virt": [3]}]})", o)
                  .exit_code,
              kExitInput);
    EXPECT_EQ(run_command("ucc2cc", R"({"n_orbitals": 4, "n_electrons": 2, "mode": "numeric",
                                        "factors": [{"occ": [0], "virt": [3], "angle": "x"}]})",
                          o)
                  .exit_code,
              kExitInput);
    EXPECT_EQ(run_command("frobnicate", kTwoSingles, o).exit_code, kExitInput);
}

TEST(Cli, ThreeSinglesReport)
{
    const CommandResult r = cmd_ucc2cc(kThreeSingles);
    ASSERT_EQ(r.exit_code, kExitOk);
    const AngleId ja("ja"), jb("jb"), ia("ia");
    const std::set<std::string> expected{
        ScalarExpr::tan(ja).str(), (ScalarExpr::tan(jb) * ScalarExpr::sec(ja)).str(),
        (ScalarExpr::tan(ia) * ScalarExpr::sec(ja)).str(),
        (ScalarExpr::tan(ja) * ScalarExpr::tan(jb) * ScalarExpr::tan(ia)).str()};
    EXPECT_EQ(amplitude_bases(r.report), expected);
    EXPECT_FALSE(r.report.contains("cross_check"));
}

TEST(Cli, EmptyFactorList)
{
    const CommandResult r = cmd_ucc2cc(R"({"n_orbitals": 4, "n_electrons": 2, "factors": []})");
    EXPECT_EQ(r.exit_code, kExitOk);
    EXPECT_EQ(r.report["result"]["prefactor"], ScalarExpr(1).str());
    EXPECT_TRUE(r.report["result"]["factors"].empty());
}

TEST(Cli, AngleOutOfDomain)
{
    const CommandResult r = run_command("ucc2cc", single(1.6));
    EXPECT_EQ(r.exit_code, kExitInput);
    EXPECT_EQ(r.report["error"]["kind"], "AngleOutOfDomain");
}

TEST(Cli, NumericCrossCheck)
{
    const CommandResult r = cmd_ucc2cc(kTwoSingles);
    ASSERT_TRUE(r.report.contains("cross_check"));
    EXPECT_TRUE(r.report["cross_check"]["matched"].get<bool>());
}

TEST(Cli, StuckConversionExitsWithPartialReport)
{
    const CommandResult r = run_command("ucc2cc", kDense);
    EXPECT_EQ(r.exit_code, kExitStuck);
    EXPECT_FALSE(r.report["result"]["complete"].get<bool>());
    EXPECT_FALSE(r.report["result"]["partial"].empty());
}

TEST(Cli, VerifyPasses)
{
    CommandOptions o;
    o.samples = 50;
    o.tol = 1e-10;
    for (const char* spec : {kTwoSingles, kThreeDoubles, kThreeSingles}) {
        const CommandResult r = run_command("verify", spec, o);
        EXPECT_EQ(r.exit_code, kExitOk) << spec;
        EXPECT_EQ(r.report["verification"]["path"], "symbolic");
        EXPECT_LE(r.report["verification"]["max_abs_diff"].get<double>(), 1e-10);
        EXPECT_LE(r.report["verification"]["max_norm_defect"].get<double>(), 1e-12);
    }
}

TEST(Cli, VerifyFallsBackToElimination)
{
    const CommandResult r = run_command("verify", kDense);
    EXPECT_EQ(r.exit_code, kExitOk);
    EXPECT_EQ(r.report["verification"]["path"], "elimination-fallback");
    EXPECT_FALSE(r.warnings.empty());
}

TEST(Cli, VerifyZeroSamples)
{
    CommandOptions o;
    o.samples = 0;
    const CommandResult r = run_command("verify", kTwoSingles, o);
    EXPECT_EQ(r.exit_code, kExitOk);
    EXPECT_TRUE(r.report["verification"]["pass"].get<bool>());
    ASSERT_EQ(r.warnings.size(), 1u);
}

TEST(Cli, SimulateSingleFactor)
{
    const double th = 0.37;
    for (const char* m : {"euler", "series", "trotter", "exp-sum"}) {
        CommandOptions o;
        o.method = m;
        const CommandResult r = run_command("simulate", single(th), o);
        ASSERT_EQ(r.exit_code, kExitOk) << m;
        const StateVector s = state_from_json(r.report["state"]);
        ASSERT_EQ(s.size(), 2u) << m;
        EXPECT_NEAR(s.coefficient(0b0011), std::cos(th), 1e-15) << m;
        EXPECT_NEAR(s.coefficient(0b1001), std::sin(th), 1e-15) << m;
    }
}

TEST(Cli, TrotterOneStepIsEuler)
{
    CommandOptions o;
    o.method = "trotter";
    o.steps = 1;
    const auto t = run_command("simulate", kPair, o).report["state"];
    o.method = "euler";
    EXPECT_EQ(t, run_command("simulate", kPair, o).report["state"]);
}

TEST(Cli, TrotterGapShrinks)
{
    CommandOptions o;
    o.method = "exp-sum";
    const StateVector exact = state_from_json(run_command("simulate", kPair, o).report["state"]);
    o.method = "trotter";
    double last = 1.0;
    for (int m : {1, 2, 4, 8, 16}) {
        o.steps = m;
        const double gap = compare(state_from_json(run_command("simulate", kPair, o).report["state"]), exact).max_abs_diff;
        EXPECT_LT(gap, last) << m;
        last = gap;
    }
}

TEST(Cli, SimulateNeedsNumericAngles)
{
    EXPECT_EQ(run_command("simulate", kThreeSingles).exit_code, kExitInput);
}

TEST(Cli, EliminateSingleFactor)
{
    const double th = -0.81;
    CommandOptions o;
    o.round_trip = true;
    const CommandResult r = run_command("eliminate", single(th), o);
    ASSERT_EQ(r.exit_code, kExitOk);
    ASSERT_EQ(r.report["amplitudes"].size(), 1u);
    EXPECT_NEAR(r.report["amplitudes"][0]["value"].get<double>(), std::tan(th), 1e-15);
    EXPECT_TRUE(r.report["round_trip"]["matched"].get<bool>());
    EXPECT_TRUE(r.warnings.empty());
}

TEST(Cli, EliminateTruncatedReportsResidual)
{
    CommandOptions o;
    o.max_rank = 1;
    const CommandResult r = run_command("eliminate", kPair, o);
    EXPECT_EQ(r.exit_code, kExitOk);
    EXPECT_GT(r.report["residual"].get<double>(), 1e-3);
    EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(Cli, EliminateStateInput)
{
    const CommandResult r =
        run_command("eliminate", R"({"n_orbitals": 4, "n_electrons": 2, "amplitudes": [{"occ": [0, 2], "coeff": 1}]})");
    EXPECT_EQ(r.exit_code, kExitDepleted);
    const CommandResult s = run_command(
        "eliminate",
        R"({"n_orbitals": 4, "n_electrons": 2, "amplitudes": [{"occ": [0, 1], "coeff": 2}, {"occ": [0, 3], "coeff": 1}]})");
    ASSERT_EQ(s.exit_code, kExitOk);
    // A(3;1)|0,1> = +|0,3>
    EXPECT_DOUBLE_EQ(s.report["amplitudes"][0]["value"].get<double>(), 0.5);
}

TEST(Cli, Disentangle)
{
    CommandOptions o;
    o.factor = 1;
    const CommandResult r = run_command("disentangle", kThreeSingles, o);
    ASSERT_EQ(r.exit_code, kExitOk);
    EXPECT_EQ(r.report["factor"]["angle"], "jb");
    EXPECT_NE(r.report["forward"].get<std::string>().find("lncos(jb)"), std::string::npos);
    o.factor = 3;
    EXPECT_EQ(run_command("disentangle", kThreeSingles, o).exit_code, kExitInput);
}

TEST(Cli, ReportsAreDeterministicAndStamped)
{
    CommandOptions o;
    o.seed = 99;
    const auto a = run_command("verify", kThreeDoubles, o).report.dump();
    EXPECT_EQ(a, run_command("verify", kThreeDoubles, o).report.dump());
    const auto j = nlohmann::json::parse(a);
    EXPECT_EQ(j["seed"], 99);
    EXPECT_EQ(j["version"], kEngineVersion);
    EXPECT_EQ(j["spec_hash"], "fnv1a64:" + hex64(fnv1a64(kThreeDoubles)));
    EXPECT_TRUE(j["tolerances"].contains("verify"));
}

TEST(Cli, Fnv1a)
{
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
}
