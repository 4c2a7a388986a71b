#include <ucc2cc/cli.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

std::string read_input(const std::string& path)
{
    std::ostringstream os;
    if (path == "-") {
        os << std::cin.rdbuf();
        return os.str();
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ucc2cc::InputError("cannot open " + path);
    os << in.rdbuf();
    return os.str();
}

// write-then-rename so readers never see a half-written report
void write_atomically(const std::string& path, const std::string& body)
{
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ucc2cc::InputError("cannot write " + tmp);
        out << body;
        if (!out.flush()) throw ucc2cc::InputError("cannot write " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Factorized unitary coupled cluster to coupled cluster converter"};
    app.require_subcommand(1);

    ucc2cc::CommandOptions opt;
    std::string input, out_path, format = "json";
    auto common = [&](CLI::App* sub, const char* what) {
        sub->add_option("input", input, what)->required();
        sub->add_option("--out", out_path, "write the report here instead of stdout");
        sub->add_option("--seed", opt.seed, "random seed")->capture_default_str();
        sub->add_option("--format", format, "json or text")->check(CLI::IsMember({"json", "text"}))->capture_default_str();
    };

    auto* conv = app.add_subcommand("ucc2cc", "convert a factorized UCC ansatz to CC form on the reference");
    common(conv, "ansatz JSON file ('-' for stdin)");

    auto* ver = app.add_subcommand("verify", "compare UCC and converted CC states on random angles");
    common(ver, "ansatz JSON file ('-' for stdin)");
    ver->add_option("--samples", opt.samples, "number of angle samples")->capture_default_str();
    ver->add_option("--tol", opt.tol, "max-norm tolerance")->capture_default_str();

    auto* sim = app.add_subcommand("simulate", "evaluate the ansatz state");
    common(sim, "ansatz JSON file ('-' for stdin)");
    sim->add_option("--method", opt.method, "euler, series, trotter or exp-sum")
        ->check(CLI::IsMember({"euler", "series", "trotter", "exp-sum"}))
        ->capture_default_str();
    sim->add_option("--steps", opt.steps, "Trotter step count")->check(CLI::PositiveNumber)->capture_default_str();

    auto* eli = app.add_subcommand("eliminate", "extract CC amplitudes from a state or an ansatz");
    common(eli, "state JSON or ansatz JSON file ('-' for stdin)");
    int max_rank = -1;
    eli->add_option("--max-rank", max_rank, "highest extracted rank (default: full)");
    eli->add_flag("--round-trip", opt.round_trip, "rebuild the state from the amplitudes and compare");
    eli->add_option("--tol", opt.tol, "round-trip tolerance")->capture_default_str();

    auto* dis = app.add_subcommand("disentangle", "print the disentangling identity for one factor");
    common(dis, "ansatz JSON file ('-' for stdin)");
    dis->add_option("--factor", opt.factor, "factor index, leftmost is 0")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : ucc2cc::kExitInput;
    }
    if (max_rank >= 0) opt.max_rank = max_rank;

    const std::string command = app.get_subcommands().front()->get_name();
    ucc2cc::CommandResult r;
    try {
        r = ucc2cc::run_command(command, read_input(input), opt);
    } catch (const ucc2cc::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return ucc2cc::kExitInput;
    }
    if (!r.warnings.empty()) r.report["warnings"] = r.warnings;
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    const bool to_file = !out_path.empty();

    std::string body;
    if (format == "json")
        body = r.report.dump(2) + "\n";
    else {
        body = r.text;
        if (to_file)
            for (const auto& w : r.warnings) body += "warning: " + w + "\n";
    }
    try {
        if (!to_file)
            std::cout << body;
        else
            write_atomically(out_path, body);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return ucc2cc::kExitInput;
    }
    return r.exit_code;
}
