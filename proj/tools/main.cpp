// isu: surplus decomposition runs from a JSON config.
#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "isu/runs.hpp"

namespace {

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        const auto a = item.find_first_not_of(' ');
        const auto b = item.find_last_not_of(' ');
        if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
    }
    return out;
}

std::pair<unsigned, unsigned> parse_depths(const std::string& s) {
    const auto dots = s.find("..");
    try {
        if (dots == std::string::npos) {
            const auto d = static_cast<unsigned>(std::stoul(s));
            return {d, d};
        }
        return {static_cast<unsigned>(std::stoul(s.substr(0, dots))),
                static_cast<unsigned>(std::stoul(s.substr(dots + 2)))};
    } catch (const std::exception&) {
        throw CLI::ValidationError("--depth", "expected A..B");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decompose with-profit surplus into risk-factor contributions"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::string scheme, order, depth;
    std::size_t paths = 0;
    std::uint64_t seed = 0;
    bool check = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--scheme", scheme, "decomposition scheme name");
        cmd->add_flag("--check", check, "exit nonzero when a tolerance is missed");
    };
    auto* decompose = app.add_subcommand("decompose", "SU, OAT and closed-form ISU on one partition");
    auto* converge = app.add_subcommand("converge", "SU and OAT along dyadic refinements");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo check of the mean-portfolio forms");
    auto* validate = app.add_subcommand("validate", "load and check a configuration");
    for (auto* cmd : {decompose, converge, simulate, validate}) add_common(cmd);
    for (auto* cmd : {decompose, converge}) {
        cmd->add_option("--order", order, "comma-separated factor labels in update order");
        cmd->add_option("--depth", depth, "dyadic depth range A..B");
    }
    simulate->add_option("--paths", paths, "number of simulated paths");
    simulate->add_option("--seed", seed, "random seed");

    CLI11_PARSE(app, argc, argv);

    try {
        isu::RunConfig config = isu::load_config(config_path);
        isu::RunOptions options;
        options.out_dir = out_dir;
        if (!scheme.empty()) options.scheme = scheme;
        if (!order.empty()) options.order = split(order);
        if (!depth.empty()) options.depths = parse_depths(depth);
        if (paths) options.paths = paths;
        if (simulate->count("--seed")) options.seed = seed;
        isu::apply(config, options);

        isu::RunOutcome outcome;
        if (*decompose)
            outcome = isu::run_decompose(config, options);
        else if (*converge)
            outcome = isu::run_converge(config, options);
        else if (*simulate)
            outcome = isu::run_simulate(config, options);
        else
            outcome = isu::run_validate(config);

        std::cout << outcome.summary;
        for (const auto& f : outcome.files) std::cout << "wrote " << f.string() << "\n";
        if (check && !outcome.ok) {
            std::cerr << "tolerance check failed\n";
            return 2;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
