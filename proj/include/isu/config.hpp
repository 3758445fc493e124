#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "isu/contract.hpp"
#include "isu/surplus.hpp"

namespace isu {

// Schema violation; the message starts with the JSON field path.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    ContractSpec contract;
    ValuationBasis first_order;
    ValuationBasis second_order;
    std::optional<PolicyPath> path;
    std::optional<double> premium;  // fitted level when the fair-premium flag is set

    std::string scheme = "financial_unsystematic_systematic";
    std::vector<std::pair<std::string, std::vector<std::string>>> custom_groups;
    Perspective perspective = Perspective::Mean;
    double t = 0.0;
    unsigned depth_first = 4;
    unsigned depth_last = 8;
    std::vector<double> partition_times;  // explicit partition; overrides the depths
    std::vector<std::vector<std::string>> orders;
    Numerics numerics;
    std::uint64_t seed = 1;
    std::size_t paths = 10000;

    TimeGrid grid;  // every cash-flow, basis and path time point

    DecompositionScheme make_scheme() const;
    std::vector<std::size_t> order_indices(const DecompositionScheme& scheme, const std::vector<std::string>& labels) const;
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& file);

// Human-readable summary of the inferred grid and inputs.
std::string describe(const RunConfig& config);

}  // namespace isu
