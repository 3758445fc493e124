#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "isu/config.hpp"
#include "isu/decomp.hpp"

namespace isu {

inline constexpr const char* kCsvVersion = "isu-csv/1";

// RFC 4180 writer with a leading version comment line.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& file, const std::string& kind, const std::vector<std::string>& header);

    void row(const std::vector<std::string>& fields);
    static std::string quote(const std::string& field);
    static std::string number(double v);

private:
    std::ofstream out_;
    std::filesystem::path file_;
};

struct RunOutcome {
    bool ok = true;  // every checked tolerance met
    std::vector<std::filesystem::path> files;
    std::string summary;
};

struct RunOptions {
    std::filesystem::path out_dir = ".";
    std::optional<std::string> scheme;
    std::optional<std::vector<std::string>> order;
    std::optional<std::pair<unsigned, unsigned>> depths;
    std::optional<std::size_t> paths;
    std::optional<std::uint64_t> seed;
};

// Applies command-line overrides to a loaded config.
void apply(RunConfig& config, const RunOptions& options);

RunOutcome run_decompose(const RunConfig& config, const RunOptions& options);
RunOutcome run_converge(const RunConfig& config, const RunOptions& options);
RunOutcome run_simulate(const RunConfig& config, const RunOptions& options);
RunOutcome run_validate(const RunConfig& config);

}  // namespace isu
