#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "isu/markov.hpp"

namespace isu {

struct SimulationConfig {
    std::size_t paths = 10000;
    std::uint64_t seed = 1;
    std::size_t substeps = 64;     // per cell of the intensity grid, when no node grid is given
    std::optional<double> horizon;  // simulate on [0, horizon]; defaults to the intensity horizon
    std::size_t threads = 0;        // 0 = hardware concurrency

    void validate() const;
};

// Discrete-time sampler on a node grid: at node u_{i+1} the insured leaves j for k
// with probability lambda_jk h_i + dLambda_jk(u_{i+1}), mirroring the product rule.
class PathSampler {
public:
    PathSampler(const IntensityMatrix& intensities, NodeGrid nodes);

    const NodeGrid& nodes() const { return nodes_; }
    // Same (seed, stream) gives the same path bit for bit.
    PolicyPath sample(std::uint64_t seed, std::uint64_t stream, std::optional<double> horizon = std::nullopt) const;

private:
    struct Move {
        std::size_t to;
        double cumulative;
    };
    NodeGrid nodes_;
    std::size_t initial_ = 0;
    std::vector<std::vector<std::vector<Move>>> moves_;  // [interval][state]
};

PolicyPath simulate_path(const IntensityMatrix& intensities, const SimulationConfig& config, std::uint64_t stream);

struct MonteCarloEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t paths = 0;

    // (mean - target) / std_error; 0 when both the error and the gap vanish.
    double z_score(double target) const;
};

using PathFunctional = std::function<std::vector<double>(const PolicyPath&)>;

// Sample means of every output of `fn`; paths are reduced in stream order so the
// result does not depend on the thread count.
std::vector<MonteCarloEstimate> monte_carlo_mean(const PathFunctional& fn, const PathSampler& sampler,
                                                 const SimulationConfig& config);
std::vector<MonteCarloEstimate> monte_carlo_mean(const PathFunctional& fn, const IntensityMatrix& intensities,
                                                 const SimulationConfig& config);
MonteCarloEstimate monte_carlo_mean(const std::function<double(const PolicyPath&)>& fn,
                                    const IntensityMatrix& intensities, const SimulationConfig& config);

}  // namespace isu
