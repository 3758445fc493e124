#include "isu/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>

namespace isu {

namespace {

// Portable uniform on [0, 1) from the top 53 bits.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

void SimulationConfig::validate() const {
    if (paths < 1) throw std::invalid_argument("simulation needs at least one path");
    if (substeps < 1) throw std::invalid_argument("simulation needs at least one substep");
    if (horizon && !(*horizon >= 0.0)) throw std::invalid_argument("simulation horizon must be nonnegative");
}

PathSampler::PathSampler(const IntensityMatrix& intensities, NodeGrid nodes) : nodes_(std::move(nodes)) {
    intensities.validate();
    initial_ = intensities.states().initial();
    const IntensityTable table = tabulate(intensities, nodes_);
    const auto n = static_cast<Eigen::Index>(intensities.size());
    moves_.resize(nodes_.intervals());
    for (std::size_t i = 0; i < nodes_.intervals(); ++i) {
        const double h = nodes_.width(i);
        moves_[i].resize(static_cast<std::size_t>(n));
        for (Eigen::Index j = 0; j < n; ++j) {
            double cum = 0.0;
            for (Eigen::Index k = 0; k < n; ++k) {
                if (k == j) continue;
                double prob = table.density[i](j, k) * h;
                if (table.has_jump[i + 1]) prob += table.jump[i + 1](j, k);
                if (prob <= 0.0) continue;
                cum += prob;
                moves_[i][static_cast<std::size_t>(j)].push_back({static_cast<std::size_t>(k), cum});
            }
            if (cum > 1.0 + 1e-12) {
                throw std::invalid_argument("substep too wide: transition probability " + std::to_string(cum) +
                                            " exceeds 1 after t = " + std::to_string(nodes_.node(i)));
            }
        }
    }
}

PolicyPath PathSampler::sample(std::uint64_t seed, std::uint64_t stream, std::optional<double> horizon) const {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    std::mt19937_64 rng(seq);
    const double end = horizon.value_or(nodes_.node(nodes_.size() - 1));
    std::size_t state = initial_;
    std::vector<JumpRecord> jumps;
    for (std::size_t i = 0; i < nodes_.intervals(); ++i) {
        if (nodes_.node(i + 1) > end + kTimeTol) break;
        const auto& options = moves_[i][state];
        if (options.empty()) continue;
        const double u = uniform01(rng);
        for (const auto& mv : options) {
            if (u < mv.cumulative) {
                jumps.push_back({nodes_.node(i + 1), state, mv.to});
                state = mv.to;
                break;
            }
        }
    }
    return PolicyPath(initial_, std::move(jumps), nodes_.node(nodes_.size() - 1));
}

PolicyPath simulate_path(const IntensityMatrix& intensities, const SimulationConfig& config, std::uint64_t stream) {
    config.validate();
    const PathSampler sampler(intensities, NodeGrid(intensities.grid(), config.substeps));
    return sampler.sample(config.seed, stream, config.horizon);
}

double MonteCarloEstimate::z_score(double target) const {
    const double gap = mean - target;
    if (std_error == 0.0) return gap == 0.0 ? 0.0 : std::copysign(INFINITY, gap);
    return gap / std_error;
}

std::vector<MonteCarloEstimate> monte_carlo_mean(const PathFunctional& fn, const PathSampler& sampler,
                                                 const SimulationConfig& config) {
    config.validate();
    std::vector<std::vector<double>> values(config.paths);
    const std::size_t workers = std::min<std::size_t>(
        config.paths, config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency()));
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_lock;
    auto work = [&] {
        for (std::size_t i = next++; i < config.paths; i = next++) {
            try {
                values[i] = fn(sampler.sample(config.seed, i, config.horizon));
            } catch (...) {
                std::lock_guard<std::mutex> g(error_lock);
                if (!error) error = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);

    const std::size_t outputs = values.front().size();
    std::vector<MonteCarloEstimate> out(outputs);
    const double n = static_cast<double>(config.paths);
    for (std::size_t k = 0; k < outputs; ++k) {
        double sum = 0.0;
        for (const auto& v : values) {
            if (v.size() != outputs) throw std::invalid_argument("path functional returned a varying number of outputs");
            sum += v[k];
        }
        const double mean = sum / n;
        double ss = 0.0;
        for (const auto& v : values) ss += (v[k] - mean) * (v[k] - mean);
        const double var = config.paths > 1 ? ss / (n - 1.0) : 0.0;
        out[k] = {mean, std::sqrt(var / n), config.paths};
    }
    return out;
}

std::vector<MonteCarloEstimate> monte_carlo_mean(const PathFunctional& fn, const IntensityMatrix& intensities,
                                                 const SimulationConfig& config) {
    config.validate();
    const PathSampler sampler(intensities, NodeGrid(intensities.grid(), config.substeps));
    return monte_carlo_mean(fn, sampler, config);
}

MonteCarloEstimate monte_carlo_mean(const std::function<double(const PolicyPath&)>& fn,
                                    const IntensityMatrix& intensities, const SimulationConfig& config) {
    return monte_carlo_mean([&](const PolicyPath& p) { return std::vector<double>{fn(p)}; }, intensities, config)
        .front();
}

}  // namespace isu
