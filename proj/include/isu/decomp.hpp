#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "isu/surplus.hpp"

namespace isu {

// 0 = t_0 < t_1 < ... < t_k = t
class Partition {
public:
    Partition() = default;
    explicit Partition(std::vector<double> times);

    // 2^depth equal steps on [0, t].
    static Partition dyadic(double t, unsigned depth);
    // Integer years 0, 1, ..., t (t must be an integer).
    static Partition yearly(double t);

    const std::vector<double>& times() const { return times_; }
    std::size_t steps() const { return times_.size() - 1; }
    double end() const { return times_.back(); }
    double mesh() const;

private:
    std::vector<double> times_;
};

struct DecompositionResult {
    std::string scheme;
    std::string method;  // SU, OAT, ISU, averaged ISU
    std::vector<std::string> labels;
    std::vector<double> contributions;  // D_i(t)
    std::optional<double> interaction;  // OAT only
    double total = 0.0;                 // R(t) - R(0)
    double r0 = 0.0;

    // Cumulative values at the partition times.
    std::vector<double> times;
    std::vector<std::vector<double>> series;  // [time][factor]
    std::vector<double> interaction_series;

    std::size_t partition_size = 0;
    std::vector<std::size_t> order;

    double sum() const;
    // sum + interaction - total
    double residual() const;
    double value(const std::string& label) const;
};

// SU decomposition; order[q] is the factor updated q-th within each step.
DecompositionResult su_decompose(const SurplusSurface& surface, const Partition& partition,
                                 const std::vector<std::size_t>& order);
DecompositionResult su_decompose(const SurplusSurface& surface, const Partition& partition);

// Closed-form ISU on the fine factors, aggregated to `scheme`, with values at the
// partition times. The individual form needs an individual model, the mean form a
// mean model.
DecompositionResult isu_individual(const SurplusModel& model, const DecompositionScheme& scheme,
                                   const Partition& partition);
DecompositionResult isu_mean(const SurplusModel& model, const DecompositionScheme& scheme, const Partition& partition);
DecompositionResult isu_closed_form(const SurplusModel& model, const DecompositionScheme& scheme,
                                    const Partition& partition);

// Regroup a result on `fine` labels into sums over the groups.
DecompositionResult aggregate(const DecompositionResult& fine,
                              const std::vector<std::pair<std::string, std::vector<std::string>>>& groups);
DecompositionResult aggregate(const DecompositionResult& fine, const DecompositionScheme& scheme);

struct ConvergenceOptions {
    double cauchy_tolerance = 1e-6;    // absolute, successive differences
    double relative_tolerance = 1e-3;  // against the closed form
    // Denominator floor for relative errors, as a fraction of the largest closed-form factor.
    double relative_floor = 1e-2;
};

struct ConvergenceReport {
    std::vector<DecompositionResult> steps;
    std::vector<std::vector<double>> cauchy;    // [step][factor], NaN for the first step
    std::vector<std::vector<double>> distance;  // [step][factor] relative distance to the closed form
    std::vector<double> max_distance;           // per step
    std::optional<DecompositionResult> reference;
    double estimated_order = 0.0;               // log2 ratio of the last two max distances
    bool converged = false;
};

double relative_distance(double value, double reference, double scale, const ConvergenceOptions& options);

// SU along refining partitions with diagnostics; `reference` is the closed form when known.
ConvergenceReport isu_limit_estimate(const SurplusSurface& surface, const std::vector<Partition>& partitions,
                                     const std::vector<std::size_t>& order,
                                     const std::optional<DecompositionResult>& reference = std::nullopt,
                                     const ConvergenceOptions& options = {});

// One-at-a-time decomposition; the interaction is the residual.
DecompositionResult oat_decompose(const SurplusSurface& surface, const Partition& partition);
ConvergenceReport ioat_limit(const SurplusSurface& surface, const std::vector<Partition>& partitions,
                             const std::optional<DecompositionResult>& reference = std::nullopt,
                             const ConvergenceOptions& options = {});

inline constexpr std::size_t kMaxAveragedFactors = 8;

// Average of SU decompositions over all factor orders.
DecompositionResult averaged_isu(const SurplusSurface& surface, const Partition& partition);

std::vector<Partition> dyadic_partitions(double t, unsigned first_depth, unsigned last_depth);

}  // namespace isu
