#include "isu/decomp.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

namespace isu {

// ---------------------------------------------------------------- partitions

Partition::Partition(std::vector<double> times) : times_(std::move(times)) {
    if (times_.size() < 2) throw std::invalid_argument("a partition needs at least two points");
    if (std::abs(times_.front()) > kTimeTol) throw std::invalid_argument("a partition must start at 0");
    times_.front() = 0.0;
    for (std::size_t i = 1; i < times_.size(); ++i)
        if (!(times_[i] > times_[i - 1])) throw std::invalid_argument("partition times must be strictly increasing");
}

Partition Partition::dyadic(double t, unsigned depth) {
    if (!(t > 0.0)) throw std::invalid_argument("partition end must be positive");
    if (depth > 30) throw std::invalid_argument("dyadic depth too large");
    const std::size_t n = std::size_t{1} << depth;
    std::vector<double> times(n + 1);
    for (std::size_t i = 0; i <= n; ++i) times[i] = t * static_cast<double>(i) / static_cast<double>(n);
    times.back() = t;
    return Partition(std::move(times));
}

Partition Partition::yearly(double t) {
    const double r = std::round(t);
    if (std::abs(t - r) > kTimeTol || r < 1.0) throw std::invalid_argument("yearly partition needs a positive integer end");
    std::vector<double> times;
    for (int k = 0; k <= static_cast<int>(r); ++k) times.push_back(k);
    return Partition(std::move(times));
}

double Partition::mesh() const {
    double m = 0.0;
    for (std::size_t i = 1; i < times_.size(); ++i) m = std::max(m, times_[i] - times_[i - 1]);
    return m;
}

std::vector<Partition> dyadic_partitions(double t, unsigned first_depth, unsigned last_depth) {
    if (first_depth > last_depth) throw std::invalid_argument("depth range is empty");
    std::vector<Partition> out;
    for (unsigned d = first_depth; d <= last_depth; ++d) out.push_back(Partition::dyadic(t, d));
    return out;
}

// ---------------------------------------------------------------- results

double DecompositionResult::sum() const { return std::accumulate(contributions.begin(), contributions.end(), 0.0); }

double DecompositionResult::residual() const { return sum() + interaction.value_or(0.0) - total; }

double DecompositionResult::value(const std::string& label) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) return contributions[i];
    throw std::invalid_argument("no factor '" + label + "' in the result");
}

namespace {

std::vector<std::size_t> node_indices(const SurplusModel& model, const Partition& partition) {
    std::vector<std::size_t> idx;
    for (double t : partition.times()) idx.push_back(model.node_index(t));
    return idx;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min<std::size_t>(count, std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_lock;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> g(error_lock);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

DecompositionResult empty_result(const SurplusSurface& surface, const Partition& partition, std::string method) {
    DecompositionResult r;
    r.scheme = surface.scheme().name();
    r.method = std::move(method);
    r.labels = surface.scheme().labels();
    r.contributions.assign(surface.scheme().size(), 0.0);
    r.partition_size = partition.steps();
    r.times = partition.times();
    r.series.push_back(r.contributions);
    return r;
}

}  // namespace

// ---------------------------------------------------------------- SU

DecompositionResult su_decompose(const SurplusSurface& surface, const Partition& partition,
                                 const std::vector<std::size_t>& order) {
    const SurplusModel& model = surface.model();
    const std::size_t m = surface.scheme().size();
    if (order.size() != m) throw std::invalid_argument("update order must list every factor once");
    std::vector<int> seen(m, 0);
    for (std::size_t i : order)
        if (i >= m || seen[i]++) throw std::invalid_argument("update order is not a permutation");

    const auto idx = node_indices(model, partition);
    DecompositionResult r = empty_result(surface, partition, "SU");
    r.order = order;

    SurplusModel::State prefix = model.initial_state();
    r.r0 = -model.close(prefix);
    double current = r.r0;
    for (std::size_t l = 0; l + 1 < idx.size(); ++l) {
        std::vector<char> active(m, 0);
        for (std::size_t q = 0; q < m; ++q) {
            active[order[q]] = 1;
            SurplusModel::State w = prefix;
            model.advance(w, idx[l + 1], surface.fine_mask(active));
            const double u = -model.close(w);
            r.contributions[order[q]] += u - current;
            current = u;
            if (q + 1 == m) prefix = std::move(w);
        }
        r.series.push_back(r.contributions);
    }
    r.total = current - r.r0;
    return r;
}

DecompositionResult su_decompose(const SurplusSurface& surface, const Partition& partition) {
    std::vector<std::size_t> order(surface.scheme().size());
    std::iota(order.begin(), order.end(), 0);
    return su_decompose(surface, partition, order);
}

// ---------------------------------------------------------------- OAT

DecompositionResult oat_decompose(const SurplusSurface& surface, const Partition& partition) {
    const SurplusModel& model = surface.model();
    const std::size_t m = surface.scheme().size();
    const auto idx = node_indices(model, partition);
    DecompositionResult r = empty_result(surface, partition, "OAT");
    r.interaction = 0.0;
    r.interaction_series.push_back(0.0);

    SurplusModel::State prefix = model.initial_state();
    r.r0 = -model.close(prefix);
    double current = r.r0;
    for (std::size_t l = 0; l + 1 < idx.size(); ++l) {
        double step_sum = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            std::vector<char> active(m, 0);
            active[i] = 1;
            SurplusModel::State w = prefix;
            model.advance(w, idx[l + 1], surface.fine_mask(active));
            const double d = -model.close(w) - current;
            r.contributions[i] += d;
            step_sum += d;
        }
        model.advance(prefix, idx[l + 1], std::vector<char>(model.fine().size(), 1));
        const double next = -model.close(prefix);
        *r.interaction += next - current - step_sum;
        current = next;
        r.series.push_back(r.contributions);
        r.interaction_series.push_back(*r.interaction);
    }
    r.total = current - r.r0;
    return r;
}

// ---------------------------------------------------------------- averaged ISU

DecompositionResult averaged_isu(const SurplusSurface& surface, const Partition& partition) {
    const std::size_t m = surface.scheme().size();
    if (m > kMaxAveragedFactors)
        throw std::invalid_argument("averaged ISU enumerates m! orders and is limited to " +
                                    std::to_string(kMaxAveragedFactors) + " factors");
    std::vector<std::vector<std::size_t>> orders;
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    do orders.push_back(order);
    while (std::next_permutation(order.begin(), order.end()));

    std::vector<DecompositionResult> parts(orders.size());
    parallel_for(orders.size(), [&](std::size_t i) { parts[i] = su_decompose(surface, partition, orders[i]); });

    DecompositionResult r = parts.front();
    r.method = "averaged ISU";
    r.order.clear();
    const double n = static_cast<double>(parts.size());
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (const auto& p : parts) s += p.contributions[i];
        r.contributions[i] = s / n;
    }
    for (std::size_t l = 0; l < r.series.size(); ++l)
        for (std::size_t i = 0; i < m; ++i) {
            double s = 0.0;
            for (const auto& p : parts) s += p.series[l][i];
            r.series[l][i] = s / n;
        }
    return r;
}

// ---------------------------------------------------------------- closed-form ISU

namespace {

DecompositionResult closed_form_fine(const SurplusModel& model, const Partition& partition) {
    const ValuationBasis& first = model.first_order();
    const ValuationBasis& second = model.second_order();
    const ContractSpec& contract = model.contract();
    const NodeGrid& nodes = model.nodes();
    const QuadratureRule rule = model.numerics().rule;
    const SolverScheme scheme = model.numerics().scheme;
    const ReserveTable reserves = scheme == SolverScheme::Product ? model.reserves()
                                                                  : ReserveTable(first, contract, nodes, scheme);
    const bool individual = model.perspective() == Perspective::Individual;
    const PolicyPath* path = individual ? &*model.path() : nullptr;
    const std::size_t n = contract.states().size();
    const auto ea = static_cast<Eigen::Index>(contract.states().initial());

    const DoleansExponential kappa(second.returns);
    const FVProcess return_gap = tilde_transform(second.returns) - first.returns.path();
    std::optional<TransitionField> p;
    if (!individual) p = product_integral(second.intensities, 0.0, nodes, scheme);

    auto weight = [&](std::size_t j, double s) -> double {
        if (individual) return state_indicator(*path, j, s);
        return p->at(s)(ea, static_cast<Eigen::Index>(j));
    };
    auto weight_left = [&](std::size_t j, double s) -> double {
        if (individual) return state_indicator_left(*path, j, s);
        return p->left(s)(ea, static_cast<Eigen::Index>(j));
    };

    const auto& fine = model.fine();
    const auto& trs = model.transitions();
    std::vector<FVProcess> systematic, second_entries;
    for (const auto& tr : trs) {
        second_entries.push_back(second.intensities.entry(tr.from, tr.to));
        systematic.push_back(second_entries.back() - first.intensities.entry(tr.from, tr.to));
    }

    DecompositionResult r;
    r.scheme = "fine";
    r.method = "ISU";
    for (const auto& f : fine) r.labels.push_back(f.label);
    r.contributions.assign(fine.size(), 0.0);
    r.times = partition.times();
    r.partition_size = partition.steps();
    r.series.push_back(r.contributions);

    for (std::size_t l = 0; l + 1 < r.times.size(); ++l) {
        const double a = r.times[l];
        const double b = r.times[l + 1];
        for (std::size_t j = 0; j < n; ++j) {
            Integrand f([&, j](double s) { return weight(j, s) * reserves.value(j, s) / kappa(s); },
                        [&, j](double u) { return weight_left(j, u) * reserves.left_value(j, u) / kappa.left_value(u); });
            r.contributions[j] += stieltjes_integral(f, return_gap, a, b, nodes, rule);
        }
        for (std::size_t e = 0; e < trs.size(); ++e) {
            const std::size_t j = trs[e].from;
            const std::size_t k = trs[e].to;
            const PaymentFunction* pay = contract.payment(j, k);
            auto at_risk = [&, j, k](double s, bool jump) {
                const double bjk = pay ? (jump ? pay->value(s) : pay->right_limit(s)) : 0.0;
                return bjk + reserves.value(k, s) - reserves.value(j, s);
            };
            Integrand g([&, j](double s) { return weight(j, s) * at_risk(s, false) / kappa(s); },
                        [&, j](double u) { return weight_left(j, u) * at_risk(u, true) / kappa(u); });
            r.contributions[n + trs.size() + e] -= stieltjes_integral(g, systematic[e], a, b, nodes, rule);
            if (individual) {
                double u_part = stieltjes_integral(g, second_entries[e], a, b, nodes, rule);
                for (const auto& rec : path->jumps())
                    if (rec.from == j && rec.to == k && rec.time > a + kTimeTol && rec.time <= b + kTimeTol)
                        u_part -= at_risk(rec.time, true) / kappa(rec.time);
                r.contributions[n + e] += u_part;
            }
        }
        r.series.push_back(r.contributions);
    }
    r.r0 = model.revaluation(0.0);
    r.total = model.revaluation(partition.end()) - r.r0;
    return r;
}

}  // namespace

DecompositionResult aggregate(const DecompositionResult& fine,
                              const std::vector<std::pair<std::string, std::vector<std::string>>>& groups) {
    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < fine.labels.size(); ++i) position[fine.labels[i]] = i;
    std::vector<int> used(fine.labels.size(), 0);
    std::vector<std::vector<std::size_t>> members;
    for (const auto& [label, names] : groups) {
        std::vector<std::size_t> m;
        for (const auto& name : names) {
            auto it = position.find(name);
            if (it == position.end()) throw std::invalid_argument("grouping names unknown factor '" + name + "'");
            if (used[it->second]++) throw std::invalid_argument("factor '" + name + "' appears in two groups");
            m.push_back(it->second);
        }
        members.push_back(std::move(m));
    }
    for (std::size_t i = 0; i < used.size(); ++i)
        if (!used[i]) throw std::invalid_argument("grouping leaves factor '" + fine.labels[i] + "' out");

    DecompositionResult r = fine;
    r.labels.clear();
    r.contributions.clear();
    for (std::size_t g = 0; g < groups.size(); ++g) {
        r.labels.push_back(groups[g].first);
        double s = 0.0;
        for (std::size_t i : members[g]) s += fine.contributions[i];
        r.contributions.push_back(s);
    }
    for (std::size_t l = 0; l < fine.series.size(); ++l) {
        std::vector<double> row;
        for (const auto& m : members) {
            double s = 0.0;
            for (std::size_t i : m) s += fine.series[l][i];
            row.push_back(s);
        }
        r.series[l] = std::move(row);
    }
    return r;
}

DecompositionResult aggregate(const DecompositionResult& fine, const DecompositionScheme& scheme) {
    std::vector<std::pair<std::string, std::vector<std::string>>> groups;
    for (const auto& f : scheme.factors()) {
        std::vector<std::string> names;
        for (std::size_t m : f.members) names.push_back(scheme.fine_list()[m].label);
        groups.emplace_back(f.label, std::move(names));
    }
    DecompositionResult r = aggregate(fine, groups);
    r.scheme = scheme.name();
    return r;
}

DecompositionResult isu_individual(const SurplusModel& model, const DecompositionScheme& scheme,
                                   const Partition& partition) {
    if (model.perspective() != Perspective::Individual)
        throw std::invalid_argument("individual ISU needs an individual-perspective model");
    return aggregate(closed_form_fine(model, partition), scheme);
}

DecompositionResult isu_mean(const SurplusModel& model, const DecompositionScheme& scheme,
                             const Partition& partition) {
    if (model.perspective() != Perspective::Mean)
        throw std::invalid_argument("mean ISU needs a mean-perspective model");
    return aggregate(closed_form_fine(model, partition), scheme);
}

DecompositionResult isu_closed_form(const SurplusModel& model, const DecompositionScheme& scheme,
                                    const Partition& partition) {
    return model.perspective() == Perspective::Mean ? isu_mean(model, scheme, partition)
                                                    : isu_individual(model, scheme, partition);
}

// ---------------------------------------------------------------- limits

double relative_distance(double value, double reference, double scale, const ConvergenceOptions& options) {
    const double denom = std::max(std::abs(reference), options.relative_floor * scale);
    if (denom == 0.0) return std::abs(value - reference) == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::abs(value - reference) / denom;
}

namespace {

ConvergenceReport diagnose(std::vector<DecompositionResult> steps, const std::optional<DecompositionResult>& reference,
                           const ConvergenceOptions& options) {
    ConvergenceReport rep;
    rep.reference = reference;
    const std::size_t m = steps.front().contributions.size();
    if (reference) {
        if (reference->labels != steps.front().labels)
            throw std::invalid_argument("closed form and SU results use different factors");
    }
    double scale = 0.0;
    if (reference)
        for (double v : reference->contributions) scale = std::max(scale, std::abs(v));
    for (std::size_t n = 0; n < steps.size(); ++n) {
        std::vector<double> c(m, std::numeric_limits<double>::quiet_NaN());
        if (n > 0)
            for (std::size_t i = 0; i < m; ++i)
                c[i] = std::abs(steps[n].contributions[i] - steps[n - 1].contributions[i]);
        rep.cauchy.push_back(std::move(c));
        if (reference) {
            std::vector<double> d(m);
            double worst = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                d[i] = relative_distance(steps[n].contributions[i], reference->contributions[i], scale, options);
                worst = std::max(worst, d[i]);
            }
            rep.distance.push_back(std::move(d));
            rep.max_distance.push_back(worst);
        }
    }
    const std::size_t last = steps.size() - 1;
    if (reference && rep.max_distance.size() >= 2 && rep.max_distance[last] > 0.0)
        rep.estimated_order = std::log2(rep.max_distance[last - 1] / rep.max_distance[last]);
    else if (steps.size() >= 3) {
        double a = 0.0, b = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            a = std::max(a, rep.cauchy[last - 1][i]);
            b = std::max(b, rep.cauchy[last][i]);
        }
        if (b > 0.0) rep.estimated_order = std::log2(a / b);
    }
    bool cauchy_ok = steps.size() >= 2;
    if (cauchy_ok)
        for (double v : rep.cauchy[last]) cauchy_ok = cauchy_ok && v <= options.cauchy_tolerance;
    const bool closed_ok = reference && rep.max_distance[last] <= options.relative_tolerance;
    rep.converged = cauchy_ok || closed_ok;
    rep.steps = std::move(steps);
    return rep;
}

}  // namespace

ConvergenceReport isu_limit_estimate(const SurplusSurface& surface, const std::vector<Partition>& partitions,
                                     const std::vector<std::size_t>& order,
                                     const std::optional<DecompositionResult>& reference,
                                     const ConvergenceOptions& options) {
    if (partitions.empty()) throw std::invalid_argument("no partitions given");
    for (std::size_t i = 1; i < partitions.size(); ++i)
        if (!(partitions[i].mesh() < partitions[i - 1].mesh()))
            throw std::invalid_argument("partition sequence must have a vanishing mesh");
    std::vector<DecompositionResult> steps(partitions.size());
    parallel_for(partitions.size(), [&](std::size_t i) { steps[i] = su_decompose(surface, partitions[i], order); });
    return diagnose(std::move(steps), reference, options);
}

ConvergenceReport ioat_limit(const SurplusSurface& surface, const std::vector<Partition>& partitions,
                             const std::optional<DecompositionResult>& reference, const ConvergenceOptions& options) {
    if (partitions.empty()) throw std::invalid_argument("no partitions given");
    for (std::size_t i = 1; i < partitions.size(); ++i)
        if (!(partitions[i].mesh() < partitions[i - 1].mesh()))
            throw std::invalid_argument("partition sequence must have a vanishing mesh");
    std::vector<DecompositionResult> steps(partitions.size());
    parallel_for(partitions.size(), [&](std::size_t i) { steps[i] = oat_decompose(surface, partitions[i]); });
    return diagnose(std::move(steps), reference, options);
}

}  // namespace isu
