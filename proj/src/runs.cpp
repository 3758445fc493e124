#include "isu/runs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "isu/simulate.hpp"

namespace isu {

// ---------------------------------------------------------------- CSV

CsvWriter::CsvWriter(const std::filesystem::path& file, const std::string& kind,
                     const std::vector<std::string>& header)
    : out_(file, std::ios::binary), file_(file) {
    if (!out_) throw std::runtime_error(file.string() + ": cannot open for writing");
    out_ << "# " << kCsvVersion << ' ' << kind << "\r\n";
    row(header);
}

std::string CsvWriter::quote(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string CsvWriter::number(double v) {
    if (std::isnan(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void CsvWriter::row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << quote(fields[i]);
    }
    out_ << "\r\n";
    if (!out_) throw std::runtime_error(file_.string() + ": write failed");
}

// ---------------------------------------------------------------- helpers

void apply(RunConfig& config, const RunOptions& options) {
    if (options.scheme) config.scheme = *options.scheme;
    if (options.order) config.orders = {*options.order};
    if (options.depths) {
        config.depth_first = options.depths->first;
        config.depth_last = options.depths->second;
        config.partition_times.clear();
    }
    if (options.paths) config.paths = *options.paths;
    if (options.seed) config.seed = *options.seed;
}

namespace {

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
    return out;
}

std::vector<Partition> partitions_of(const RunConfig& config, bool sequence) {
    if (!config.partition_times.empty()) return {Partition(config.partition_times)};
    if (!(config.t > 0.0)) throw std::invalid_argument("run.t must be positive to build a partition");
    if (sequence) return dyadic_partitions(config.t, config.depth_first, config.depth_last);
    return {Partition::dyadic(config.t, config.depth_last)};
}

// All partition points become nodes.
SurplusModel make_model(const RunConfig& config, const std::vector<Partition>& partitions,
                        std::optional<Perspective> perspective = std::nullopt) {
    std::vector<double> extra;
    for (const auto& p : partitions) extra.insert(extra.end(), p.times().begin(), p.times().end());
    std::sort(extra.begin(), extra.end());
    extra.erase(std::unique(extra.begin(), extra.end()), extra.end());
    const Perspective view = perspective.value_or(config.perspective);
    std::optional<PolicyPath> path = config.path;
    if (view == Perspective::Individual && !path)
        path = PolicyPath(config.contract.states().initial(), {}, config.contract.horizon());
    return SurplusModel(config.contract, config.first_order, config.second_order, view, path, config.numerics, extra);
}

std::vector<std::vector<std::size_t>> resolve_orders(const RunConfig& config, const DecompositionScheme& scheme) {
    std::vector<std::vector<std::size_t>> out;
    for (const auto& o : config.orders) out.push_back(config.order_indices(scheme, o));
    if (out.empty()) {
        std::vector<std::size_t> id(scheme.size());
        std::iota(id.begin(), id.end(), 0);
        out.push_back(id);
    }
    return out;
}

std::string order_label(const DecompositionScheme& scheme, const std::vector<std::size_t>& order) {
    std::vector<std::string> names;
    for (std::size_t i : order) names.push_back(scheme.factor(i).label);
    return join(names, " ");
}

double scale_of(const DecompositionResult& r) {
    double s = std::abs(r.total);
    for (double v : r.contributions) s = std::max(s, std::abs(v));
    return std::max(s, 1e-300);
}

void write_series(CsvWriter& csv, const DecompositionResult& r, const std::string& order) {
    for (std::size_t l = 0; l < r.times.size(); ++l) {
        for (std::size_t i = 0; i < r.labels.size(); ++i)
            csv.row({CsvWriter::number(r.times[l]), r.labels[i], CsvWriter::number(r.series[l][i]), r.scheme, order,
                     r.method});
        if (r.interaction)
            csv.row({CsvWriter::number(r.times[l]), "interaction", CsvWriter::number(r.interaction_series[l]), r.scheme,
                     order, r.method});
    }
    const std::string end = CsvWriter::number(r.times.back());
    csv.row({end, "total", CsvWriter::number(r.total), r.scheme, order, r.method});
    csv.row({end, "additivity_residual", CsvWriter::number(r.residual()), r.scheme, order, r.method});
}

}  // namespace

// ---------------------------------------------------------------- decompose

RunOutcome run_decompose(const RunConfig& config, const RunOptions& options) {
    const auto partitions = partitions_of(config, false);
    const Partition& partition = partitions.front();
    const SurplusModel model = make_model(config, partitions);
    const DecompositionScheme scheme = config.make_scheme();
    const SurplusSurface surface(model, scheme);

    std::filesystem::create_directories(options.out_dir);
    const auto file = options.out_dir / "decompose.csv";
    CsvWriter csv(file, "decompose", {"time", "factor", "value", "scheme", "order", "method"});

    RunOutcome out;
    out.files.push_back(file);
    std::ostringstream summary;
    summary << "partition steps: " << partition.steps() << ", t = " << partition.end() << "\n";
    for (const auto& order : resolve_orders(config, scheme)) {
        const DecompositionResult su = su_decompose(surface, partition, order);
        const std::string label = order_label(scheme, order);
        write_series(csv, su, label);
        const double rel = std::abs(su.residual()) / scale_of(su);
        if (rel > 1e-12) out.ok = false;
        summary << "SU [" << label << "] R(t)-R(0) = " << su.total << ", relative residual " << rel << "\n";
        for (std::size_t i = 0; i < su.labels.size(); ++i)
            summary << "  " << su.labels[i] << ": " << su.contributions[i] << "\n";
    }
    const DecompositionResult oat = oat_decompose(surface, partition);
    write_series(csv, oat, "");
    const double oat_rel = std::abs(oat.residual()) / scale_of(oat);
    if (oat_rel > 1e-12) out.ok = false;
    summary << "OAT interaction " << *oat.interaction << ", relative residual " << oat_rel << "\n";

    const DecompositionResult isu = isu_closed_form(model, scheme, partition);
    write_series(csv, isu, "");
    const double isu_rel = std::abs(isu.residual()) / scale_of(isu);
    if (isu_rel > 1e-3) out.ok = false;
    summary << "closed-form ISU relative residual " << isu_rel << "\n";
    for (std::size_t i = 0; i < isu.labels.size(); ++i)
        summary << "  " << isu.labels[i] << ": " << isu.contributions[i] << "\n";
    out.summary = summary.str();
    return out;
}

// ---------------------------------------------------------------- converge

RunOutcome run_converge(const RunConfig& config, const RunOptions& options) {
    const auto partitions = partitions_of(config, true);
    const SurplusModel model = make_model(config, partitions);
    const DecompositionScheme scheme = config.make_scheme();
    const SurplusSurface surface(model, scheme);
    const auto orders = resolve_orders(config, scheme);
    const DecompositionResult reference = isu_closed_form(model, scheme, Partition({0.0, partitions.back().end()}));

    std::filesystem::create_directories(options.out_dir);
    const auto file = options.out_dir / "converge.csv";
    CsvWriter csv(file, "converge",
                  {"depth", "steps", "factor", "value", "cauchy", "closed_form", "distance", "method", "order"});
    RunOutcome out;
    out.files.push_back(file);
    std::ostringstream summary;

    auto emit = [&](const ConvergenceReport& rep, const std::string& method, const std::string& order) {
        for (std::size_t n = 0; n < rep.steps.size(); ++n) {
            const auto& r = rep.steps[n];
            const std::string depth = std::to_string(config.partition_times.empty() ? config.depth_first + n : 0);
            for (std::size_t i = 0; i < r.labels.size(); ++i)
                csv.row({depth, std::to_string(r.partition_size), r.labels[i], CsvWriter::number(r.contributions[i]),
                         CsvWriter::number(rep.cauchy[n][i]), CsvWriter::number(reference.contributions[i]),
                         CsvWriter::number(rep.distance[n][i]), method, order});
            if (r.interaction)
                csv.row({depth, std::to_string(r.partition_size), "interaction", CsvWriter::number(*r.interaction), "",
                         "0", "", method, order});
        }
        summary << method << " [" << order << "] max relative distance per depth:";
        for (double d : rep.max_distance) summary << ' ' << d;
        summary << "\n  estimated order " << rep.estimated_order << (rep.converged ? ", converged" : ", not converged")
                << "\n";
        if (!rep.converged) out.ok = false;
    };

    for (const auto& order : orders) {
        const ConvergenceReport rep = isu_limit_estimate(surface, partitions, order, reference);
        emit(rep, "SU", order_label(scheme, order));
    }
    const ConvergenceReport oat = ioat_limit(surface, partitions, reference);
    emit(oat, "OAT", "");
    summary << "OAT interaction at the finest partition: " << *oat.steps.back().interaction << "\n";
    out.summary = summary.str();
    return out;
}

// ---------------------------------------------------------------- simulate

RunOutcome run_simulate(const RunConfig& config, const RunOptions& options) {
    if (!(config.t > 0.0)) throw std::invalid_argument("run.t must be positive for simulation");
    const Partition whole({0.0, config.t});
    const SurplusModel base = make_model(config, {whole}, Perspective::Individual);
    const SurplusModel mean = make_model(config, {whole}, Perspective::Mean);
    const DecompositionScheme fine = DecompositionScheme::fine(config.contract.states(), base.transitions());
    const PathSampler sampler(config.second_order.intensities, base.nodes());

    SimulationConfig sim;
    sim.paths = config.paths;
    sim.seed = config.seed;
    sim.horizon = config.contract.horizon();
    const double t = config.t;
    const auto estimates = monte_carlo_mean(
        [&](const PolicyPath& path) {
            const SurplusModel m = base.with_path(path);
            std::vector<double> v{m.revaluation(t)};
            const DecompositionResult d = isu_individual(m, fine, whole);
            v.insert(v.end(), d.contributions.begin(), d.contributions.end());
            return v;
        },
        sampler, sim);

    const DecompositionResult target = isu_mean(mean, fine, whole);
    std::vector<std::string> names{"R(t)"};
    std::vector<double> targets{mean.revaluation(t)};
    std::vector<bool> checked{true};
    for (std::size_t i = 0; i < fine.size(); ++i) {
        names.push_back("D_" + fine.factor(i).label);
        targets.push_back(target.contributions[i]);
        checked.push_back(fine.fine_list()[i].kind == FactorKind::Unsystematic);
    }

    std::filesystem::create_directories(options.out_dir);
    const auto file = options.out_dir / "simulate.csv";
    CsvWriter csv(file, "simulate", {"quantity", "mean", "std_error", "target", "z", "paths", "checked"});
    RunOutcome out;
    out.files.push_back(file);
    std::ostringstream summary;
    for (std::size_t k = 0; k < names.size(); ++k) {
        const double z = estimates[k].z_score(targets[k]);
        csv.row({names[k], CsvWriter::number(estimates[k].mean), CsvWriter::number(estimates[k].std_error),
                 CsvWriter::number(targets[k]), CsvWriter::number(z), std::to_string(estimates[k].paths),
                 checked[k] ? "yes" : "no"});
        summary << names[k] << ": mean " << estimates[k].mean << " (se " << estimates[k].std_error << "), target "
                << targets[k] << ", z = " << z << "\n";
        if (checked[k] && std::abs(z) > 3.0) out.ok = false;
    }
    out.summary = summary.str();
    return out;
}

// ---------------------------------------------------------------- validate

RunOutcome run_validate(const RunConfig& config) {
    RunOutcome out;
    std::ostringstream summary;
    summary << describe(config);
    const SurplusModel model = make_model(config, {});
    summary << "R(0) = " << model.revaluation(0.0) << "\n";
    summary << "R(t) = " << model.revaluation(config.t) << "\n";
    const auto& states = config.contract.states();
    for (std::size_t j = 0; j < states.size(); ++j)
        summary << "V*_" << states.label(j) << "(0) = " << model.reserves().at_node(0)(static_cast<Eigen::Index>(j))
                << "\n";
    out.summary = summary.str();
    return out;
}

}  // namespace isu
