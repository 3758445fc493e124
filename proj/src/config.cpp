#include "isu/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace isu {

using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); }

const json& require(const json& node, const std::string& key, const std::string& path) {
    if (!node.is_object()) fail(path, "expected an object");
    auto it = node.find(key);
    if (it == node.end()) fail(path + "." + key, "missing field");
    return *it;
}

double number(const json& node, const std::string& path) {
    if (!node.is_number()) fail(path, "expected a number");
    const double v = node.get<double>();
    if (!std::isfinite(v)) fail(path, "must be finite");
    return v;
}

std::string text(const json& node, const std::string& path) {
    if (!node.is_string()) fail(path, "expected a string");
    return node.get<std::string>();
}

// [[time, amount], ...]
std::vector<std::pair<double, double>> point_list(const json& node, const std::string& path) {
    if (!node.is_array()) fail(path, "expected a list of [time, value] pairs");
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i < node.size(); ++i) {
        const std::string p = path + "[" + std::to_string(i) + "]";
        if (!node[i].is_array() || node[i].size() != 2) fail(p, "expected [time, value]");
        out.emplace_back(number(node[i][0], p + "[0]"), number(node[i][1], p + "[1]"));
    }
    return out;
}

void collect_times(const json& node, const std::string& key, const std::string& path, std::vector<double>& out) {
    if (!node.is_object() || !node.contains(key)) return;
    for (const auto& [t, v] : point_list(node.at(key), path + "." + key)) {
        (void)v;
        out.push_back(t);
    }
}

struct Builder {
    TimeGrid base;    // contract grid; per-cell inputs refer to its cells
    TimeGrid master;  // base plus all jump times
    StateSpace states;

    // A number or one value per base cell, expanded to the master cells.
    std::vector<double> per_cell(const json& node, const std::string& path) const {
        std::vector<double> base_values;
        if (node.is_number()) {
            base_values.assign(base.cells(), number(node, path));
        } else if (node.is_array()) {
            if (node.size() != base.cells())
                fail(path, "expected " + std::to_string(base.cells()) + " values, one per grid cell");
            for (std::size_t i = 0; i < node.size(); ++i)
                base_values.push_back(number(node[i], path + "[" + std::to_string(i) + "]"));
        } else {
            fail(path, "expected a number or a list with one value per grid cell");
        }
        std::vector<double> out(master.cells());
        for (std::size_t c = 0; c < master.cells(); ++c) {
            const double mid = 0.5 * (master.point(c) + master.point(c + 1));
            out[c] = base_values[base.cell_of(mid)];
        }
        return out;
    }

    std::vector<double> jumps(const json& node, const std::string& key, const std::string& path, double sign) const {
        std::vector<double> out(master.size(), 0.0);
        if (!node.contains(key)) return out;
        for (const auto& [t, v] : point_list(node.at(key), path + "." + key)) {
            auto idx = master.index_of(t);
            if (!idx) fail(path + "." + key, "time " + std::to_string(t) + " outside [0, horizon]");
            out[*idx] += sign * v;
        }
        return out;
    }

    FVProcess process(const json& node, const std::string& path, const std::string& rate_key,
                      const std::string& jump_key, double sign = 1.0) const {
        std::vector<double> d(master.cells(), 0.0);
        if (node.contains(rate_key)) {
            d = per_cell(node.at(rate_key), path + "." + rate_key);
            for (double& v : d) v *= sign;
        }
        return FVProcess(master, std::move(d), jumps(node, jump_key, path, sign));
    }

    std::size_t state(const json& node, const std::string& path) const {
        const std::string label = text(node, path);
        if (!states.contains(label)) fail(path, "unknown state '" + label + "'");
        return states.index(label);
    }

    ValuationBasis basis(const json& node, const std::string& path) const {
        const json& interest = require(node, "interest", path);
        FVProcess phi = process(interest, path + ".interest", "rate", "jumps");
        std::vector<std::pair<Transition, FVProcess>> entries;
        if (node.contains("intensities")) {
            const json& list = node.at("intensities");
            if (!list.is_array()) fail(path + ".intensities", "expected a list");
            for (std::size_t i = 0; i < list.size(); ++i) {
                const std::string p = path + ".intensities[" + std::to_string(i) + "]";
                const std::size_t j = state(require(list[i], "from", p), p + ".from");
                const std::size_t k = state(require(list[i], "to", p), p + ".to");
                entries.emplace_back(Transition{j, k}, process(list[i], p, "rate", "jumps"));
            }
        }
        return ValuationBasis{ReturnProcess(std::move(phi)), IntensityMatrix(states, std::move(entries), master)};
    }
};

std::vector<double> all_jump_times(const json& root) {
    std::vector<double> out;
    const json& contract = root.at("contract");
    if (contract.contains("sojourn") && contract.at("sojourn").is_object())
        for (const auto& [label, s] : contract.at("sojourn").items())
            collect_times(s, "lumps", "contract.sojourn." + label, out);
    if (contract.contains("premiums")) collect_times(contract.at("premiums"), "lumps", "contract.premiums", out);
    for (const char* b : {"first_order", "second_order"}) {
        if (!root.contains("bases") || !root.at("bases").contains(b)) continue;
        const json& basis = root.at("bases").at(b);
        const std::string p = std::string("bases.") + b;
        if (basis.contains("interest")) collect_times(basis.at("interest"), "jumps", p + ".interest", out);
        if (basis.contains("intensities") && basis.at("intensities").is_array())
            for (const auto& e : basis.at("intensities")) collect_times(e, "jumps", p + ".intensities", out);
    }
    if (root.contains("path") && root.at("path").contains("jumps") && root.at("path").at("jumps").is_array())
        for (const auto& j : root.at("path").at("jumps"))
            if (j.is_object() && j.contains("time") && j.at("time").is_number()) out.push_back(j.at("time").get<double>());
    return out;
}

}  // namespace

DecompositionScheme RunConfig::make_scheme() const {
    const auto& states = contract.states();
    std::set<Transition> trs(first_order.intensities.transitions().begin(), first_order.intensities.transitions().end());
    trs.insert(second_order.intensities.transitions().begin(), second_order.intensities.transitions().end());
    const std::vector<Transition> list(trs.begin(), trs.end());
    if (!custom_groups.empty() && scheme == "custom")
        return DecompositionScheme::aggregated("custom", states, list, custom_groups);
    return DecompositionScheme::built_in(scheme, states, list);
}

std::vector<std::size_t> RunConfig::order_indices(const DecompositionScheme& scheme,
                                                  const std::vector<std::string>& labels) const {
    std::vector<std::size_t> out;
    for (const auto& l : labels) out.push_back(scheme.index_of(l));
    return out;
}

RunConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: not valid JSON (") + e.what() + ")");
    }
    if (!root.is_object()) fail("config", "expected an object");
    RunConfig cfg;
    const json& contract = require(root, "contract", "config");

    // State space and grids.
    const json& labels = require(contract, "states", "contract");
    if (!labels.is_array() || labels.empty()) fail("contract.states", "expected a non-empty list of labels");
    std::vector<std::string> names;
    for (std::size_t i = 0; i < labels.size(); ++i)
        names.push_back(text(labels[i], "contract.states[" + std::to_string(i) + "]"));
    const std::string initial = contract.contains("initial") ? text(contract.at("initial"), "contract.initial") : names[0];
    if (std::find(names.begin(), names.end(), initial) == names.end())
        fail("contract.initial", "unknown state '" + initial + "'");

    Builder b;
    try {
        b.states = StateSpace(names, initial);
    } catch (const std::invalid_argument& e) {
        fail("contract.states", e.what());
    }
    const double horizon = number(require(contract, "horizon", "contract"), "contract.horizon");
    if (!(horizon > 0.0)) fail("contract.horizon", "must be positive");
    std::vector<double> base_points;
    if (contract.contains("grid")) {
        const json& g = contract.at("grid");
        if (!g.is_array()) fail("contract.grid", "expected a list of times");
        for (std::size_t i = 0; i < g.size(); ++i) base_points.push_back(number(g[i], "contract.grid[" + std::to_string(i) + "]"));
        if (base_points.empty() || std::abs(base_points.back() - horizon) > kTimeTol)
            fail("contract.grid", "must end at the horizon");
    } else {
        base_points.push_back(0.0);
        for (int k = 1; k < horizon - kTimeTol; ++k) base_points.push_back(k);
        base_points.push_back(horizon);
    }
    try {
        b.base = TimeGrid(base_points);
    } catch (const std::invalid_argument& e) {
        fail("contract.grid", e.what());
    }

    const json& run = root.contains("run") ? root.at("run") : json::object();
    cfg.t = run.contains("t") ? number(run.at("t"), "run.t") : horizon;
    if (cfg.t < 0.0 || cfg.t > horizon + kTimeTol) fail("run.t", "must lie in [0, horizon]");

    std::vector<double> extra = all_jump_times(root);
    for (double t : extra)
        if (t < -kTimeTol || t > horizon + kTimeTol) fail("config", "time " + std::to_string(t) + " outside [0, horizon]");
    extra.push_back(cfg.t);
    b.master = b.base.merged(extra);
    cfg.grid = b.master;

    // Cash flows.
    std::vector<FVProcess> sojourn(names.size(), FVProcess::zero(b.master));
    if (contract.contains("sojourn")) {
        const json& s = contract.at("sojourn");
        if (!s.is_object()) fail("contract.sojourn", "expected an object keyed by state");
        for (const auto& [label, entry] : s.items()) {
            const std::string p = "contract.sojourn." + label;
            if (!b.states.contains(label)) fail(p, "unknown state '" + label + "'");
            sojourn[b.states.index(label)] = b.process(entry, p, "rate", "lumps");
        }
    }
    std::vector<std::pair<Transition, PaymentFunction>> payments;
    if (contract.contains("transitions")) {
        const json& list = contract.at("transitions");
        if (!list.is_array()) fail("contract.transitions", "expected a list");
        for (std::size_t i = 0; i < list.size(); ++i) {
            const std::string p = "contract.transitions[" + std::to_string(i) + "]";
            const std::size_t j = b.state(require(list[i], "from", p), p + ".from");
            const std::size_t k = b.state(require(list[i], "to", p), p + ".to");
            payments.emplace_back(Transition{j, k},
                                  PaymentFunction::piecewise_constant(b.master, b.per_cell(require(list[i], "amount", p), p + ".amount")));
        }
    }
    ContractSpec benefits;
    try {
        benefits = ContractSpec(b.states, sojourn, payments);
    } catch (const std::invalid_argument& e) {
        fail("contract", e.what());
    }

    cfg.first_order = b.basis(require(require(root, "bases", "config"), "first_order", "bases"), "bases.first_order");
    cfg.second_order = b.basis(require(root.at("bases"), "second_order", "bases"), "bases.second_order");

    cfg.numerics.substeps = run.contains("substeps") ? static_cast<std::size_t>(number(run.at("substeps"), "run.substeps")) : 64;
    if (cfg.numerics.substeps < 1) fail("run.substeps", "must be at least 1");
    if (run.contains("solver")) {
        const std::string v = text(run.at("solver"), "run.solver");
        if (v == "product")
            cfg.numerics.scheme = SolverScheme::Product;
        else if (v == "exponential")
            cfg.numerics.scheme = SolverScheme::Exponential;
        else
            fail("run.solver", "expected 'product' or 'exponential'");
    }
    if (run.contains("quadrature")) {
        const std::string v = text(run.at("quadrature"), "run.quadrature");
        if (v == "left")
            cfg.numerics.rule = QuadratureRule::LeftPoint;
        else if (v == "gauss")
            cfg.numerics.rule = QuadratureRule::GaussLegendre;
        else
            fail("run.quadrature", "expected 'left' or 'gauss'");
    }

    // Premiums are entered as positive amounts and paid as negative sojourn payments.
    cfg.contract = benefits;
    if (contract.contains("premiums")) {
        const json& pr = contract.at("premiums");
        const std::string p = "contract.premiums";
        const std::size_t j = b.state(require(pr, "state", p), p + ".state");
        std::vector<FVProcess> pattern(names.size(), FVProcess::zero(b.master));
        pattern[j] = b.process(pr, p, "rate", "lumps");
        for (double d : pattern[j].densities())
            if (d < 0.0) fail(p + ".rate", "premiums are entered as positive amounts");
        for (double d : pattern[j].jumps())
            if (d < 0.0) fail(p + ".lumps", "premiums are entered as positive amounts");
        const ContractSpec premiums(b.states, pattern, {});
        double level = 1.0;
        if (contract.value("fair_premium", false)) {
            const NodeGrid nodes(common_grid(benefits, {&cfg.first_order, &cfg.second_order}), cfg.numerics.substeps);
            level = fair_premium(cfg.first_order, benefits, premiums, nodes, cfg.numerics.scheme, cfg.numerics.rule);
            cfg.premium = level;
        }
        cfg.contract = benefits.scaled_sum(premiums, -level);
    } else if (contract.value("fair_premium", false)) {
        fail("contract.fair_premium", "needs a premiums section");
    }

    if (root.contains("path")) {
        const json& path = root.at("path");
        std::vector<JumpRecord> jumps;
        if (path.contains("jumps")) {
            const json& list = path.at("jumps");
            if (!list.is_array()) fail("path.jumps", "expected a list");
            for (std::size_t i = 0; i < list.size(); ++i) {
                const std::string p = "path.jumps[" + std::to_string(i) + "]";
                jumps.push_back({number(require(list[i], "time", p), p + ".time"), b.state(require(list[i], "from", p), p + ".from"),
                                 b.state(require(list[i], "to", p), p + ".to")});
            }
        }
        try {
            cfg.path = PolicyPath(b.states.initial(), std::move(jumps), horizon);
        } catch (const std::invalid_argument& e) {
            fail("path", e.what());
        }
    }

    // Run section.
    if (run.contains("scheme")) cfg.scheme = text(run.at("scheme"), "run.scheme");
    if (run.contains("groups")) {
        const json& g = run.at("groups");
        if (!g.is_object()) fail("run.groups", "expected an object mapping factor labels to fine labels");
        for (const auto& [label, members] : g.items()) {
            if (!members.is_array()) fail("run.groups." + label, "expected a list of fine factor labels");
            std::vector<std::string> m;
            for (std::size_t i = 0; i < members.size(); ++i)
                m.push_back(text(members[i], "run.groups." + label + "[" + std::to_string(i) + "]"));
            cfg.custom_groups.emplace_back(label, std::move(m));
        }
        if (!run.contains("scheme")) cfg.scheme = "custom";
    }
    if (run.contains("perspective")) {
        const std::string p = text(run.at("perspective"), "run.perspective");
        if (p == "mean")
            cfg.perspective = Perspective::Mean;
        else if (p == "individual")
            cfg.perspective = Perspective::Individual;
        else
            fail("run.perspective", "expected 'mean' or 'individual'");
    }
    if (cfg.perspective == Perspective::Individual && !cfg.path) fail("run.perspective", "individual runs need a path section");
    if (run.contains("depths")) {
        const json& d = run.at("depths");
        if (!d.is_array() || d.size() != 2) fail("run.depths", "expected [first, last]");
        const double a = number(d[0], "run.depths[0]");
        const double z = number(d[1], "run.depths[1]");
        if (a < 0 || z < a || z > 24) fail("run.depths", "expected 0 <= first <= last <= 24");
        cfg.depth_first = static_cast<unsigned>(a);
        cfg.depth_last = static_cast<unsigned>(z);
    }
    if (run.contains("partition")) {
        const json& p = run.at("partition");
        if (!p.is_array()) fail("run.partition", "expected a list of times");
        for (std::size_t i = 0; i < p.size(); ++i) cfg.partition_times.push_back(number(p[i], "run.partition[" + std::to_string(i) + "]"));
    }
    if (run.contains("orders")) {
        const json& o = run.at("orders");
        if (!o.is_array()) fail("run.orders", "expected a list of factor-label lists");
        for (std::size_t i = 0; i < o.size(); ++i) {
            const std::string p = "run.orders[" + std::to_string(i) + "]";
            if (!o[i].is_array()) fail(p, "expected a list of factor labels");
            std::vector<std::string> labels;
            for (std::size_t k = 0; k < o[i].size(); ++k) labels.push_back(text(o[i][k], p + "[" + std::to_string(k) + "]"));
            cfg.orders.push_back(std::move(labels));
        }
    }
    if (run.contains("seed")) cfg.seed = static_cast<std::uint64_t>(number(run.at("seed"), "run.seed"));
    if (run.contains("paths")) {
        const double n = number(run.at("paths"), "run.paths");
        if (n < 1) fail("run.paths", "must be at least 1");
        cfg.paths = static_cast<std::size_t>(n);
    }

    // Resolve the scheme and the orders now so that errors surface at load time.
    DecompositionScheme scheme;
    try {
        scheme = cfg.make_scheme();
        for (const auto& o : cfg.orders) {
            const auto idx = cfg.order_indices(scheme, o);
            std::vector<std::size_t> sorted = idx;
            std::sort(sorted.begin(), sorted.end());
            for (std::size_t i = 0; i < sorted.size(); ++i)
                if (sorted[i] != i || sorted.size() != scheme.size()) fail("run.orders", "each order must list every factor once");
        }
    } catch (const std::invalid_argument& e) {
        fail("run.scheme", e.what());
    }
    check_no_simultaneous_jumps(cfg.first_order, cfg.second_order, cfg.contract, cfg.path ? &*cfg.path : nullptr);
    return cfg;
}

RunConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError(file.string() + ": cannot open config file");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

std::string describe(const RunConfig& config) {
    std::ostringstream out;
    const auto& states = config.contract.states();
    out << "states:";
    for (const auto& l : states.labels()) out << ' ' << l;
    out << " (initial " << states.label(states.initial()) << ")\n";
    out << "horizon: " << config.contract.horizon() << ", t = " << config.t << "\n";
    out << "grid (" << config.grid.size() << " points):";
    for (double p : config.grid.points()) out << ' ' << p;
    out << "\nsubsteps per cell: " << config.numerics.substeps << ", solver: "
        << (config.numerics.scheme == SolverScheme::Exponential ? "exponential" : "product") << ", quadrature: "
        << (config.numerics.rule == QuadratureRule::GaussLegendre ? "gauss" : "left") << "\n";
    if (config.premium) out << "fair premium level: " << *config.premium << "\n";
    out << "scheme: " << config.scheme << ", perspective: "
        << (config.perspective == Perspective::Mean ? "mean" : "individual") << "\n";
    if (config.path) {
        out << "path jumps:";
        for (const auto& j : config.path->jumps())
            out << ' ' << states.label(j.from) << "->" << states.label(j.to) << '@' << j.time;
        out << "\n";
    }
    return out.str();
}

}  // namespace isu
