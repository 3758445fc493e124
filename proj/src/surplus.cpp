#include "isu/surplus.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <set>

#include <unsupported/Eigen/MatrixFunctions>

namespace isu {

// ---------------------------------------------------------------- factors and schemes

namespace {

std::string pair_label(const StateSpace& states, std::size_t j, std::size_t k) {
    return states.label(j) + "->" + states.label(k);
}

}  // namespace

std::vector<FineFactor> fine_factors(const StateSpace& states, const std::vector<Transition>& transitions) {
    std::vector<FineFactor> out;
    for (std::size_t j = 0; j < states.size(); ++j)
        out.push_back({FactorKind::Return, j, j, "Phi_" + states.label(j)});
    for (const auto& tr : transitions)
        out.push_back({FactorKind::Unsystematic, tr.from, tr.to, "u_" + pair_label(states, tr.from, tr.to)});
    for (const auto& tr : transitions)
        out.push_back({FactorKind::Systematic, tr.from, tr.to, "s_" + pair_label(states, tr.from, tr.to)});
    return out;
}

DecompositionScheme::DecompositionScheme(std::string name, std::vector<FineFactor> fine,
                                         std::vector<RiskFactor> factors)
    : name_(std::move(name)), fine_(std::move(fine)), factors_(std::move(factors)) {
    if (factors_.empty()) throw std::invalid_argument("a decomposition scheme needs at least one factor");
    std::vector<int> seen(fine_.size(), 0);
    std::set<std::string> labels;
    for (const auto& f : factors_) {
        if (f.members.empty()) throw std::invalid_argument("risk factor '" + f.label + "' has no members");
        if (!labels.insert(f.label).second) throw std::invalid_argument("duplicate risk factor label '" + f.label + "'");
        for (std::size_t m : f.members) {
            if (m >= fine_.size()) throw std::invalid_argument("risk factor member out of range");
            ++seen[m];
        }
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (seen[i] != 1)
            throw std::invalid_argument("fine factor '" + fine_[i].label + "' must belong to exactly one risk factor");
}

DecompositionScheme DecompositionScheme::fine(const StateSpace& states, const std::vector<Transition>& transitions) {
    auto f = fine_factors(states, transitions);
    std::vector<RiskFactor> groups;
    for (std::size_t i = 0; i < f.size(); ++i) groups.push_back({f[i].label, {i}});
    return DecompositionScheme("fine", std::move(f), std::move(groups));
}

std::vector<std::string> DecompositionScheme::built_in_names() {
    return {"financial_unsystematic_systematic", "financial_transitionwise", "unsystematic_statewise", "fine",
            "total"};
}

DecompositionScheme DecompositionScheme::built_in(const std::string& name, const StateSpace& states,
                                                  const std::vector<Transition>& transitions) {
    if (name == "fine") return fine(states, transitions);
    auto f = fine_factors(states, transitions);
    auto of_kind = [&](FactorKind kind) {
        std::vector<std::size_t> m;
        for (std::size_t i = 0; i < f.size(); ++i)
            if (f[i].kind == kind) m.push_back(i);
        return m;
    };
    std::vector<RiskFactor> groups;
    if (name == "financial_unsystematic_systematic") {
        groups.push_back({"Phi", of_kind(FactorKind::Return)});
        if (!transitions.empty()) {
            groups.push_back({"u", of_kind(FactorKind::Unsystematic)});
            groups.push_back({"s", of_kind(FactorKind::Systematic)});
        }
    } else if (name == "financial_transitionwise") {
        groups.push_back({"Phi", of_kind(FactorKind::Return)});
        for (const auto& tr : transitions) {
            RiskFactor g{pair_label(states, tr.from, tr.to), {}};
            for (std::size_t i = 0; i < f.size(); ++i)
                if (f[i].kind != FactorKind::Return && f[i].from == tr.from && f[i].to == tr.to) g.members.push_back(i);
            groups.push_back(std::move(g));
        }
    } else if (name == "unsystematic_statewise") {
        if (!transitions.empty()) groups.push_back({"u", of_kind(FactorKind::Unsystematic)});
        for (std::size_t j = 0; j < states.size(); ++j) {
            RiskFactor g{states.label(j), {}};
            for (std::size_t i = 0; i < f.size(); ++i)
                if (f[i].kind != FactorKind::Unsystematic && f[i].from == j) g.members.push_back(i);
            groups.push_back(std::move(g));
        }
    } else if (name == "total") {
        RiskFactor g{"total", {}};
        for (std::size_t i = 0; i < f.size(); ++i) g.members.push_back(i);
        groups.push_back(std::move(g));
    } else {
        throw std::invalid_argument("unknown decomposition scheme '" + name + "'");
    }
    return DecompositionScheme(name, std::move(f), std::move(groups));
}

DecompositionScheme DecompositionScheme::aggregated(
    const std::string& name, const StateSpace& states, const std::vector<Transition>& transitions,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& groups) {
    auto f = fine_factors(states, transitions);
    std::map<std::string, std::size_t> by_label;
    for (std::size_t i = 0; i < f.size(); ++i) by_label[f[i].label] = i;
    std::vector<RiskFactor> out;
    for (const auto& [label, members] : groups) {
        RiskFactor g{label, {}};
        for (const auto& m : members) {
            auto it = by_label.find(m);
            if (it == by_label.end()) throw std::invalid_argument("unknown fine factor '" + m + "' in scheme " + name);
            g.members.push_back(it->second);
        }
        out.push_back(std::move(g));
    }
    return DecompositionScheme(name, std::move(f), std::move(out));
}

std::vector<std::string> DecompositionScheme::labels() const {
    std::vector<std::string> out;
    for (const auto& f : factors_) out.push_back(f.label);
    return out;
}

std::size_t DecompositionScheme::index_of(const std::string& label) const {
    for (std::size_t i = 0; i < factors_.size(); ++i)
        if (factors_[i].label == label) return i;
    throw std::invalid_argument("scheme " + name_ + " has no factor '" + label + "'");
}

DecompositionScheme DecompositionScheme::reordered(const std::vector<std::size_t>& order) const {
    if (order.size() != factors_.size()) throw std::invalid_argument("factor order has the wrong length");
    std::vector<int> seen(order.size(), 0);
    std::vector<RiskFactor> f;
    for (std::size_t i : order) {
        if (i >= factors_.size() || seen[i]++) throw std::invalid_argument("factor order is not a permutation");
        f.push_back(factors_[i]);
    }
    return DecompositionScheme(name_, fine_, std::move(f));
}

// ---------------------------------------------------------------- assumption check

namespace {

void collect_jumps(const FVProcess& p, std::vector<double>& out) {
    const auto& g = p.grid();
    for (std::size_t i = 1; i < g.size(); ++i)
        if (p.jump(i) != 0.0) out.push_back(g.point(i));
}

bool share_time(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (std::abs(a[i] - b[j]) <= kTimeTol) return true;
        if (a[i] < b[j])
            ++i;
        else
            ++j;
    }
    return false;
}

std::vector<Transition> transition_union(const ValuationBasis& a, const ValuationBasis& b) {
    std::set<Transition> s(a.intensities.transitions().begin(), a.intensities.transitions().end());
    s.insert(b.intensities.transitions().begin(), b.intensities.transitions().end());
    return {s.begin(), s.end()};
}

}  // namespace

void check_no_simultaneous_jumps(const ValuationBasis& first_order, const ValuationBasis& second_order,
                                 const ContractSpec& contract, const PolicyPath* path) {
    std::vector<double> star, actual, rest;
    collect_jumps(first_order.returns.path(), star);
    collect_jumps(second_order.returns.path(), actual);
    for (const auto& e : first_order.intensities.entries()) collect_jumps(e, rest);
    for (const auto& e : second_order.intensities.entries()) collect_jumps(e, rest);
    for (const auto& b : contract.sojourn()) collect_jumps(b, rest);
    if (path)
        for (double t : path->jump_times()) rest.push_back(t);
    if (share_time(star, actual))
        throw AssumptionError("first- and second-order returns jump at the same time");
    if (share_time(star, rest) || share_time(actual, rest))
        throw AssumptionError("a return process jumps together with an intensity, payment or state jump");
}

// ---------------------------------------------------------------- walker

SurplusModel::SurplusModel(ContractSpec contract, ValuationBasis first_order, ValuationBasis second_order,
                           Perspective perspective, std::optional<PolicyPath> path, Numerics numerics,
                           std::span<const double> extra_nodes)
    : contract_(std::move(contract)),
      first_(std::move(first_order)),
      second_(std::move(second_order)),
      perspective_(perspective),
      path_(std::move(path)),
      numerics_(numerics) {
    first_.validate();
    second_.validate();
    if (!(first_.intensities.states() == contract_.states()) || !(second_.intensities.states() == contract_.states()))
        throw std::invalid_argument("bases and contract use different state spaces");
    if (perspective_ == Perspective::Individual && !path_)
        throw std::invalid_argument("the individual perspective needs a realized path");
    if (perspective_ == Perspective::Mean) path_.reset();
    check_no_simultaneous_jumps(first_, second_, contract_, path_ ? &*path_ : nullptr);

    std::vector<double> extra(extra_nodes.begin(), extra_nodes.end());
    if (path_) {
        const auto times = path_->jump_times();
        extra.insert(extra.end(), times.begin(), times.end());
    }
    nodes_ = NodeGrid(common_grid(contract_, {&first_, &second_}, extra), numerics_.substeps);
    reserves_ = ReserveTable(first_, contract_, nodes_, numerics_.scheme);
    cache_ = std::make_shared<StepCache>();
    transitions_ = transition_union(first_, second_);
    fine_ = fine_factors(contract_.states(), transitions_);

    const std::size_t n = contract_.states().size();
    const std::size_t nt = transitions_.size();
    for (std::size_t j = 0; j < n; ++j) return_factor_.push_back(j);
    for (std::size_t e = 0; e < nt; ++e) {
        u_factor_.push_back(n + e);
        s_factor_.push_back(n + nt + e);
    }

    phi_ = tabulate(second_.returns.path(), nodes_);
    phi_star_ = tabulate(first_.returns.path(), nodes_);
    for (const auto& tr : transitions_) {
        const NodeTable l = tabulate(second_.intensities.entry(tr.from, tr.to), nodes_);
        const NodeTable ls = tabulate(first_.intensities.entry(tr.from, tr.to), nodes_);
        lam_.push_back(l.density);
        dlam_.push_back(l.jump);
        lam_star_.push_back(ls.density);
        dlam_star_.push_back(ls.jump);
        std::vector<double> pi(nodes_.intervals(), 0.0), pn(nodes_.size(), 0.0);
        if (const PaymentFunction* b = contract_.payment(tr.from, tr.to)) {
            for (std::size_t i = 0; i < nodes_.intervals(); ++i) pi[i] = b->right_limit(nodes_.node(i));
            for (std::size_t i = 0; i < nodes_.size(); ++i) pn[i] = b->value(nodes_.node(i));
        }
        pay_interval_.push_back(std::move(pi));
        pay_node_.push_back(std::move(pn));
    }
    for (const auto& b : contract_.sojourn()) sojourn_.push_back(tabulate(b, nodes_));

    if (path_) {
        if (path_->initial() != contract_.states().initial())
            throw std::invalid_argument("path does not start in the initial state");
        path_state_.resize(nodes_.intervals());
        for (std::size_t i = 0; i < nodes_.intervals(); ++i) path_state_[i] = path_->state_at(nodes_.node(i));
        path_jump_.assign(nodes_.size(), std::nullopt);
        for (const auto& r : path_->jumps()) {
            const Transition tr{r.from, r.to};
            if (std::find(transitions_.begin(), transitions_.end(), tr) == transitions_.end())
                throw std::invalid_argument("path jumps along an undeclared transition");
            path_jump_[nodes_.require_index(r.time)] = tr;
        }
    }
}

SurplusModel SurplusModel::with_path(PolicyPath path) const {
    if (perspective_ != Perspective::Individual)
        throw std::invalid_argument("with_path applies to the individual perspective");
    for (double t : path.jump_times()) nodes_.require_index(t);
    SurplusModel out = *this;
    out.path_ = std::move(path);
    check_no_simultaneous_jumps(first_, second_, contract_, &*out.path_);
    for (std::size_t i = 0; i < nodes_.intervals(); ++i) out.path_state_[i] = out.path_->state_at(nodes_.node(i));
    out.path_jump_.assign(nodes_.size(), std::nullopt);
    for (const auto& r : out.path_->jumps()) {
        const Transition tr{r.from, r.to};
        if (std::find(transitions_.begin(), transitions_.end(), tr) == transitions_.end())
            throw std::invalid_argument("path jumps along an undeclared transition");
        out.path_jump_[nodes_.require_index(r.time)] = tr;
    }
    return out;
}

SurplusModel::State SurplusModel::initial_state() const {
    const auto n = static_cast<Eigen::Index>(contract_.states().size());
    const std::size_t a = contract_.states().initial();
    State s;
    s.m = Matrix::Zero(n, n);
    s.m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)) = 1.0;
    s.acc = sojourn_[a].jump[0];
    s.node = 0;
    return s;
}

struct SurplusModel::StepCache {
    std::mutex mutex;
    std::map<std::vector<double>, Matrix> steps;
};

void SurplusModel::continuous_step(State& s, std::size_t i, const std::vector<char>& active) const {
    const double h = nodes_.width(i);
    const auto n = s.m.rows();
    const bool mean = perspective_ == Perspective::Mean;

    Vector flow(n);
    for (Eigen::Index j = 0; j < n; ++j) flow(j) = sojourn_[static_cast<std::size_t>(j)].density[i];
    Matrix gen = Matrix::Zero(n, n);
    for (std::size_t e = 0; e < transitions_.size(); ++e) {
        const auto j = static_cast<Eigen::Index>(transitions_[e].from);
        const auto k = static_cast<Eigen::Index>(transitions_[e].to);
        const double au = active[u_factor_[e]] ? 1.0 : 0.0;
        const double as = active[s_factor_[e]] ? 1.0 : 0.0;
        const double rate = (as - au) * lam_[e][i] + (1.0 - as) * lam_star_[e][i];
        flow(j) += pay_interval_[e][i] * rate;
        gen(j, k) += rate;
        gen(j, j) -= rate;
    }
    Vector phi(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const double a_phi = active[return_factor_[static_cast<std::size_t>(r)]] ? 1.0 : 0.0;
        phi(r) = phi_star_.density[i] + a_phi * (phi_.density[i] - phi_star_.density[i]);
    }

    if (numerics_.scheme == SolverScheme::Exponential) {
        // Linear system in x = (vec M, acc) with constant coefficients on the interval.
        std::vector<double> key{h, mean ? 1.0 : 0.0};
        key.insert(key.end(), flow.data(), flow.data() + n);
        key.insert(key.end(), gen.data(), gen.data() + n * n);
        key.insert(key.end(), phi.data(), phi.data() + n);
        for (std::size_t e = 0; e < transitions_.size() && mean; ++e) {
            key.push_back(lam_[e][i]);
            key.push_back(active[u_factor_[e]] ? pay_interval_[e][i] : 0.0);
            key.push_back(active[u_factor_[e]] ? 1.0 : 0.0);
        }
        Matrix step;
        {
            std::lock_guard<std::mutex> lock(cache_->mutex);
            auto it = cache_->steps.find(key);
            if (it != cache_->steps.end()) step = it->second;
        }
        if (step.size() == 0) {
            const Eigen::Index dim = n * n + 1;
            auto at = [n](Eigen::Index r, Eigen::Index c) { return r + c * n; };
            Matrix a = Matrix::Zero(dim, dim);
            for (Eigen::Index r = 0; r < n; ++r)
                for (Eigen::Index c = 0; c < n; ++c) {
                    a(at(r, c), at(r, c)) -= phi(r);
                    for (Eigen::Index l = 0; l < n; ++l) a(at(r, c), at(r, l)) += gen(l, c);
                    a(n * n, at(r, c)) += flow(c);
                }
            for (std::size_t e = 0; e < transitions_.size() && mean; ++e) {
                const double lam = lam_[e][i];
                if (lam == 0.0) continue;
                const auto j = static_cast<Eigen::Index>(transitions_[e].from);
                const auto k = static_cast<Eigen::Index>(transitions_[e].to);
                const double au = active[u_factor_[e]] ? 1.0 : 0.0;
                for (Eigen::Index c = 0; c < n; ++c) {
                    a(at(k, c), at(j, c)) += lam;
                    a(at(j, c), at(j, c)) -= lam;
                }
                a(at(k, k), at(j, j)) += lam * au;
                a(at(k, j), at(j, j)) -= lam * au;
                a(n * n, at(j, j)) += au * pay_interval_[e][i] * lam;
            }
            step = (a * h).exp();
            std::lock_guard<std::mutex> lock(cache_->mutex);
            cache_->steps.emplace(std::move(key), step);
        }
        Vector x(n * n + 1);
        x.head(n * n) = Eigen::Map<const Vector>(s.m.data(), n * n);
        x(n * n) = 0.0;
        const Vector y = step * x;
        s.m = Eigen::Map<const Matrix>(y.data(), n, n);
        s.acc += y(n * n);
        return;
    }

    double extra = 0.0;
    if (mean)
        for (std::size_t e = 0; e < transitions_.size(); ++e) {
            const auto j = static_cast<Eigen::Index>(transitions_[e].from);
            const double au = active[u_factor_[e]] ? 1.0 : 0.0;
            extra += au * pay_interval_[e][i] * s.m(j, j) * lam_[e][i];
        }
    s.acc += (s.m.colwise().sum() * flow)(0) * h + extra * h;

    Vector disc(n);
    for (Eigen::Index r = 0; r < n; ++r) disc(r) = std::exp(-phi(r) * h);
    Matrix next = disc.asDiagonal() * (s.m + s.m * gen * h);
    if (mean) {
        for (std::size_t e = 0; e < transitions_.size(); ++e) {
            const double mass = lam_[e][i] * h;
            if (mass == 0.0) continue;
            const auto j = static_cast<Eigen::Index>(transitions_[e].from);
            const auto k = static_cast<Eigen::Index>(transitions_[e].to);
            const double au = active[u_factor_[e]] ? 1.0 : 0.0;
            const double w = mass * disc(j);
            next.row(k) += w * s.m.row(j);
            next(k, k) += w * au * s.m(j, j);
            next(k, j) -= w * au * s.m(j, j);
            next.row(j) -= w * s.m.row(j);
        }
    }
    s.m = std::move(next);
}

void SurplusModel::jump_step(State& s, std::size_t i, const std::vector<char>& active) const {
    const auto n = s.m.rows();
    const bool mean = perspective_ == Perspective::Mean;

    if (phi_.jump[i] != 0.0 || phi_star_.jump[i] != 0.0) {
        for (Eigen::Index r = 0; r < n; ++r) {
            const double a_phi = active[return_factor_[static_cast<std::size_t>(r)]] ? 1.0 : 0.0;
            const double d = phi_star_.jump[i] + a_phi * (phi_.jump[i] - phi_star_.jump[i]);
            s.m.row(r) /= 1.0 + d;
        }
    }

    const RowVector m = s.m.colwise().sum();
    for (Eigen::Index j = 0; j < n; ++j) s.acc += m(j) * sojourn_[static_cast<std::size_t>(j)].jump[i];

    Matrix dgen = Matrix::Zero(n, n);
    bool any = false;
    for (std::size_t e = 0; e < transitions_.size(); ++e) {
        const auto j = static_cast<Eigen::Index>(transitions_[e].from);
        const auto k = static_cast<Eigen::Index>(transitions_[e].to);
        const double au = active[u_factor_[e]] ? 1.0 : 0.0;
        const double as = active[s_factor_[e]] ? 1.0 : 0.0;
        const double mass = (as - au) * dlam_[e][i] + (1.0 - as) * dlam_star_[e][i];
        if (mass != 0.0) {
            any = true;
            s.acc += m(j) * pay_node_[e][i] * mass;
            dgen(j, k) += mass;
            dgen(j, j) -= mass;
        }
        if (mean && dlam_[e][i] != 0.0) s.acc += au * pay_node_[e][i] * s.m(j, j) * dlam_[e][i];
    }

    std::optional<Transition> move;
    double move_weight = 0.0;
    if (!mean && path_jump_[i]) {
        move = path_jump_[i];
        const auto pos = static_cast<std::size_t>(
            std::find(transitions_.begin(), transitions_.end(), *move) - transitions_.begin());
        move_weight = active[u_factor_[pos]] ? 1.0 : 0.0;
        s.acc += move_weight * pay_node_[pos][i] * s.m(static_cast<Eigen::Index>(move->from),
                                                       static_cast<Eigen::Index>(move->from));
    }

    Matrix moved = any ? Matrix(s.m + s.m * dgen) : s.m;
    if (mean) {
        Matrix next = moved;
        for (std::size_t e = 0; e < transitions_.size(); ++e) {
            const double mass = dlam_[e][i];
            if (mass == 0.0) continue;
            const auto j = static_cast<Eigen::Index>(transitions_[e].from);
            const auto k = static_cast<Eigen::Index>(transitions_[e].to);
            const double au = active[u_factor_[e]] ? 1.0 : 0.0;
            next.row(k) += mass * moved.row(j);
            next(k, k) += mass * au * s.m(j, j);
            next(k, j) -= mass * au * s.m(j, j);
            next.row(j) -= mass * moved.row(j);
        }
        s.m = std::move(next);
    } else if (move) {
        const auto x = static_cast<Eigen::Index>(move->from);
        const auto y = static_cast<Eigen::Index>(move->to);
        Matrix next = Matrix::Zero(n, n);
        next.row(y) = moved.row(x);
        next(y, y) += move_weight * s.m(x, x);
        next(y, x) -= move_weight * s.m(x, x);
        s.m = std::move(next);
    } else {
        s.m = std::move(moved);
    }
}

void SurplusModel::advance(State& s, std::size_t to_node, const std::vector<char>& active) const {
    if (to_node < s.node || to_node >= nodes_.size()) throw std::invalid_argument("walker cannot move to that node");
    if (active.size() != fine_.size()) throw std::invalid_argument("activity flags do not match the fine factors");
    for (std::size_t i = s.node; i < to_node; ++i) {
        continuous_step(s, i, active);
        jump_step(s, i + 1, active);
    }
    s.node = to_node;
}

double SurplusModel::close(const State& s) const {
    return s.acc + (s.m.colwise().sum() * reserves_.at_node(s.node))(0);
}

double SurplusModel::H_at(const std::vector<std::size_t>& fine_status) const {
    if (fine_status.size() != fine_.size()) throw std::invalid_argument("one status per fine factor required");
    std::vector<std::size_t> stops(fine_status.begin(), fine_status.end());
    std::sort(stops.begin(), stops.end());
    stops.erase(std::unique(stops.begin(), stops.end()), stops.end());
    State s = initial_state();
    std::vector<char> active(fine_.size());
    for (std::size_t stop : stops) {
        if (stop >= nodes_.size()) throw std::invalid_argument("status beyond the last node");
        if (stop == s.node) continue;
        for (std::size_t f = 0; f < fine_.size(); ++f) active[f] = fine_status[f] >= stop ? 1 : 0;
        advance(s, stop, active);
    }
    return close(s);
}

double SurplusModel::revaluation(double t) const {
    return U_at(std::vector<std::size_t>(fine_.size(), node_index(t)));
}

// ---------------------------------------------------------------- surface

SurplusSurface::SurplusSurface(const SurplusModel& model, DecompositionScheme scheme)
    : model_(&model), scheme_(std::move(scheme)) {
    const auto& a = scheme_.fine_list();
    const auto& b = model.fine();
    bool same = a.size() == b.size();
    for (std::size_t i = 0; same && i < a.size(); ++i) same = a[i].label == b[i].label;
    if (!same) throw std::invalid_argument("scheme fine factors do not match the model transitions");
}

double SurplusSurface::at_nodes(const std::vector<std::size_t>& statuses) const {
    if (statuses.size() != scheme_.size()) throw std::invalid_argument("one status per risk factor required");
    return model_->U_at(scheme_.expand(statuses));
}

double SurplusSurface::operator()(std::span<const double> statuses) const {
    std::vector<std::size_t> idx;
    for (double t : statuses) idx.push_back(model_->node_index(t));
    return at_nodes(idx);
}

// ---------------------------------------------------------------- revaluation closed forms

double revaluation_individual(const PolicyPath& path, const ValuationBasis& first_order,
                              const ValuationBasis& second_order, const ContractSpec& contract, double t,
                              const NodeGrid& nodes) {
    check_no_simultaneous_jumps(first_order, second_order, contract, &path);
    const IntensityMatrix n =
        counting_process(path, contract.states(), nodes.base(), transition_union(first_order, second_order));
    const ValuationBasis basis = spliced_basis(first_order, second_order.returns, n, t);
    return -functional_H(basis, contract, nodes);
}

double revaluation_individual(const PolicyPath& path, const ValuationBasis& first_order,
                              const ValuationBasis& second_order, const ContractSpec& contract, double t,
                              const Numerics& numerics) {
    std::vector<double> extra = path.jump_times();
    extra.push_back(t);
    const NodeGrid nodes(common_grid(contract, {&first_order, &second_order}, extra), numerics.substeps);
    return revaluation_individual(path, first_order, second_order, contract, t, nodes);
}

namespace {

double mean_closed_form(const ValuationBasis& first_order, const ValuationBasis& second_order,
                        const ContractSpec& contract, double t, const NodeGrid& nodes, SolverScheme scheme,
                        QuadratureRule rule) {
    check_no_simultaneous_jumps(first_order, second_order, contract, nullptr);
    const std::size_t a = contract.states().initial();
    const auto ea = static_cast<Eigen::Index>(a);
    const DoleansExponential kappa(second_order.returns);
    const TransitionField p = product_integral(second_order.intensities, 0.0, nodes, scheme);
    const ReserveTable reserves(first_order, contract, nodes, scheme);

    double flows = contract.sojourn(a).jump(0);
    for (std::size_t j = 0; j < contract.states().size(); ++j) {
        const auto ej = static_cast<Eigen::Index>(j);
        Integrand f([&](double s) { return p.at(s)(ea, ej) / kappa(s); },
                    [&](double u) { return p.left(u)(ea, ej) / kappa(u); });
        flows += stieltjes_integral(f, contract.sojourn(j), 0.0, t, nodes, rule);
    }
    const auto& trs = second_order.intensities.transitions();
    for (std::size_t e = 0; e < trs.size(); ++e) {
        const PaymentFunction* b = contract.payment(trs[e].from, trs[e].to);
        if (!b) continue;
        const auto ej = static_cast<Eigen::Index>(trs[e].from);
        Integrand f([&](double s) { return p.at(s)(ea, ej) * b->right_limit(s) / kappa(s); },
                    [&](double u) { return p.left(u)(ea, ej) * b->value(u) / kappa(u); });
        flows += stieltjes_integral(f, second_order.intensities.entries()[e], 0.0, t, nodes, rule);
    }
    const Matrix pt = p.at(t);
    double held = 0.0;
    for (std::size_t j = 0; j < contract.states().size(); ++j)
        held += pt(ea, static_cast<Eigen::Index>(j)) * reserves.value(j, t);
    return -flows - held / kappa(t);
}

}  // namespace

double revaluation_mean(const ValuationBasis& first_order, const ValuationBasis& second_order,
                        const ContractSpec& contract, double t, const NodeGrid& nodes) {
    return mean_closed_form(first_order, second_order, contract, t, nodes, SolverScheme::Product,
                            QuadratureRule::LeftPoint);
}

double revaluation_mean(const ValuationBasis& first_order, const ValuationBasis& second_order,
                        const ContractSpec& contract, double t, const Numerics& numerics) {
    const std::vector<double> extra{t};
    const NodeGrid nodes(common_grid(contract, {&first_order, &second_order}, extra), numerics.substeps);
    return mean_closed_form(first_order, second_order, contract, t, nodes, numerics.scheme, numerics.rule);
}

}  // namespace isu
