#include "isu/markov.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace isu {

// ---------------------------------------------------------------- StateSpace

StateSpace::StateSpace(std::vector<std::string> labels, const std::string& initial) : labels_(std::move(labels)) {
    if (labels_.empty()) throw std::invalid_argument("state space needs at least one state");
    for (std::size_t i = 0; i < labels_.size(); ++i)
        for (std::size_t k = i + 1; k < labels_.size(); ++k)
            if (labels_[i] == labels_[k]) throw std::invalid_argument("duplicate state label '" + labels_[i] + "'");
    initial_ = index(initial);
}

std::size_t StateSpace::index(const std::string& label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) throw std::invalid_argument("unknown state '" + label + "'");
    return static_cast<std::size_t>(it - labels_.begin());
}

bool StateSpace::contains(const std::string& label) const {
    return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
}

// ---------------------------------------------------------------- IntensityMatrix

IntensityMatrix IntensityMatrix::assemble(StateSpace states, std::vector<std::pair<Transition, FVProcess>> entries,
                                          const TimeGrid& grid) {
    const std::size_t n = states.size();
    TimeGrid g = grid;
    for (const auto& [tr, p] : entries) {
        if (tr.from >= n || tr.to >= n) throw std::invalid_argument("transition refers to an unknown state");
        if (tr.from == tr.to) throw std::invalid_argument("diagonal intensities are implied, not declared");
        if (std::abs(p.horizon() - grid.horizon()) > kTimeTol)
            throw std::invalid_argument("intensity horizon differs from the grid horizon");
        if (!(p.grid() == g)) g = g.merged(p.grid());
    }
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < entries.size(); ++i)
        if (entries[i].first == entries[i - 1].first)
            throw std::invalid_argument("transition " + states.label(entries[i].first.from) + "->" +
                                        states.label(entries[i].first.to) + " declared twice");
    IntensityMatrix out;
    out.states_ = std::move(states);
    out.grid_ = g;
    for (auto& [tr, p] : entries) {
        out.transitions_.push_back(tr);
        out.entries_.push_back(p.on_grid(g));
    }
    return out;
}

IntensityMatrix::IntensityMatrix(StateSpace states, std::vector<std::pair<Transition, FVProcess>> entries,
                                 const TimeGrid& grid) {
    *this = assemble(std::move(states), std::move(entries), grid);
    validate();
}

IntensityMatrix IntensityMatrix::unchecked(StateSpace states, std::vector<std::pair<Transition, FVProcess>> entries,
                                           const TimeGrid& grid) {
    return assemble(std::move(states), std::move(entries), grid);
}

bool IntensityMatrix::has(std::size_t j, std::size_t k) const {
    return std::binary_search(transitions_.begin(), transitions_.end(), Transition{j, k});
}

std::size_t IntensityMatrix::position(std::size_t j, std::size_t k) const {
    auto it = std::lower_bound(transitions_.begin(), transitions_.end(), Transition{j, k});
    if (it == transitions_.end() || !(*it == Transition{j, k}))
        throw std::invalid_argument("transition " + std::to_string(j) + "->" + std::to_string(k) + " not declared");
    return static_cast<std::size_t>(it - transitions_.begin());
}

FVProcess IntensityMatrix::entry(std::size_t j, std::size_t k) const {
    if (!has(j, k)) return FVProcess::zero(grid_);
    return entries_[position(j, k)];
}

void IntensityMatrix::validate() const {
    const std::size_t n = size();
    std::vector<std::vector<double>> row_mass(n, std::vector<double>(grid_.size(), 0.0));
    for (std::size_t e = 0; e < entries_.size(); ++e) {
        const auto& p = entries_[e];
        const auto& tr = transitions_[e];
        const std::string name = "Lambda_" + states_.label(tr.from) + states_.label(tr.to);
        if (p.jump(0) != 0.0) throw AdmissibilityError(name + " must start at 0");
        for (double d : p.densities())
            if (d < 0.0) throw AdmissibilityError(name + " is not nondecreasing (negative density)");
        for (std::size_t i = 1; i < grid_.size(); ++i) {
            if (p.jump(i) < 0.0) throw AdmissibilityError(name + " is not nondecreasing (negative jump)");
            row_mass[tr.from][i] += p.jump(i);
        }
    }
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 1; i < grid_.size(); ++i)
            if (row_mass[j][i] > 1.0 + 1e-12) {
                std::ostringstream msg;
                msg << "jump mass exceeds 1 in state " << states_.label(j) << " at t = " << grid_.point(i) << " ("
                    << row_mass[j][i] << ")";
                throw AdmissibilityError(msg.str());
            }
}

IntensityMatrix IntensityMatrix::on_grid(const TimeGrid& finer) const {
    std::vector<std::pair<Transition, FVProcess>> e;
    for (std::size_t i = 0; i < entries_.size(); ++i) e.emplace_back(transitions_[i], entries_[i].on_grid(finer));
    return assemble(states_, std::move(e), finer);
}

IntensityMatrix IntensityMatrix::with_transitions(const std::vector<Transition>& transitions) const {
    std::vector<std::pair<Transition, FVProcess>> e;
    for (std::size_t i = 0; i < entries_.size(); ++i) e.emplace_back(transitions_[i], entries_[i]);
    for (const auto& tr : transitions)
        if (!has(tr.from, tr.to)) e.emplace_back(tr, FVProcess::zero(grid_));
    return assemble(states_, std::move(e), grid_);
}

namespace {

IntensityMatrix combine(const IntensityMatrix& a, const IntensityMatrix& b, double sign) {
    if (!(a.states() == b.states())) throw std::invalid_argument("intensity matrices on different state spaces");
    std::vector<Transition> all = a.transitions();
    for (const auto& tr : b.transitions())
        if (!a.has(tr.from, tr.to)) all.push_back(tr);
    std::sort(all.begin(), all.end());
    const TimeGrid g = a.grid().merged(b.grid());
    std::vector<std::pair<Transition, FVProcess>> e;
    for (const auto& tr : all) e.emplace_back(tr, a.entry(tr.from, tr.to) + sign * b.entry(tr.from, tr.to));
    return IntensityMatrix::unchecked(a.states(), std::move(e), g);
}

}  // namespace

IntensityMatrix operator+(const IntensityMatrix& a, const IntensityMatrix& b) { return combine(a, b, 1.0); }
IntensityMatrix operator-(const IntensityMatrix& a, const IntensityMatrix& b) { return combine(a, b, -1.0); }

IntensityMatrix stop_process(const IntensityMatrix& m, double t) {
    std::vector<std::pair<Transition, FVProcess>> e;
    for (std::size_t i = 0; i < m.entries().size(); ++i)
        e.emplace_back(m.transitions()[i], stop_process(m.entries()[i], t));
    TimeGrid g = m.grid().index_of(t) ? m.grid() : m.grid().merged(std::vector<double>{t});
    return IntensityMatrix::unchecked(m.states(), std::move(e), g);
}

IntensityMatrix spliced(const IntensityMatrix& base, const IntensityMatrix& other, double t) {
    return base + stop_process(other - base, t);
}

IntensityTable tabulate(const IntensityMatrix& m, const NodeGrid& nodes) {
    const auto n = static_cast<Eigen::Index>(m.size());
    IntensityTable t;
    t.density.assign(nodes.intervals(), Matrix::Zero(n, n));
    t.jump.assign(nodes.size(), Matrix::Zero(n, n));
    t.has_jump.assign(nodes.size(), false);
    for (std::size_t e = 0; e < m.entries().size(); ++e) {
        const auto& tr = m.transitions()[e];
        const auto j = static_cast<Eigen::Index>(tr.from);
        const auto k = static_cast<Eigen::Index>(tr.to);
        NodeTable tab = tabulate(m.entries()[e], nodes);
        for (std::size_t i = 0; i < nodes.intervals(); ++i) {
            t.density[i](j, k) += tab.density[i];
            t.density[i](j, j) -= tab.density[i];
        }
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (tab.jump[i] == 0.0) continue;
            t.jump[i](j, k) += tab.jump[i];
            t.jump[i](j, j) -= tab.jump[i];
            t.has_jump[i] = true;
        }
    }
    return t;
}

Matrix step_factor(const Matrix& generator, double h, SolverScheme scheme) {
    const Matrix id = Matrix::Identity(generator.rows(), generator.cols());
    if (scheme == SolverScheme::Exponential) {
        if (generator.isZero(0.0)) return id;
        return (generator * h).exp();
    }
    return id + generator * h;
}

// ---------------------------------------------------------------- TransitionField

TransitionField::TransitionField(NodeGrid nodes, std::size_t start, IntensityTable table, SolverScheme scheme)
    : nodes_(std::move(nodes)), start_(start), table_(std::move(table)), scheme_(scheme) {
    const auto n = table_.jump.empty() ? 0 : table_.jump.front().rows();
    const Matrix id = Matrix::Identity(n, n);
    right_.reserve(nodes_.size() - start_);
    left_.reserve(nodes_.size() - start_);
    right_.push_back(id);
    left_.push_back(id);
    for (std::size_t i = start_; i < nodes_.intervals(); ++i) {
        Matrix p = right_.back() * step_factor(table_.density[i], nodes_.width(i), scheme_);
        left_.push_back(p);
        if (table_.has_jump[i + 1]) p = p * (id + table_.jump[i + 1]);
        right_.push_back(std::move(p));
    }
}

Matrix TransitionField::at(double t) const {
    if (t < start_time() - kTimeTol || t > nodes_.node(nodes_.size() - 1) + kTimeTol) {
        std::ostringstream msg;
        msg << "transition field evaluated at " << t << " outside [" << start_time() << ", "
            << nodes_.node(nodes_.size() - 1) << "]";
        throw std::domain_error(msg.str());
    }
    if (auto idx = nodes_.index_of(t)) return at_node(*idx);
    const auto ns = nodes_.nodes();
    const auto i = static_cast<std::size_t>(std::upper_bound(ns.begin(), ns.end(), t) - ns.begin()) - 1;
    return at_node(i) * step_factor(table_.density[i], t - ns[i], scheme_);
}

Matrix TransitionField::left(double t) const {
    if (auto idx = nodes_.index_of(t); idx && *idx >= start_) return left_at_node(*idx);
    return at(t);
}

TransitionField product_integral(const IntensityMatrix& m, double s, const NodeGrid& nodes, SolverScheme scheme) {
    const std::size_t start = nodes.require_index(s);
    return TransitionField(nodes, start, tabulate(m, nodes), scheme);
}

TransitionField kolmogorov_forward(const IntensityMatrix& m, double s, const SolverConfig& config) {
    m.validate();
    if (!m.grid().contains(s)) throw std::domain_error("start time outside the intensity horizon");
    NodeGrid nodes(m.grid(), config.substeps, std::vector<double>{s});
    return product_integral(m, s, nodes, config.scheme);
}

// ---------------------------------------------------------------- inverse

InverseField::InverseField(TransitionField forward, std::vector<Matrix> right, std::vector<Matrix> left)
    : forward_(std::move(forward)), right_(std::move(right)), left_(std::move(left)) {}

Matrix InverseField::at(double t) const {
    if (auto idx = forward_.nodes().index_of(t); idx && *idx >= forward_.start_index()) return at_node(*idx);
    return forward_.at(t).partialPivLu().inverse();
}

namespace {

void check_condition(const Matrix& m, double time) {
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& sv = svd.singularValues();
    const double smallest = sv(sv.size() - 1);
    const double cond = smallest > 0.0 ? sv(0) / smallest : std::numeric_limits<double>::infinity();
    if (!(cond <= kMaxJumpCondition)) {
        std::ostringstream msg;
        msg << "I + dLambda_M is singular at jump time t = " << time << " (condition number " << cond << ")";
        throw SingularJumpError(msg.str(), time);
    }
}

Matrix inverse_step(const Matrix& q, const Matrix& dl, InverseMode mode) {
    const Matrix id = Matrix::Identity(dl.rows(), dl.cols());
    const Matrix step = id + dl;
    if (mode == InverseMode::ImplicitStep) return step.partialPivLu().solve(q);
    const Matrix dg = dl - dl * dl * step.partialPivLu().inverse();
    return q - dg * q;
}

}  // namespace

InverseField inverse_transition(const IntensityMatrix& m, double s, const NodeGrid& nodes, SolverScheme scheme,
                                InverseMode mode) {
    TransitionField fwd = product_integral(m, s, nodes, scheme);
    const IntensityTable table = tabulate(m, nodes);
    const std::size_t start = fwd.start_index();
    const auto n = static_cast<Eigen::Index>(m.size());
    const Matrix id = Matrix::Identity(n, n);
    std::vector<Matrix> right{id};
    std::vector<Matrix> left{id};
    for (std::size_t i = start; i < nodes.intervals(); ++i) {
        if (table.has_jump[i + 1]) check_condition(id + table.jump[i + 1], nodes.node(i + 1));
        if (mode == InverseMode::DirectInversion) {
            left.push_back(fwd.left_at_node(i + 1).partialPivLu().inverse());
            right.push_back(fwd.at_node(i + 1).partialPivLu().inverse());
            continue;
        }
        const Matrix dl = step_factor(table.density[i], nodes.width(i), scheme) - id;
        Matrix q = inverse_step(right.back(), dl, mode);
        left.push_back(q);
        if (table.has_jump[i + 1]) q = inverse_step(q, table.jump[i + 1], mode);
        right.push_back(std::move(q));
    }
    return InverseField(std::move(fwd), std::move(right), std::move(left));
}

InverseField inverse_transition(const IntensityMatrix& m, double s, const SolverConfig& config, InverseMode mode) {
    m.validate();
    NodeGrid nodes(m.grid(), config.substeps, std::vector<double>{s});
    return inverse_transition(m, s, nodes, config.scheme, mode);
}

// ---------------------------------------------------------------- paths

PolicyPath::PolicyPath(std::size_t initial, std::vector<JumpRecord> jumps, double horizon)
    : initial_(initial), horizon_(horizon), jumps_(std::move(jumps)) {
    std::size_t current = initial_;
    double last = 0.0;
    for (const auto& r : jumps_) {
        if (!(r.time > last)) throw std::invalid_argument("path jump times must be strictly increasing and > 0");
        if (r.time > horizon_ + kTimeTol) throw std::invalid_argument("path jump after the horizon");
        if (r.from != current) throw std::invalid_argument("path jump leaves a state the path is not in");
        if (r.from == r.to) throw std::invalid_argument("path jump must change state");
        current = r.to;
        last = r.time;
    }
}

std::vector<double> PolicyPath::jump_times() const {
    std::vector<double> out;
    for (const auto& r : jumps_) out.push_back(r.time);
    return out;
}

std::size_t PolicyPath::state_at(double t) const {
    std::size_t s = initial_;
    for (const auto& r : jumps_) {
        if (r.time > t + kTimeTol) break;
        s = r.to;
    }
    return s;
}

std::size_t PolicyPath::state_before(double t) const {
    std::size_t s = initial_;
    for (const auto& r : jumps_) {
        if (r.time >= t - kTimeTol) break;
        s = r.to;
    }
    return s;
}

IntensityMatrix counting_process(const PolicyPath& path, const StateSpace& states, const TimeGrid& grid,
                                 const std::vector<Transition>& transitions) {
    const TimeGrid g = grid.merged(path.jump_times());
    std::map<Transition, FVProcess> entries;
    for (const auto& tr : transitions) entries.emplace(tr, FVProcess::zero(g));
    for (const auto& r : path.jumps()) {
        auto [it, inserted] = entries.emplace(Transition{r.from, r.to}, FVProcess::zero(g));
        it->second = it->second.with_jump(r.time, 1.0);
    }
    std::vector<std::pair<Transition, FVProcess>> e(entries.begin(), entries.end());
    return IntensityMatrix::unchecked(states, std::move(e), g);
}

int state_indicator(const PolicyPath& path, std::size_t j, double t) { return path.state_at(t) == j ? 1 : 0; }
int state_indicator_left(const PolicyPath& path, std::size_t j, double t) {
    return path.state_before(t) == j ? 1 : 0;
}

}  // namespace isu
