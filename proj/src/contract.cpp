#include "isu/contract.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace isu {

// ---------------------------------------------------------------- PaymentFunction

PaymentFunction::PaymentFunction(TimeGrid grid, std::vector<std::vector<double>> coefficients)
    : grid_(std::move(grid)), coefficients_(std::move(coefficients)) {
    if (coefficients_.size() != grid_.cells())
        throw std::invalid_argument("payment function needs one coefficient list per grid cell");
    for (const auto& c : coefficients_)
        for (double v : c)
            if (!std::isfinite(v)) throw std::invalid_argument("payment coefficients must be finite");
}

PaymentFunction PaymentFunction::constant(const TimeGrid& grid, double value) {
    return PaymentFunction(grid, std::vector<std::vector<double>>(grid.cells(), std::vector<double>{value}));
}

PaymentFunction PaymentFunction::piecewise_constant(const TimeGrid& grid, std::vector<double> values) {
    if (values.size() != grid.cells()) throw std::invalid_argument("one payment value per grid cell required");
    std::vector<std::vector<double>> c;
    c.reserve(values.size());
    for (double v : values) c.push_back({v});
    return PaymentFunction(grid, std::move(c));
}

PaymentFunction PaymentFunction::discounted_lump_sums(const ReturnProcess& returns, const TimeGrid& grid,
                                                      const std::vector<double>& amounts) {
    const DoleansExponential kappa(returns);
    std::vector<double> values(grid.cells());
    for (std::size_t c = 0; c < grid.cells(); ++c) {
        const double mid = 0.5 * (grid.point(c) + grid.point(c + 1));
        const auto year = static_cast<std::size_t>(std::floor(mid));
        if (year >= amounts.size()) throw std::invalid_argument("lump-sum amounts do not cover the horizon");
        values[c] = kappa(static_cast<double>(year)) / kappa(mid) * amounts[year];
    }
    return piecewise_constant(grid, std::move(values));
}

PaymentFunction PaymentFunction::scaled(double factor) const {
    PaymentFunction out = *this;
    for (auto& c : out.coefficients_)
        for (double& v : c) v *= factor;
    return out;
}

bool PaymentFunction::is_zero() const {
    for (const auto& c : coefficients_)
        for (double v : c)
            if (v != 0.0) return false;
    return true;
}

double PaymentFunction::eval(std::size_t cell, double t) const {
    const auto& c = coefficients_[cell];
    const double x = t - grid_.point(cell);
    double v = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
    return v;
}

double PaymentFunction::value(double t) const {
    if (coefficients_.empty() || t > grid_.horizon() + kTimeTol) return 0.0;
    if (t < -kTimeTol) throw std::domain_error("payment function evaluated before time 0");
    return eval(grid_.cell_of(t), t);
}

double PaymentFunction::right_limit(double t) const {
    if (coefficients_.empty() || t >= grid_.horizon() - kTimeTol) return 0.0;
    if (t < -kTimeTol) throw std::domain_error("payment function evaluated before time 0");
    std::size_t cell;
    if (auto idx = grid_.index_of(t)) {
        cell = *idx;
    } else {
        cell = grid_.cell_of(t);
    }
    return eval(cell, t);
}

// ---------------------------------------------------------------- ContractSpec

ContractSpec::ContractSpec(StateSpace states, std::vector<FVProcess> sojourn,
                           std::vector<std::pair<Transition, PaymentFunction>> payments)
    : states_(std::move(states)), sojourn_(std::move(sojourn)), payments_(std::move(payments)) {
    if (sojourn_.size() != states_.size()) throw std::invalid_argument("one sojourn payment stream per state required");
    horizon_ = sojourn_.front().horizon();
    for (const auto& b : sojourn_)
        if (std::abs(b.horizon() - horizon_) > kTimeTol)
            throw std::invalid_argument("sojourn payment streams must share the contract horizon");
    std::sort(payments_.begin(), payments_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 0; i < payments_.size(); ++i) {
        const auto& tr = payments_[i].first;
        if (tr.from >= states_.size() || tr.to >= states_.size() || tr.from == tr.to)
            throw std::invalid_argument("transition payment on an invalid pair");
        if (i > 0 && payments_[i - 1].first == tr)
            throw std::invalid_argument("transition payment declared twice");
        if (std::abs(payments_[i].second.grid().horizon() - horizon_) > kTimeTol)
            throw std::invalid_argument("transition payment must share the contract horizon");
    }
}

const PaymentFunction* ContractSpec::payment(std::size_t j, std::size_t k) const {
    for (const auto& [tr, f] : payments_)
        if (tr.from == j && tr.to == k) return &f;
    return nullptr;
}

TimeGrid ContractSpec::grid() const {
    TimeGrid g = sojourn_.front().grid();
    for (const auto& b : sojourn_) g = g.merged(b.grid());
    for (const auto& [tr, f] : payments_) g = g.merged(f.grid());
    return g;
}

ContractSpec ContractSpec::scaled_sum(const ContractSpec& other, double factor) const {
    if (!(other.states_ == states_)) throw std::invalid_argument("contracts on different state spaces");
    std::vector<FVProcess> sojourn;
    for (std::size_t j = 0; j < sojourn_.size(); ++j) sojourn.push_back(sojourn_[j] + factor * other.sojourn_[j]);
    auto payments = payments_;
    for (const auto& [tr, f] : other.payments_) {
        if (f.is_zero()) continue;
        if (payment(tr.from, tr.to)) throw std::invalid_argument("cannot combine two payment functions on one pair");
        payments.emplace_back(tr, f.scaled(factor));
    }
    return ContractSpec(states_, std::move(sojourn), std::move(payments));
}

void ValuationBasis::validate() const {
    ReturnProcess check(returns.path());
    (void)check;
    intensities.validate();
}

TimeGrid common_grid(const ContractSpec& contract, std::initializer_list<const ValuationBasis*> bases,
                     std::span<const double> extra) {
    TimeGrid g = contract.grid();
    for (const auto* b : bases) {
        if (std::abs(b->grid().horizon() - contract.horizon()) > kTimeTol)
            throw std::invalid_argument("valuation basis horizon differs from the contract horizon");
        g = g.merged(b->grid());
    }
    return extra.empty() ? g : g.merged(extra);
}

CashFlowTable tabulate(const ContractSpec& contract, const NodeGrid& nodes) {
    CashFlowTable t;
    for (const auto& b : contract.sojourn()) t.sojourn.push_back(tabulate(b, nodes));
    for (const auto& [tr, f] : contract.payments()) {
        t.pairs.push_back(tr);
        std::vector<double> interval(nodes.intervals());
        std::vector<double> node(nodes.size());
        for (std::size_t i = 0; i < nodes.intervals(); ++i) interval[i] = f.right_limit(nodes.node(i));
        for (std::size_t i = 0; i < nodes.size(); ++i) node[i] = f.value(nodes.node(i));
        t.pay_interval.push_back(std::move(interval));
        t.pay_node.push_back(std::move(node));
    }
    return t;
}

// ---------------------------------------------------------------- reserves

ReserveTable::ReserveTable(const ValuationBasis& first_order, const ContractSpec& contract, const NodeGrid& nodes,
                           SolverScheme scheme)
    : nodes_(nodes), scheme_(scheme) {
    const std::size_t n = contract.states().size();
    const auto en = static_cast<Eigen::Index>(n);
    const NodeTable phi = tabulate(first_order.returns.path(), nodes_);
    const IntensityTable lam = tabulate(first_order.intensities, nodes_);
    const CashFlowTable cash = tabulate(contract, nodes_);
    const auto& trs = first_order.intensities.transitions();
    const std::size_t intervals = nodes_.intervals();

    generator_ = lam.density;
    rate_ = phi.density;
    flow_.assign(intervals, Vector::Zero(en));
    std::vector<Vector> node_flow(nodes_.size(), Vector::Zero(en));
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < intervals; ++i) flow_[i](static_cast<Eigen::Index>(j)) += cash.sojourn[j].density[i];
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            node_flow[i](static_cast<Eigen::Index>(j)) += cash.sojourn[j].jump[i];
    }
    for (std::size_t p = 0; p < cash.pairs.size(); ++p) {
        const auto& tr = cash.pairs[p];
        if (std::find(trs.begin(), trs.end(), tr) == trs.end()) continue;
        const auto j = static_cast<Eigen::Index>(tr.from);
        const auto k = static_cast<Eigen::Index>(tr.to);
        const PaymentFunction& f = *contract.payment(tr.from, tr.to);
        for (std::size_t i = 0; i < intervals; ++i) {
            const double b = scheme_ == SolverScheme::Product
                                 ? cash.pay_interval[p][i]
                                 : f.value(0.5 * (nodes_.node(i) + nodes_.node(i + 1)));
            flow_[i](j) += b * lam.density[i](j, k);
        }
        for (std::size_t i = 1; i < nodes_.size(); ++i)
            if (lam.has_jump[i]) node_flow[i](j) += cash.pay_node[p][i] * lam.jump[i](j, k);
    }

    right_.assign(nodes_.size(), Vector::Zero(en));
    left_.assign(nodes_.size(), Vector::Zero(en));
    const std::size_t last = nodes_.size() - 1;
    for (std::size_t i = last + 1; i-- > 0;) {
        if (i < last) right_[i] = interior(i, nodes_.node(i));
        Vector w = node_flow[i] + right_[i];
        if (lam.has_jump[i]) w += lam.jump[i] * right_[i];
        left_[i] = w / (1.0 + phi.jump[i]);
    }
    // Time 0 carries no first-order jumps; its left value keeps the atom only.
    left_[0] = right_[0] + node_flow[0];
}

Vector ReserveTable::interior(std::size_t interval, double t) const {
    const double tau = nodes_.node(interval + 1) - t;
    const Vector& next = left_[interval + 1];
    const Matrix& a = generator_[interval];
    const double phi = rate_[interval];
    const auto n = a.rows();
    if (scheme_ == SolverScheme::Product) {
        const Matrix id = Matrix::Identity(n, n);
        return flow_[interval] * tau + std::exp(-phi * tau) * ((id + a * tau) * next);
    }
    Matrix aug = Matrix::Zero(n + 1, n + 1);
    aug.topLeftCorner(n, n) = a - phi * Matrix::Identity(n, n);
    aug.topRightCorner(n, 1) = flow_[interval];
    const Matrix e = (aug * tau).exp();
    return e.topLeftCorner(n, n) * next + e.topRightCorner(n, 1);
}

double ReserveTable::value(std::size_t j, double t) const {
    const double horizon = nodes_.node(nodes_.size() - 1);
    if (t > horizon + kTimeTol) return 0.0;
    if (t < -kTimeTol) throw std::domain_error("reserve evaluated before time 0");
    const auto jj = static_cast<Eigen::Index>(j);
    if (auto idx = nodes_.index_of(t)) return right_[*idx](jj);
    const auto ns = nodes_.nodes();
    const auto i = static_cast<std::size_t>(std::upper_bound(ns.begin(), ns.end(), t) - ns.begin()) - 1;
    return interior(i, t)(jj);
}

double ReserveTable::left_value(std::size_t j, double t) const {
    if (auto idx = nodes_.index_of(t)) return left_[*idx](static_cast<Eigen::Index>(j));
    return value(j, t);
}

double prospective_reserve(const ValuationBasis& first_order, const ContractSpec& contract, std::size_t j, double t,
                           const Numerics& numerics) {
    first_order.validate();
    if (t > contract.horizon() + kTimeTol) return 0.0;
    const std::vector<double> extra{t};
    const NodeGrid nodes(common_grid(contract, {&first_order}, extra), numerics.substeps);
    return ReserveTable(first_order, contract, nodes, numerics.scheme).value(j, t);
}

double sum_at_risk(const ReserveTable& reserves, const ContractSpec& contract, std::size_t j, std::size_t k,
                   double t) {
    if (j == k) throw std::domain_error("sum at risk needs two distinct states");
    if (t > contract.horizon() + kTimeTol) return 0.0;
    const PaymentFunction* b = contract.payment(j, k);
    return (b ? b->value(t) : 0.0) + reserves.value(k, t) - reserves.value(j, t);
}

double sum_at_risk(const ValuationBasis& first_order, const ContractSpec& contract, std::size_t j, std::size_t k,
                   double t, const Numerics& numerics) {
    if (j == k) throw std::domain_error("sum at risk needs two distinct states");
    if (t > contract.horizon() + kTimeTol) return 0.0;
    const std::vector<double> extra{t};
    const NodeGrid nodes(common_grid(contract, {&first_order}, extra), numerics.substeps);
    return sum_at_risk(ReserveTable(first_order, contract, nodes, numerics.scheme), contract, j, k, t);
}

// ---------------------------------------------------------------- functional H

double functional_H(const ValuationBasis& basis, const ContractSpec& contract, const NodeGrid& nodes,
                    SolverScheme scheme, QuadratureRule rule) {
    const std::size_t a = contract.states().initial();
    const auto ea = static_cast<Eigen::Index>(a);
    const DoleansExponential kappa(basis.returns);
    const TransitionField p = product_integral(basis.intensities, 0.0, nodes, scheme);
    const double horizon = contract.horizon();

    double total = 0.0;
    for (std::size_t j = 0; j < contract.states().size(); ++j) {
        const auto ej = static_cast<Eigen::Index>(j);
        const FVProcess& b = contract.sojourn(j);
        if (j == a) total += b.jump(0);
        Integrand f([&](double s) { return p.at(s)(ea, ej) / kappa(s); },
                    [&](double u) { return p.left(u)(ea, ej) / kappa(u); });
        total += stieltjes_integral(f, b, 0.0, horizon, nodes, rule);
    }
    const auto& trs = basis.intensities.transitions();
    for (std::size_t e = 0; e < trs.size(); ++e) {
        const PaymentFunction* b = contract.payment(trs[e].from, trs[e].to);
        if (!b) continue;
        const auto ej = static_cast<Eigen::Index>(trs[e].from);
        Integrand f([&](double s) { return p.at(s)(ea, ej) * b->right_limit(s) / kappa(s); },
                    [&](double u) { return p.left(u)(ea, ej) * b->value(u) / kappa(u); });
        total += stieltjes_integral(f, basis.intensities.entries()[e], 0.0, horizon, nodes, rule);
    }
    return total;
}

double functional_H(const ValuationBasis& basis, const ContractSpec& contract, const Numerics& numerics) {
    const NodeGrid nodes(common_grid(contract, {&basis}), numerics.substeps);
    return functional_H(basis, contract, nodes, numerics.scheme, numerics.rule);
}

ValuationBasis spliced_basis(const ValuationBasis& first_order, const ReturnProcess& returns,
                             const IntensityMatrix& intensities, double t) {
    const FVProcess& phi_star = first_order.returns.path();
    ReturnProcess phi(phi_star + stop_process(returns.path() - phi_star, t));
    return ValuationBasis{std::move(phi), spliced(first_order.intensities, intensities, t)};
}

// ---------------------------------------------------------------- assets and surplus

namespace {

std::vector<double> path_extra(const PolicyPath& path, double t) {
    std::vector<double> extra = path.jump_times();
    extra.push_back(t);
    return extra;
}

// int_(s,t] (1/kappa) dB along the path, excluding the time-0 atom.
double discounted_path_flow(const PolicyPath& path, const DoleansExponential& kappa, const ContractSpec& contract,
                            double s, double t, const NodeGrid& nodes, QuadratureRule rule) {
    double sum = 0.0;
    for (std::size_t j = 0; j < contract.states().size(); ++j) {
        Integrand f([&](double u) { return state_indicator(path, j, u) / kappa(u); },
                    [&](double u) { return state_indicator_left(path, j, u) / kappa(u); });
        sum += stieltjes_integral(f, contract.sojourn(j), s, t, nodes, rule);
    }
    for (const auto& r : path.jumps()) {
        if (r.time <= s + kTimeTol || r.time > t + kTimeTol) continue;
        if (const PaymentFunction* b = contract.payment(r.from, r.to)) sum += b->value(r.time) / kappa(r.time);
    }
    return sum;
}

}  // namespace

double asset_value(const PolicyPath& path, const ValuationBasis& second_order, const ContractSpec& contract, double t,
                   const NodeGrid& nodes, QuadratureRule rule) {
    const DoleansExponential kappa(second_order.returns);
    double sum = contract.sojourn(path.initial()).jump(0);
    sum += discounted_path_flow(path, kappa, contract, 0.0, t, nodes, rule);
    return -kappa(t) * sum;
}

double asset_value(const PolicyPath& path, const ValuationBasis& second_order, const ContractSpec& contract, double t,
                   const Numerics& numerics) {
    const auto extra = path_extra(path, t);
    const NodeGrid nodes(common_grid(contract, {&second_order}, extra), numerics.substeps);
    return asset_value(path, second_order, contract, t, nodes, numerics.rule);
}

double total_surplus_direct(const PolicyPath& path, const ValuationBasis& first_order,
                            const ValuationBasis& second_order, const ContractSpec& contract, double t,
                            const NodeGrid& nodes, SolverScheme scheme) {
    const ReserveTable reserves(first_order, contract, nodes, scheme);
    return asset_value(path, second_order, contract, t, nodes) - reserves.value(path.state_at(t), t);
}

double total_surplus_direct(const PolicyPath& path, const ValuationBasis& first_order,
                            const ValuationBasis& second_order, const ContractSpec& contract, double t,
                            const Numerics& numerics) {
    const auto extra = path_extra(path, t);
    const NodeGrid nodes(common_grid(contract, {&first_order, &second_order}, extra), numerics.substeps);
    return total_surplus_direct(path, first_order, second_order, contract, t, nodes, numerics.scheme);
}

double hypothetical_surplus(const PolicyPath& path, const ValuationBasis& second_order, const ContractSpec& contract,
                            double t, const NodeGrid& nodes) {
    const DoleansExponential kappa(second_order.returns);
    const double liability =
        kappa(t) * discounted_path_flow(path, kappa, contract, t, contract.horizon(), nodes, QuadratureRule::LeftPoint);
    return asset_value(path, second_order, contract, t, nodes) - liability;
}

double hypothetical_surplus(const PolicyPath& path, const ValuationBasis& second_order, const ContractSpec& contract,
                            double t, const Numerics& numerics) {
    const auto extra = path_extra(path, t);
    const NodeGrid nodes(common_grid(contract, {&second_order}, extra), numerics.substeps);
    return hypothetical_surplus(path, second_order, contract, t, nodes);
}

double fair_premium(const ValuationBasis& first_order, const ContractSpec& benefits, const ContractSpec& premiums,
                    const NodeGrid& nodes, SolverScheme scheme, QuadratureRule rule) {
    const double hb = functional_H(first_order, benefits, nodes, scheme, rule);
    const double hp = functional_H(first_order, premiums, nodes, scheme, rule);
    if (hp == 0.0) throw std::invalid_argument("premium pattern has zero first-order value");
    return hb / hp;
}

}  // namespace isu
