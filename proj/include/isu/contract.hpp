#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

#include "isu/markov.hpp"
#include "isu/processes.hpp"

namespace isu {

// Bounded payment function, polynomial in (t - t_c) on each cell (t_c, t_{c+1}]
// of its grid and zero after the horizon.
class PaymentFunction {
public:
    PaymentFunction() = default;
    PaymentFunction(TimeGrid grid, std::vector<std::vector<double>> coefficients);

    static PaymentFunction constant(const TimeGrid& grid, double value);
    static PaymentFunction piecewise_constant(const TimeGrid& grid, std::vector<double> values);
    // kappa(floor t) / kappa(t) * amount[ceil t], amounts indexed by year 1..; tabulated
    // at cell midpoints on `grid` (which should be fine relative to the year length).
    static PaymentFunction discounted_lump_sums(const ReturnProcess& returns, const TimeGrid& grid,
                                                const std::vector<double>& amounts);

    const TimeGrid& grid() const { return grid_; }
    bool is_zero() const;
    PaymentFunction scaled(double factor) const;
    // Value on the cell (t_c, t_{c+1}] containing t (0 after the horizon).
    double value(double t) const;
    // Limit from the right; the value a left-point rule uses on (t, t + h].
    double right_limit(double t) const;

private:
    double eval(std::size_t cell, double t) const;

    TimeGrid grid_;
    std::vector<std::vector<double>> coefficients_;
};

class ContractSpec {
public:
    ContractSpec() = default;
    // sojourn[j] is B_j; payments are b_jk for the listed pairs.
    ContractSpec(StateSpace states, std::vector<FVProcess> sojourn,
                 std::vector<std::pair<Transition, PaymentFunction>> payments);

    const StateSpace& states() const { return states_; }
    double horizon() const { return horizon_; }
    const FVProcess& sojourn(std::size_t j) const { return sojourn_.at(j); }
    const std::vector<FVProcess>& sojourn() const { return sojourn_; }
    const std::vector<std::pair<Transition, PaymentFunction>>& payments() const { return payments_; }
    // b_jk, or nullptr when the pair carries no payment.
    const PaymentFunction* payment(std::size_t j, std::size_t k) const;
    // Union of the grids of all cash flows.
    TimeGrid grid() const;

    ContractSpec scaled_sum(const ContractSpec& other, double factor) const;  // this + factor * other

private:
    StateSpace states_;
    double horizon_ = 0.0;
    std::vector<FVProcess> sojourn_;
    std::vector<std::pair<Transition, PaymentFunction>> payments_;
};

struct ValuationBasis {
    ReturnProcess returns;
    IntensityMatrix intensities;

    // Admissibility of both components.
    void validate() const;
    TimeGrid grid() const { return returns.path().grid().merged(intensities.grid()); }
};

struct Numerics {
    std::size_t substeps = 64;
    SolverScheme scheme = SolverScheme::Product;
    QuadratureRule rule = QuadratureRule::LeftPoint;
};

TimeGrid common_grid(const ContractSpec& contract, std::initializer_list<const ValuationBasis*> bases,
                     std::span<const double> extra = {});

// Cash flows tabulated on nodes.
struct CashFlowTable {
    std::vector<NodeTable> sojourn;                 // per state
    std::vector<Transition> pairs;                  // pairs with a payment function
    std::vector<std::vector<double>> pay_interval;  // [pair][interval] right limit at the left node
    std::vector<std::vector<double>> pay_node;      // [pair][node] value at the node
};

CashFlowTable tabulate(const ContractSpec& contract, const NodeGrid& nodes);

// First-order prospective reserves V*_j on the nodes, computed by backward recursion
// matching the forward solver scheme, with interior evaluation.
class ReserveTable {
public:
    ReserveTable() = default;
    ReserveTable(const ValuationBasis& first_order, const ContractSpec& contract, const NodeGrid& nodes,
                 SolverScheme scheme);

    const NodeGrid& nodes() const { return nodes_; }
    const Vector& at_node(std::size_t i) const { return right_.at(i); }
    const Vector& left_at_node(std::size_t i) const { return left_.at(i); }
    double value(std::size_t j, double t) const;
    double left_value(std::size_t j, double t) const;

private:
    Vector interior(std::size_t interval, double t) const;

    NodeGrid nodes_;
    SolverScheme scheme_ = SolverScheme::Product;
    std::vector<Matrix> generator_;  // A* per interval
    std::vector<double> rate_;       // phi* per interval
    std::vector<Vector> flow_;       // payment rate per interval
    std::vector<Vector> right_;
    std::vector<Vector> left_;
};

double prospective_reserve(const ValuationBasis& first_order, const ContractSpec& contract, std::size_t j, double t,
                           const Numerics& numerics = {});
double sum_at_risk(const ValuationBasis& first_order, const ContractSpec& contract, std::size_t j, std::size_t k,
                   double t, const Numerics& numerics = {});
double sum_at_risk(const ReserveTable& reserves, const ContractSpec& contract, std::size_t j, std::size_t k, double t);

// H for an arbitrary (possibly spliced) basis, evaluated directly from the Doleans
// exponential, the product integral and Stieltjes integrals.
double functional_H(const ValuationBasis& basis, const ContractSpec& contract, const NodeGrid& nodes,
                    SolverScheme scheme = SolverScheme::Product, QuadratureRule rule = QuadratureRule::LeftPoint);
double functional_H(const ValuationBasis& basis, const ContractSpec& contract, const Numerics& numerics = {});

// The basis (Phi*, Lambda*) + (Phi - Phi*, Lambda - Lambda*)^t.
ValuationBasis spliced_basis(const ValuationBasis& first_order, const ReturnProcess& returns,
                             const IntensityMatrix& intensities, double t);

// A(t) along a realized path; S(t) = A(t) - sum_j I_j(t) V*_j(t).
double asset_value(const PolicyPath& path, const ValuationBasis& second_order, const ContractSpec& contract, double t,
                   const NodeGrid& nodes, QuadratureRule rule = QuadratureRule::LeftPoint);
double asset_value(const PolicyPath& path, const ValuationBasis& second_order, const ContractSpec& contract, double t,
                   const Numerics& numerics = {});
double total_surplus_direct(const PolicyPath& path, const ValuationBasis& first_order,
                            const ValuationBasis& second_order, const ContractSpec& contract, double t,
                            const NodeGrid& nodes, SolverScheme scheme = SolverScheme::Product);
double total_surplus_direct(const PolicyPath& path, const ValuationBasis& first_order,
                            const ValuationBasis& second_order, const ContractSpec& contract, double t,
                            const Numerics& numerics = {});

// S^h(t) = A(t) - L^h(t) with L^h the perfect-foresight liability of the realized path.
double hypothetical_surplus(const PolicyPath& path, const ValuationBasis& second_order, const ContractSpec& contract,
                            double t, const NodeGrid& nodes);
double hypothetical_surplus(const PolicyPath& path, const ValuationBasis& second_order, const ContractSpec& contract,
                            double t, const Numerics& numerics = {});

// pi with H(benefits - pi * premiums) = 0 under the first-order basis; `premiums`
// holds the premium pattern with positive amounts.
double fair_premium(const ValuationBasis& first_order, const ContractSpec& benefits, const ContractSpec& premiums,
                    const NodeGrid& nodes, SolverScheme scheme = SolverScheme::Product,
                    QuadratureRule rule = QuadratureRule::LeftPoint);

}  // namespace isu
