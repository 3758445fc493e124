#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace isu::testkit {

namespace {

ValuationBasis constant_basis(const StateSpace& states, const TimeGrid& grid, double phi,
                              const std::vector<std::pair<Transition, FVProcess>>& entries) {
    return ValuationBasis{ReturnProcess(FVProcess::constant_density(grid, phi)), IntensityMatrix(states, entries, grid)};
}

FVProcess yearly_density(const TimeGrid& grid, const std::vector<double>& per_year) {
    return FVProcess(grid, per_year, std::vector<double>(grid.size(), 0.0));
}

FVProcess year_end_jumps(const TimeGrid& grid, const std::vector<double>& per_year) {
    std::vector<double> jumps(grid.size(), 0.0);
    for (std::size_t k = 0; k < per_year.size(); ++k) jumps[k + 1] = per_year[k];
    return FVProcess(grid, std::vector<double>(grid.cells(), 0.0), jumps);
}

// Fits the premium level of a contract family that is affine in the premium.
Example fit(const std::function<ContractSpec(double)>& build, ValuationBasis first, ValuationBasis second,
            std::size_t substeps) {
    Example e;
    e.first = std::move(first);
    e.second = std::move(second);
    const ContractSpec c0 = build(0.0);
    e.nodes = NodeGrid(common_grid(c0, {&e.first, &e.second}), substeps);
    const double h0 = functional_H(e.first, c0, e.nodes);
    const double h1 = functional_H(e.first, build(1.0), e.nodes);
    e.premium = -h0 / (h1 - h0);
    e.contract = build(e.premium);
    return e;
}

}  // namespace

Example german_continuous(std::size_t substeps, const GermanInputs& in) {
    const StateSpace states({"a", "d", "s"}, "a");
    const TimeGrid grid = TimeGrid::uniform(in.years, static_cast<std::size_t>(in.years));
    std::vector<double> mortality;
    for (double q : in.mortality_star) mortality.push_back(in.mortality_factor * q);
    const std::vector<double> lapse_star(in.years, in.lapse_star), lapse(in.years, in.lapse);

    ValuationBasis first = constant_basis(states, grid, in.phi_star,
                                          {{Transition{0, 1}, yearly_density(grid, in.mortality_star)},
                                           {Transition{0, 2}, yearly_density(grid, lapse_star)}});
    ValuationBasis second = constant_basis(states, grid, in.phi,
                                           {{Transition{0, 1}, yearly_density(grid, mortality)},
                                            {Transition{0, 2}, yearly_density(grid, lapse)}});
    auto build = [&](double premium) {
        std::vector<double> jumps(grid.size(), 0.0);
        for (int k = 0; k < in.years; ++k) jumps[k] = -premium;
        jumps[in.years] = in.endowment;
        std::vector<FVProcess> sojourn{FVProcess(grid, std::vector<double>(grid.cells(), 0.0), jumps),
                                       FVProcess::zero(grid), FVProcess::zero(grid)};
        return ContractSpec(states, sojourn,
                            {{Transition{0, 1}, PaymentFunction::piecewise_constant(grid, in.death)},
                             {Transition{0, 2}, PaymentFunction::piecewise_constant(grid, in.surrender)}});
    };
    return fit(build, std::move(first), std::move(second), substeps);
}

Example german_yearly(std::size_t substeps, const GermanInputs& in) {
    const StateSpace states({"a", "d", "s"}, "a");
    const TimeGrid grid = TimeGrid::uniform(in.years, static_cast<std::size_t>(in.years));
    std::vector<double> mortality;
    for (double q : in.mortality_star) mortality.push_back(in.mortality_factor * q);
    const std::vector<double> lapse_star(in.years, in.lapse_star), lapse(in.years, in.lapse);

    ValuationBasis first = constant_basis(states, grid, in.phi_star,
                                          {{Transition{0, 1}, year_end_jumps(grid, in.mortality_star)},
                                           {Transition{0, 2}, year_end_jumps(grid, lapse_star)}});
    ValuationBasis second = constant_basis(states, grid, in.phi,
                                           {{Transition{0, 1}, year_end_jumps(grid, mortality)},
                                            {Transition{0, 2}, year_end_jumps(grid, lapse)}});
    auto build = [&](double premium) {
        // Sojourn payment b_l at integer l; transition payments net of b_{k+1}.
        std::vector<double> b(grid.size(), 0.0);
        for (int k = 0; k < in.years; ++k) b[k] = -premium;
        b[in.years] = in.endowment;
        std::vector<double> death, surrender;
        for (int k = 0; k < in.years; ++k) {
            death.push_back(in.death[k] - b[k + 1]);
            surrender.push_back(in.surrender[k] - b[k + 1]);
        }
        std::vector<FVProcess> sojourn{FVProcess(grid, std::vector<double>(grid.cells(), 0.0), b),
                                       FVProcess::zero(grid), FVProcess::zero(grid)};
        return ContractSpec(states, sojourn,
                            {{Transition{0, 1}, PaymentFunction::piecewise_constant(grid, death)},
                             {Transition{0, 2}, PaymentFunction::piecewise_constant(grid, surrender)}});
    };
    return fit(build, std::move(first), std::move(second), substeps);
}

Example endowment(std::size_t substeps) {
    const StateSpace states({"a", "d"}, "a");
    const TimeGrid grid = TimeGrid::uniform(1.0, 1);
    ValuationBasis first = constant_basis(states, grid, 0.05, {{Transition{0, 1}, FVProcess::constant_density(grid, 0.02)}});
    ValuationBasis second =
        constant_basis(states, grid, 0.06, {{Transition{0, 1}, FVProcess::constant_density(grid, 0.015)}});
    auto build = [&](double premium) {
        std::vector<double> jumps{-premium, 1.0};
        std::vector<FVProcess> sojourn{FVProcess(grid, {0.0}, jumps), FVProcess::zero(grid)};
        return ContractSpec(states, sojourn, {});
    };
    return fit(build, std::move(first), std::move(second), substeps);
}

RandomCase random_case(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto unif = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    auto coin = [&](double p) { return unif(0.0, 1.0) < p; };

    const StateSpace states({"0", "1", "2"}, "0");
    const double horizon = coin(0.5) ? 2.0 : 3.0;
    const TimeGrid grid = TimeGrid::uniform(horizon, static_cast<std::size_t>(2 * horizon));
    const std::size_t points = grid.size();

    // Interior grid points are assigned to at most one jumping group.
    enum Owner { None, Returns, Biometric };
    std::vector<Owner> owner(points, None);
    for (std::size_t i = 1; i < points; ++i) {
        const double u = unif(0.0, 1.0);
        owner[i] = u < 0.25 ? Returns : (u < 0.6 ? Biometric : None);
    }

    std::vector<Transition> trs{{0, 1}, {0, 2}, {1, 2}};
    if (coin(0.5)) trs.push_back({1, 0});

    auto intensity = [&](double lo, double hi, double jump_hi) {
        std::vector<double> d(grid.cells()), j(points, 0.0);
        for (auto& v : d) v = unif(lo, hi);
        for (std::size_t i = 1; i < points; ++i)
            if (owner[i] == Biometric && coin(0.5)) j[i] = unif(0.0, jump_hi);
        return FVProcess(grid, d, j);
    };
    std::vector<std::pair<Transition, FVProcess>> star, actual;
    for (const auto& tr : trs) {
        star.emplace_back(tr, intensity(0.005, 0.2, 0.2));
        actual.emplace_back(tr, intensity(0.005, 0.3, 0.2));
    }

    std::vector<double> phi_star_d(grid.cells()), phi_d(grid.cells()), phi_j(points, 0.0);
    for (auto& v : phi_star_d) v = unif(0.0, 0.06);
    for (auto& v : phi_d) v = unif(-0.02, 0.08);
    for (std::size_t i = 1; i < points; ++i)
        if (owner[i] == Returns) phi_j[i] = unif(-0.2, 0.3);

    RandomCase c;
    c.first = ValuationBasis{ReturnProcess(FVProcess(grid, phi_star_d, std::vector<double>(points, 0.0))),
                             IntensityMatrix(states, star, grid)};
    c.second = ValuationBasis{ReturnProcess(FVProcess(grid, phi_d, phi_j)), IntensityMatrix(states, actual, grid)};

    std::vector<FVProcess> sojourn;
    for (std::size_t s = 0; s < states.size(); ++s) {
        std::vector<double> d(grid.cells()), j(points, 0.0);
        for (auto& v : d) v = unif(-1.0, 1.0);
        for (std::size_t i = 1; i < points; ++i)
            if (owner[i] == Biometric && coin(0.5)) j[i] = unif(-1.0, 1.0);
        if (s == 0) j[0] = unif(-1.0, 1.0);
        sojourn.emplace_back(grid, d, j);
    }
    std::vector<std::pair<Transition, PaymentFunction>> payments;
    for (const auto& tr : trs) {
        if (coin(0.2)) continue;
        std::vector<double> v(grid.cells());
        for (auto& x : v) x = unif(0.0, 2.0);
        payments.emplace_back(tr, PaymentFunction::piecewise_constant(grid, v));
    }
    c.contract = ContractSpec(states, sojourn, payments);

    // Path jumps at off-grid times along declared transitions.
    std::vector<JumpRecord> jumps;
    std::size_t state = 0;
    double time = 0.0;
    const int count = std::uniform_int_distribution<int>(0, 2)(rng);
    for (int n = 0; n < count; ++n) {
        time = unif(time + 0.05, time + 0.45 * horizon);
        if (time >= horizon - 0.05) break;
        if (grid.index_of(time)) continue;
        std::vector<std::size_t> targets;
        for (const auto& tr : trs)
            if (tr.from == state) targets.push_back(tr.to);
        if (targets.empty()) break;
        const std::size_t to = targets[std::uniform_int_distribution<std::size_t>(0, targets.size() - 1)(rng)];
        jumps.push_back({time, state, to});
        state = to;
    }
    c.path = PolicyPath(0, jumps, horizon);
    c.t = unif(0.1, horizon - 0.1);
    c.extra = c.path.jump_times();
    c.extra.push_back(c.t);
    return c;
}

NodeGrid nodes_for(const RandomCase& c, std::size_t substeps) {
    return NodeGrid(common_grid(c.contract, {&c.first, &c.second}, c.extra), substeps);
}

}  // namespace isu::testkit
