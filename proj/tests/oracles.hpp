#pragma once

#include <array>
#include <vector>

#include "fixtures.hpp"

namespace isu::testkit {

// Discrete-time German contract with yearly probabilities; year index k is (k, k+1].
struct GermanDiscrete {
    GermanInputs in;
    double premium = 0.0;

    double q_star(int k) const { return in.mortality_star[k]; }
    double q(int k) const { return in.mortality_factor * in.mortality_star[k]; }
    double r_star(int) const { return in.lapse_star; }
    double r(int) const { return in.lapse; }
    // Sojourn lump at integer l.
    double b(int l) const;

    // H with the second-order interest, mortality and lapse used in the first
    // `phi_years`, `death_years` and `lapse_years` years and first order afterwards.
    double H(int phi_years, int death_years, int lapse_years) const;
    double U(int phi_years, int death_years, int lapse_years) const { return -H(phi_years, death_years, lapse_years); }

    // First-order reserve of the active state at integer l, after the lump at l.
    double reserve(int l) const;

    // Closed-form SU increments of year k for the order interest, mortality, lapse.
    std::array<double, 3> su_terms(int k) const;
};

// Independent quadrature of the yearly ISU increments of the continuous German
// contract, with analytic survival, discounting and first-order reserve.
struct GermanContinuousQuadrature {
    GermanInputs in;
    double premium = 0.0;

    double reserve(double s) const;
    // Increments of year k for interest, mortality and lapse.
    std::array<double, 3> isu_terms(int k, std::size_t points = 48) const;
};

// H(first) - H(spliced) from the integral representation, where the spliced basis
// follows (returns, intensities) up to t and the first-order basis afterwards.
double representation_gap(const ValuationBasis& first, const ReturnProcess& returns,
                          const IntensityMatrix& intensities, const ContractSpec& contract, double t,
                          const NodeGrid& nodes, SolverScheme scheme, QuadratureRule rule);

// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(std::size_t n, std::vector<double>& x, std::vector<double>& w);

}  // namespace isu::testkit
