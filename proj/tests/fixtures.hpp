#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "isu/contract.hpp"
#include "isu/decomp.hpp"
#include "isu/simulate.hpp"
#include "isu/surplus.hpp"

namespace isu::testkit {

struct Example {
    ContractSpec contract;
    ValuationBasis first;
    ValuationBasis second;
    std::optional<PolicyPath> path;
    double premium = 0.0;
    NodeGrid nodes;  // grid the premium was fitted on
};

// Yearly inputs of the German with-profit example; index k refers to year (k, k+1].
struct GermanInputs {
    int years = 4;
    std::vector<double> mortality_star{0.010, 0.011, 0.012, 0.013};
    double mortality_factor = 0.8;
    double lapse_star = 0.05;
    double lapse = 0.07;
    double phi_star = 0.012422519998557209;  // ln 1.0125
    double phi = 0.03;
    std::vector<double> death{1.0, 1.0, 1.0, 1.0};
    std::vector<double> surrender{0.2, 0.45, 0.7, 0.95};
    double endowment = 1.0;
};

// States a (active), d (dead), s (surrendered); yearly premiums at 0..T-1 and an
// endowment at T, with constant intensities per year.
Example german_continuous(std::size_t substeps, const GermanInputs& in = {});
// Same contract with yearly point-mass intensities at the year ends.
Example german_yearly(std::size_t substeps, const GermanInputs& in = {});

// Two-state endowment: phi* = 0.05, lambda*_ad = 0.02, benefit 1 at T = 1, fair
// single premium at 0.
Example endowment(std::size_t substeps);

// Randomized three-state case. First-order returns are continuous; second-order
// returns jump only at times where no intensity, payment or path jump happens.
struct RandomCase {
    ContractSpec contract;
    ValuationBasis first;
    ValuationBasis second;
    PolicyPath path;
    double t = 0.0;
    std::vector<double> extra;  // path jump times and t
};

RandomCase random_case(std::uint64_t seed);

// Nodes for a random case with all path times and t included.
NodeGrid nodes_for(const RandomCase& c, std::size_t substeps);

}  // namespace isu::testkit
