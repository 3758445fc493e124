#include <doctest.h>

#include <cmath>

#include "oracles.hpp"

using namespace isu;
using namespace isu::testkit;

TEST_CASE("Gauss-Legendre integrates polynomials exactly") {
    std::vector<double> x, w;
    gauss_legendre(5, x, w);
    REQUIRE(x.size() == 5);
    for (int p = 0; p <= 9; ++p) {
        double sum = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) sum += w[i] * std::pow(x[i], p);
        const double exact = p % 2 ? 0.0 : 2.0 / (p + 1);
        CHECK(sum == doctest::Approx(exact).epsilon(1e-14).scale(1.0));
    }
}

TEST_CASE("discrete German oracle is fair and consistent") {
    const auto ex = german_yearly(16);
    const GermanDiscrete g{GermanInputs{}, ex.premium};
    CHECK(std::abs(g.H(0, 0, 0)) < 1e-14);
    // The yearly recursion of the reserve.
    const GermanInputs in;
    for (int l = 0; l < in.years; ++l) {
        const double v = std::exp(-in.phi_star);
        const double q = g.q_star(l), r = g.r_star(l);
        const double next = g.b(l + 1) + g.reserve(l + 1);
        const double expected = v * (q * in.death[l] + r * in.surrender[l] + (1.0 - q - r) * next);
        CHECK(g.reserve(l) == doctest::Approx(expected).epsilon(1e-13));
    }
    // SU increments telescope to the full change.
    double sum = 0.0;
    for (int k = 0; k < in.years; ++k)
        for (double d : g.su_terms(k)) sum += d;
    CHECK(sum == doctest::Approx(g.U(in.years, in.years, in.years) - g.U(0, 0, 0)).epsilon(1e-13));
}

TEST_CASE("continuous German quadrature matches the reserve table") {
    const auto ex = german_continuous(64);
    const GermanContinuousQuadrature g{GermanInputs{}, ex.premium};
    const ReserveTable table(ex.first, ex.contract, ex.nodes, SolverScheme::Exponential);
    for (double s : {0.0, 0.5, 1.0, 2.25, 3.9})
        CHECK(g.reserve(s) == doctest::Approx(table.value(0, s)).epsilon(1e-12));
}
