#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"

using namespace isu;
using namespace isu::testkit;

namespace {

const StateSpace ads({"a", "d", "s"}, "a");
const std::vector<Transition> ad_as{{0, 1}, {0, 2}};

const Numerics kExact{64, SolverScheme::Exponential, QuadratureRule::GaussLegendre};

}  // namespace

TEST_CASE("fine factors and built-in schemes") {
    const auto fine = fine_factors(ads, ad_as);
    REQUIRE(fine.size() == 7);
    CHECK(fine[0].label == "Phi_a");
    CHECK(fine[3].label == "u_a->d");
    CHECK(fine[6].label == "s_a->s");
    for (const auto& name : DecompositionScheme::built_in_names()) {
        const auto s = DecompositionScheme::built_in(name, ads, ad_as);
        std::vector<int> seen(fine.size(), 0);
        for (const auto& f : s.factors())
            for (auto m : f.members) ++seen[m];
        for (int c : seen) CHECK(c == 1);
    }
    CHECK(DecompositionScheme::built_in("financial_transitionwise", ads, ad_as).labels() ==
          std::vector<std::string>{"Phi", "a->d", "a->s"});
    CHECK(DecompositionScheme::built_in("unsystematic_statewise", ads, ad_as).labels() ==
          std::vector<std::string>{"u", "a", "d", "s"});
    CHECK_THROWS_AS(DecompositionScheme::built_in("nope", ads, ad_as), std::invalid_argument);
}

TEST_CASE("custom schemes must partition the fine factors") {
    using Groups = std::vector<std::pair<std::string, std::vector<std::string>>>;
    CHECK_NOTHROW(DecompositionScheme::aggregated(
        "custom", ads, ad_as,
        Groups{{"interest", {"Phi_a", "Phi_d", "Phi_s"}}, {"death", {"u_a->d", "s_a->d"}}, {"lapse", {"u_a->s", "s_a->s"}}}));
    CHECK_THROWS_AS(DecompositionScheme::aggregated("custom", ads, ad_as, Groups{{"x", {"Phi_a"}}}), std::invalid_argument);
    CHECK_THROWS_AS(DecompositionScheme::aggregated("custom", ads, ad_as, Groups{{"x", {"Phi_q"}}}), std::invalid_argument);
    CHECK_THROWS_AS(DecompositionScheme::aggregated(
                        "custom", ads, ad_as,
                        Groups{{"x", {"Phi_a", "Phi_d", "Phi_s", "u_a->d", "s_a->d", "u_a->s", "s_a->s"}},
                               {"y", {"Phi_a"}}}),
                    std::invalid_argument);
}

TEST_CASE("reordering and expanding schemes") {
    const auto s = DecompositionScheme::built_in("financial_unsystematic_systematic", ads, ad_as);
    const auto r = s.reordered({2, 0, 1});
    CHECK(r.labels() == std::vector<std::string>{"s", "Phi", "u"});
    const auto per_fine = s.expand(std::vector<int>{1, 2, 3});
    CHECK(per_fine == std::vector<int>{1, 1, 1, 2, 2, 3, 3});
    CHECK(s.index_of("u") == 1);
    CHECK_THROWS(s.index_of("x"));
}

TEST_CASE("simultaneous return and biometric jumps are rejected") {
    const TimeGrid g({0.0, 1.0, 2.0});
    const StateSpace two({"a", "d"}, "a");
    const ValuationBasis first{ReturnProcess(FVProcess::constant_density(g, 0.02)),
                               IntensityMatrix(two, {{Transition{0, 1}, FVProcess::constant_density(g, 0.01)}}, g)};
    const ValuationBasis jumpy{ReturnProcess(FVProcess::constant_density(g, 0.02).with_jump(1.0, 0.1)),
                               IntensityMatrix(two, {{Transition{0, 1}, FVProcess::constant_density(g, 0.01)}}, g)};
    const ContractSpec lump(two, {FVProcess(g, {0.0, 0.0}, {0.0, 1.0, 0.0}), FVProcess::zero(g)}, {});
    const ContractSpec plain(two, {FVProcess(g, {0.0, 0.0}, {0.0, 0.0, 1.0}), FVProcess::zero(g)}, {});
    CHECK_THROWS_AS(check_no_simultaneous_jumps(first, jumpy, lump, nullptr), AssumptionError);
    CHECK_NOTHROW(check_no_simultaneous_jumps(first, jumpy, plain, nullptr));
    const PolicyPath path(0, {{1.0, 0, 1}}, 2.0);
    CHECK_THROWS_AS(check_no_simultaneous_jumps(first, jumpy, plain, &path), AssumptionError);
    const ValuationBasis both{ReturnProcess(FVProcess::constant_density(g, 0.02).with_jump(1.0, 0.1)), first.intensities};
    CHECK_THROWS_AS(check_no_simultaneous_jumps(both, jumpy, plain, nullptr), AssumptionError);
    CHECK_THROWS_AS(SurplusModel(lump, first, jumpy, Perspective::Mean), AssumptionError);
}

TEST_CASE("model construction") {
    const auto e = endowment(16);
    CHECK_THROWS_AS(SurplusModel(e.contract, e.first, e.second, Perspective::Individual), std::invalid_argument);
    const SurplusModel m(e.contract, e.first, e.second, Perspective::Individual, PolicyPath(0, {{0.5, 0, 1}}, 1.0));
    CHECK(m.node_index(0.5) > 0);
    CHECK_THROWS(m.with_path(PolicyPath(0, {{0.3001, 0, 1}}, 1.0)));
    CHECK_NOTHROW(m.with_path(PolicyPath(0, {{0.25, 0, 1}}, 1.0)));
    const SurplusModel mean(e.contract, e.first, e.second, Perspective::Mean, PolicyPath(0, {{0.5, 0, 1}}, 1.0));
    CHECK_FALSE(mean.path().has_value());
    const auto wrong = DecompositionScheme::fine(StateSpace({"x", "y"}, "x"), {{0, 1}});
    CHECK_THROWS_AS(SurplusSurface(m, wrong), std::invalid_argument);
}

TEST_CASE("revaluation at 0 is minus H under the first-order basis") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto c = random_case(seed);
        const SurplusModel m(c.contract, c.first, c.second, Perspective::Individual, c.path, Numerics{32}, c.extra);
        CHECK(m.revaluation(0.0) == doctest::Approx(-functional_H(c.first, c.contract, m.nodes())).epsilon(1e-12));
        CHECK(m.H_at(std::vector<std::size_t>(m.fine().size(), 0)) == doctest::Approx(-m.revaluation(0.0)));
    }
}

TEST_CASE("the walker reproduces the direct revaluation forms") {
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        const auto c = random_case(seed);
        for (const Numerics& num : {Numerics{32}, kExact}) {
            const SurplusModel ind(c.contract, c.first, c.second, Perspective::Individual, c.path, num, c.extra);
            const SurplusModel mean(c.contract, c.first, c.second, Perspective::Mean, std::nullopt, num, c.extra);
            const bool exact = num.scheme == SolverScheme::Exponential;
            const double tol = exact ? 1e-9 : 1e-12;
            for (double t : {0.0, c.t, c.contract.horizon()}) {
                const double direct = revaluation_individual(c.path, c.first, c.second, c.contract, t, ind.nodes());
                const double mean_direct = revaluation_mean(c.first, c.second, c.contract, t, mean.nodes());
                if (exact) {
                    // The exact walker matches the exact closed forms up to quadrature.
                    const double d2 = -functional_H(
                        spliced_basis(c.first, c.second.returns,
                                      counting_process(c.path, c.contract.states(), ind.nodes().base(), ind.transitions()), t),
                        c.contract, ind.nodes(), SolverScheme::Exponential, QuadratureRule::GaussLegendre);
                    CHECK(ind.revaluation(t) == doctest::Approx(d2).epsilon(tol));
                    CHECK(mean.revaluation(t) ==
                          doctest::Approx(revaluation_mean(c.first, c.second, c.contract, t, num)).epsilon(1e-6));
                } else {
                    CHECK(ind.revaluation(t) == doctest::Approx(direct).epsilon(tol));
                    CHECK(mean.revaluation(t) == doctest::Approx(mean_direct).epsilon(tol));
                }
            }
        }
    }
}

TEST_CASE("property: the exact walker does not depend on the node density") {
    const auto c = random_case(4);
    const SurplusModel coarse(c.contract, c.first, c.second, Perspective::Individual, c.path,
                              Numerics{4, SolverScheme::Exponential}, c.extra);
    const SurplusModel fine(c.contract, c.first, c.second, Perspective::Individual, c.path,
                            Numerics{64, SolverScheme::Exponential}, c.extra);
    const SurplusModel mc(c.contract, c.first, c.second, Perspective::Mean, std::nullopt,
                          Numerics{4, SolverScheme::Exponential}, c.extra);
    const SurplusModel mf(c.contract, c.first, c.second, Perspective::Mean, std::nullopt,
                          Numerics{64, SolverScheme::Exponential}, c.extra);
    CHECK(coarse.revaluation(c.t) == doctest::Approx(fine.revaluation(c.t)).epsilon(1e-12));
    CHECK(mc.revaluation(c.t) == doctest::Approx(mf.revaluation(c.t)).epsilon(1e-12));
}

TEST_CASE("surface at equal statuses is the revaluation") {
    const auto c = random_case(2);
    const SurplusModel m(c.contract, c.first, c.second, Perspective::Individual, c.path, Numerics{16}, c.extra);
    for (const auto& name : DecompositionScheme::built_in_names()) {
        const SurplusSurface surface(m, DecompositionScheme::built_in(name, c.contract.states(), m.transitions()));
        const std::vector<double> statuses(surface.scheme().size(), c.t);
        CHECK(surface(statuses) == doctest::Approx(m.revaluation(c.t)).epsilon(1e-13));
    }
    const SurplusSurface surface(m, DecompositionScheme::built_in("total", c.contract.states(), m.transitions()));
    CHECK_THROWS(surface(std::vector<double>{c.t + 1e-4}));
    CHECK_THROWS(surface(std::vector<double>{c.t, c.t}));
}
