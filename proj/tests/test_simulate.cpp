#include <doctest.h>

#include <cmath>

#include "isu/simulate.hpp"

using namespace isu;

namespace {

const StateSpace two({"a", "d"}, "a");

IntensityMatrix mortality(double mu) {
    const TimeGrid g = TimeGrid::uniform(2.0, 2);
    return IntensityMatrix(two, {{Transition{0, 1}, FVProcess::constant_density(g, mu)}}, g);
}

}  // namespace

TEST_CASE("simulation config validation") {
    SimulationConfig c;
    CHECK_NOTHROW(c.validate());
    c.paths = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.substeps = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.horizon = -1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("sampler is deterministic per seed and stream") {
    const PathSampler s(mortality(0.5), NodeGrid(TimeGrid::uniform(2.0, 2), 32));
    for (std::uint64_t stream = 0; stream < 20; ++stream) {
        const PolicyPath a = s.sample(7, stream);
        const PolicyPath b = s.sample(7, stream);
        REQUIRE(a.jumps().size() == b.jumps().size());
        for (std::size_t i = 0; i < a.jumps().size(); ++i) CHECK(a.jumps()[i].time == b.jumps()[i].time);
        for (const auto& j : a.jumps()) CHECK(s.nodes().index_of(j.time).has_value());
    }
}

TEST_CASE("too wide substeps are rejected") {
    CHECK_THROWS_AS(PathSampler(mortality(5.0), NodeGrid(TimeGrid::uniform(2.0, 2), 1)), std::invalid_argument);
}

TEST_CASE("survival frequency matches the discrete survival probability") {
    const IntensityMatrix m = mortality(0.3);
    SimulationConfig c;
    c.paths = 20000;
    c.seed = 11;
    c.substeps = 16;
    const auto est = monte_carlo_mean([](const PolicyPath& p) { return p.state_at(2.0) == 0 ? 1.0 : 0.0; }, m, c);
    const double target = std::pow(1.0 - 0.3 / 16.0, 32.0);
    CHECK(std::abs(est.z_score(target)) < 4.0);
    CHECK(est.paths == 20000);
}

TEST_CASE("Monte Carlo means do not depend on the thread count") {
    const IntensityMatrix m = mortality(0.4);
    SimulationConfig c;
    c.paths = 2000;
    c.seed = 3;
    const PathFunctional fn = [](const PolicyPath& p) {
        const double t = p.jumps().empty() ? 2.0 : p.jumps().front().time;
        return std::vector<double>{t, t * t};
    };
    c.threads = 1;
    const auto one = monte_carlo_mean(fn, m, c);
    c.threads = 4;
    const auto four = monte_carlo_mean(fn, m, c);
    REQUIRE(one.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(one[i].mean == four[i].mean);
        CHECK(one[i].std_error == four[i].std_error);
    }
    const PathFunctional ragged = [](const PolicyPath& p) { return std::vector<double>(p.jumps().size() + 1, 0.0); };
    CHECK_THROWS_AS(monte_carlo_mean(ragged, m, c), std::invalid_argument);
}

TEST_CASE("z score") {
    CHECK(MonteCarloEstimate{1.0, 0.5, 10}.z_score(0.0) == doctest::Approx(2.0));
    CHECK(MonteCarloEstimate{1.0, 0.0, 10}.z_score(1.0) == 0.0);
}

TEST_CASE("degenerate intensities") {
    const TimeGrid g({0.0, 0.5, 1.0});
    const PathSampler idle(IntensityMatrix(two, {{Transition{0, 1}, FVProcess::zero(g)}}, g), NodeGrid(g, 8));
    const PathSampler forced(IntensityMatrix(two, {{Transition{0, 1}, FVProcess(g, {0.0, 0.0}, {0.0, 1.0, 0.0})}}, g),
                             NodeGrid(g, 8));
    for (std::uint64_t stream = 0; stream < 50; ++stream) {
        CHECK(idle.sample(1, stream).jumps().empty());
        const PolicyPath p = forced.sample(1, stream);
        REQUIRE(p.jumps().size() == 1);
        CHECK(p.jumps()[0].time == 0.5);
    }
    SimulationConfig c;
    c.paths = 100;
    const auto est = monte_carlo_mean([](const PolicyPath&) { return 2.5; },
                                      IntensityMatrix(two, {{Transition{0, 1}, FVProcess::zero(g)}}, g), c);
    CHECK(est.mean == doctest::Approx(2.5));
    CHECK(est.std_error == doctest::Approx(0.0).scale(1.0));
}
