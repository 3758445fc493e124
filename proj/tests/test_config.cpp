#include <doctest.h>

#include <string>

#include "isu/config.hpp"

using namespace isu;

namespace {

const std::string kBases = R"(
  "bases": {
    "first_order": { "interest": { "rate": 0.05 }, "intensities": [{ "from": "a", "to": "d", "rate": 0.02 }] },
    "second_order": { "interest": { "rate": 0.06 }, "intensities": [{ "from": "a", "to": "d", "rate": 0.015 }] }
  })";

std::string with(const std::string& contract, const std::string& run = "{}") {
    return "{ \"contract\": " + contract + "," + kBases + ", \"run\": " + run + " }";
}

const std::string kEndowment = R"({
    "states": ["a", "d"], "horizon": 1,
    "sojourn": { "a": { "lumps": [[1, 1.0]] } },
    "premiums": { "state": "a", "lumps": [[0, 1.0]] },
    "fair_premium": true })";

// Message of the ConfigError thrown by parsing `text`.
std::string error_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

TEST_CASE("a valid config yields a fair contract") {
    const RunConfig c = parse_config(with(kEndowment, R"({ "substeps": 128 })"));
    REQUIRE(c.premium.has_value());
    CHECK(*c.premium == doctest::Approx(std::exp(-0.07)).epsilon(1e-3));
    CHECK(c.perspective == Perspective::Mean);
    CHECK(c.t == 1.0);
    CHECK(c.numerics.substeps == 128);
    CHECK(std::abs(functional_H(c.first_order, c.contract, NodeGrid(c.grid, 128))) < 1e-14);
    CHECK(describe(c).find("fair premium level") != std::string::npos);
}

TEST_CASE("solver and quadrature choices") {
    const RunConfig c = parse_config(with(kEndowment, R"({ "solver": "exponential", "quadrature": "gauss" })"));
    CHECK(c.numerics.scheme == SolverScheme::Exponential);
    CHECK(c.numerics.rule == QuadratureRule::GaussLegendre);
    CHECK(*c.premium == doctest::Approx(std::exp(-0.07)).epsilon(1e-12));
    CHECK(starts_with(error_of(with(kEndowment, R"({ "solver": "rk4" })")), "run.solver"));
    CHECK(starts_with(error_of(with(kEndowment, R"({ "quadrature": 3 })")), "run.quadrature"));
}

TEST_CASE("errors name the offending field") {
    CHECK(starts_with(error_of("not json"), "config"));
    CHECK(starts_with(error_of("[]"), "config"));
    CHECK(starts_with(error_of("{}"), "config.contract"));
    CHECK(starts_with(error_of(with(R"({ "states": ["a", "d"] })")), "contract.horizon"));
    CHECK(starts_with(error_of(with(R"({ "states": ["a", "d"], "horizon": -1 })")), "contract.horizon"));
    CHECK(starts_with(error_of(with(R"({ "states": ["a", "d"], "horizon": 1, "initial": "x" })")), "contract.initial"));
    CHECK(starts_with(error_of(with(R"({ "states": ["a", "d"], "horizon": 1,
        "transitions": [{ "from": "a", "to": "q", "amount": 1 }] })")),
                      "contract.transitions[0].to"));
    CHECK(starts_with(error_of(with(R"({ "states": ["a", "d"], "horizon": 2,
        "transitions": [{ "from": "a", "to": "d", "amount": [1, 2, 3] }] })")),
                      "contract.transitions[0].amount"));
    CHECK(starts_with(error_of(with(R"({ "states": ["a", "d"], "horizon": 1,
        "premiums": { "state": "a", "lumps": [[0, -1.0]] } })")),
                      "contract.premiums.lumps"));
    CHECK(starts_with(error_of(with(R"({ "states": ["a", "d"], "horizon": 1, "fair_premium": true })")),
                      "contract.fair_premium"));
    CHECK(starts_with(error_of(with(kEndowment, R"({ "t": 2 })")), "run.t"));
    CHECK(starts_with(error_of(with(kEndowment, R"({ "perspective": "individual" })")), "run.perspective"));
    CHECK(starts_with(error_of(with(kEndowment, R"({ "depths": [5, 2] })")), "run.depths"));
    CHECK(starts_with(error_of(with(kEndowment, R"({ "scheme": "nope" })")), "run.scheme"));
    CHECK(starts_with(error_of(with(kEndowment, R"({ "orders": [["Phi", "u"]] })")), "run.orders"));
    CHECK(starts_with(error_of(with(kEndowment, R"({ "paths": 0 })")), "run.paths"));
}

TEST_CASE("custom groups and orders") {
    const RunConfig c = parse_config(with(kEndowment, R"({
        "groups": { "interest": ["Phi_a", "Phi_d"], "death": ["u_a->d", "s_a->d"] },
        "orders": [["death", "interest"]] })"));
    CHECK(c.scheme == "custom");
    const auto s = c.make_scheme();
    CHECK(s.labels() == std::vector<std::string>{"interest", "death"});
    CHECK(c.order_indices(s, c.orders[0]) == std::vector<std::size_t>{1, 0});
    CHECK(starts_with(error_of(with(kEndowment, R"({ "groups": { "interest": ["Phi_a"] } })")), "run.scheme"));
}

TEST_CASE("jump times join the grid and paths are parsed") {
    const RunConfig c = parse_config(R"({
        "contract": { "states": ["a", "d"], "horizon": 2, "sojourn": { "a": { "lumps": [[2, 1.0]] } } },
        "bases": {
          "first_order": { "interest": { "rate": 0.02 }, "intensities": [{ "from": "a", "to": "d", "rate": 0.01 }] },
          "second_order": { "interest": { "rate": 0.03, "jumps": [[0.4, -0.1]] },
                            "intensities": [{ "from": "a", "to": "d", "rate": [0.01, 0.02] }] } },
        "path": { "jumps": [{ "time": 1.25, "from": "a", "to": "d" }] },
        "run": { "perspective": "individual", "t": 1.5 } })");
    CHECK(c.grid.index_of(0.4).has_value());
    CHECK(c.grid.index_of(1.25).has_value());
    CHECK(c.grid.index_of(1.5).has_value());
    REQUIRE(c.path.has_value());
    CHECK(c.path->state_at(1.3) == 1);
    CHECK(c.second_order.returns.path().jump_at(0.4) == doctest::Approx(-0.1));
    CHECK(c.second_order.intensities.entry(0, 1).density(c.grid.cell_of(1.6)) == doctest::Approx(0.02));
}

TEST_CASE("simultaneous jumps are refused at load time") {
    CHECK_THROWS_AS(parse_config(R"({
        "contract": { "states": ["a", "d"], "horizon": 1, "sojourn": { "a": { "lumps": [[1, 1.0]] } } },
        "bases": {
          "first_order": { "interest": { "rate": 0.02 }, "intensities": [{ "from": "a", "to": "d", "rate": 0.01 }] },
          "second_order": { "interest": { "jumps": [[1, 0.1]] }, "intensities": [{ "from": "a", "to": "d", "rate": 0.01 }] } } })"),
                    AssumptionError);
}

TEST_CASE("missing files") {
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}
