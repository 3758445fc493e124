#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "isu/contract.hpp"
#include "isu/markov.hpp"

namespace isu {

// Raised when the no-simultaneous-jumps assumption between the return processes
// and the biometric/payment processes fails.
class AssumptionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Perspective { Individual, Mean };

enum class FactorKind { Return, Unsystematic, Systematic };

// Smallest risk sources: Phi_j - Phi*_j per state, N_jk - Lambda_jk and
// Lambda_jk - Lambda*_jk per transition.
struct FineFactor {
    FactorKind kind = FactorKind::Return;
    std::size_t from = 0;  // the state for Return factors
    std::size_t to = 0;
    std::string label;
};

std::vector<FineFactor> fine_factors(const StateSpace& states, const std::vector<Transition>& transitions);

struct RiskFactor {
    std::string label;
    std::vector<std::size_t> members;  // indices into the fine factor list
};

// Ordered risk basis built by grouping fine factors. Every fine factor belongs to
// exactly one group.
class DecompositionScheme {
public:
    DecompositionScheme() = default;
    DecompositionScheme(std::string name, std::vector<FineFactor> fine, std::vector<RiskFactor> factors);

    static DecompositionScheme fine(const StateSpace& states, const std::vector<Transition>& transitions);
    static DecompositionScheme built_in(const std::string& name, const StateSpace& states,
                                        const std::vector<Transition>& transitions);
    static std::vector<std::string> built_in_names();
    // Groups of fine labels, one group per new factor.
    static DecompositionScheme aggregated(const std::string& name, const StateSpace& states,
                                          const std::vector<Transition>& transitions,
                                          const std::vector<std::pair<std::string, std::vector<std::string>>>& groups);

    const std::string& name() const { return name_; }
    std::size_t size() const { return factors_.size(); }
    const RiskFactor& factor(std::size_t i) const { return factors_.at(i); }
    const std::vector<RiskFactor>& factors() const { return factors_; }
    const std::vector<FineFactor>& fine_list() const { return fine_; }
    std::vector<std::string> labels() const;
    std::size_t index_of(const std::string& label) const;

    // Factor order permuted: new factor i is old factor order[i].
    DecompositionScheme reordered(const std::vector<std::size_t>& order) const;
    // Per-fine-factor value from per-factor values.
    template <typename T>
    std::vector<T> expand(const std::vector<T>& per_factor) const {
        std::vector<T> out(fine_.size());
        for (std::size_t i = 0; i < factors_.size(); ++i)
            for (std::size_t f : factors_[i].members) out[f] = per_factor[i];
        return out;
    }

private:
    std::string name_;
    std::vector<FineFactor> fine_;
    std::vector<RiskFactor> factors_;
};

// Throws AssumptionError when Phi*, Phi and the group (N, Lambda*, Lambda, B) share jump times.
void check_no_simultaneous_jumps(const ValuationBasis& first_order, const ValuationBasis& second_order,
                                 const ContractSpec& contract, const PolicyPath* path);

// Walker over the node grid evaluating H at spliced bases where every fine factor
// has its own information status. The state holds, per state i of the insured and
// column j, E[1{Z = i} p_aj / kappa] of the spliced basis (a single row in the
// individual perspective) and the H mass accumulated so far. With the product
// scheme each node interval is a first-order step; with the exponential scheme the
// interval is propagated exactly for the coefficients held at its left node.
class SurplusModel {
public:
    struct State {
        Matrix m;
        double acc = 0.0;
        std::size_t node = 0;
    };

    SurplusModel(ContractSpec contract, ValuationBasis first_order, ValuationBasis second_order,
                 Perspective perspective, std::optional<PolicyPath> path = std::nullopt, Numerics numerics = {},
                 std::span<const double> extra_nodes = {});

    // Same tables for a different realized path; its jump times must be nodes.
    SurplusModel with_path(PolicyPath path) const;

    const ContractSpec& contract() const { return contract_; }
    const ValuationBasis& first_order() const { return first_; }
    const ValuationBasis& second_order() const { return second_; }
    Perspective perspective() const { return perspective_; }
    const std::optional<PolicyPath>& path() const { return path_; }
    const NodeGrid& nodes() const { return nodes_; }
    const Numerics& numerics() const { return numerics_; }
    const ReserveTable& reserves() const { return reserves_; }
    const std::vector<Transition>& transitions() const { return transitions_; }
    const std::vector<FineFactor>& fine() const { return fine_; }
    std::size_t node_index(double t) const { return nodes_.require_index(t); }

    State initial_state() const;
    // Walk to `to_node` with a fixed activity flag per fine factor.
    void advance(State& s, std::size_t to_node, const std::vector<char>& active) const;
    // H of the basis that switches to first order after s.node.
    double close(const State& s) const;

    // H with the given status (node index) per fine factor.
    double H_at(const std::vector<std::size_t>& fine_status) const;
    // U = -H.
    double U_at(const std::vector<std::size_t>& fine_status) const { return -H_at(fine_status); }
    // R(t) = U(t, ..., t).
    double revaluation(double t) const;

private:
    void continuous_step(State& s, std::size_t i, const std::vector<char>& active) const;
    void jump_step(State& s, std::size_t i, const std::vector<char>& active) const;
    struct StepCache;

    ContractSpec contract_;
    ValuationBasis first_;
    ValuationBasis second_;
    Perspective perspective_;
    std::optional<PolicyPath> path_;
    Numerics numerics_;
    NodeGrid nodes_;
    ReserveTable reserves_;
    std::vector<Transition> transitions_;
    std::vector<FineFactor> fine_;
    std::vector<std::size_t> return_factor_;  // per state
    std::vector<std::size_t> u_factor_;       // per transition
    std::vector<std::size_t> s_factor_;       // per transition

    NodeTable phi_, phi_star_;
    std::vector<std::vector<double>> lam_, lam_star_;          // [transition][interval]
    std::vector<std::vector<double>> dlam_, dlam_star_;        // [transition][node]
    std::vector<std::vector<double>> pay_interval_, pay_node_;  // [transition]
    std::vector<NodeTable> sojourn_;
    std::vector<std::size_t> path_state_;                   // Z on each interval
    std::vector<std::optional<Transition>> path_jump_;      // per node
    std::shared_ptr<StepCache> cache_;
};

// Revaluation surface of one scheme.
class SurplusSurface {
public:
    SurplusSurface(const SurplusModel& model, DecompositionScheme scheme);

    const SurplusModel& model() const { return *model_; }
    const DecompositionScheme& scheme() const { return scheme_; }
    // U(t_1, ..., t_m); every status must be a node.
    double operator()(std::span<const double> statuses) const;
    double at_nodes(const std::vector<std::size_t>& statuses) const;
    std::vector<char> fine_mask(const std::vector<char>& factor_active) const { return scheme_.expand(factor_active); }

private:
    const SurplusModel* model_;
    DecompositionScheme scheme_;
};

// -H evaluated directly at the spliced basis.
double revaluation_individual(const PolicyPath& path, const ValuationBasis& first_order,
                              const ValuationBasis& second_order, const ContractSpec& contract, double t,
                              const NodeGrid& nodes);
double revaluation_individual(const PolicyPath& path, const ValuationBasis& first_order,
                              const ValuationBasis& second_order, const ContractSpec& contract, double t,
                              const Numerics& numerics = {});

// Closed form with p_aj(0, .) under the second-order intensities in place of indicators.
double revaluation_mean(const ValuationBasis& first_order, const ValuationBasis& second_order,
                        const ContractSpec& contract, double t, const NodeGrid& nodes);
double revaluation_mean(const ValuationBasis& first_order, const ValuationBasis& second_order,
                        const ContractSpec& contract, double t, const Numerics& numerics = {});

}  // namespace isu
