#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "isu/processes.hpp"

namespace isu {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Raised when I + dLambda_M is (numerically) singular at some jump time.
class SingularJumpError : public std::runtime_error {
public:
    SingularJumpError(const std::string& what, double time) : std::runtime_error(what), time_(time) {}
    double time() const { return time_; }

private:
    double time_;
};

class StateSpace {
public:
    StateSpace() = default;
    StateSpace(std::vector<std::string> labels, const std::string& initial);

    std::size_t size() const { return labels_.size(); }
    const std::string& label(std::size_t i) const { return labels_.at(i); }
    const std::vector<std::string>& labels() const { return labels_; }
    std::size_t index(const std::string& label) const;
    bool contains(const std::string& label) const;
    std::size_t initial() const { return initial_; }

    bool operator==(const StateSpace&) const = default;

private:
    std::vector<std::string> labels_;
    std::size_t initial_ = 0;
};

struct Transition {
    std::size_t from = 0;
    std::size_t to = 0;
    auto operator<=>(const Transition&) const = default;
};

// Cumulative transition intensities Lambda_jk for a declared set of pairs j != k.
// All entries live on one common time grid; undeclared pairs are identically zero.
class IntensityMatrix {
public:
    IntensityMatrix() = default;
    // Validates admissibility (nondecreasing, start at 0, jump mass per row <= 1).
    IntensityMatrix(StateSpace states, std::vector<std::pair<Transition, FVProcess>> entries,
                    const TimeGrid& grid);
    // Skips admissibility; used for spliced arguments of H and counting processes.
    static IntensityMatrix unchecked(StateSpace states, std::vector<std::pair<Transition, FVProcess>> entries,
                                     const TimeGrid& grid);

    const StateSpace& states() const { return states_; }
    std::size_t size() const { return states_.size(); }
    const TimeGrid& grid() const { return grid_; }
    double horizon() const { return grid_.horizon(); }
    const std::vector<Transition>& transitions() const { return transitions_; }
    const std::vector<FVProcess>& entries() const { return entries_; }
    bool has(std::size_t j, std::size_t k) const;
    // Index into transitions(), or throws.
    std::size_t position(std::size_t j, std::size_t k) const;
    // Entry for (j,k); the zero process when undeclared.
    FVProcess entry(std::size_t j, std::size_t k) const;

    void validate() const;

    // Same intensities over a finer grid / extended transition set.
    IntensityMatrix on_grid(const TimeGrid& finer) const;
    IntensityMatrix with_transitions(const std::vector<Transition>& transitions) const;

    friend IntensityMatrix operator+(const IntensityMatrix& a, const IntensityMatrix& b);
    friend IntensityMatrix operator-(const IntensityMatrix& a, const IntensityMatrix& b);

private:
    static IntensityMatrix assemble(StateSpace states, std::vector<std::pair<Transition, FVProcess>> entries,
                                    const TimeGrid& grid);

    StateSpace states_;
    TimeGrid grid_;
    std::vector<Transition> transitions_;
    std::vector<FVProcess> entries_;
};

IntensityMatrix stop_process(const IntensityMatrix& m, double t);
// base + (other - base)^t
IntensityMatrix spliced(const IntensityMatrix& base, const IntensityMatrix& other, double t);

// Intensities tabulated on a node grid: generator density per interval, jump matrix per node.
struct IntensityTable {
    std::vector<Matrix> density;  // per interval, rows sum to 0
    std::vector<Matrix> jump;     // per node, rows sum to 0
    std::vector<bool> has_jump;
};

IntensityTable tabulate(const IntensityMatrix& m, const NodeGrid& nodes);

enum class SolverScheme { Product, Exponential };

struct SolverConfig {
    std::size_t substeps = 64;
    SolverScheme scheme = SolverScheme::Product;
};

// Step factor on interval i: I + A h (product) or exp(A h) (exponential).
Matrix step_factor(const Matrix& generator, double h, SolverScheme scheme);

// t -> p(s,t) on [s,T], with values and left limits at every node and
// propagation to interior times by the same scheme.
class TransitionField {
public:
    TransitionField() = default;
    TransitionField(NodeGrid nodes, std::size_t start, IntensityTable table, SolverScheme scheme);

    const NodeGrid& nodes() const { return nodes_; }
    double start_time() const { return nodes_.node(start_); }
    std::size_t start_index() const { return start_; }
    SolverScheme scheme() const { return scheme_; }

    const Matrix& at_node(std::size_t i) const { return right_.at(i - start_); }
    const Matrix& left_at_node(std::size_t i) const { return left_.at(i - start_); }
    Matrix at(double t) const;
    Matrix left(double t) const;
    Matrix operator()(double t) const { return at(t); }

private:
    NodeGrid nodes_;
    std::size_t start_ = 0;
    IntensityTable table_;
    SolverScheme scheme_ = SolverScheme::Product;
    std::vector<Matrix> right_;
    std::vector<Matrix> left_;
};

// Validating solver of the forward equation from time s.
TransitionField kolmogorov_forward(const IntensityMatrix& m, double s, const SolverConfig& config = {});
// Unchecked product integral on a prescribed node grid (any finite-variation matrix).
TransitionField product_integral(const IntensityMatrix& m, double s, const NodeGrid& nodes,
                                 SolverScheme scheme = SolverScheme::Product);

enum class InverseMode {
    ImplicitStep,    // (I + dL) q(t) = q(t-)
    JumpCorrected,   // q(t) = q(t-) - dG q(t-), dG = dL - dL^2 (I + dL)^-1
    DirectInversion  // q = p^-1 per node
};

inline constexpr double kMaxJumpCondition = 1e12;

class InverseField {
public:
    InverseField(TransitionField forward, std::vector<Matrix> right, std::vector<Matrix> left);

    const TransitionField& forward() const { return forward_; }
    const Matrix& at_node(std::size_t i) const { return right_.at(i - forward_.start_index()); }
    const Matrix& left_at_node(std::size_t i) const { return left_.at(i - forward_.start_index()); }
    // Interior times fall back to inverting p(s,t).
    Matrix at(double t) const;
    Matrix operator()(double t) const { return at(t); }

private:
    TransitionField forward_;
    std::vector<Matrix> right_;
    std::vector<Matrix> left_;
};

InverseField inverse_transition(const IntensityMatrix& m, double s, const SolverConfig& config = {},
                                InverseMode mode = InverseMode::ImplicitStep);
InverseField inverse_transition(const IntensityMatrix& m, double s, const NodeGrid& nodes, SolverScheme scheme,
                                InverseMode mode);

// Realized state trajectory of one insured.
struct JumpRecord {
    double time = 0.0;
    std::size_t from = 0;
    std::size_t to = 0;
};

class PolicyPath {
public:
    PolicyPath() = default;
    PolicyPath(std::size_t initial, std::vector<JumpRecord> jumps, double horizon);

    std::size_t initial() const { return initial_; }
    double horizon() const { return horizon_; }
    const std::vector<JumpRecord>& jumps() const { return jumps_; }
    std::vector<double> jump_times() const;

    // Z(t) and Z(t-).
    std::size_t state_at(double t) const;
    std::size_t state_before(double t) const;

private:
    std::size_t initial_ = 0;
    double horizon_ = 0.0;
    std::vector<JumpRecord> jumps_;
};

// N_jk with unit jumps at the path's j->k times, on `grid` merged with the jump times.
// Entries are created for `transitions` plus every realized pair.
IntensityMatrix counting_process(const PolicyPath& path, const StateSpace& states, const TimeGrid& grid,
                                 const std::vector<Transition>& transitions = {});

int state_indicator(const PolicyPath& path, std::size_t j, double t);
int state_indicator_left(const PolicyPath& path, std::size_t j, double t);

}  // namespace isu
