#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace isu {

// Two times closer than this are treated as the same point.
inline constexpr double kTimeTol = 1e-12;

// Raised when an input violates a basis admissibility condition
// (return jump <= -1, decreasing intensity, jump mass above 1, ...).
class AdmissibilityError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Strictly increasing time points 0 = t_0 < ... < t_n = T. Cell i is (t_i, t_{i+1}].
class TimeGrid {
public:
    TimeGrid() = default;
    explicit TimeGrid(std::vector<double> points);

    static TimeGrid uniform(double horizon, std::size_t cells);

    std::span<const double> points() const { return points_; }
    double point(std::size_t i) const { return points_[i]; }
    double horizon() const { return points_.back(); }
    std::size_t size() const { return points_.size(); }
    std::size_t cells() const { return points_.size() - 1; }
    double width(std::size_t cell) const { return points_[cell + 1] - points_[cell]; }

    std::optional<std::size_t> index_of(double t) const;
    // Cell containing t under the right-closed convention; t = 0 maps to cell 0.
    std::size_t cell_of(double t) const;
    bool contains(double t) const { return t >= -kTimeTol && t <= horizon() + kTimeTol; }

    // Union with extra points inside [0, T].
    TimeGrid merged(std::span<const double> extra) const;
    TimeGrid merged(const TimeGrid& other) const { return merged(other.points()); }

    bool operator==(const TimeGrid&) const = default;

private:
    std::vector<double> points_;
};

// Quadrature/solver node set: every cell of a base grid split into `substeps`
// equal pieces, plus optional extra nodes. All base grid points are nodes.
class NodeGrid {
public:
    NodeGrid() = default;
    NodeGrid(const TimeGrid& base, std::size_t substeps, std::span<const double> extra = {});

    const TimeGrid& base() const { return base_; }
    std::span<const double> nodes() const { return nodes_; }
    double node(std::size_t i) const { return nodes_[i]; }
    std::size_t size() const { return nodes_.size(); }
    std::size_t intervals() const { return nodes_.size() - 1; }
    double width(std::size_t interval) const { return nodes_[interval + 1] - nodes_[interval]; }
    std::size_t substeps() const { return substeps_; }

    std::optional<std::size_t> index_of(double t) const;
    std::size_t require_index(double t) const;

private:
    TimeGrid base_;
    std::size_t substeps_ = 1;
    std::vector<double> nodes_;
};

// Cadlag finite-variation path: piecewise-constant density per grid cell plus
// point jumps at grid points. value(t) = jump(0) + int_0^t density + sum_{0<s<=t} jump(s).
class FVProcess {
public:
    FVProcess() = default;
    FVProcess(TimeGrid grid, std::vector<double> densities, std::vector<double> jumps);

    static FVProcess zero(const TimeGrid& grid);
    static FVProcess constant_density(const TimeGrid& grid, double rate);

    const TimeGrid& grid() const { return grid_; }
    double horizon() const { return grid_.horizon(); }
    std::span<const double> densities() const { return densities_; }
    std::span<const double> jumps() const { return jumps_; }
    double density(std::size_t cell) const { return densities_[cell]; }
    double jump(std::size_t point) const { return jumps_[point]; }
    // Jump size at time t (0 when t is not a grid point).
    double jump_at(double t) const;
    bool has_jumps() const;

    double value(double t) const;
    double left_value(double t) const { return value(t) - jump_at(t); }

    // Same path expressed on a finer grid that contains all current grid points.
    FVProcess on_grid(const TimeGrid& finer) const;

    FVProcess with_jump(double t, double size) const;

    FVProcess operator-() const;
    friend FVProcess operator+(const FVProcess& a, const FVProcess& b);
    friend FVProcess operator-(const FVProcess& a, const FVProcess& b);
    friend FVProcess operator*(double c, const FVProcess& p);

private:
    TimeGrid grid_;
    std::vector<double> densities_;
    std::vector<double> jumps_;
};

double evaluate(const FVProcess& p, double t);
double evaluate_left(const FVProcess& p, double t);

// Cumulative return process: starts at 0 and every jump is > -1.
class ReturnProcess {
public:
    ReturnProcess() = default;
    explicit ReturnProcess(FVProcess base);

    const FVProcess& path() const { return base_; }
    operator const FVProcess&() const { return base_; }

private:
    FVProcess base_;
};

// The path values of a process on the intervals and nodes of a NodeGrid.
struct NodeTable {
    std::vector<double> density;  // per node interval
    std::vector<double> jump;     // per node
};

// Requires every grid point of `p` to be a node of `nodes`.
NodeTable tabulate(const FVProcess& p, const NodeGrid& nodes);

// Rule for the absolutely continuous part: left point of each node piece, or
// 4-point Gauss-Legendre on each node piece for smooth reference integrals.
enum class QuadratureRule { LeftPoint, GaussLegendre };

struct QuadratureConfig {
    std::size_t substeps = 64;
    QuadratureRule rule = QuadratureRule::LeftPoint;
};

// Integrand for Lebesgue-Stieltjes integrals. `value` is sampled at the left end
// of each quadrature piece on the absolutely continuous part; `at_jump` is used
// at jump times and defaults to `value` (callers pass the left limit there).
struct Integrand {
    std::function<double(double)> value;
    std::function<double(double)> at_jump;

    Integrand(std::function<double(double)> f) : value(std::move(f)) {}
    Integrand(std::function<double(double)> f, std::function<double(double)> jump_f)
        : value(std::move(f)), at_jump(std::move(jump_f)) {}
};

// int_(s,t] f dP: quadrature over the node pieces for the density part,
// plus sum over jump times u in (s,t] of f(u-) dP(u).
double stieltjes_integral(const Integrand& f, const FVProcess& p, double s, double t,
                          const NodeGrid& nodes, QuadratureRule rule = QuadratureRule::LeftPoint);
double stieltjes_integral(const Integrand& f, const FVProcess& p, double s, double t,
                          const QuadratureConfig& quad = {});

// Solution of d kappa = kappa(-) d Phi, kappa(0) = 1, for a finite-variation Phi.
class DoleansExponential {
public:
    explicit DoleansExponential(const ReturnProcess& returns);

    double operator()(double t) const { return value(t); }
    double value(double t) const;
    double left_value(double t) const;

private:
    FVProcess phi_;
    std::vector<double> log_at_point_;  // log kappa(t_i)
};

DoleansExponential doleans_exponential(const ReturnProcess& returns);

// Phi minus the jump correction sum (1 + dPhi)^-1 (dPhi)^2; the continuous
// quadratic variation of a finite-variation path is zero.
FVProcess tilde_transform(const ReturnProcess& returns);

// sum_{s<=t} dP(s) dQ(s).
double jump_covariation(const FVProcess& p, const FVProcess& q, double t);
// True iff no time carries jumps of two of the listed processes.
bool assert_no_simultaneous_jumps(std::span<const FVProcess> processes);
bool assert_no_simultaneous_jumps(std::initializer_list<const FVProcess*> processes);

// X^t: increments of P on [0,t], frozen afterwards.
FVProcess stop_process(const FVProcess& p, double t);

}  // namespace isu
