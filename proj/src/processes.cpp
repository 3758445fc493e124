#include "isu/processes.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>

namespace isu {

namespace {

std::vector<double> sorted_unique(std::vector<double> pts) {
    std::sort(pts.begin(), pts.end());
    std::vector<double> out;
    out.reserve(pts.size());
    for (double p : pts) {
        if (out.empty() || p - out.back() > kTimeTol * std::max(1.0, std::abs(p)))
            out.push_back(p);
    }
    return out;
}

std::optional<std::size_t> find_point(std::span<const double> pts, double t) {
    auto it = std::lower_bound(pts.begin(), pts.end(), t - kTimeTol * std::max(1.0, std::abs(t)));
    if (it != pts.end() && std::abs(*it - t) <= kTimeTol * std::max(1.0, std::abs(t)))
        return static_cast<std::size_t>(it - pts.begin());
    return std::nullopt;
}

}  // namespace

// ---------------------------------------------------------------- TimeGrid

TimeGrid::TimeGrid(std::vector<double> points) : points_(std::move(points)) {
    if (points_.size() < 2)
        throw std::invalid_argument("time grid needs at least two points");
    if (points_.front() != 0.0)
        throw std::invalid_argument("time grid must start at 0");
    for (std::size_t i = 1; i < points_.size(); ++i) {
        if (!(points_[i] > points_[i - 1]))
            throw std::invalid_argument("time grid must be strictly increasing");
    }
}

TimeGrid TimeGrid::uniform(double horizon, std::size_t cells) {
    if (!(horizon > 0.0) || cells == 0)
        throw std::invalid_argument("uniform grid needs horizon > 0 and at least one cell");
    std::vector<double> pts(cells + 1);
    for (std::size_t i = 0; i <= cells; ++i)
        pts[i] = horizon * static_cast<double>(i) / static_cast<double>(cells);
    pts.back() = horizon;
    return TimeGrid(std::move(pts));
}

std::optional<std::size_t> TimeGrid::index_of(double t) const { return find_point(points_, t); }

std::size_t TimeGrid::cell_of(double t) const {
    if (!contains(t)) {
        std::ostringstream msg;
        msg << "time " << t << " outside [0, " << horizon() << "]";
        throw std::domain_error(msg.str());
    }
    if (auto idx = index_of(t)) return *idx == 0 ? 0 : *idx - 1;
    auto it = std::upper_bound(points_.begin(), points_.end(), t);
    return static_cast<std::size_t>(it - points_.begin()) - 1;
}

TimeGrid TimeGrid::merged(std::span<const double> extra) const {
    std::vector<double> pts(points_);
    for (double e : extra) {
        if (e < -kTimeTol || e > horizon() + kTimeTol) {
            std::ostringstream msg;
            msg << "point " << e << " outside [0, " << horizon() << "]";
            throw std::domain_error(msg.str());
        }
        pts.push_back(std::clamp(e, 0.0, horizon()));
    }
    auto merged_pts = sorted_unique(std::move(pts));
    merged_pts.front() = 0.0;
    merged_pts.back() = horizon();
    return TimeGrid(std::move(merged_pts));
}

// ---------------------------------------------------------------- NodeGrid

NodeGrid::NodeGrid(const TimeGrid& base, std::size_t substeps, std::span<const double> extra)
    : base_(base), substeps_(substeps) {
    if (substeps == 0) throw std::invalid_argument("substeps must be positive");
    std::vector<double> pts;
    pts.reserve(base.cells() * substeps + 1 + extra.size());
    for (std::size_t c = 0; c < base.cells(); ++c) {
        const double a = base.point(c);
        const double h = base.width(c) / static_cast<double>(substeps);
        for (std::size_t s = 0; s < substeps; ++s) pts.push_back(a + h * static_cast<double>(s));
    }
    pts.push_back(base.horizon());
    // Snap extras onto existing nodes where they coincide up to rounding.
    for (double e : extra) {
        if (e < -kTimeTol || e > base.horizon() + kTimeTol)
            throw std::domain_error("extra node outside the grid horizon");
        pts.push_back(std::clamp(e, 0.0, base.horizon()));
    }
    nodes_ = sorted_unique(std::move(pts));
    // Base points must survive exactly.
    for (double p : base.points()) {
        auto idx = find_point(nodes_, p);
        nodes_[*idx] = p;
    }
}

std::optional<std::size_t> NodeGrid::index_of(double t) const { return find_point(nodes_, t); }

std::size_t NodeGrid::require_index(double t) const {
    auto idx = index_of(t);
    if (!idx) {
        std::ostringstream msg;
        msg << "time " << t << " is not a quadrature node";
        throw std::invalid_argument(msg.str());
    }
    return *idx;
}

// ---------------------------------------------------------------- FVProcess

FVProcess::FVProcess(TimeGrid grid, std::vector<double> densities, std::vector<double> jumps)
    : grid_(std::move(grid)), densities_(std::move(densities)), jumps_(std::move(jumps)) {
    if (densities_.size() != grid_.cells())
        throw std::invalid_argument("one density per grid cell required");
    if (jumps_.size() != grid_.size())
        throw std::invalid_argument("one jump slot per grid point required");
    for (double d : densities_)
        if (!std::isfinite(d)) throw std::invalid_argument("density must be finite");
    for (double j : jumps_)
        if (!std::isfinite(j)) throw std::invalid_argument("jump must be finite");
}

FVProcess FVProcess::zero(const TimeGrid& grid) {
    return FVProcess(grid, std::vector<double>(grid.cells(), 0.0), std::vector<double>(grid.size(), 0.0));
}

FVProcess FVProcess::constant_density(const TimeGrid& grid, double rate) {
    return FVProcess(grid, std::vector<double>(grid.cells(), rate), std::vector<double>(grid.size(), 0.0));
}

double FVProcess::jump_at(double t) const {
    auto idx = grid_.index_of(t);
    return idx ? jumps_[*idx] : 0.0;
}

bool FVProcess::has_jumps() const {
    return std::any_of(jumps_.begin(), jumps_.end(), [](double j) { return j != 0.0; });
}

double FVProcess::value(double t) const {
    const std::size_t cell = grid_.cell_of(t);
    double v = jumps_[0];
    for (std::size_t c = 0; c < cell; ++c) v += densities_[c] * grid_.width(c) + jumps_[c + 1];
    const double a = grid_.point(cell);
    if (auto idx = grid_.index_of(t); idx && *idx == cell + 1) {
        v += densities_[cell] * grid_.width(cell) + jumps_[cell + 1];
    } else if (t > a) {
        v += densities_[cell] * (t - a);
    }
    return v;
}

FVProcess FVProcess::on_grid(const TimeGrid& finer) const {
    if (finer == grid_) return *this;
    if (std::abs(finer.horizon() - grid_.horizon()) > kTimeTol)
        throw std::invalid_argument("regridding requires the same horizon");
    std::vector<double> dens(finer.cells());
    std::vector<double> jmp(finer.size(), 0.0);
    for (std::size_t c = 0; c < finer.cells(); ++c) {
        const double mid = 0.5 * (finer.point(c) + finer.point(c + 1));
        dens[c] = densities_[grid_.cell_of(mid)];
    }
    for (std::size_t i = 0; i < grid_.size(); ++i) {
        auto idx = finer.index_of(grid_.point(i));
        if (!idx) throw std::invalid_argument("target grid must contain every point of the source grid");
        jmp[*idx] = jumps_[i];
    }
    return FVProcess(finer, std::move(dens), std::move(jmp));
}

FVProcess FVProcess::with_jump(double t, double size) const {
    TimeGrid g = grid_.index_of(t) ? grid_ : grid_.merged(std::vector<double>{t});
    FVProcess out = on_grid(g);
    out.jumps_[*g.index_of(t)] += size;
    return out;
}

FVProcess FVProcess::operator-() const { return -1.0 * (*this); }

FVProcess operator*(double c, const FVProcess& p) {
    FVProcess out = p;
    for (double& d : out.densities_) d *= c;
    for (double& j : out.jumps_) j *= c;
    return out;
}

FVProcess operator+(const FVProcess& a, const FVProcess& b) {
    if (a.grid_ == b.grid_) {
        FVProcess out = a;
        for (std::size_t i = 0; i < out.densities_.size(); ++i) out.densities_[i] += b.densities_[i];
        for (std::size_t i = 0; i < out.jumps_.size(); ++i) out.jumps_[i] += b.jumps_[i];
        return out;
    }
    const TimeGrid g = a.grid_.merged(b.grid_);
    return a.on_grid(g) + b.on_grid(g);
}

FVProcess operator-(const FVProcess& a, const FVProcess& b) { return a + (-1.0 * b); }

double evaluate(const FVProcess& p, double t) { return p.value(t); }
double evaluate_left(const FVProcess& p, double t) { return p.left_value(t); }

// ---------------------------------------------------------------- ReturnProcess

ReturnProcess::ReturnProcess(FVProcess base) : base_(std::move(base)) {
    if (base_.jump(0) != 0.0) throw AdmissibilityError("return process must start at 0");
    for (std::size_t i = 0; i < base_.grid().size(); ++i) {
        if (base_.jump(i) <= -1.0) {
            std::ostringstream msg;
            msg << "return jump <= -1 at t = " << base_.grid().point(i) << " (jump " << base_.jump(i) << ")";
            throw AdmissibilityError(msg.str());
        }
    }
}

// ---------------------------------------------------------------- tabulation

NodeTable tabulate(const FVProcess& p, const NodeGrid& nodes) {
    NodeTable t;
    t.density.resize(nodes.intervals());
    t.jump.assign(nodes.size(), 0.0);
    const TimeGrid& g = p.grid();
    for (std::size_t i = 0; i < nodes.intervals(); ++i) {
        const double mid = 0.5 * (nodes.node(i) + nodes.node(i + 1));
        t.density[i] = p.density(g.cell_of(mid));
    }
    for (std::size_t k = 0; k < g.size(); ++k) {
        auto idx = nodes.index_of(g.point(k));
        if (!idx) {
            if (p.jump(k) != 0.0 || (k > 0 && k + 1 < g.size() && p.density(k - 1) != p.density(k)))
                throw std::invalid_argument("process grid point is not a quadrature node");
            continue;
        }
        t.jump[*idx] = p.jump(k);
    }
    return t;
}

// ---------------------------------------------------------------- integration

double stieltjes_integral(const Integrand& f, const FVProcess& p, double s, double t,
                          const NodeGrid& nodes, QuadratureRule rule) {
    static constexpr double kAbscissa[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                            0.8611363115940526};
    static constexpr double kWeight[4] = {0.3478548451374537, 0.6521451548625462, 0.6521451548625462,
                                          0.3478548451374537};
    if (s > t + kTimeTol) throw std::invalid_argument("integration interval (s,t] requires s <= t");
    if (!p.grid().contains(s) || !p.grid().contains(t))
        throw std::domain_error("integration interval outside the process horizon");
    const auto& jump_f = f.at_jump ? f.at_jump : f.value;
    double total = 0.0;
    const auto ns = nodes.nodes();
    const TimeGrid& g = p.grid();
    for (std::size_t i = 0; i < nodes.intervals(); ++i) {
        const double a = std::max(ns[i], s);
        const double b = std::min(ns[i + 1], t);
        if (b <= a) continue;
        const double dens = p.density(g.cell_of(0.5 * (ns[i] + ns[i + 1])));
        if (dens == 0.0) continue;
        if (rule == QuadratureRule::LeftPoint) {
            total += f.value(a) * dens * (b - a);
        } else {
            const double mid = 0.5 * (a + b);
            const double half = 0.5 * (b - a);
            double sum = 0.0;
            for (int q = 0; q < 4; ++q) sum += kWeight[q] * f.value(mid + half * kAbscissa[q]);
            total += sum * half * dens;
        }
    }
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double u = g.point(k);
        const double dj = p.jump(k);
        if (dj == 0.0) continue;
        if (u > s + kTimeTol && u <= t + kTimeTol) total += jump_f(u) * dj;
    }
    return total;
}

double stieltjes_integral(const Integrand& f, const FVProcess& p, double s, double t,
                          const QuadratureConfig& quad) {
    std::vector<double> extra{s, t};
    return stieltjes_integral(f, p, s, t, NodeGrid(p.grid(), quad.substeps, extra), quad.rule);
}

// ---------------------------------------------------------------- Doleans exponential

DoleansExponential::DoleansExponential(const ReturnProcess& returns) : phi_(returns.path()) {
    const TimeGrid& g = phi_.grid();
    log_at_point_.resize(g.size());
    log_at_point_[0] = 0.0;
    for (std::size_t c = 0; c < g.cells(); ++c)
        log_at_point_[c + 1] =
            log_at_point_[c] + phi_.density(c) * g.width(c) + std::log1p(phi_.jump(c + 1));
}

double DoleansExponential::value(double t) const {
    const TimeGrid& g = phi_.grid();
    if (auto idx = g.index_of(t)) return std::exp(log_at_point_[*idx]);
    const std::size_t cell = g.cell_of(t);
    return std::exp(log_at_point_[cell] + phi_.density(cell) * (t - g.point(cell)));
}

double DoleansExponential::left_value(double t) const {
    return value(t) / (1.0 + phi_.jump_at(t));
}

DoleansExponential doleans_exponential(const ReturnProcess& returns) { return DoleansExponential(returns); }

FVProcess tilde_transform(const ReturnProcess& returns) {
    const FVProcess& phi = returns.path();
    std::vector<double> jumps(phi.jumps().begin(), phi.jumps().end());
    for (double& j : jumps) j = j / (1.0 + j);
    return FVProcess(phi.grid(), std::vector<double>(phi.densities().begin(), phi.densities().end()),
                     std::move(jumps));
}

// ---------------------------------------------------------------- jumps

namespace {

std::map<double, std::vector<double>> jump_times(std::span<const FVProcess* const> ps) {
    // time -> list of jump sizes (one per process jumping there)
    std::map<double, std::vector<double>> out;
    for (const FVProcess* p : ps) {
        const TimeGrid& g = p->grid();
        for (std::size_t k = 0; k < g.size(); ++k) {
            if (p->jump(k) == 0.0) continue;
            double key = g.point(k);
            auto it = out.lower_bound(key - kTimeTol);
            if (it != out.end() && std::abs(it->first - key) <= kTimeTol) key = it->first;
            out[key].push_back(p->jump(k));
        }
    }
    return out;
}

}  // namespace

double jump_covariation(const FVProcess& p, const FVProcess& q, double t) {
    double total = 0.0;
    const TimeGrid& g = p.grid();
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double u = g.point(k);
        if (u > t + kTimeTol || p.jump(k) == 0.0) continue;
        total += p.jump(k) * q.jump_at(u);
    }
    return total;
}

bool assert_no_simultaneous_jumps(std::span<const FVProcess> processes) {
    std::vector<const FVProcess*> ptrs;
    for (const auto& p : processes) ptrs.push_back(&p);
    for (const auto& [time, sizes] : jump_times(ptrs))
        if (sizes.size() > 1) return false;
    return true;
}

bool assert_no_simultaneous_jumps(std::initializer_list<const FVProcess*> processes) {
    std::vector<const FVProcess*> ptrs(processes);
    for (const auto& [time, sizes] : jump_times(ptrs))
        if (sizes.size() > 1) return false;
    return true;
}

FVProcess stop_process(const FVProcess& p, double t) {
    if (!p.grid().contains(t)) {
        std::ostringstream msg;
        msg << "stop time " << t << " outside [0, " << p.horizon() << "]";
        throw std::domain_error(msg.str());
    }
    const TimeGrid g = p.grid().index_of(t) ? p.grid() : p.grid().merged(std::vector<double>{t});
    FVProcess base = p.on_grid(g);
    std::vector<double> dens(base.densities().begin(), base.densities().end());
    std::vector<double> jmp(base.jumps().begin(), base.jumps().end());
    const std::size_t stop = *g.index_of(t);
    for (std::size_t c = stop; c < g.cells(); ++c) dens[c] = 0.0;
    for (std::size_t k = stop + 1; k < g.size(); ++k) jmp[k] = 0.0;
    return FVProcess(g, std::move(dens), std::move(jmp));
}

}  // namespace isu
