#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace isu::testkit {

double GermanDiscrete::b(int l) const {
    if (l < in.years) return -premium;
    return l == in.years ? in.endowment : 0.0;
}

double GermanDiscrete::H(int phi_years, int death_years, int lapse_years) const {
    // Year l below is (l-1, l]; it pays d_l or s_l at l and b_l to survivors.
    double h = b(0);
    double survival = 1.0, log_discount = 0.0;
    for (int l = 1; l <= in.years; ++l) {
        const int k = l - 1;
        log_discount -= l <= phi_years ? in.phi : in.phi_star;
        const double ql = l <= death_years ? q(k) : q_star(k);
        const double rl = l <= lapse_years ? r(k) : r_star(k);
        const double v = std::exp(log_discount);
        h += v * survival * (ql * in.death[k] + rl * in.surrender[k]);
        survival *= 1.0 - ql - rl;
        h += v * survival * b(l);
    }
    return h;
}

double GermanDiscrete::reserve(int l) const {
    double v = 0.0;
    for (int k = in.years - 1; k >= l; --k) {
        const double p = 1.0 - q_star(k) - r_star(k);
        v = std::exp(-in.phi_star) * (p * (b(k + 1) + v) + q_star(k) * in.death[k] + r_star(k) * in.surrender[k]);
    }
    return v;
}

std::array<double, 3> GermanDiscrete::su_terms(int k) const {
    double survival = 1.0;
    for (int m = 0; m < k; ++m) survival *= 1.0 - q(m) - r(m);
    const double factor = std::exp(-in.phi * (k + 1)) * survival;
    const double i = std::expm1(in.phi), i_star = std::expm1(in.phi_star);
    const double before_end = b(k + 1) + reserve(k + 1);
    return {factor * reserve(k) * (i - i_star), factor * (before_end - in.death[k]) * (q(k) - q_star(k)),
            factor * (before_end - in.surrender[k]) * (r(k) - r_star(k))};
}

double GermanContinuousQuadrature::reserve(double s) const {
    int k = static_cast<int>(std::floor(s));
    if (k >= in.years) return 0.0;
    // Reserve right after the lump at k + 1.
    double end = 0.0;
    for (int m = in.years - 1; m > k; --m) {
        const double c = in.phi_star + in.mortality_star[m] + in.lapse_star;
        const double g = in.mortality_star[m] * in.death[m] + in.lapse_star * in.surrender[m];
        const double lump = m + 1 < in.years ? -premium : in.endowment;
        end = g * (-std::expm1(-c)) / c + std::exp(-c) * (lump + end);
    }
    const double c = in.phi_star + in.mortality_star[k] + in.lapse_star;
    const double g = in.mortality_star[k] * in.death[k] + in.lapse_star * in.surrender[k];
    const double lump = k + 1 < in.years ? -premium : in.endowment;
    const double tau = k + 1 - s;
    return g * (-std::expm1(-c * tau)) / c + std::exp(-c * tau) * (lump + end);
}

std::array<double, 3> GermanContinuousQuadrature::isu_terms(int k, std::size_t points) const {
    std::vector<double> x, w;
    gauss_legendre(points, x, w);
    double log_survival_k = 0.0;
    for (int m = 0; m < k; ++m) log_survival_k -= in.mortality_factor * in.mortality_star[m] + in.lapse;
    const double mu_star = in.mortality_star[k], mu = in.mortality_factor * mu_star;
    std::array<double, 3> out{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < points; ++i) {
        const double s = k + 0.5 * (x[i] + 1.0);
        const double weight = 0.5 * w[i] * std::exp(-in.phi * s + log_survival_k - (s - k) * (mu + in.lapse));
        const double v = reserve(s);
        out[0] += weight * v * (in.phi - in.phi_star);
        out[1] += weight * (v - in.death[k]) * (mu - mu_star);
        out[2] += weight * (v - in.surrender[k]) * (in.lapse - in.lapse_star);
    }
    return out;
}

double representation_gap(const ValuationBasis& first, const ReturnProcess& returns,
                          const IntensityMatrix& intensities, const ContractSpec& contract, double t,
                          const NodeGrid& nodes, SolverScheme scheme, QuadratureRule rule) {
    const ValuationBasis bar = spliced_basis(first, returns, intensities, t);
    const DoleansExponential kappa(bar.returns);
    const TransitionField p = product_integral(bar.intensities, 0.0, nodes, scheme);
    const ReserveTable reserves(first, contract, nodes, scheme);
    const std::size_t a = contract.states().initial();
    const std::size_t n = contract.states().size();
    const double horizon = nodes.node(nodes.size() - 1);

    double gap = 0.0;
    {
        const FVProcess d = tilde_transform(bar.returns) - first.returns.path();
        Integrand f(
            [&](double u) {
                const Matrix pu = p.at(u);
                double s = 0.0;
                for (std::size_t j = 0; j < n; ++j) s += pu(a, j) * reserves.value(j, u);
                return s / kappa(u);
            },
            [&](double u) {
                const Matrix pu = p.left(u);
                double s = 0.0;
                for (std::size_t j = 0; j < n; ++j) s += pu(a, j) * reserves.left_value(j, u);
                return s / kappa.left_value(u);
            });
        gap += stieltjes_integral(f, d, 0.0, horizon, nodes, rule);
    }
    std::vector<Transition> pairs = first.intensities.transitions();
    for (const auto& tr : bar.intensities.transitions())
        if (!first.intensities.has(tr.from, tr.to)) pairs.push_back(tr);
    for (const auto& tr : pairs) {
        const FVProcess d = bar.intensities.entry(tr.from, tr.to) - first.intensities.entry(tr.from, tr.to);
        const PaymentFunction* b = contract.payment(tr.from, tr.to);
        auto at_risk = [&](double u, bool at_jump) {
            const double pay = b ? (at_jump ? b->value(u) : b->right_limit(u)) : 0.0;
            return pay + reserves.value(tr.to, u) - reserves.value(tr.from, u);
        };
        Integrand f([&](double u) { return p.at(u)(a, tr.from) * at_risk(u, false) / kappa(u); },
                    [&](double u) { return p.left(u)(a, tr.from) * at_risk(u, true) / kappa(u); });
        gap -= stieltjes_integral(f, d, 0.0, horizon, nodes, rule);
    }
    return gap;
}

void gauss_legendre(std::size_t n, std::vector<double>& x, std::vector<double>& w) {
    if (n == 0) throw std::invalid_argument("gauss_legendre: need at least one point");
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (std::size_t k = 1; k <= n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double step = p0 / dp;
            z -= step;
            if (std::abs(step) < 1e-16) break;
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
}

}  // namespace isu::testkit
