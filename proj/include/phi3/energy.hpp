#pragma once

#include "phi3/common.hpp"
#include "phi3/map_field.hpp"

#include <optional>

namespace phi3 {

// Pullback metric U_ij = h(du(e_i), du(e_j)) in the orthonormal frame.
struct PullbackMetric {
    Mat U;

    double min_eigenvalue() const {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(U);
        return es.eigenvalues().minCoeff();
    }
};

inline PullbackMetric pullback_metric(const MapField& u, Index node) {
    const Mat d = u.du_frame(node);
    return {Mat(d.transpose() * d)};
}

inline PullbackMetric pullback_from_du(const Mat& du_frame) {
    return {Mat(du_frame.transpose() * du_frame)};
}

// Energy density of order k: tr(U^k) / (2k), equal to |d_(k)u|^2 / (2k).
inline double phi_energy_density(const PullbackMetric& p, int k) {
    require(k >= 1 && k <= 3, "phi_energy_density: k must be 1, 2 or 3");
    const Mat& U = p.U;
    switch (k) {
        case 1:
            return 0.5 * U.trace();
        case 2:
            return 0.25 * (U * U).trace();
        default:
            return (U * U * U).trace() / 6.0;
    }
}

inline double phi_density_from_du(const Mat& du_frame, int k) {
    return phi_energy_density(pullback_from_du(du_frame), k);
}

// Quadrature of the density over the grid, or over the ball B(rho) of a
// grid with a pole when a region radius is given.
inline double phi_energy(const MapField& u, int k, std::optional<double> region_radius = {}) {
    const DomainGrid& g = u.grid();
    if (region_radius) require(g.has_pole(), "region energy needs a grid with a pole");
    PairwiseAccumulator acc;
    for (Index i = 0; i < g.node_count(); ++i) {
        const double w = g.weight(i);
        if (w == 0.0 || !u.du_defined(i)) continue;
        if (region_radius && g.radial(i) > *region_radius) continue;
        acc.add(w * phi_energy_density(pullback_metric(u, i), k));
    }
    return acc.total();
}

struct DensityStats {
    double energy = 0.0;
    double density_min = 0.0;
    double density_max = 0.0;
    Index node_count = 0;
};

inline DensityStats phi_energy_stats(const MapField& u, int k,
                                     std::optional<double> region_radius = {}) {
    const DomainGrid& g = u.grid();
    if (region_radius) require(g.has_pole(), "region energy needs a grid with a pole");
    DensityStats s;
    s.density_min = std::numeric_limits<double>::infinity();
    s.density_max = -s.density_min;
    PairwiseAccumulator acc;
    for (Index i = 0; i < g.node_count(); ++i) {
        const double w = g.weight(i);
        if (w == 0.0 || !u.du_defined(i)) continue;
        if (region_radius && g.radial(i) > *region_radius) continue;
        const double e = phi_energy_density(pullback_metric(u, i), k);
        acc.add(w * e);
        s.density_min = std::min(s.density_min, e);
        s.density_max = std::max(s.density_max, e);
        ++s.node_count;
    }
    s.energy = acc.total();
    if (s.node_count == 0) s.density_min = s.density_max = 0.0;
    return s;
}

// Composition bound: E(u o psi) <= C E(psi) with the sharp constant
// C = sup over N of lambda_max(U)^3 (operator norm cubed of the pullback of
// u). The looser entrywise constant max |U_ij|^3 is reported alongside.
struct CompositionBoundReport {
    double lhs = 0.0;           // E(u o psi) by exact chain-rule pullback
    double rhs_energy = 0.0;    // E(psi)
    double sharp_constant = 0.0;
    double entrywise_constant = 0.0;
    bool pass = false;
};

// u is given analytically on the target chart of psi: for each node of psi's
// grid, u_du_at maps the psi-image frame differential to du of u there.
// Both maps live over flat charts here; the chain rule is exact.
inline CompositionBoundReport composition_energy_bound_check(
    const MapField& u, const MapField& psi,
    const std::function<Mat(const Vec& psi_value)>& u_du_at_point) {
    CompositionBoundReport rep;
    // sup over u's own grid of the two constants
    double lmax = 0.0, emax = 0.0;
    for (Index i = 0; i < u.grid().node_count(); ++i) {
        if (!u.du_defined(i)) continue;
        const Mat U = pullback_metric(u, i).U;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(U);
        lmax = std::max(lmax, es.eigenvalues().maxCoeff());
        emax = std::max(emax, U.cwiseAbs().maxCoeff());
    }
    rep.sharp_constant = lmax * lmax * lmax;
    rep.entrywise_constant = emax * emax * emax;

    const DomainGrid& g = psi.grid();
    PairwiseAccumulator lhs_acc, rhs_acc;
    for (Index i = 0; i < g.node_count(); ++i) {
        const double w = g.weight(i);
        if (w == 0.0 || !psi.du_defined(i)) continue;
        const Mat dpsi = psi.du_frame(i);
        const Mat du_u = u_du_at_point(psi.value(i));
        const Mat dcomp = du_u * dpsi;  // chain rule
        lhs_acc.add(w * phi_density_from_du(dcomp, 3));
        rhs_acc.add(w * phi_density_from_du(dpsi, 3));
    }
    rep.lhs = lhs_acc.total();
    rep.rhs_energy = rhs_acc.total();
    const double slack = 1e-9 * (1.0 + std::abs(rep.rhs_energy));
    rep.pass = rep.lhs <= rep.sharp_constant * rep.rhs_energy + slack;
    return rep;
}

}  // namespace phi3
