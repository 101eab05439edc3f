#pragma once

#include "phi3/common.hpp"
#include "phi3/energy.hpp"
#include "phi3/map_field.hpp"

namespace phi3 {

// Deliberate defect injection for mutation testing of the verification suite.
enum class Mutation {
    None,
    FlipTensionSign,
    FlipStressCoupling,
    DropGradTerm1,
    DropGradTerm2,
    DropGradTerm3,
    DropGradTerm4,
    DropGradTerm5,
};

// Smooth vector field on the domain: chart components as a function of the
// chart id and chart coordinates, so multi-chart grids can represent one
// geometric field. Must be periodic on tori and smooth per chart.
using DomainVectorField = std::function<Vec(int chart, const Vec&)>;

inline DomainVectorField radial_field() {
    return [](int, const Vec& x) { return x; };  // r d/dr on centered charts
}

// d_(3)u(X) = du U^2 x for frame coordinates x of X.
inline Vec d3_form(const MapField& u, Index node, const Vec& x_frame) {
    const Mat P = u.du_frame(node);
    const Mat U = P.transpose() * P;
    return P * (U * (U * x_frame));
}

namespace detail {

// Flux of the order-3 form in chart indices, scaled by sqrt(det g):
// column a equals sqrt(g) * sum_b g^{ab} d3u(d/dx_b) = sqrt(g) du U^2 F^T.
inline Mat d3_flux(const MapField& u, Index i) {
    const Mat P = u.du_frame(i);
    const Mat U = P.transpose() * P;
    const Mat F = u.grid().frame(i);
    return u.grid().sqrt_det_metric(i) * (P * (U * U) * F.transpose());
}

}  // namespace detail

// Layers of neighbors the tension stencil needs at a node.
inline int tension_stencil_layers(const MapField& u) { return u.du_stencil_layers() + 1; }

// tau(u) = div(d_(3)u): the conservative-form divergence
//   tau = P_N [ 1/sqrt(g) d_a ( sqrt(g) g^{ab} d3u_b ) ]
// evaluated by central differences of the flux and projected onto T_u N.
// Nodes without full stencil support are masked out.
inline VariationField tension_field(const MapField& u, Mutation mut = Mutation::None) {
    const DomainGrid& g = u.grid();
    const int m = g.dim();
    const int q = u.ambient_dim();
    const Index n = g.node_count();
    const int need = tension_stencil_layers(u);

    // cache fluxes on small grids, recompute per neighbor on large ones
    const bool cache = n <= 700000;
    std::vector<Mat> flux_cache;
    std::vector<char> flux_ok;
    if (cache) {
        flux_cache.assign(static_cast<std::size_t>(n), Mat());
        flux_ok.assign(static_cast<std::size_t>(n), 0);
        for (Index i = 0; i < n; ++i)
            if (u.du_defined(i)) {
                flux_cache[std::size_t(i)] = detail::d3_flux(u, i);
                flux_ok[std::size_t(i)] = 1;
            }
    }
    auto flux = [&](Index i) -> Mat {
        if (cache) return flux_cache[std::size_t(i)];
        return detail::d3_flux(u, i);
    };

    std::vector<Vec> tau(static_cast<std::size_t>(n), Vec::Zero(q));
    std::vector<char> support(static_cast<std::size_t>(n), 0);
    const double sign = (mut == Mutation::FlipTensionSign) ? -1.0 : 1.0;
    for (Index i = 0; i < n; ++i) {
        if (g.interior_depth(i) < need) continue;
        const double h = g.spacing(g.chart_of(i));
        Vec d = Vec::Zero(q);
        for (int a = 0; a < m; ++a) {
            const Index ip = g.neighbor(i, a, +1);
            const Index im = g.neighbor(i, a, -1);
            d += (flux(ip).col(a) - flux(im).col(a)) / (2.0 * h);
        }
        d /= g.sqrt_det_metric(i);
        tau[std::size_t(i)] = sign * u.target().tangent_project(u.value(i), d);
        support[std::size_t(i)] = 1;
    }
    return VariationField::from_values(u, std::move(tau), std::move(support));
}

// L2 norm of the tension field over the valid region.
inline double euler_lagrange_residual(const MapField& u, Mutation mut = Mutation::None) {
    const VariationField tau = tension_field(u, mut);
    const DomainGrid& g = u.grid();
    PairwiseAccumulator acc;
    for (Index i = 0; i < g.node_count(); ++i) {
        if (!tau.in_support(i)) continue;
        acc.add(g.weight(i) * tau.value(i).squaredNorm());
    }
    return std::sqrt(acc.total());
}

// First variation formula (I): dE/dt = -int <v, tau(u)> dv_g.
inline double first_variation(const MapField& u, const VariationField& v,
                              Mutation mut = Mutation::None) {
    const VariationField tau = tension_field(u, mut);
    const DomainGrid& g = u.grid();
    PairwiseAccumulator acc;
    for (Index i = 0; i < g.node_count(); ++i) {
        if (!v.in_support(i) || g.weight(i) == 0.0) continue;
        if (v.value(i).squaredNorm() == 0.0) continue;
        require(tau.in_support(i), "variation field must be supported where the "
                                   "tension stencil is valid");
        acc.add(g.weight(i) * v.value(i).dot(tau.value(i)));
    }
    return -acc.total();
}

// Stress-energy tensor in the orthonormal frame: S = (tr U^3 / 6) I - U^3.
struct StressTensor {
    std::vector<Mat> S;          // frame representation per node
    std::vector<char> defined;

    double max_asymmetry() const {
        double r = 0.0;
        for (std::size_t i = 0; i < S.size(); ++i)
            if (defined[i]) r = std::max(r, (S[i] - S[i].transpose()).norm());
        return r;
    }
};

inline Mat stress_energy_at(const MapField& u, Index i, Mutation mut = Mutation::None) {
    const Mat P = u.du_frame(i);
    const Mat U = P.transpose() * P;
    const Mat U3 = U * U * U;
    const double sign = (mut == Mutation::FlipStressCoupling) ? 1.0 : -1.0;
    return Mat((U3.trace() / 6.0) * Mat::Identity(U.rows(), U.cols()) + sign * U3);
}

inline StressTensor stress_energy(const MapField& u, Mutation mut = Mutation::None) {
    const Index n = u.grid().node_count();
    StressTensor st;
    st.S.assign(static_cast<std::size_t>(n), Mat());
    st.defined.assign(static_cast<std::size_t>(n), 0);
    for (Index i = 0; i < n; ++i) {
        if (!u.du_defined(i)) continue;
        st.S[std::size_t(i)] = stress_energy_at(u, i, mut);
        st.defined[std::size_t(i)] = 1;
    }
    return st;
}

namespace detail {

// Stress tensor with lowered chart indices: S_ab = F^{-T} S_frame F^{-1}.
inline Mat stress_chart_lower(const MapField& u, Index i, Mutation mut) {
    const Mat Finv = u.grid().frame(i).inverse();
    return Finv.transpose() * stress_energy_at(u, i, mut) * Finv;
}

// d/dx_b of the chart metric by central differences of the closed form.
inline Mat metric_partial(const DomainGrid& g, Index i, int b) {
    const Index ip = g.neighbor(i, b, +1);
    const Index im = g.neighbor(i, b, -1);
    const double h = g.spacing(g.chart_of(i));
    return (g.metric(ip) - g.metric(im)) / (2.0 * h);
}

// Lie derivative (L_X g)_ab = g_cb d_a X^c + g_ac d_b X^c + X^c d_c g_ab.
inline Mat lie_derivative_metric(const DomainGrid& g, Index i, const DomainVectorField& X) {
    const int m = g.dim();
    const double h = g.spacing(g.chart_of(i));
    const Vec x = g.coords(i);
    const Mat gij = g.metric(i);
    const int chart = g.chart_of(i);
    Mat dX(m, m);  // dX(c, a) = d X^c / d x_a
    for (int a = 0; a < m; ++a) {
        Vec xp = x, xm = x;
        xp[a] += h;
        xm[a] -= h;
        dX.col(a) = (X(chart, xp) - X(chart, xm)) / (2.0 * h);
    }
    Mat L = gij * dX;             // L_ab = g_ac dX^c_b
    L = L + L.transpose().eval();
    const Vec Xc = X(chart, x);
    for (int c = 0; c < m; ++c) L += Xc[c] * metric_partial(g, i, c);
    return L;
}

}  // namespace detail

// <S, (1/2) L_X g> at a node, both tensors in chart indices.
inline double stress_pairing(const MapField& u, Index i, const DomainVectorField& X,
                             Mutation mut = Mutation::None) {
    const DomainGrid& g = u.grid();
    const Mat Sl = detail::stress_chart_lower(u, i, mut);
    const Mat gi = g.metric_inverse(i);
    const Mat Sup = gi * Sl * gi;
    const Mat L = detail::lie_derivative_metric(g, i, X);
    return 0.5 * Sup.cwiseProduct(L).sum();
}

// First variation formula (II): dE/dt = -int <S, (1/2) L_X g> dv_g for the
// deformation u o phi_t generated by X.
inline double first_variation_diffeo(const MapField& u, const DomainVectorField& X,
                                     Mutation mut = Mutation::None) {
    const DomainGrid& g = u.grid();
    const int need = u.du_stencil_layers() + 1;
    PairwiseAccumulator acc;
    for (Index i = 0; i < g.node_count(); ++i) {
        const double w = g.weight(i);
        if (w == 0.0 || g.interior_depth(i) < need) continue;
        acc.add(w * stress_pairing(u, i, X, mut));
    }
    return -acc.total();
}

// (div S)(X) at a node:
//   (div S)_b = 1/sqrt(g) d_a(sqrt(g) S^a_b) - (1/2) S^{ac} d_b g_ac.
inline double divergence_stress(const MapField& u, Index i, const DomainVectorField& X,
                                Mutation mut = Mutation::None) {
    const DomainGrid& g = u.grid();
    const int m = g.dim();
    const double h = g.spacing(g.chart_of(i));
    auto mixed_flux = [&](Index j) -> Mat {
        // sqrt(g) S^a_b = sqrt(g) g^{ac} S_cb
        return Mat(g.sqrt_det_metric(j) * g.metric_inverse(j) *
                   detail::stress_chart_lower(u, j, mut));
    };
    Vec div = Vec::Zero(m);
    for (int a = 0; a < m; ++a) {
        const Index ip = g.neighbor(i, a, +1);
        const Index im = g.neighbor(i, a, -1);
        div += (mixed_flux(ip).row(a) - mixed_flux(im).row(a)).transpose() / (2.0 * h);
    }
    div /= g.sqrt_det_metric(i);
    const Mat gi = g.metric_inverse(i);
    const Mat Sup = gi * detail::stress_chart_lower(u, i, mut) * gi;
    for (int b = 0; b < m; ++b)
        div[b] -= 0.5 * Sup.cwiseProduct(detail::metric_partial(g, i, b)).sum();
    return div.dot(X(g.chart_of(i), g.coords(i)));
}

// Residual of the conservation identity (div S)(X) + <tau(u), du(X)>; exact
// in the continuum, O(h^2) discretely.
struct ConservationReport {
    std::vector<double> residual;  // per node; 0 where the stencil is short
    std::vector<char> defined;
    double sup_norm = 0.0;
};

inline ConservationReport conservation_residual(const MapField& u, const DomainVectorField& X,
                                                Mutation mut = Mutation::None) {
    const DomainGrid& g = u.grid();
    const Index n = g.node_count();
    const int need = u.du_stencil_layers() + 2;  // S at neighbors needs du there
    const VariationField tau = tension_field(u, mut);
    ConservationReport rep;
    rep.residual.assign(static_cast<std::size_t>(n), 0.0);
    rep.defined.assign(static_cast<std::size_t>(n), 0);
    for (Index i = 0; i < n; ++i) {
        if (g.interior_depth(i) < need || g.weight(i) == 0.0) continue;
        const Vec x_frame = g.frame(i).inverse() * X(g.chart_of(i), g.coords(i));
        const Vec duX = u.du_frame(i) * x_frame;
        const double r = divergence_stress(u, i, X, mut) + tau.value(i).dot(duX);
        rep.residual[std::size_t(i)] = r;
        rep.defined[std::size_t(i)] = 1;
        rep.sup_norm = std::max(rep.sup_norm, std::abs(r));
    }
    return rep;
}

// Both sides of the Stokes identity over the ball B(r) of a pole grid:
//   int_{dB} S(X, nu) ds = int_B ( <S, 1/2 L_X g> + (div S)(X) ) dv.
// Both sides use the same smooth radial window, so the identity holds for
// the smoothly weighted region and the residual is pure discretization.
struct StokesReport {
    double boundary_term = 0.0;
    double bulk_term = 0.0;
    double residual = 0.0;
};

inline StokesReport stokes_balance(const MapField& u, const DomainVectorField& X, double r,
                                   Mutation mut = Mutation::None) {
    const DomainGrid& g = u.grid();
    require(g.has_pole(), "stokes_balance needs a grid with a pole");
    const double sigma = 3.0 * g.spacing(0);
    StokesReport rep;
    rep.boundary_term = g.shell_integral(
        r,
        [&](Index i) {
            // S(X, nu) with nu the unit radial direction (chart components x-hat)
            const Mat Sl = detail::stress_chart_lower(u, i, mut);
            const Vec x = g.coords(i);
            const Vec nu = x / x.norm();
            return X(g.chart_of(i), x).dot(Sl * nu);
        },
        sigma);
    PairwiseAccumulator acc;
    const int need = u.du_stencil_layers() + 2;
    for (Index i = 0; i < g.node_count(); ++i) {
        const double cut = DomainGrid::ball_cutoff(g.radial(i), r, sigma);
        if (cut == 0.0) continue;
        require(g.interior_depth(i) >= need, "stokes bulk stencil out of range");
        acc.add(cut * g.weight(i) *
                (stress_pairing(u, i, X, mut) + divergence_stress(u, i, X, mut)));
    }
    rep.bulk_term = acc.total();
    rep.residual = rep.boundary_term - rep.bulk_term;
    return rep;
}

// ---------------------------------------------------------------------------
// Second variation
// ---------------------------------------------------------------------------

// I(V, W) for a Phi_(3)-harmonic u: the Gauss-equation curvature pairing plus
// five gradient couplings. The curvature of N enters through
//   <R(X,Y)Z, T> = <B(X,T), B(Y,Z)> - <B(X,Z), B(Y,T)>.
inline double second_variation(const MapField& u, const VariationGen& V, const VariationGen& W,
                               Mutation mut = Mutation::None) {
    const DomainGrid& g = u.grid();
    const EmbeddedTarget& N = u.target();
    const int m = g.dim();
    const bool drop[6] = {false,
                          mut == Mutation::DropGradTerm1,
                          mut == Mutation::DropGradTerm2,
                          mut == Mutation::DropGradTerm3,
                          mut == Mutation::DropGradTerm4,
                          mut == Mutation::DropGradTerm5};
    PairwiseAccumulator acc;
    for (Index i = 0; i < g.node_count(); ++i) {
        const double w = g.weight(i);
        if (w == 0.0 || !u.du_defined(i)) continue;
        if (g.interior_depth(i) < u.du_stencil_layers() + 1) continue;
        const VariationSample sv = V(i);
        const VariationSample sw = W(i);
        if (!sv.in_support || !sw.in_support) continue;

        const Vec p = u.value(i);
        const Mat P = u.du_frame(i);
        const Mat U = P.transpose() * P;
        const Mat U2 = U * U;
        const Mat D3 = P * U2;  // columns d_(3)u(e_i)

        // project ambient derivatives onto T_u N (pullback connection)
        Mat GV(P.rows(), m), GW(P.rows(), m);
        for (int a = 0; a < m; ++a) {
            GV.col(a) = N.tangent_project(p, sv.dv_ambient.col(a));
            GW.col(a) = N.tangent_project(p, sw.dv_ambient.col(a));
        }

        double term = 0.0;
        // curvature pairing, summed over the frame
        const Vec Bvw = N.second_fundamental_form(p, sv.v, sw.v);
        for (int a = 0; a < m; ++a) {
            const Vec Bv_d3 = N.second_fundamental_form(p, sv.v, D3.col(a));
            const Vec Bu_w = N.second_fundamental_form(p, P.col(a), sw.v);
            const Vec Bu_d3 = N.second_fundamental_form(p, P.col(a), D3.col(a));
            term += Bv_d3.dot(Bu_w) - Bvw.dot(Bu_d3);
        }

        const Mat CV = GV.transpose() * P;  // <grad_i V, du(e_k)>
        const Mat CW = GW.transpose() * P;
        const Mat D = GV.transpose() * GW;  // <grad_i V, grad_k W>

        if (!drop[1]) term += (D * U2).trace();
        if (!drop[2]) term += (CV * CW * U).trace();
        if (!drop[3]) term += (CV * CW.transpose()).cwiseProduct(U).sum();
        if (!drop[4]) term += (CV * U).cwiseProduct(CW).sum();
        if (!drop[5]) term += (CV * U * CW).trace();

        acc.add(w * term);
    }
    return acc.total();
}

inline double second_variation(const MapField& u, const VariationField& V,
                               const VariationField& W, Mutation mut = Mutation::None) {
    return second_variation(u, as_generator(V, u), as_generator(W, u), mut);
}

// ---------------------------------------------------------------------------
// Finite-difference oracles
// ---------------------------------------------------------------------------

// E(t) = E_Phi3( Pi(u + t V) ): the retraction is the nearest-point
// projection, whose differential at points of N is the tangent projection,
// so d/dt at 0 equals the intrinsic first variation.
//
// When the map and the variation both carry closed-form differentials and
// the target is a sphere, the perturbed differential is assembled by the
// exact chain rule d Pi_y = (R/|y|)(I - y y^T/|y|^2); otherwise the
// perturbed map falls back to finite differences of its values.
inline double perturbed_energy(const MapField& u, const VariationField& v, double t) {
    const DomainGrid& g = u.grid();
    const Index n = g.node_count();
    const bool flat = u.target().normal_frame(u.value(0)).rows() == 0;
    std::vector<Vec> vals(static_cast<std::size_t>(n));
    if (flat && u.is_analytic()) {
        for (Index i = 0; i < n; ++i) vals[std::size_t(i)] = t * v.value(i);
        // keep the analytic base so chart seams do not enter the differences
        struct Shim final : AnalyticMap {
            const MapField* u;
            Vec value(const DomainGrid&, Index i) const override { return u->value(i); }
            Mat du_frame(const DomainGrid&, Index i) const override { return u->du_frame(i); }
        };
        auto shim = std::make_shared<Shim>();
        shim->u = &u;
        auto ut = MapField::displaced(g, u.target(), shim, std::move(vals));
        return phi_energy(ut, 3);
    }
    const auto* sphere = dynamic_cast<const SphereTarget*>(&u.target());
    if (sphere != nullptr && u.du_stencil_layers() == 0 && v.has_analytic_derivative()) {
        const double R = sphere->radius();
        PairwiseAccumulator acc;
        for (Index i = 0; i < n; ++i) {
            const double w = g.weight(i);
            if (w == 0.0) continue;
            const Vec y = u.value(i) + t * v.value(i);
            const Mat dy = u.du_frame(i) + t * v.derivative(u, i);
            const double yn = y.norm();
            const Vec yhat = y / yn;
            const Mat dproj = (R / yn) * (dy - yhat * (yhat.transpose() * dy));
            acc.add(w * phi_density_from_du(dproj, 3));
        }
        return acc.total();
    }
    for (Index i = 0; i < n; ++i)
        vals[std::size_t(i)] = u.target().project(u.value(i) + t * v.value(i));
    auto ut = MapField::from_values(g, u.target(), std::move(vals));
    return phi_energy(ut, 3);
}

struct FdDerivative {
    double value = 0.0;
    double step = 0.0;
    double error_estimate = 0.0;
};

// Central first derivative with a log-sweep over step sizes; the returned
// value minimizes the Richardson error estimate |D(h) - D(h/2)|.
inline FdDerivative fd_first_derivative(const std::function<double(double)>& E) {
    FdDerivative best;
    best.error_estimate = std::numeric_limits<double>::infinity();
    for (double t = 1e-1; t >= 1e-6; t *= 0.5) {
        const double d1 = (E(t) - E(-t)) / (2.0 * t);
        const double d2 = (E(0.5 * t) - E(-0.5 * t)) / t;
        const double err = std::abs(d1 - d2) / 3.0;
        if (err < best.error_estimate) {
            best = {d2, 0.5 * t, err};
        }
    }
    return best;
}

inline FdDerivative fd_second_derivative(const std::function<double(double)>& E) {
    const double e0 = E(0.0);
    FdDerivative best;
    best.error_estimate = std::numeric_limits<double>::infinity();
    for (double t = 2e-1; t >= 1e-4; t *= 0.5) {
        const double d1 = (E(t) - 2.0 * e0 + E(-t)) / (t * t);
        const double d2 = (E(0.5 * t) - 2.0 * e0 + E(-0.5 * t)) / (0.25 * t * t);
        const double err = std::abs(d1 - d2) / 3.0;
        if (err < best.error_estimate) {
            best = {d2, 0.5 * t, err};
        }
    }
    return best;
}

// Frame coordinates of a domain vector field, per node (for push-forwards).
inline std::vector<Vec> domain_field_frame_coords(const DomainGrid& g,
                                                  const DomainVectorField& X) {
    std::vector<Vec> out(static_cast<std::size_t>(g.node_count()));
    for (Index i = 0; i < g.node_count(); ++i)
        out[std::size_t(i)] = g.frame(i).inverse() * X(g.chart_of(i), g.coords(i));
    return out;
}

}  // namespace phi3
