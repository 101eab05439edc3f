#pragma once

#include "phi3/common.hpp"
#include "phi3/variation.hpp"

namespace phi3 {

struct FlowTrace {
    struct Entry {
        int step = 0;
        double energy = 0.0;
        double step_size = 0.0;
        double residual = -1.0;  // -1 when not evaluated
        double ratio = 0.0;      // E_{l+1} / E_l for homotopy runs
    };
    std::vector<Entry> entries;

    bool energies_nonincreasing() const {
        for (std::size_t k = 1; k < entries.size(); ++k)
            if (entries[k].energy > entries[k - 1].energy) return false;
        return true;
    }
};

// ---------------------------------------------------------------------------
// Gradient flow
// ---------------------------------------------------------------------------

struct GradientFlowOptions {
    int max_steps = 500;
    double initial_step = 1e-2;
    double residual_tol = 1e-8;
    double grow = 1.3;
    double min_step = 1e-14;
    bool record_residual = true;
};

struct GradientFlowResult {
    std::vector<Vec> values;  // final nodal values
    FlowTrace trace;
    bool converged = false;
    bool stalled = false;
    double final_energy = 0.0;
    double final_residual = 0.0;
};

// Discrete steepest descent u <- Pi(u + dt tau(u)) with a backtracking step
// rule: dt halves on energy increase and grows gently on success, so the
// recorded energies decrease strictly until termination.
inline GradientFlowResult gradient_flow(const MapField& u0,
                                        const GradientFlowOptions& opt = {}) {
    const DomainGrid& g = u0.grid();
    const EmbeddedTarget& N = u0.target();
    const Index n = g.node_count();
    require(g.closed(), "gradient_flow expects a closed or periodic grid");

    // flat targets with an analytic base keep the state as a displacement,
    // so chart seams never enter the differences; curved targets evolve
    // absolute (projected) values
    const bool flat = N.normal_frame(u0.value(0)).rows() == 0;
    const bool displaced = flat && u0.is_analytic();

    std::vector<Vec> vals(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
        vals[std::size_t(i)] = displaced ? Vec(Vec::Zero(N.ambient_dim())) : u0.value(i);

    struct Shim final : AnalyticMap {
        const MapField* u = nullptr;
        Vec value(const DomainGrid&, Index i) const override { return u->value(i); }
        Mat du_frame(const DomainGrid&, Index i) const override { return u->du_frame(i); }
    };
    auto shim = std::make_shared<Shim>();
    shim->u = &u0;

    GradientFlowResult res;
    auto make_field = [&](const std::vector<Vec>& v) {
        return displaced ? MapField::displaced(g, N, shim, v) : MapField::from_values(g, N, v);
    };

    double dt = opt.initial_step;
    MapField u = make_field(vals);
    double energy = phi_energy(u, 3);
    const double e0 = energy;
    for (int step = 0; step < opt.max_steps; ++step) {
        const VariationField tau = tension_field(u);
        double res_norm = 0.0;
        {
            PairwiseAccumulator acc;
            for (Index i = 0; i < n; ++i)
                if (tau.in_support(i)) acc.add(g.weight(i) * tau.value(i).squaredNorm());
            res_norm = std::sqrt(acc.total());
        }
        res.trace.entries.push_back({step, energy, dt, res_norm, 0.0});
        if (res_norm <= opt.residual_tol || energy <= 1e-30 * (1.0 + e0)) {
            res.converged = true;
            break;
        }
        // backtracking line search along tau
        bool accepted = false;
        while (dt >= opt.min_step) {
            std::vector<Vec> trial(static_cast<std::size_t>(n));
            for (Index i = 0; i < n; ++i)
                trial[std::size_t(i)] =
                    N.project(vals[std::size_t(i)] + dt * tau.value(i));
            MapField ut = make_field(trial);
            const double et = phi_energy(ut, 3);
            if (et < energy) {
                vals.swap(trial);
                u = make_field(vals);
                energy = et;
                dt *= opt.grow;
                accepted = true;
                break;
            }
            dt *= 0.5;
        }
        if (!accepted) {
            res.stalled = true;
            break;
        }
    }
    if (displaced)
        for (Index i = 0; i < n; ++i) vals[std::size_t(i)] += u0.value(i);
    res.values = std::move(vals);
    res.final_energy = energy;
    res.final_residual = res.trace.entries.empty() ? 0.0 : res.trace.entries.back().residual;
    return res;
}

// ---------------------------------------------------------------------------
// Conformal flows on spheres
// ---------------------------------------------------------------------------

namespace detail {

struct FlowFrame {
    double theta0 = 0.0, theta_t = 0.0;
    double sin0 = 0.0, sin_t = 0.0, cos_t = 0.0;
    Vec w;       // unit vector completing the (axis, w) great-circle plane
    bool at_pole = false;
    double pole_scale = 1.0;
};

// Flow of the tangential gradient field of the height function <axis, p>:
// the polar angle theta from the axis obeys theta' = -sin(theta)/R, solved
// as tan(theta_t/2) = e^{-t/R} tan(theta_0/2). Exact and invertible.
inline FlowFrame conformal_frame(const Vec& p, const Vec& axis, double t, double R) {
    FlowFrame f;
    const double c = std::clamp(p.dot(axis) / R, -1.0, 1.0);
    f.theta0 = std::acos(c);
    f.sin0 = std::sin(f.theta0);
    if (f.sin0 < 1e-12) {
        f.at_pole = true;
        f.pole_scale = (c > 0.0) ? std::exp(-t / R) : std::exp(t / R);
        return f;
    }
    f.w = (p / R - c * axis) / f.sin0;
    const double half = std::tan(0.5 * f.theta0) * std::exp(-t / R);
    f.theta_t = 2.0 * std::atan(half);
    f.sin_t = std::sin(f.theta_t);
    f.cos_t = std::cos(f.theta_t);
    return f;
}

}  // namespace detail

inline Vec conformal_flow_point(const Vec& p, const Vec& axis, double t, double R) {
    const auto f = detail::conformal_frame(p, axis, t, R);
    if (f.at_pole) return p;
    return R * (f.cos_t * axis + f.sin_t * f.w);
}

// Push a tangent vector at p through the time-t flow differential. The
// differential is conformal with factor sin(theta_t)/sin(theta_0); the polar
// direction rotates with the point, transverse directions are unchanged.
inline Vec conformal_flow_push(const detail::FlowFrame& f, const Vec& axis, const Vec& xi) {
    if (f.at_pole) return f.pole_scale * xi;
    const double mu = f.sin_t / f.sin0;
    const Vec tau0 = -f.sin0 * axis + std::cos(f.theta0) * f.w;
    const Vec tau_t = -f.sin_t * axis + f.cos_t * f.w;
    const double a = xi.dot(tau0);
    return mu * (a * tau_t + (xi - a * tau0));
}

// Compose u with the time-t conformal flow toward the pole `axis` of its
// sphere target; values stay on the sphere and the differential is updated
// by the exact chain rule.
inline MapField conformal_shrink_step(const MapField& u, const Vec& axis, double t) {
    const auto* sphere = dynamic_cast<const SphereTarget*>(&u.target());
    require(sphere != nullptr, "conformal_shrink_step needs a sphere target");
    require(std::abs(axis.norm() - 1.0) <= 1e-10, "flow axis must be a unit vector");
    require(std::abs(t) <= 1.0 + 1e-12, "flow time restricted to |t| <= 1");
    const double R = sphere->radius();
    const DomainGrid& g = u.grid();
    const Index n = g.node_count();
    std::vector<Vec> vals(static_cast<std::size_t>(n));
    std::vector<Mat> du(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const Vec p = u.value(i);
        const auto f = detail::conformal_frame(p, axis, t, R);
        vals[std::size_t(i)] = f.at_pole ? p : Vec(R * (f.cos_t * axis + f.sin_t * f.w));
        const Mat d = u.du_defined(i) ? u.du_frame(i) : Mat::Zero(u.ambient_dim(), g.dim());
        Mat nd(d.rows(), d.cols());
        for (int a = 0; a < d.cols(); ++a) nd.col(a) = conformal_flow_push(f, axis, d.col(a));
        du[std::size_t(i)] = nd;
    }
    return MapField::from_values_and_du(g, u.target(), std::move(vals), std::move(du));
}

// Energy of the flowed map without materializing it.
inline double flowed_energy(const MapField& u, const Vec& axis, double t) {
    const auto* sphere = dynamic_cast<const SphereTarget*>(&u.target());
    require(sphere != nullptr, "flowed_energy needs a sphere target");
    const double R = sphere->radius();
    const DomainGrid& g = u.grid();
    PairwiseAccumulator acc;
    for (Index i = 0; i < g.node_count(); ++i) {
        const double w = g.weight(i);
        if (w == 0.0 || !u.du_defined(i)) continue;
        const auto f = detail::conformal_frame(u.value(i), axis, t, R);
        const Mat d = u.du_frame(i);
        Mat nd(d.rows(), d.cols());
        for (int a = 0; a < d.cols(); ++a) nd.col(a) = conformal_flow_push(f, axis, d.col(a));
        acc.add(w * phi_density_from_du(nd, 3));
    }
    return acc.total();
}

// ---------------------------------------------------------------------------
// Homotopy shrinking on SSU sphere targets
// ---------------------------------------------------------------------------

// kappa: instability gap per unit energy (second derivative <= -6 kappa E);
// xi: third-derivative bound per unit energy, floored at 6 kappa so that
// zeta = 5 kappa / xi <= 5/6 and rho = 1 - kappa zeta^2 / 2 < 1.
struct ShrinkSchedule {
    double kappa = 0.0;
    double xi = 0.0;
    double xi_measured = 0.0;  // before the 6 kappa floor
    double zeta = 0.0;
    double rho_predicted = 1.0;
};

struct HomotopyResult {
    FlowTrace trace;
    ShrinkSchedule schedule;       // from the first iteration
    std::vector<int> axes;         // chosen ambient axis per step
    std::vector<double> times;     // signed flow time per step
    double initial_energy = 0.0;
    double final_energy = 0.0;
    double empirical_rho = 0.0;    // max step ratio
    bool descent_axis_found = true;
    bool geometric_decay = false;  // E_L <= empirical_rho^L E_0
};

inline HomotopyResult homotopy_shrink(const MapField& u0, int iterations,
                                      bool diagnostic = false) {
    const auto* sphere = dynamic_cast<const SphereTarget*>(&u0.target());
    require(sphere != nullptr, "homotopy_shrink needs a sphere target");
    if (!diagnostic)
        require(sphere->intrinsic_dim() > 6,
                "homotopy_shrink: target sphere dimension must exceed 6");
    const int q = sphere->ambient_dim();
    const double R = sphere->radius();

    HomotopyResult res;
    MapField state = u0.materialized();
    double energy = phi_energy(state, 3);
    res.initial_energy = energy;
    res.trace.entries.push_back({0, energy, 0.0, -1.0, 1.0});
    if (energy <= 1e-18) {
        res.final_energy = energy;
        res.geometric_decay = true;
        return res;
    }

    const double ht = 0.05;  // derivative probe step in flow time
    double xi_measured_global = 0.0;
    for (int step = 0; step < iterations; ++step) {
        // per-axis first and second derivatives of E(f_t o u) at t = 0
        int best = -1;
        double best_d2 = std::numeric_limits<double>::infinity();
        double best_d1 = 0.0;
        for (int l = 0; l < q; ++l) {
            Vec axis = Vec::Zero(q);
            axis[l] = 1.0;
            const double ep = flowed_energy(state, axis, ht);
            const double em = flowed_energy(state, axis, -ht);
            const double d1 = (ep - em) / (2.0 * ht);
            const double d2 = (ep - 2.0 * energy + em) / (ht * ht);
            if (d2 < best_d2 - 1e-12) {
                best_d2 = d2;
                best_d1 = d1;
                best = l;
            }
        }
        if (best_d2 >= 0.0) {
            res.descent_axis_found = false;
            break;
        }
        Vec axis = Vec::Zero(q);
        axis[best] = 1.0;
        const double sign = (best_d1 <= 0.0) ? 1.0 : -1.0;

        const double kappa = -best_d2 / (6.0 * energy);
        if (step == 0) {
            // third-derivative bound over |t| <= 1, sampled per axis
            for (int l = 0; l < q; ++l) {
                Vec ax = Vec::Zero(q);
                ax[l] = 1.0;
                const double h3 = 0.5;
                const double e2p = flowed_energy(state, ax, 2.0 * h3);
                const double e1p = flowed_energy(state, ax, h3);
                const double e1m = flowed_energy(state, ax, -h3);
                const double e2m = flowed_energy(state, ax, -2.0 * h3);
                const double d3 = (e2p - 2.0 * e1p + 2.0 * e1m - e2m) / (2.0 * h3 * h3 * h3);
                xi_measured_global = std::max(xi_measured_global, std::abs(d3) / energy);
            }
        }
        const double xi = std::max(xi_measured_global, 6.0 * kappa);
        const double zeta = 5.0 * kappa / xi;  // <= 5/6 by the floor
        const double rho_pred = 1.0 - 0.5 * kappa * zeta * zeta;
        if (step == 0) {
            res.schedule = {kappa, xi, xi_measured_global, zeta, rho_pred};
        }

        state = conformal_shrink_step(state, axis, sign * zeta);
        const double next = phi_energy(state, 3);
        const double ratio = next / energy;
        res.axes.push_back(best);
        res.times.push_back(sign * zeta);
        res.trace.entries.push_back({step + 1, next, zeta, -1.0, ratio});
        energy = next;
    }
    res.final_energy = energy;
    double max_ratio = 0.0;
    for (std::size_t k = 1; k < res.trace.entries.size(); ++k)
        max_ratio = std::max(max_ratio, res.trace.entries[k].ratio);
    res.empirical_rho = max_ratio;
    const int steps_taken = int(res.trace.entries.size()) - 1;
    res.geometric_decay =
        steps_taken > 0 &&
        res.final_energy <=
            std::pow(res.empirical_rho, steps_taken) * res.initial_energy * (1.0 + 1e-9);
    return res;
}

}  // namespace phi3
