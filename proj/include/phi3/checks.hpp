#pragma once

#include "phi3/flow.hpp"
#include "phi3/liouville.hpp"
#include "phi3/ssu.hpp"

namespace phi3 {

struct CheckResult {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;
    double order = -1.0;  // refinement order estimate, -1 when not applicable
    bool pass = false;
};

namespace checks {

inline MapField torus_smooth(const DomainGrid& grid, const EuclideanTarget& target) {
    std::vector<Vec> vals(static_cast<std::size_t>(grid.node_count()));
    for (Index i = 0; i < grid.node_count(); ++i) {
        const Vec x = grid.coords(i);
        Vec v(3);
        v << std::sin(x[0]) + 0.3 * std::cos(2.0 * x[1]), std::cos(x[0] + x[1]),
            0.7 * std::sin(x[1]);
        vals[std::size_t(i)] = v;
    }
    return MapField::from_values(grid, target, vals);
}

inline MapField perturbed_sphere_identity(const DomainGrid& grid, const SphereTarget& s,
                                          double amplitude) {
    std::vector<Vec> vals(static_cast<std::size_t>(grid.node_count()));
    for (Index i = 0; i < grid.node_count(); ++i) {
        const Vec p = grid.ambient_point(i);
        Vec d(3);
        d << std::sin(2.0 * p[1]) * p[2], std::cos(p[0] + p[2]), std::sin(p[0]) * p[1];
        vals[std::size_t(i)] = s.project(p + amplitude * d);
    }
    return MapField::from_values(grid, s, vals);
}

inline CheckResult eigenvalue_identity(int samples) {
    Rng rng(7001);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double worst = 0.0;
    for (int rep = 0; rep < samples; ++rep) {
        const int m = 2 + rep % 6;
        Mat A(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) A(i, j) = gauss(rng);
        const Mat U = A * A.transpose();
        Eigen::MatrixXd dense = U;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense);
        double eig = 0.0;
        for (int i = 0; i < m; ++i) eig += std::pow(es.eigenvalues()[i], 3);
        eig /= 6.0;
        const double tr = phi_energy_density({U}, 3);
        worst = std::max(worst, std::abs(tr - eig) / (1.0 + std::abs(eig)));
    }
    return {"energy.eigenvalue_identity", 0.0, 0.0, worst, -1.0, worst <= 1e-10};
}

inline CheckResult frame_invariance(int samples) {
    Rng rng(7003);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double worst = 0.0;
    for (int rep = 0; rep < samples; ++rep) {
        const int m = 2 + rep % 6;
        Mat A(m, m), G(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                A(i, j) = gauss(rng);
                G(i, j) = gauss(rng);
            }
        const Mat U = A * A.transpose();
        Eigen::MatrixXd gd = G;
        const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(gd).householderQ();
        const Mat V = Mat(Q.transpose() * U * Q);
        const double a = phi_energy_density({U}, 3);
        const double b = phi_energy_density({V}, 3);
        worst = std::max(worst, std::abs(a - b) / (1.0 + std::abs(a)));
    }
    return {"energy.frame_invariance", 0.0, 0.0, worst, -1.0, worst <= 1e-10};
}

inline CheckResult energy_refinement(bool full) {
    EuclideanTarget r3(3);
    std::vector<double> energies, spacings;
    for (int n : (full ? std::vector<int>{32, 64, 128, 256} : std::vector<int>{16, 32, 64, 128})) {
        auto grid = DomainGrid::flat_torus(2, n);
        energies.push_back(phi_energy(torus_smooth(grid, r3), 3));
        spacings.push_back(grid.spacing(0));
    }
    const double ref = energies.back() + (energies.back() - energies[energies.size() - 2]) / 3.0;
    std::vector<double> lh, le;
    for (std::size_t k = 0; k + 1 < energies.size(); ++k) {
        lh.push_back(std::log(spacings[k]));
        le.push_back(std::log(std::abs(energies[k] - ref) + 1e-300));
    }
    const double order = fitted_slope(lh, le);
    return {"energy.refinement_order", energies.back(), ref, std::abs(energies.back() - ref),
            order, order >= 1.9};
}

inline CheckResult first_variation_fd(bool full, Mutation mut) {
    EuclideanTarget r3(3);
    auto grid = DomainGrid::flat_torus(2, full ? 64 : 32);
    auto u = torus_smooth(grid, r3);
    Rng rng(7010);
    auto v = random_variation(u, rng, 1.0);
    const double lhs = first_variation(u, v, mut);
    auto E = [&](double t) { return perturbed_energy(u, v, t); };
    const auto fd = fd_first_derivative(E);
    const double rel = std::abs(lhs - fd.value) / (std::abs(fd.value) + 1e-12);
    return {"variation.first_variation_fd", lhs, fd.value, rel, -1.0, rel <= 1e-3};
}

inline CheckResult first_variation_fd_sphere(bool full, Mutation mut) {
    SphereTarget s2(2, 1.0);
    auto grid = DomainGrid::round_sphere(2, 1.0, full ? 64 : 32);
    auto u = perturbed_sphere_identity(grid, s2, 0.15);
    Rng rng(7011);
    auto v = random_variation(u, rng, 1.0);
    const double lhs = first_variation(u, v, mut);
    auto E = [&](double t) { return perturbed_energy(u, v, t); };
    const auto fd = fd_first_derivative(E);
    const double rel = std::abs(lhs - fd.value) / (std::abs(fd.value) + 1e-12);
    return {"variation.first_variation_fd_sphere", lhs, fd.value, rel, -1.0, rel <= 1e-3};
}

inline CheckResult dual_first_variation_linear(Mutation mut) {
    EuclideanTarget r3(3);
    auto grid = DomainGrid::flat_torus(2, 32);
    Mat A(3, 2);
    A << 1.0, 0.3, -0.4, 1.1, 0.2, 0.0;
    auto u = MapField::analytic(grid, r3, std::make_shared<LinearChartMap>(A, Vec::Zero(3)));
    DomainVectorField X = [](int, const Vec& x) {
        Vec v(2);
        v << std::sin(x[0]) * std::cos(x[1]), std::cos(x[0]);
        return v;
    };
    const double lhs = first_variation_diffeo(u, X, mut);
    auto duX = VariationField::pushforward(u, domain_field_frame_coords(grid, X));
    const double rhs = first_variation(u, duX, mut);
    const double res = std::abs(lhs - rhs);
    return {"variation.dual_first_variation_linear", lhs, rhs, res, -1.0, res <= 1e-10};
}

inline CheckResult dual_first_variation_richardson(bool full, Mutation mut) {
    EuclideanTarget r3(3);
    DomainVectorField X = [](int, const Vec& x) {
        Vec v(2);
        v << std::sin(x[0]) * std::cos(x[1]), std::cos(x[0]);
        return v;
    };
    double dif[3], pf[3];
    int lev = 0;
    for (int n : (full ? std::vector<int>{48, 96, 192} : std::vector<int>{32, 64, 128})) {
        auto grid = DomainGrid::flat_torus(2, n);
        auto u = torus_smooth(grid, r3);
        dif[lev] = first_variation_diffeo(u, X, mut);
        auto duX = VariationField::pushforward(u, domain_field_frame_coords(grid, X));
        pf[lev] = first_variation(u, duX, mut);
        ++lev;
    }
    const double lhs = richardson3(dif[0], dif[1], dif[2]);
    const double rhs = richardson3(pf[0], pf[1], pf[2]);
    const double rel = std::abs(lhs - rhs) / (std::abs(rhs) + 1e-12);
    return {"variation.dual_first_variation_richardson", lhs, rhs, rel, -1.0, rel <= 1e-6};
}

inline CheckResult conservation_order(bool full, Mutation mut) {
    EuclideanTarget r3(3);
    DomainVectorField X = [](int, const Vec& x) {
        Vec v(2);
        v << std::cos(x[1]), std::sin(x[0]);
        return v;
    };
    std::vector<double> lh, lr;
    double sup = 0.0;
    for (int n : (full ? std::vector<int>{64, 128, 256} : std::vector<int>{48, 96, 192})) {
        auto grid = DomainGrid::flat_torus(2, n);
        auto u = torus_smooth(grid, r3);
        sup = conservation_residual(u, X, mut).sup_norm;
        lh.push_back(std::log(grid.spacing(0)));
        lr.push_back(std::log(sup + 1e-300));
    }
    const double order = fitted_slope(lh, lr);
    return {"variation.conservation_order", sup, 0.0, sup, order, order >= 1.9};
}

inline CheckResult stokes_residual(Mutation mut) {
    EuclideanTarget r3(3);
    auto grid = DomainGrid::rotational_pole(3, CurvatureProfile::flat(), 1.0, 40);
    Mat A(3, 3);
    A << 1.0, 0.2, 0.0, 0.0, 0.8, 0.1, -0.3, 0.0, 1.1;
    auto u = MapField::analytic(grid, r3, std::make_shared<LinearChartMap>(A, Vec::Zero(3)));
    auto rep = stokes_balance(u, radial_field(), 0.6, mut);
    const double rel = std::abs(rep.residual) / (std::abs(rep.bulk_term) + 1e-12);
    return {"variation.stokes_balance", rep.boundary_term, rep.bulk_term, rel, -1.0,
            rel <= 1e-3};
}

inline CheckResult second_variation_symmetry(Mutation mut) {
    EuclideanTarget r3(3);
    auto grid = DomainGrid::flat_torus(2, 32);
    auto u = torus_smooth(grid, r3);
    Rng rng(7020);
    auto V = random_variation(u, rng, 1.0);
    auto W = random_variation(u, rng, 1.0);
    const double a = second_variation(u, V, W, mut);
    const double b = second_variation(u, W, V, mut);
    const double rel = std::abs(a - b) / std::max(std::abs(a), 1.0);
    return {"variation.second_variation_symmetry", a, b, rel, -1.0, rel <= 1e-8};
}

inline CheckResult second_variation_fd(Mutation mut) {
    EuclideanTarget r3(3);
    auto grid = DomainGrid::flat_torus(2, 32);
    Mat A(3, 2);
    A << 1.0, 0.3, -0.2, 0.9, 0.4, 0.0;
    auto u = MapField::analytic(grid, r3, std::make_shared<LinearChartMap>(A, Vec::Zero(3)));
    Rng rng(7021);
    auto V = random_variation(u, rng, 1.0);
    const double ivv = second_variation(u, V, V, mut);
    auto E = [&](double t) { return perturbed_energy(u, V, t); };
    const auto fd = fd_second_derivative(E);
    const double rel = std::abs(ivv - fd.value) / (std::abs(fd.value) + 1e-12);
    return {"variation.second_variation_fd", ivv, fd.value, rel, -1.0, rel <= 1e-2};
}

inline CheckResult sphere_ssu_closed_form() {
    Rng rng(7030);
    double worst = 0.0;
    bool criteria_ok = true;
    for (int m = 2; m <= 8; ++m) {
        SphereTarget s(m, 1.0);
        const Vec p = s.project(2.0 * random_unit_vector(rng, m + 1));
        const auto form = ssu_form_at(s, p, s.tangent_frame(p));
        worst = std::max(worst, (form.Q - (6.0 - m) * Mat::Identity(m, m)).norm());
        if (form.negative_definite() != (m > 6)) criteria_ok = false;
    }
    for (int m = 2; m <= 20; ++m)
        if (sphere_is_phi3_ssu(m) != (m > 6)) criteria_ok = false;
    return {"ssu.sphere_closed_form", worst, 0.0, worst, -1.0, worst <= 1e-10 && criteria_ok};
}

inline CheckResult ssu_implication(int samples) {
    Rng rng(7031);
    std::uniform_real_distribution<double> unif(0.05, 3.0);
    int counterexamples = 0, hits = 0;
    for (int rep = 0; rep < samples; ++rep) {
        const int m = 2 + rep % 10;
        std::vector<double> l(static_cast<std::size_t>(m));
        for (double& x : l) x = unif(rng);
        PrincipalCurvatures pc(std::move(l));
        if (!hypersurface_phi3_ssu(pc)) continue;
        ++hits;
        for (double p : {2.0, 3.0, 4.0, 5.0, 6.0})
            if (!hypersurface_p_ssu(pc, p)) ++counterexamples;
    }
    return {"ssu.phi3_implies_p", double(hits), 0.0, double(counterexamples), -1.0,
            counterexamples == 0 && hits > 0};
}

inline CheckResult average_variation_consistency() {
    auto grid = DomainGrid::round_sphere(2, 1.0, 32);
    SphereTarget s2(2, 1.0);
    auto u = MapField::analytic(grid, s2, std::make_shared<SphereIdentityMap>());
    auto from = average_variation_from_ssu(u);
    auto into = average_variation_into_ssu(u);
    const double rel = std::abs(from.total - into.total) / (std::abs(into.total) + 1e-12);
    return {"ssu.average_variation_consistency", from.total, into.total, rel, -1.0,
            rel <= 1e-6 && from.bound_holds && into.bound_holds};
}

inline CheckResult lambda_limits() {
    double worst = 0.0;
    worst = std::max(worst,
                     std::abs(lambda_constant(CurvatureProfile::pinched_negative(0.5, 0.5), 8)
                                  .value -
                              2.0));
    worst = std::max(
        worst,
        std::abs(lambda_constant(CurvatureProfile::power_decay(0.0, 0.0, 1.0), 7).value - 1.0));
    worst = std::max(
        worst,
        std::abs(lambda_constant(CurvatureProfile::inverse_square(0.0, 0.0), 9).value - 3.0));
    return {"liouville.lambda_limits", worst, 0.0, worst, -1.0, worst == 0.0};
}

inline CheckResult lambda_condition_bound(int samples) {
    Rng rng(7040);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double worst = -std::numeric_limits<double>::infinity();
    int checked = 0;
    for (int rep = 0; rep < samples; ++rep) {
        const int m = 7 + rep % 4;
        CurvatureProfile p;
        switch (rep % 3) {
            case 0: {
                const double beta = 0.2 + unif(rng);
                const double alpha =
                    beta * (1.0 + unif(rng) * ((m - 1.0) / 6.0 - 1.0) * 0.9);
                p = CurvatureProfile::pinched_negative(alpha, beta);
                break;
            }
            case 1:
                p = CurvatureProfile::power_decay(0.1 * unif(rng), 0.2 * unif(rng), 1.0);
                break;
            default:
                p = CurvatureProfile::inverse_square(0.2 * unif(rng), 0.4 * unif(rng));
                break;
        }
        const auto res = lambda_constant(p, m);
        if (!res.hypotheses_met) continue;
        ++checked;
        worst = std::max(worst, res.value - res.min_condition);
    }
    return {"liouville.lambda_condition_bound", double(checked), 0.0, worst, -1.0,
            checked > samples / 10 && worst <= 1e-8};
}

inline CheckResult monotonicity_flat(bool full) {
    const int n = full ? 12 : 8;
    auto grid = DomainGrid::rotational_pole(7, CurvatureProfile::flat(), 2.0, n);
    EuclideanTarget r7(7);
    auto u = MapField::analytic(
        grid, r7, std::make_shared<LinearChartMap>(Mat::Identity(7, 7), Vec::Zero(7)));
    std::vector<double> radii;
    if (full)
        for (int k = 0; k < 10; ++k) radii.push_back(0.9 + 0.1 * k);
    else
        radii = {1.0, 1.3, 1.6, 1.9};
    auto rep = monotonicity_check(u, 1.0, radii, false);
    auto sharp = monotonicity_check(u, 8.0, radii, false);
    return {"liouville.monotonicity_flat", rep.normalized.front(), rep.normalized.back(),
            rep.pass ? 0.0 : 1.0, -1.0, rep.pass && !sharp.pass};
}

inline CheckResult homotopy_descent(bool full) {
    auto grid = DomainGrid::round_sphere(7, 1.0, full ? 8 : 6, 1);
    SphereTarget s7(7, 1.0);
    auto u = MapField::analytic(grid, s7, std::make_shared<SphereIdentityMap>());
    auto res = homotopy_shrink(u, full ? 5 : 3);
    return {"flow.homotopy_descent", res.initial_energy, res.final_energy, res.empirical_rho,
            -1.0,
            res.descent_axis_found && res.empirical_rho < 1.0 && res.geometric_decay};
}

inline CheckResult gradient_descent_check() {
    auto grid = DomainGrid::flat_torus(2, 16);
    SphereTarget s7(7, 1.0);
    Rng rng(7050);
    const int q = 8;
    Vec c = Vec::Zero(q);
    c[q - 1] = 1.0;
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<Vec> vals(static_cast<std::size_t>(grid.node_count()));
    Vec a1(q), a2(q);
    for (int j = 0; j < q; ++j) {
        a1[j] = unif(rng);
        a2[j] = unif(rng);
    }
    for (Index i = 0; i < grid.node_count(); ++i) {
        const Vec x = grid.coords(i);
        vals[std::size_t(i)] =
            s7.project(c + 0.3 * std::sin(x[0]) * a1 + 0.3 * std::cos(x[1]) * a2);
    }
    auto u0 = MapField::from_values(grid, s7, vals);
    GradientFlowOptions opt;
    opt.max_steps = 2000;
    opt.residual_tol = 1e-12;
    auto res = gradient_flow(u0, opt);
    const double e0 = res.trace.entries.front().energy;
    const double drop = res.final_energy / e0;
    return {"flow.gradient_descent", e0, res.final_energy, drop, -1.0,
            res.trace.energies_nonincreasing() && drop <= 1e-6};
}

}  // namespace checks

// The batched oracle suite behind `verify-suite`: quick uses coarse grids,
// full the acceptance-scale ones. Mutations are injected into the variation
// operators to confirm the checks are not vacuous.
inline std::vector<CheckResult> verify_suite(bool full, Mutation mut = Mutation::None) {
    std::vector<CheckResult> out;
    out.push_back(checks::eigenvalue_identity(full ? 200 : 50));
    out.push_back(checks::frame_invariance(full ? 100 : 30));
    out.push_back(checks::energy_refinement(full));
    out.push_back(checks::first_variation_fd(full, mut));
    out.push_back(checks::first_variation_fd_sphere(full, mut));
    out.push_back(checks::dual_first_variation_linear(mut));
    out.push_back(checks::dual_first_variation_richardson(full, mut));
    out.push_back(checks::conservation_order(full, mut));
    out.push_back(checks::stokes_residual(mut));
    out.push_back(checks::second_variation_symmetry(mut));
    out.push_back(checks::second_variation_fd(mut));
    out.push_back(checks::sphere_ssu_closed_form());
    out.push_back(checks::ssu_implication(full ? 10000 : 1000));
    out.push_back(checks::average_variation_consistency());
    out.push_back(checks::lambda_limits());
    out.push_back(checks::lambda_condition_bound(full ? 1000 : 100));
    out.push_back(checks::monotonicity_flat(full));
    out.push_back(checks::homotopy_descent(full));
    out.push_back(checks::gradient_descent_check());
    return out;
}

inline bool all_pass(const std::vector<CheckResult>& results) {
    for (const auto& r : results)
        if (!r.pass) return false;
    return true;
}

}  // namespace phi3
