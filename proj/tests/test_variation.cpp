#include "phi3/variation.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace phi3;

namespace {

// Literal triple-sum oracle for d_(3)u(X).
Vec d3_by_triple_sum(const Mat& du, const Vec& x_frame) {
    const int m = int(du.cols());
    Vec out = Vec::Zero(du.rows());
    const Vec duX = du * x_frame;
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k)
            out += duX.dot(du.col(j)) * du.col(j).dot(du.col(k)) * du.col(k);
    return out;
}

MapField torus_linear(const DomainGrid& grid, const EuclideanTarget& target, const Mat& A) {
    return MapField::analytic(grid, target,
                              std::make_shared<LinearChartMap>(A, Vec::Zero(A.rows())));
}

// Smooth map from the 2-torus into R^3 with an FD differential.
MapField torus_smooth_map(const DomainGrid& grid, const EuclideanTarget& target,
                          double amp = 1.0) {
    std::vector<Vec> vals(static_cast<std::size_t>(grid.node_count()));
    for (Index i = 0; i < grid.node_count(); ++i) {
        const Vec x = grid.coords(i);
        Vec v(3);
        v << std::sin(x[0]) + 0.3 * std::cos(2.0 * x[1]), std::cos(x[0] + x[1]),
            amp * std::sin(x[1]);
        vals[std::size_t(i)] = v;
    }
    return MapField::from_values(grid, target, vals);
}

}  // namespace

TEST_CASE("d3 form closed forms and triple-sum oracle") {
    auto grid = DomainGrid::flat_torus(2, 16);
    EuclideanTarget r3(3);

    auto uc = MapField::analytic(grid, r3, std::make_shared<ConstantMap>(Vec::Zero(3), 2));
    Vec e1 = Vec::Zero(2);
    e1[0] = 1.0;
    REQUIRE(d3_form(uc, 3, e1).norm() == 0.0);

    EuclideanTarget r2(2);
    auto id = torus_linear(grid, r2, Mat::Identity(2, 2));
    REQUIRE((d3_form(id, 5, e1) - id.du_frame(5).col(0)).norm() < 1e-14);

    Rng rng(41);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        Mat A(3, 2);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 2; ++j) A(i, j) = gauss(rng);
        auto u = torus_linear(grid, r3, A);
        Vec x(2);
        x << gauss(rng), gauss(rng);
        const Vec lhs = d3_form(u, 7, x);
        const Vec rhs = d3_by_triple_sum(u.du_frame(7), x);
        REQUIRE((lhs - rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
    }
}

TEST_CASE("tension field vanishes for constant and linear maps") {
    auto grid = DomainGrid::flat_torus(2, 16);
    EuclideanTarget r3(3);
    auto uc = MapField::analytic(grid, r3, std::make_shared<ConstantMap>(Vec::Zero(3), 2));
    REQUIRE(euler_lagrange_residual(uc) == 0.0);

    Mat A(3, 2);
    A << 1.0, 0.5, -0.25, 2.0, 0.0, 1.0;
    auto ul = torus_linear(grid, r3, A);
    REQUIRE(euler_lagrange_residual(ul) < 1e-12);
}

TEST_CASE("sphere identity tension decays at order >= 1.9") {
    std::vector<double> logh, logres;
    for (int n : {24, 48, 96}) {
        auto grid = DomainGrid::round_sphere(2, 1.0, n);
        SphereTarget s2(2, 1.0);
        auto id = MapField::analytic(grid, s2, std::make_shared<SphereIdentityMap>());
        // FD-backed copy: measures the discrete tension of the sampled map
        std::vector<Vec> vals(static_cast<std::size_t>(grid.node_count()));
        for (Index i = 0; i < grid.node_count(); ++i) vals[std::size_t(i)] = id.value(i);
        auto u = MapField::from_values(grid, s2, vals);
        const double res = euler_lagrange_residual(u);
        logh.push_back(std::log(grid.spacing(0)));
        logres.push_back(std::log(res));
    }
    const double order = fitted_slope(logh, logres);
    INFO("tension residual order " << order);
    REQUIRE(order >= 1.9);
}

TEST_CASE("perturbed maps have strictly positive residual") {
    auto grid = DomainGrid::flat_torus(2, 24);
    EuclideanTarget r3(3);
    auto u = torus_smooth_map(grid, r3);
    REQUIRE(euler_lagrange_residual(u) > 1e-3);
}

TEST_CASE("first variation against the FD slope") {
    auto grid = DomainGrid::flat_torus(2, 32);
    EuclideanTarget r3(3);
    Rng rng(43);

    // constant map: first variation vanishes for every v
    auto uc = MapField::analytic(grid, r3, std::make_shared<ConstantMap>(Vec::Zero(3), 2));
    auto v0 = random_variation(uc, rng, 1.0);
    REQUIRE(first_variation(uc, v0) == 0.0);

    // generic smooth map against the central difference of the energy
    auto u = torus_smooth_map(grid, r3);
    auto v = random_variation(u, rng, 1.0);
    const double lhs = first_variation(u, v);
    auto E = [&](double t) { return perturbed_energy(u, v, t); };
    const auto fd = fd_first_derivative(E);
    INFO("formula " << lhs << " fd " << fd.value << " at step " << fd.step);
    REQUIRE(std::abs(lhs - fd.value) <= 1e-3 * (std::abs(fd.value) + 1e-12));

    // antisymmetry under v -> -v
    auto vneg = v;
    vneg.negate();
    REQUIRE(first_variation(u, vneg) == Catch::Approx(-lhs));
}

TEST_CASE("first variation vanishes at discretely harmonic maps") {
    auto grid = DomainGrid::flat_torus(2, 32);
    EuclideanTarget r3(3);
    Mat A(3, 2);
    A << 1.0, 0.0, 0.0, 1.0, 0.5, -0.5;
    auto u = torus_linear(grid, r3, A);
    Rng rng(47);
    auto v = random_variation(u, rng, 1.0);
    REQUIRE(std::abs(first_variation(u, v)) < 1e-10);
}

TEST_CASE("stress-energy closed forms") {
    auto grid = DomainGrid::flat_torus(2, 16);
    EuclideanTarget r2(2);

    auto uc = MapField::analytic(grid, r2, std::make_shared<ConstantMap>(Vec::Zero(2), 2));
    REQUIRE(stress_energy_at(uc, 0).norm() == 0.0);

    // identity on the flat 2-torus: S = -(2/3) I
    auto id = torus_linear(grid, r2, Mat::Identity(2, 2));
    REQUIRE((stress_energy_at(id, 0) + (2.0 / 3.0) * Mat::Identity(2, 2)).norm() < 1e-13);

    // U = diag(1,2,3) -> S = diag(5, -2, -21)
    auto g3 = DomainGrid::flat_torus(3, 8);
    EuclideanTarget r3(3);
    Mat A = Mat::Zero(3, 3);
    A.diagonal() << 1.0, std::sqrt(2.0), std::sqrt(3.0);
    auto u = MapField::analytic(g3, r3, std::make_shared<LinearChartMap>(A, Vec::Zero(3)));
    Mat expect = Mat::Zero(3, 3);
    expect.diagonal() << 5.0, -2.0, -21.0;
    REQUIRE((stress_energy_at(u, 0) - expect).norm() < 1e-12);
}

TEST_CASE("stress tensor symmetry and trace identity") {
    auto grid = DomainGrid::flat_torus(2, 24);
    EuclideanTarget r3(3);
    auto u = torus_smooth_map(grid, r3);
    auto st = stress_energy(u);
    REQUIRE(st.max_asymmetry() <= 1e-10);
    const int m = 2;
    for (Index i = 0; i < grid.node_count(); i += 17) {
        if (!st.defined[std::size_t(i)]) continue;
        const Mat U = pullback_metric(u, i).U;
        const double trU3 = (U * U * U).trace();
        REQUIRE(std::abs(st.S[std::size_t(i)].trace() - (m / 6.0 - 1.0) * trU3) <= 1e-10);
    }
}

TEST_CASE("two first-variation formulas agree") {
    EuclideanTarget r3(3);
    DomainVectorField X = [](int, const Vec& x) {
        Vec v(2);
        v << std::sin(x[0]) * std::cos(x[1]), std::cos(x[0]);
        return v;
    };

    // X = 0 and constant u vanish
    {
        auto grid = DomainGrid::flat_torus(2, 48);
        auto u = torus_smooth_map(grid, r3);
        DomainVectorField zero = [](int, const Vec& x) { return Vec(Vec::Zero(x.size())); };
        REQUIRE(first_variation_diffeo(u, zero) == 0.0);
        auto uc = MapField::analytic(grid, r3, std::make_shared<ConstantMap>(Vec::Zero(3), 2));
        REQUIRE(first_variation_diffeo(uc, X) == 0.0);
    }

    // discretely harmonic linear map: both sides vanish to rounding
    {
        auto grid = DomainGrid::flat_torus(2, 32);
        Mat A(3, 2);
        A << 1.0, 0.3, -0.4, 1.1, 0.2, 0.0;
        auto ul = torus_linear(grid, r3, A);
        const double lhs = first_variation_diffeo(ul, X);
        auto duX = VariationField::pushforward(ul, domain_field_frame_coords(grid, X));
        const double rhs = first_variation(ul, duX);
        REQUIRE(std::abs(lhs - rhs) <= 1e-10);
    }

    // generic map: the single-grid evaluations differ at O(h^2); the
    // Richardson-extrapolated evaluations agree to 1e-6 relative.
    double dif[3], pf[3];
    int lev = 0;
    for (int n : {48, 96, 192}) {
        auto grid = DomainGrid::flat_torus(2, n);
        auto u = torus_smooth_map(grid, r3);
        dif[lev] = first_variation_diffeo(u, X);
        auto duX = VariationField::pushforward(u, domain_field_frame_coords(grid, X));
        pf[lev] = first_variation(u, duX);
        ++lev;
    }
    const double lhs = richardson3(dif[0], dif[1], dif[2]);
    const double rhs = richardson3(pf[0], pf[1], pf[2]);
    INFO("diffeo " << lhs << " pushforward " << rhs);
    REQUIRE(std::abs(lhs - rhs) <= 1e-6 * (std::abs(rhs) + 1e-12));
}

TEST_CASE("conservation residual vanishes for constants and decays for smooth maps") {
    EuclideanTarget r3(3);
    DomainVectorField X = [](int, const Vec& x) {
        Vec v(2);
        v << std::cos(x[1]), std::sin(x[0]);
        return v;
    };

    auto g0 = DomainGrid::flat_torus(2, 16);
    auto uc = MapField::analytic(g0, r3, std::make_shared<ConstantMap>(Vec::Zero(3), 2));
    REQUIRE(conservation_residual(uc, X).sup_norm == 0.0);

    // discretely harmonic linear map: residual at the rounding floor
    Mat A(3, 2);
    A << 1.0, 0.25, 0.0, 1.0, -0.5, 0.75;
    auto ul = torus_linear(g0, r3, A);
    REQUIRE(conservation_residual(ul, X).sup_norm < 1e-11);

    std::vector<double> logh, logres;
    for (int n : {64, 128, 256}) {
        auto grid = DomainGrid::flat_torus(2, n);
        auto u = torus_smooth_map(grid, r3);
        const auto rep = conservation_residual(u, X);
        logh.push_back(std::log(grid.spacing(0)));
        logres.push_back(std::log(rep.sup_norm));
    }
    const double order = fitted_slope(logh, logres);
    INFO("conservation order " << order);
    REQUIRE(order >= 1.9);
}

TEST_CASE("stokes balance on a flat pole grid") {
    EuclideanTarget r3(3);
    auto grid = DomainGrid::rotational_pole(3, CurvatureProfile::flat(), 1.0, 40);

    // constant map: both sides vanish
    auto uc = MapField::analytic(grid, r3, std::make_shared<ConstantMap>(Vec::Zero(3), 3));
    auto rep0 = stokes_balance(uc, radial_field(), 0.6);
    REQUIRE(rep0.boundary_term == 0.0);
    REQUIRE(rep0.bulk_term == 0.0);

    // linear map, X = r d/dr
    Mat A(3, 3);
    A << 1.0, 0.2, 0.0, 0.0, 0.8, 0.1, -0.3, 0.0, 1.1;
    auto u = MapField::analytic(grid, r3, std::make_shared<LinearChartMap>(A, Vec::Zero(3)));
    auto rep = stokes_balance(u, radial_field(), 0.6);
    INFO("boundary " << rep.boundary_term << " bulk " << rep.bulk_term);
    REQUIRE(std::abs(rep.residual) <= 1e-3 * std::abs(rep.bulk_term));

    // harmonic maps drop the conservation term: boundary = pairing alone
    PairwiseAccumulator acc;
    const double sigma = 3.0 * grid.spacing(0);
    for (Index i = 0; i < grid.node_count(); ++i) {
        const double cut = DomainGrid::ball_cutoff(grid.radial(i), 0.6, sigma);
        if (cut == 0.0) continue;
        acc.add(cut * grid.weight(i) * stress_pairing(u, i, radial_field()));
    }
    REQUIRE(std::abs(rep.boundary_term - acc.total()) <=
            2e-3 * (std::abs(rep.boundary_term) + 1e-12));

    REQUIRE_THROWS_AS(stokes_balance(u, radial_field(), 0.999), Error);
}

TEST_CASE("second variation: zero map, symmetry, FD Hessian at harmonic maps") {
    auto grid = DomainGrid::flat_torus(2, 32);
    EuclideanTarget r3(3);
    Rng rng(53);

    // u constant: I identically zero
    auto uc = MapField::analytic(grid, r3, std::make_shared<ConstantMap>(Vec::Zero(3), 2));
    auto va = random_variation(uc, rng, 1.0);
    auto vb = random_variation(uc, rng, 1.0);
    REQUIRE(second_variation(uc, va, vb) == 0.0);

    // symmetry at a generic map
    auto u = torus_smooth_map(grid, r3);
    auto V = random_variation(u, rng, 1.0);
    auto W = random_variation(u, rng, 1.0);
    const double ivw = second_variation(u, V, W);
    const double iwv = second_variation(u, W, V);
    REQUIRE(std::abs(ivw - iwv) <= 1e-8 * (std::abs(ivw) + 1e-12));

    // discretely harmonic linear map: I(V,V) equals the FD second derivative
    Mat A(3, 2);
    A << 1.0, 0.3, -0.2, 0.9, 0.4, 0.0;
    auto ul = torus_linear(grid, r3, A);
    auto Vl = random_variation(ul, rng, 1.0);
    const double ivv = second_variation(ul, Vl, Vl);
    auto E = [&](double t) { return perturbed_energy(ul, Vl, t); };
    const auto fd = fd_second_derivative(E);
    INFO("I(V,V) " << ivv << " fd " << fd.value << " step " << fd.step);
    REQUIRE(std::abs(ivv - fd.value) <= 1e-2 * (std::abs(fd.value) + 1e-12));
}

TEST_CASE("second variation on the sphere uses the Gauss-equation curvature") {
    // identity of S^2 is Phi3-harmonic; check symmetry and the FD Hessian
    auto grid = DomainGrid::round_sphere(2, 1.0, 48);
    SphereTarget s2(2, 1.0);
    auto u = MapField::analytic(grid, s2, std::make_shared<SphereIdentityMap>());

    Vec ax = Vec::Zero(3);
    ax[2] = 1.0;
    auto V = VariationField::tangential_axis(u, ax);
    Vec ay = Vec::Zero(3);
    ay[0] = 1.0;
    auto W = VariationField::tangential_axis(u, ay);

    const double ivw = second_variation(u, V, W);
    const double iwv = second_variation(u, W, V);
    REQUIRE(std::abs(ivw - iwv) <= 1e-8 * std::max(std::abs(ivw), 1.0));

    const double ivv = second_variation(u, V, V);
    auto E = [&](double t) { return perturbed_energy(u, V, t); };
    const auto fd = fd_second_derivative(E);
    INFO("I(V,V) " << ivv << " fd " << fd.value);
    REQUIRE(std::abs(ivv - fd.value) <= 1e-2 * (std::abs(fd.value) + 1e-12));
}

TEST_CASE("mutations break the identities") {
    EuclideanTarget r3(3);
    auto grid = DomainGrid::flat_torus(2, 32);
    auto u = torus_smooth_map(grid, r3);
    DomainVectorField X = [](int, const Vec& x) {
        Vec v(2);
        v << std::cos(x[1]), std::sin(x[0]);
        return v;
    };
    const double clean = conservation_residual(u, X).sup_norm;
    const double flipped = conservation_residual(u, X, Mutation::FlipTensionSign).sup_norm;
    REQUIRE(flipped > 10.0 * clean);
}
