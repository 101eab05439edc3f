#include "phi3/energy.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace phi3;

namespace {

// Independent oracle: density via the eigenvalue power sum of U.
double density_by_eigenvalues(const Mat& U, int k) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(U);
    double s = 0.0;
    for (int i = 0; i < es.eigenvalues().size(); ++i)
        s += std::pow(es.eigenvalues()[i], k);
    return s / (2.0 * k);
}

// Independent oracle: the literal triple sum of the k = 3 contraction.
double density3_by_triple_sum(const Mat& U) {
    double s = 0.0;
    for (int i = 0; i < U.rows(); ++i)
        for (int j = 0; j < U.rows(); ++j)
            for (int l = 0; l < U.rows(); ++l) s += U(i, j) * U(j, l) * U(l, i);
    return s / 6.0;
}

Mat random_psd(Rng& rng, int m) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Mat A(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) A(i, j) = gauss(rng);
    return A * A.transpose();
}

}  // namespace

TEST_CASE("density closed forms") {
    // U = I_7, k = 3 -> 7/6
    REQUIRE(phi_energy_density({Mat::Identity(7, 7)}, 3) == Catch::Approx(7.0 / 6.0));
    // U = 0 -> 0 for every k
    for (int k : {1, 2, 3})
        REQUIRE(phi_energy_density({Mat::Zero(4, 4)}, k) == 0.0);
    // U = diag(1,2,3), k = 3 -> (1 + 8 + 27)/6 = 6 (eigenvalue cube-sum oracle)
    Mat U = Mat::Zero(3, 3);
    U.diagonal() << 1.0, 2.0, 3.0;
    REQUIRE(density_by_eigenvalues(U, 3) == Catch::Approx(6.0));
    REQUIRE(phi_energy_density({U}, 3) == Catch::Approx(6.0));
    REQUIRE_THROWS_AS(phi_energy_density({U}, 4), Error);
}

TEST_CASE("density equals the eigenvalue power sum and the literal sum") {
    Rng rng(101);
    for (int rep = 0; rep < 50; ++rep) {
        const Mat U = random_psd(rng, 2 + int(rep % 5));
        for (int k : {1, 2, 3}) {
            const double lhs = phi_energy_density({U}, k);
            const double rhs = density_by_eigenvalues(U, k);
            REQUIRE(std::abs(lhs - rhs) <= 1e-10 * (1.0 + std::abs(rhs)));
        }
        REQUIRE(std::abs(phi_energy_density({U}, 3) - density3_by_triple_sum(U)) <=
                1e-10 * (1.0 + std::abs(density3_by_triple_sum(U))));
    }
}

TEST_CASE("frame invariance under orthogonal conjugation") {
    Rng rng(103);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        const int m = 3 + int(rep % 4);
        const Mat U = random_psd(rng, m);
        Mat G(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) G(i, j) = gauss(rng);
        const Eigen::MatrixXd Qfull =
            Eigen::HouseholderQR<Eigen::MatrixXd>(Eigen::MatrixXd(G)).householderQ();
        const Mat Q = Qfull;
        const Mat V = Q.transpose() * U * Q;
        for (int k : {1, 2, 3}) {
            const double a = phi_energy_density({U}, k);
            const double b = phi_energy_density({V}, k);
            REQUIRE(std::abs(a - b) <= 1e-10 * (1.0 + std::abs(a)));
        }
    }
}

TEST_CASE("monotone consistency: U <= cV implies tr(U^3) <= c^3 tr(V^3)") {
    Rng rng(107);
    std::uniform_real_distribution<double> unif(0.5, 3.0);
    for (int rep = 0; rep < 100; ++rep) {
        const int m = 2 + int(rep % 5);
        const double c = unif(rng);
        // construct U <= cV: U = cV - W with W psd
        const Mat V = random_psd(rng, m);
        Mat W = random_psd(rng, m);
        const Mat cV = c * V;
        for (int tries = 0; tries < 60; ++tries) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Mat(cV - W));
            if (es.eigenvalues().minCoeff() >= 0.0) break;
            W *= 0.5;
        }
        const Mat U = cV - W;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> check(U);
        if (check.eigenvalues().minCoeff() < 0.0) continue;
        const double tU = (U * U * U).trace();
        const double tV = (V * V * V).trace();
        REQUIRE(tU <= c * c * c * tV + 1e-9 * (1.0 + std::abs(tV)));
    }
}

TEST_CASE("pullback metric of basic maps") {
    auto grid = DomainGrid::flat_torus(2, 16);
    EuclideanTarget r3(3);
    Vec c(3);
    c << 1.0, 2.0, 3.0;
    auto uc = MapField::analytic(grid, r3, std::make_shared<ConstantMap>(c, 2));
    REQUIRE(pullback_metric(uc, 5).U.norm() == 0.0);

    EuclideanTarget r2(2);
    auto id = MapField::analytic(
        grid, r2, std::make_shared<LinearChartMap>(Mat::Identity(2, 2), Vec::Zero(2)));
    REQUIRE((pullback_metric(id, 7).U - Mat::Identity(2, 2)).norm() < 1e-12);

    // linear map: U = A^T A against the direct matrix-product oracle
    Rng rng(109);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Mat A(3, 2);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) A(i, j) = gauss(rng);
    auto ul = MapField::analytic(grid, r3, std::make_shared<LinearChartMap>(A, Vec::Zero(3)));
    REQUIRE((pullback_metric(ul, 3).U - Mat(A.transpose() * A)).norm() < 1e-8);
    REQUIRE(pullback_metric(ul, 3).min_eigenvalue() >= -1e-10);
}

TEST_CASE("FD-backed pullback matches the analytic differential on smooth maps") {
    auto grid = DomainGrid::flat_torus(2, 64);
    EuclideanTarget r3(3);
    std::vector<Vec> vals(std::size_t(grid.node_count()));
    for (Index i = 0; i < grid.node_count(); ++i) {
        const Vec x = grid.coords(i);
        Vec v(3);
        v << std::sin(x[0]), std::cos(x[1]), std::sin(x[0] + x[1]);
        vals[std::size_t(i)] = v;
    }
    auto u = MapField::from_values(grid, r3, vals);
    for (Index i : {Index(0), Index(100), Index(2000)}) {
        const Vec x = grid.coords(i);
        Mat d(3, 2);
        d << std::cos(x[0]), 0.0, 0.0, -std::sin(x[1]), std::cos(x[0] + x[1]),
            std::cos(x[0] + x[1]);
        REQUIRE((u.du_frame(i) - d).norm() < 5e-3);
    }
}

TEST_CASE("energy of the torus identity") {
    auto grid = DomainGrid::flat_torus(2, 32);
    EuclideanTarget r2(2);
    auto id = MapField::analytic(
        grid, r2, std::make_shared<LinearChartMap>(Mat::Identity(2, 2), Vec::Zero(2)));
    const double vol = 4.0 * M_PI * M_PI;
    REQUIRE(phi_energy(id, 3) == Catch::Approx(vol / 3.0).epsilon(1e-6));
    REQUIRE(phi_energy(id, 1) == Catch::Approx(vol).epsilon(1e-6));

    auto uc = MapField::analytic(grid, r2, std::make_shared<ConstantMap>(Vec::Zero(2), 2));
    REQUIRE(phi_energy(uc, 3) == 0.0);
}

TEST_CASE("ball-restricted energy of a linear map") {
    // u(x) = diag(1, sqrt 2, sqrt 3) x on a flat 3-ball: density 6
    auto grid = DomainGrid::rotational_pole(3, CurvatureProfile::flat(), 1.0, 64);
    EuclideanTarget r3(3);
    Mat A = Mat::Zero(3, 3);
    A.diagonal() << 1.0, std::sqrt(2.0), std::sqrt(3.0);
    auto u = MapField::analytic(grid, r3, std::make_shared<LinearChartMap>(A, Vec::Zero(3)));
    const double rho = 0.85;
    const double expect = 6.0 * unit_ball_volume(3) * rho * rho * rho;
    REQUIRE(phi_energy(u, 3, rho) == Catch::Approx(expect).epsilon(1e-3));

    auto torus = DomainGrid::flat_torus(2, 16);
    auto v = MapField::analytic(torus, r3, std::make_shared<ConstantMap>(Vec::Zero(3), 2));
    REQUIRE_THROWS_AS(phi_energy(v, 3, 0.5), Error);
}

TEST_CASE("energy of smooth maps converges at order >= 1.9") {
    EuclideanTarget r3(3);
    std::vector<double> energies, spacings;
    for (int n : {16, 32, 64, 128}) {
        auto grid = DomainGrid::flat_torus(2, n);
        std::vector<Vec> vals(std::size_t(grid.node_count()));
        for (Index i = 0; i < grid.node_count(); ++i) {
            const Vec x = grid.coords(i);
            Vec v(3);
            v << std::sin(x[0]), std::cos(x[1]), std::sin(x[0] + x[1]);
            vals[std::size_t(i)] = v;
        }
        auto u = MapField::from_values(grid, r3, vals);
        energies.push_back(phi_energy(u, 3));
        spacings.push_back(grid.spacing(0));
    }
    // Richardson reference from the two finest levels
    const double ref = energies.back() + (energies.back() - energies[energies.size() - 2]) / 3.0;
    std::vector<double> logh, logerr;
    for (std::size_t i = 0; i + 1 < energies.size(); ++i) {
        logh.push_back(std::log(spacings[i]));
        logerr.push_back(std::log(std::abs(energies[i] - ref)));
    }
    const double order = fitted_slope(logh, logerr);
    INFO("measured energy order " << order);
    REQUIRE(order >= 1.9);
}

TEST_CASE("composition energy bound") {
    EuclideanTarget r3(3);
    EuclideanTarget r2(2);
    auto gridK = DomainGrid::flat_torus(2, 24);
    auto gridN = DomainGrid::flat_torus(2, 24);

    Rng rng(211);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Mat S(2, 2), A(3, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) S(i, j) = gauss(rng);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) A(i, j) = gauss(rng);

    auto psi = MapField::analytic(gridK, r2, std::make_shared<LinearChartMap>(S, Vec::Zero(2)));
    auto u = MapField::analytic(gridN, r3, std::make_shared<LinearChartMap>(A, Vec::Zero(3)));

    auto rep = composition_energy_bound_check(u, psi, [&](const Vec&) { return Mat(A); });
    REQUIRE(rep.pass);
    // direct composition oracle: E(u o psi) from the product matrix
    auto comp = MapField::analytic(gridK, r3,
                                   std::make_shared<LinearChartMap>(Mat(A * S), Vec::Zero(3)));
    REQUIRE(rep.lhs == Catch::Approx(phi_energy(comp, 3)).epsilon(1e-8));

    // psi = identity: lhs = E(u) over K and C >= 1
    auto psi_id = MapField::analytic(
        gridK, r2, std::make_shared<LinearChartMap>(Mat::Identity(2, 2), Vec::Zero(2)));
    auto rep_id = composition_energy_bound_check(u, psi_id, [&](const Vec&) { return Mat(A); });
    REQUIRE(rep_id.pass);
    auto uK = MapField::analytic(gridK, r3, std::make_shared<LinearChartMap>(A, Vec::Zero(3)));
    REQUIRE(rep_id.lhs == Catch::Approx(phi_energy(uK, 3)));
    REQUIRE(rep_id.sharp_constant >= 1.0 - 1e-12);

    // constant u: lhs = 0
    auto u0 = MapField::analytic(gridN, r3, std::make_shared<ConstantMap>(Vec::Zero(3), 2));
    auto rep0 = composition_energy_bound_check(u0, psi,
                                               [&](const Vec&) { return Mat(Mat::Zero(3, 2)); });
    REQUIRE(rep0.lhs == 0.0);
    REQUIRE(rep0.pass);
}

TEST_CASE("energy stats record density extrema and node count") {
    auto grid = DomainGrid::flat_torus(2, 16);
    EuclideanTarget r2(2);
    auto id = MapField::analytic(
        grid, r2, std::make_shared<LinearChartMap>(Mat::Identity(2, 2), Vec::Zero(2)));
    auto s = phi_energy_stats(id, 3);
    REQUIRE(s.node_count == grid.node_count());
    REQUIRE(s.density_min == Catch::Approx(1.0 / 3.0));
    REQUIRE(s.density_max == Catch::Approx(1.0 / 3.0));
}
