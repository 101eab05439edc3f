#pragma once

#include "phi3/common.hpp"
#include "phi3/variation.hpp"

namespace phi3 {

// Quadratic certificate form: v^T Q v = F(v) with
//   F(v) = sum_i ( 6 <B(v,e_i), B(v,e_i)> - <B(v,v), B(e_i,e_i)> ).
// Negative definiteness of Q certifies the instability functional is
// negative on all unit tangent vectors at the point.
struct SsuForm {
    Mat Q;
    double max_eigenvalue = 0.0;

    bool negative_definite() const { return max_eigenvalue < 0.0; }

    double value(const Vec& v_frame) const { return v_frame.dot(Q * v_frame); }
};

namespace detail {

inline SsuForm assemble_ssu_form(const std::vector<Mat>& weingarten_mats) {
    require(!weingarten_mats.empty(), "ssu form: no normal directions given");
    const int m = int(weingarten_mats[0].rows());
    Mat Q = Mat::Zero(m, m);
    for (const Mat& A : weingarten_mats) {
        const double mean_coeff = A.trace();  // <H, n_nu>
        Q += 6.0 * A * A - mean_coeff * A;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(0.5 * (Q + Q.transpose())));
    SsuForm f;
    f.Q = 0.5 * (Q + Q.transpose());
    f.max_eigenvalue = es.eigenvalues().maxCoeff();
    return f;
}

}  // namespace detail

// Assemble Q at a point of an embedded manifold from its second fundamental
// form, in the given orthonormal tangent frame (columns of `frame`).
inline SsuForm ssu_form_at(const EmbeddedTarget& target, const Vec& point, const Mat& frame) {
    const int m = int(frame.cols());
    require((frame.transpose() * frame - Mat::Identity(m, m)).norm() <= 1e-8,
            "ssu_form_at: frame is not orthonormal");
    const Mat nf = target.normal_frame(point);
    std::vector<Mat> As;
    for (int nu = 0; nu < nf.rows(); ++nu) {
        Mat A(m, m);
        for (int a = 0; a < m; ++a)
            for (int b = a; b < m; ++b) {
                const Vec B = target.second_fundamental_form(point, frame.col(a), frame.col(b));
                A(a, b) = A(b, a) = B.dot(nf.row(nu).transpose());
            }
        As.push_back(A);
    }
    if (As.empty()) As.push_back(Mat::Zero(m, m));
    return detail::assemble_ssu_form(As);
}

// Q of a hypersurface given its principal curvatures (principal frame):
// diagonal with entries lambda_a (6 lambda_a - sum_i lambda_i).
inline SsuForm ssu_form_from_principal(const PrincipalCurvatures& pc) {
    const int m = pc.dim();
    double sum = 0.0;
    for (double l : pc.lambda) sum += l;
    Mat Q = Mat::Zero(m, m);
    for (int a = 0; a < m; ++a) Q(a, a) = pc.lambda[std::size_t(a)] * (6.0 * pc.lambda[std::size_t(a)] - sum);
    SsuForm f;
    f.Q = Q;
    f.max_eigenvalue = Q.diagonal().maxCoeff();
    return f;
}

// Literal double-sum evaluation of F(v) (oracle for the assembled form).
inline double ssu_functional_literal(const EmbeddedTarget& target, const Vec& point,
                                     const Mat& frame, const Vec& v) {
    double s = 0.0;
    const Vec Bvv = target.second_fundamental_form(point, v, v);
    for (int i = 0; i < frame.cols(); ++i) {
        const Vec Bvi = target.second_fundamental_form(point, v, frame.col(i));
        const Vec Bii = target.second_fundamental_form(point, frame.col(i), frame.col(i));
        s += 6.0 * Bvi.dot(Bvi) - Bvv.dot(Bii);
    }
    return s;
}

// F_p(v) = (p-2)|B(v,v)|^2 + sum_i ( 2 <B(v,e_i),B(v,e_i)> - <B(v,v),B(e_i,e_i)> ).
inline double p_ssu_value(const EmbeddedTarget& target, const Vec& point, const Mat& frame,
                          const Vec& v, double p) {
    require(p >= 2.0, "p_ssu_value: p >= 2");
    const Vec Bvv = target.second_fundamental_form(point, v, v);
    double s = (p - 2.0) * Bvv.squaredNorm();
    for (int i = 0; i < frame.cols(); ++i) {
        const Vec Bvi = target.second_fundamental_form(point, v, frame.col(i));
        const Vec Bii = target.second_fundamental_form(point, frame.col(i), frame.col(i));
        s += 2.0 * Bvi.dot(Bvi) - Bvv.dot(Bii);
    }
    return s;
}

// Euclidean hypersurface criteria on sorted principal curvatures.
inline bool hypersurface_phi3_ssu(const PrincipalCurvatures& pc) {
    const auto& l = pc.lambda;
    require(!l.empty(), "hypersurface criterion: empty curvature list");
    const int m = pc.dim();
    double head = 0.0;
    for (int i = 0; i + 1 < m; ++i) head += l[std::size_t(i)];
    return l.front() > 0.0 && l.back() < head / 5.0;
}

inline bool hypersurface_p_ssu(const PrincipalCurvatures& pc, double p) {
    require(p >= 2.0, "hypersurface_p_ssu: p >= 2");
    const auto& l = pc.lambda;
    const int m = pc.dim();
    double head = 0.0;
    for (int i = 0; i + 1 < m; ++i) head += l[std::size_t(i)];
    return l.front() > 0.0 && l.back() < head / (p - 1.0);
}

inline bool sphere_is_phi3_ssu(int m) {
    require(m >= 1, "sphere_is_phi3_ssu: m >= 1");
    return m > 6;
}

// Minimal k-submanifold of a convex hypersurface: sufficient condition
// ric_min > (5/6) k lambda_max^2.
inline bool minimal_submanifold_criterion(double ric_min, int k, double lambda_max) {
    require(k >= 1, "minimal submanifold criterion: k >= 1");
    require(lambda_max > 0.0, "minimal submanifold criterion: lambda_max > 0");
    return ric_min > (5.0 / 6.0) * k * lambda_max * lambda_max;
}

inline double minimal_submanifold_threshold(int k, double lambda_max) {
    return (5.0 / 6.0) * k * lambda_max * lambda_max;
}

// Minimal k-submanifold of an ellipsoid: ric_min > (5/6) k max(a)^2/min(a)^4.
inline double ellipsoid_ssu_threshold(const Vec& semi_axes, int k) {
    const double amax = semi_axes.maxCoeff();
    const double amin = semi_axes.minCoeff();
    return (5.0 / 6.0) * k * amax * amax / (amin * amin * amin * amin);
}

inline bool ellipsoid_ssu_sufficient(const Vec& semi_axes, double ric_min, int k) {
    for (int i = 0; i < semi_axes.size(); ++i)
        require(semi_axes[i] > 0.0, "ellipsoid criterion: positive axes");
    return ric_min > ellipsoid_ssu_threshold(semi_axes, k);
}

// Submanifold of the unit sphere with second fundamental form B_1:
// ||B_1||^2 < (k-6)/(sqrt(k)+6), defined for k > 6 only.
inline double b1_norm_threshold(int k) {
    require(k > 6, "b1 norm criterion applies only for k > 6");
    return (k - 6.0) / (std::sqrt(double(k)) + 6.0);
}

inline bool b1_norm_criterion(double b1_norm_sq, int k) {
    return b1_norm_sq < b1_norm_threshold(k);
}

// ---------------------------------------------------------------------------
// Extrinsic average-variation certificates
// ---------------------------------------------------------------------------

struct AverageVariationReport {
    double total = 0.0;               // sum over ambient axes of I(V_l, V_l)
    std::vector<double> per_axis;
    double bound = 0.0;               // quadrature of the averaged instability bound
    int destabilizer_index = -1;      // axis with the most negative term
    double harmonic_residual = 0.0;   // Euler-Lagrange residual of u
    bool bound_holds = false;
    bool total_negative = false;
};

namespace detail {

inline void finalize_report(AverageVariationReport& rep) {
    rep.destabilizer_index = 0;
    for (std::size_t l = 1; l < rep.per_axis.size(); ++l)
        if (rep.per_axis[l] < rep.per_axis[std::size_t(rep.destabilizer_index)])
            rep.destabilizer_index = int(l);
    PairwiseAccumulator acc;
    for (double x : rep.per_axis) acc.add(x);
    rep.total = acc.total();
    const double tol = 2e-2 * (std::abs(rep.bound) + 1.0);
    rep.bound_holds = rep.total <= rep.bound + tol;
    rep.total_negative = rep.total < 0.0;
}

}  // namespace detail

// Variations along the tangential projections of the ambient axes of the
// target: V_l = v_l^T along u. The averaged bound integrates
//   sum_{a,b} lambda_a^6 (6 <B(e_a,e_b),B(e_a,e_b)> - <B(e_a,e_a),B(e_b,e_b)>)
// over M, with lambda_a^2 the eigenvalues of the pullback coefficient matrix
// in a tangent frame of N and B the second fundamental form of N.
inline AverageVariationReport average_variation_into_ssu(const MapField& u) {
    const EmbeddedTarget& N = u.target();
    const int q = N.ambient_dim();
    AverageVariationReport rep;
    rep.harmonic_residual = euler_lagrange_residual(u);
    for (int l = 0; l < q; ++l) {
        Vec axis = Vec::Zero(q);
        axis[l] = 1.0;
        const auto V = VariationField::tangential_axis(u, axis);
        rep.per_axis.push_back(second_variation(u, V, V));
    }
    // right-hand bound
    const DomainGrid& g = u.grid();
    PairwiseAccumulator acc;
    const int n = N.intrinsic_dim();
    for (Index i = 0; i < g.node_count(); ++i) {
        const double w = g.weight(i);
        if (w == 0.0 || !u.du_defined(i)) continue;
        const Vec p = u.value(i);
        const Mat F = N.tangent_frame(p);                  // q x n
        const Mat C = u.du_frame(i).transpose() * F;       // m x n coefficients
        Eigen::MatrixXd gram = C.transpose() * C;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
        const Mat Fr = F * es.eigenvectors();              // frame diagonalizing C^T C
        double s = 0.0;
        for (int a = 0; a < n; ++a) {
            const double lam6 = std::pow(es.eigenvalues()[a], 3);
            for (int b = 0; b < n; ++b) {
                const Vec Bab = N.second_fundamental_form(p, Fr.col(a), Fr.col(b));
                const Vec Baa = N.second_fundamental_form(p, Fr.col(a), Fr.col(a));
                const Vec Bbb = N.second_fundamental_form(p, Fr.col(b), Fr.col(b));
                s += lam6 * (6.0 * Bab.dot(Bab) - Baa.dot(Bbb));
            }
        }
        acc.add(w * s);
    }
    rep.bound = acc.total();
    detail::finalize_report(rep);
    return rep;
}

// Variations push forward the tangential parts of the ambient axes of the
// domain embedding: V_l = du(v_l^T). Requires a sphere-model grid, whose
// embedding and second fundamental form are closed-form.
inline AverageVariationReport average_variation_from_ssu(const MapField& u) {
    const DomainGrid& g = u.grid();
    require(g.model() == GridModel::Sphere,
            "average_variation_from_ssu: domain must be an embedded sphere grid");
    const int m = g.dim();
    const int qd = g.ambient_dim();
    const double R = g.sphere_radius();
    AverageVariationReport rep;
    rep.harmonic_residual = euler_lagrange_residual(u);

    // For identity-like maps (the sphere identity, possibly rotated) the
    // fields du(v^T) and their derivatives are closed-form; generic maps
    // materialize the push-forward and difference it.
    const bool identity_like =
        dynamic_cast<const SphereIdentityMap*>(u.analytic_map()) != nullptr;
    for (int l = 0; l < qd; ++l) {
        Vec axis = Vec::Zero(qd);
        axis[l] = 1.0;
        if (identity_like) {
            VariationGen gen = [&u, &g, axis, R](Index i) -> VariationSample {
                const Vec p = g.ambient_point(i);
                const Mat E = g.ambient_frame(i);
                const Mat du = u.du_frame(i);
                VariationSample s;
                s.v = du * (E.transpose() * axis);
                Mat D(du.rows(), du.cols());
                for (int a = 0; a < du.cols(); ++a) {
                    // tangential part of D_a(v^T) = -(<v,E_a> p + <v,p> E_a)/R^2;
                    // the normal part is removed again by the pullback
                    // connection, so dropping it here is exact for isometric
                    // identity-like maps.
                    const Vec dvt =
                        -(axis.dot(E.col(a)) * p + axis.dot(p) * E.col(a)) / (R * R);
                    D.col(a) = du * (E.transpose() * dvt);
                }
                s.dv_ambient = D;
                return s;
            };
            rep.per_axis.push_back(second_variation(u, gen, gen));
        } else {
            std::vector<Vec> coords(static_cast<std::size_t>(g.node_count()));
            for (Index i = 0; i < g.node_count(); ++i)
                coords[std::size_t(i)] = g.ambient_frame(i).transpose() * axis;
            const auto V = VariationField::pushforward(u, coords);
            rep.per_axis.push_back(second_variation(u, V, V));
        }
    }

    // bound: eigenframe of the pullback metric against the domain sphere's B
    PairwiseAccumulator acc;
    for (Index i = 0; i < g.node_count(); ++i) {
        const double w = g.weight(i);
        if (w == 0.0 || !u.du_defined(i)) continue;
        const Mat U = pullback_metric(u, i).U;
        Eigen::MatrixXd udense = U;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(udense);
        // B(e_i, e_j) = -<e_i, e_j> p / R^2 in any orthonormal tangent frame;
        // rotating to the U-eigenframe keeps orthonormality, so
        // <B_ij, B_ij> = delta_ij / R^2 and <B_ii, B_jj> = 1/R^2.
        double s = 0.0;
        for (int a = 0; a < m; ++a) {
            const double lam6 = std::pow(es.eigenvalues()[a], 3);
            for (int b = 0; b < m; ++b)
                s += lam6 * (6.0 * (a == b ? 1.0 : 0.0) - 1.0) / (R * R);
        }
        acc.add(w * s);
    }
    rep.bound = acc.total();
    detail::finalize_report(rep);
    return rep;
}

}  // namespace phi3
