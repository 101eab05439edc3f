#pragma once

#include "phi3/common.hpp"

#include <memory>

namespace phi3 {

// A target manifold N^n isometrically embedded in R^q, exposing the nearest
// point projection, tangent/normal decomposition, the second fundamental
// form B, and the Weingarten (shape) operator A^eta.
class EmbeddedTarget {
  public:
    virtual ~EmbeddedTarget() = default;

    virtual int ambient_dim() const = 0;
    virtual int intrinsic_dim() const = 0;

    virtual Vec project(const Vec& point) const = 0;
    virtual Vec tangent_project(const Vec& point, const Vec& v) const = 0;
    // Rows are an orthonormal basis of the normal space (q - n vectors).
    virtual Mat normal_frame(const Vec& point) const = 0;
    virtual Vec second_fundamental_form(const Vec& point, const Vec& v, const Vec& w) const = 0;
    // Distance-like residual of the defining constraint, 0 on N.
    virtual double constraint_residual(const Vec& point) const = 0;

    Vec normal_project(const Vec& point, const Vec& v) const {
        return v - tangent_project(point, v);
    }

    // A^eta v, defined through <A^eta v, w> = <B(v, w), eta>.
    virtual Vec weingarten(const Vec& point, const Vec& eta, const Vec& v) const {
        const int q = ambient_dim();
        Vec out = Vec::Zero(q);
        // assemble by pairing with an ambient basis projected to the tangent space
        for (int j = 0; j < q; ++j) {
            Vec ej = Vec::Zero(q);
            ej[j] = 1.0;
            const Vec w = tangent_project(point, ej);
            out[j] = second_fundamental_form(point, v, w).dot(eta);
        }
        return tangent_project(point, out);
    }

    // Orthonormal tangent frame at a point (columns; q x n), built by
    // Gram-Schmidt on projected ambient axes.
    Mat tangent_frame(const Vec& point) const {
        const int q = ambient_dim();
        const int n = intrinsic_dim();
        Mat F(q, n);
        int col = 0;
        for (int j = 0; j < q && col < n; ++j) {
            Vec ej = Vec::Zero(q);
            ej[j] = 1.0;
            Vec v = tangent_project(point, ej);
            for (int c = 0; c < col; ++c) v -= v.dot(F.col(c)) * F.col(c);
            const double nv = v.norm();
            if (nv > 1e-8) {
                F.col(col) = v / nv;
                ++col;
            }
        }
        require(col == n, "tangent_frame: degenerate projection basis");
        return F;
    }
};

// Round sphere of the given radius centered at the origin of R^{n+1}.
// Outward unit normal; B(v, w) = -<v, w> nu / radius.
class SphereTarget final : public EmbeddedTarget {
  public:
    SphereTarget(int n, double radius) : n_(n), radius_(radius) {
        require(n >= 1, "sphere target: n >= 1");
        require(radius > 0.0, "sphere target: radius > 0");
    }

    int ambient_dim() const override { return n_ + 1; }
    int intrinsic_dim() const override { return n_; }
    double radius() const { return radius_; }

    Vec project(const Vec& p) const override {
        const double n = p.norm();
        require(n > 1e-14, "sphere projection undefined at the center");
        return p * (radius_ / n);
    }
    Vec tangent_project(const Vec& p, const Vec& v) const override {
        const Vec nu = p / p.norm();
        return v - v.dot(nu) * nu;
    }
    Mat normal_frame(const Vec& p) const override {
        Mat f(1, n_ + 1);
        f.row(0) = (p / p.norm()).transpose();
        return f;
    }
    Vec second_fundamental_form(const Vec& p, const Vec& v, const Vec& w) const override {
        return -(v.dot(w) / radius_) * (p / p.norm());
    }
    Vec weingarten(const Vec& p, const Vec& eta, const Vec& v) const override {
        const Vec nu = p / p.norm();
        return -(eta.dot(nu) / radius_) * tangent_project(p, v);
    }
    double constraint_residual(const Vec& p) const override {
        return std::abs(p.norm() - radius_);
    }

  private:
    int n_;
    double radius_;
};

// Euclidean space R^q as a trivial target: flat, no normal directions.
class EuclideanTarget final : public EmbeddedTarget {
  public:
    explicit EuclideanTarget(int q) : q_(q) { require(q >= 1, "euclidean target: q >= 1"); }

    int ambient_dim() const override { return q_; }
    int intrinsic_dim() const override { return q_; }
    Vec project(const Vec& p) const override { return p; }
    Vec tangent_project(const Vec&, const Vec& v) const override { return v; }
    Mat normal_frame(const Vec&) const override { return Mat(0, q_); }
    Vec second_fundamental_form(const Vec&, const Vec&, const Vec&) const override {
        return Vec::Zero(q_);
    }
    Vec weingarten(const Vec&, const Vec&, const Vec&) const override { return Vec::Zero(q_); }
    double constraint_residual(const Vec&) const override { return 0.0; }

  private:
    int q_;
};

// Ellipsoid sum x_i^2 / a_i^2 = 1 in R^q. Nearest-point projection by a
// damped Newton iteration on the Lagrange multiplier; curvature data from
// the analytic shape operator of the level set.
class EllipsoidTarget final : public EmbeddedTarget {
  public:
    explicit EllipsoidTarget(Vec semi_axes) : a_(std::move(semi_axes)) {
        require(a_.size() >= 2, "ellipsoid target: q >= 2");
        for (int i = 0; i < a_.size(); ++i) require(a_[i] > 0.0, "ellipsoid target: a_i > 0");
    }

    int ambient_dim() const override { return int(a_.size()); }
    int intrinsic_dim() const override { return int(a_.size()) - 1; }
    const Vec& semi_axes() const { return a_; }

    double level(const Vec& p) const {
        double s = -1.0;
        for (int i = 0; i < p.size(); ++i) s += (p[i] / a_[i]) * (p[i] / a_[i]);
        return s;
    }

    Vec project(const Vec& y) const override {
        const int q = ambient_dim();
        // x_i = y_i / (1 + t / a_i^2); solve phi(t) = sum (x_i/a_i)^2 - 1 = 0
        // with Newton on t, damped to keep 1 + t/a_i^2 positive.
        double t = 0.0;
        double tmin = -a_.minCoeff() * a_.minCoeff();
        for (int iter = 0; iter < 50; ++iter) {
            double phi = -1.0, dphi = 0.0;
            for (int i = 0; i < q; ++i) {
                const double d = 1.0 + t / (a_[i] * a_[i]);
                const double xi = y[i] / d;
                phi += (xi / a_[i]) * (xi / a_[i]);
                dphi += -2.0 * xi * xi / (a_[i] * a_[i] * a_[i] * a_[i]) / d;
            }
            if (std::abs(phi) < 1e-14) break;
            double step = (std::abs(dphi) > 1e-300) ? -phi / dphi : 0.0;
            double tn = t + step;
            int damp = 0;
            while (tn <= tmin && damp < 60) {
                step *= 0.5;
                tn = t + step;
                ++damp;
            }
            t = tn;
            if (iter == 49)
                require(std::abs(phi) < 1e-10, "ellipsoid projection did not converge");
        }
        Vec x(q);
        for (int i = 0; i < q; ++i) x[i] = y[i] / (1.0 + t / (a_[i] * a_[i]));
        return x;
    }

    Vec outward_normal(const Vec& p) const {
        Vec grad(p.size());
        for (int i = 0; i < p.size(); ++i) grad[i] = 2.0 * p[i] / (a_[i] * a_[i]);
        return grad / grad.norm();
    }

    Vec tangent_project(const Vec& p, const Vec& v) const override {
        const Vec nu = outward_normal(p);
        return v - v.dot(nu) * nu;
    }

    Mat normal_frame(const Vec& p) const override {
        Mat f(1, ambient_dim());
        f.row(0) = outward_normal(p).transpose();
        return f;
    }

    // Shape operator W = P grad^2(phi) P / |grad phi| (outward normal);
    // B(v, w) = -<W v, w> nu so that convex curvatures are positive with
    // respect to the inward normal, matching the sphere convention.
    Mat shape_operator(const Vec& p) const {
        const int q = ambient_dim();
        Vec grad(q);
        for (int i = 0; i < q; ++i) grad[i] = 2.0 * p[i] / (a_[i] * a_[i]);
        const double gn = grad.norm();
        const Vec nu = grad / gn;
        Mat W = Mat::Zero(q, q);
        for (int i = 0; i < q; ++i) W(i, i) = 2.0 / (a_[i] * a_[i]) / gn;
        Mat P = Mat::Identity(q, q) - nu * nu.transpose();
        return P * W * P;
    }

    Vec second_fundamental_form(const Vec& p, const Vec& v, const Vec& w) const override {
        const Mat W = shape_operator(p);
        return -(v.dot(W * w)) * outward_normal(p);
    }

    Vec weingarten(const Vec& p, const Vec& eta, const Vec& v) const override {
        const Vec nu = outward_normal(p);
        return -eta.dot(nu) * (shape_operator(p) * tangent_project(p, v));
    }

    double constraint_residual(const Vec& p) const override { return std::abs(level(p)); }

    // Principal curvatures at a point: nonzero eigenvalues of the shape
    // operator, positive for this convex hypersurface.
    std::vector<double> principal_curvatures(const Vec& p) const {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(shape_operator(p));
        std::vector<double> lam;
        for (int i = 0; i < es.eigenvalues().size(); ++i) {
            const double l = es.eigenvalues()[i];
            if (std::abs(l) > 1e-12) lam.push_back(l);
        }
        std::sort(lam.begin(), lam.end());
        return lam;
    }

  private:
    Vec a_;
};

// Sorted principal curvatures of a hypersurface.
struct PrincipalCurvatures {
    std::vector<double> lambda;

    explicit PrincipalCurvatures(std::vector<double> l) : lambda(std::move(l)) {
        require(!lambda.empty(), "principal curvatures: empty list");
        std::sort(lambda.begin(), lambda.end());
    }
    int dim() const { return int(lambda.size()); }
    static PrincipalCurvatures all_ones(int m) {
        return PrincipalCurvatures(std::vector<double>(std::size_t(m), 1.0));
    }
};

// B(e_i, e_j) = lambda_i delta_ij nu in the principal frame. The frame
// columns are the principal directions; nu is the unit normal.
inline Vec hypersurface_second_fundamental_form(const PrincipalCurvatures& pc, const Mat& frame,
                                                const Vec& nu, int i, int j) {
    require(frame.cols() == pc.dim(), "principal frame dimension mismatch");
    require(i >= 0 && i < pc.dim() && j >= 0 && j < pc.dim(), "principal index out of range");
    if (i != j) return Vec::Zero(nu.size());
    return pc.lambda[std::size_t(i)] * nu;
}

}  // namespace phi3
