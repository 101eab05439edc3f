#pragma once

#include "phi3/common.hpp"

namespace phi3 {

// Radial curvature model of a manifold with a pole: the curvature of planes
// containing the radial direction is pinched between the stated bounds.
struct CurvatureProfile {
    enum class Kind {
        PinchedNegative,  // -alpha^2 <= K_r <= -beta^2,  alpha >= beta >= 0
        PowerDecay,       // -A/(1+r^2)^{1+eps} <= K_r <= B/(1+r^2)^{1+eps}
        InverseSquare,    // -a^2/(1+r^2) <= K_r <= b^2/(1+r^2)
    };

    Kind kind = Kind::PinchedNegative;
    double alpha = 0.0, beta = 0.0;         // PinchedNegative
    double A = 0.0, B = 0.0, eps = 1.0;     // PowerDecay
    double a = 0.0, b = 0.0;                // InverseSquare

    static CurvatureProfile pinched_negative(double alpha, double beta) {
        CurvatureProfile p;
        p.kind = Kind::PinchedNegative;
        p.alpha = alpha;
        p.beta = beta;
        p.validate();
        return p;
    }
    static CurvatureProfile power_decay(double A, double B, double eps) {
        CurvatureProfile p;
        p.kind = Kind::PowerDecay;
        p.A = A;
        p.B = B;
        p.eps = eps;
        p.validate();
        return p;
    }
    static CurvatureProfile inverse_square(double a, double b) {
        CurvatureProfile p;
        p.kind = Kind::InverseSquare;
        p.a = a;
        p.b = b;
        p.validate();
        return p;
    }
    static CurvatureProfile flat() { return pinched_negative(0.0, 0.0); }

    void validate() const {
        switch (kind) {
            case Kind::PinchedNegative:
                require(alpha >= beta && beta >= 0.0, "pinched-negative profile needs alpha >= beta >= 0");
                break;
            case Kind::PowerDecay:
                require(eps > 0.0 && A >= 0.0 && B >= 0.0 && B < 2.0 * eps,
                        "power-decay profile needs eps > 0, A >= 0, 0 <= B < 2 eps");
                break;
            case Kind::InverseSquare:
                require(a >= 0.0 && b * b >= 0.0 && b * b <= 0.25,
                        "inverse-square profile needs a >= 0, 0 <= b^2 <= 1/4");
                break;
        }
    }

    bool is_flat() const {
        switch (kind) {
            case Kind::PinchedNegative: return alpha == 0.0 && beta == 0.0;
            case Kind::PowerDecay: return A == 0.0 && B == 0.0;
            case Kind::InverseSquare: return a == 0.0 && b == 0.0;
        }
        return false;
    }

    // Warp factor f(r) of the comparison model metric dr^2 + f(r)^2 dtheta^2.
    // Chosen so that the lower Hessian comparison bound holds with equality:
    //   pinched-negative: f = sinh(beta r)/beta (f = r when beta = 0)
    //   power-decay:      f = r
    //   inverse-square:   f = r^s with s = (1 + sqrt(1 - 4 b^2))/2
    double warp(double r) const {
        switch (kind) {
            case Kind::PinchedNegative:
                return beta > 0.0 ? std::sinh(beta * r) / beta : r;
            case Kind::PowerDecay:
                return r;
            case Kind::InverseSquare: {
                const double s = 0.5 * (1.0 + std::sqrt(1.0 - 4.0 * b * b));
                return std::pow(r, s);
            }
        }
        return r;
    }

    // d log f / d r = f'(r)/f(r).
    double warp_log_derivative(double r) const {
        switch (kind) {
            case Kind::PinchedNegative:
                return beta > 0.0 ? beta / std::tanh(beta * r) : 1.0 / r;
            case Kind::PowerDecay:
                return 1.0 / r;
            case Kind::InverseSquare: {
                const double s = 0.5 * (1.0 + std::sqrt(1.0 - 4.0 * b * b));
                return s / r;
            }
        }
        return 1.0 / r;
    }
};

}  // namespace phi3
