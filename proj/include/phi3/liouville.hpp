#pragma once

#include "phi3/common.hpp"
#include "phi3/energy.hpp"
#include "phi3/profiles.hpp"
#include "phi3/variation.hpp"

namespace phi3 {

// x coth x, continuous through x = 0.
inline double xcoth(double x) {
    if (std::abs(x) < 1e-6) return 1.0 + x * x / 3.0;
    return x / std::tanh(x);
}

// Eigenvalue bounds of Hess(r^2) - 2 dr (x) dr on the complement of d/dr,
// from the radial Hessian comparison (multiplied by 2r), together with the
// pinching condition value 1 + (m-1)/2 lambda_min - 3 max{2, lambda_max}.
struct RadialEigenSummary {
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    double condition = 0.0;
};

inline RadialEigenSummary hessian_comparison(const CurvatureProfile& p, double r, int m) {
    require(r > 0.0, "hessian_comparison: r > 0");
    p.validate();
    RadialEigenSummary s;
    switch (p.kind) {
        case CurvatureProfile::Kind::PinchedNegative:
            s.lambda_min = 2.0 * xcoth(p.beta * r);
            s.lambda_max = 2.0 * xcoth(p.alpha * r);
            break;
        case CurvatureProfile::Kind::PowerDecay:
            s.lambda_min = 2.0 * (1.0 - p.B / (2.0 * p.eps));
            s.lambda_max = 2.0 * std::exp(p.A / (2.0 * p.eps));
            break;
        case CurvatureProfile::Kind::InverseSquare:
            s.lambda_min = 1.0 + std::sqrt(1.0 - 4.0 * p.b * p.b);
            s.lambda_max = 1.0 + std::sqrt(1.0 + 4.0 * p.a * p.a);
            break;
    }
    require(s.lambda_min <= s.lambda_max + 1e-14, "hessian bounds out of order");
    s.condition = 1.0 + 0.5 * (m - 1) * s.lambda_min - 3.0 * std::max(2.0, s.lambda_max);
    return s;
}

// The pinching constant of the monotonicity formula per profile case:
//   (1)  m - 6 alpha/beta          (needs beta > 0 and (m-1) beta - 6 alpha > 0)
//   (2)  1 + (m-1)(1 - B/2eps) - 6 e^{A/2eps}
//   (3)  1 + (m-1)(1 + sqrt(1-4b^2))/2 - 3 (1 + sqrt(1+4a^2))
struct LambdaResult {
    double value = 0.0;
    bool hypotheses_met = false;
    double min_condition = 0.0;  // min over the checked r-range
};

inline LambdaResult lambda_constant(const CurvatureProfile& p, int m,
                                    double r_lo = 0.1, double r_hi = 10.0) {
    p.validate();
    LambdaResult res;
    switch (p.kind) {
        case CurvatureProfile::Kind::PinchedNegative: {
            double ratio;
            if (p.beta > 0.0)
                ratio = p.alpha / p.beta;
            else if (p.alpha == 0.0)
                ratio = 1.0;  // flat limit alpha = beta -> 0
            else
                ratio = std::numeric_limits<double>::infinity();
            res.value = m - 6.0 * ratio;
            res.hypotheses_met = (p.beta > 0.0 && (m - 1) * p.beta - 6.0 * p.alpha > 0.0) ||
                                 (p.alpha == 0.0 && p.beta == 0.0 && m > 6);
            break;
        }
        case CurvatureProfile::Kind::PowerDecay:
            res.value = 1.0 + (m - 1) * (1.0 - p.B / (2.0 * p.eps)) -
                        6.0 * std::exp(p.A / (2.0 * p.eps));
            res.hypotheses_met = res.value > 0.0;
            break;
        case CurvatureProfile::Kind::InverseSquare:
            res.value = 1.0 + 0.5 * (m - 1) * (1.0 + std::sqrt(1.0 - 4.0 * p.b * p.b)) -
                        3.0 * (1.0 + std::sqrt(1.0 + 4.0 * p.a * p.a));
            res.hypotheses_met = res.value > 0.0;
            break;
    }
    if (res.value <= 0.0) res.hypotheses_met = false;

    res.min_condition = std::numeric_limits<double>::infinity();
    const int samples = 256;
    for (int k = 0; k <= samples; ++k) {
        const double r = r_lo + (r_hi - r_lo) * k / samples;
        res.min_condition = std::min(res.min_condition, hessian_comparison(p, r, m).condition);
    }
    return res;
}

// rho^{-zeta} E(B(rho)) over the given radii: nondecreasing when the
// pinching condition holds with the given zeta at a near-harmonic map.
struct MonotonicityReport {
    std::vector<double> radii;
    std::vector<double> normalized;
    bool condition_ok = true;
    bool monotone = true;
    bool pass = false;
    double harmonic_residual = 0.0;
};

inline MonotonicityReport monotonicity_check(const MapField& u, double zeta,
                                             std::vector<double> radii,
                                             bool compute_residual = true) {
    const DomainGrid& g = u.grid();
    require(g.has_pole(), "monotonicity_check needs a grid with a pole");
    require(zeta > 0.0, "monotonicity_check: zeta > 0");
    std::sort(radii.begin(), radii.end());
    require(!radii.empty() && radii.front() > 0.0 && radii.back() <= g.pole_extent(),
            "radii outside the grid");
    MonotonicityReport rep;
    rep.radii = radii;
    const int m = g.dim();
    for (double rho : radii) {
        rep.normalized.push_back(std::pow(rho, -zeta) * phi_energy(u, 3, rho));
        const double cond = hessian_comparison(g.profile(), rho, m).condition;
        if (cond < zeta - 1e-12) rep.condition_ok = false;
    }
    for (std::size_t k = 0; k + 1 < rep.normalized.size(); ++k) {
        const double a = rep.normalized[k];
        const double b = rep.normalized[k + 1];
        if (b < a * (1.0 - 1e-3)) rep.monotone = false;
    }
    if (compute_residual) rep.harmonic_residual = euler_lagrange_residual(u);
    rep.pass = rep.condition_ok && rep.monotone;
    return rep;
}

// Hypothesis check of the Liouville theorem: the tail integral of
// Vol^{-1/5}(dB(r)) should decay no faster than R^{-zeta/5}. The boundary
// volumes come from smooth-window shell quadrature; the tail beyond the
// truncation radius is added from the model profile's closed form.
struct VolumeIntegralReport {
    std::vector<double> R_values;
    std::vector<double> lhs;            // tail integral from each R
    std::vector<double> rhs;            // fitted C * R^{-zeta/5}
    double fitted_constant = 0.0;
    double fitted_exponent = 0.0;       // log-log slope of lhs(R)
    double truncation_radius = 0.0;
    double tail_remainder = 0.0;
    bool pass = false;
};

namespace detail {

// int_T^inf (omega f(r)^{m-1})^{-1/5} dr for the model warp profiles;
// +inf when the integral diverges.
inline double tail_remainder_closed_form(const CurvatureProfile& p, int m, double T) {
    const double omega = unit_sphere_volume(m - 1);
    const double c = std::pow(omega, -0.2);
    const double k = (m - 1) / 5.0;
    switch (p.kind) {
        case CurvatureProfile::Kind::PinchedNegative:
            if (p.beta > 0.0) {
                // f >= e^{beta r}(1 - e^{-2 beta T})/(2 beta) on [T, inf)
                const double scale = (1.0 - std::exp(-2.0 * p.beta * T)) / (2.0 * p.beta);
                return c * std::pow(scale, -k) * std::exp(-k * p.beta * T) / (k * p.beta);
            }
            [[fallthrough]];
        case CurvatureProfile::Kind::PowerDecay: {
            if (k <= 1.0) return std::numeric_limits<double>::infinity();
            return c * std::pow(T, 1.0 - k) / (k - 1.0);
        }
        case CurvatureProfile::Kind::InverseSquare: {
            const double s = 0.5 * (1.0 + std::sqrt(1.0 - 4.0 * p.b * p.b));
            if (s * k <= 1.0) return std::numeric_limits<double>::infinity();
            return c * std::pow(T, 1.0 - s * k) / (s * k - 1.0);
        }
    }
    return std::numeric_limits<double>::infinity();
}

}  // namespace detail

inline VolumeIntegralReport volume_integral_condition(const DomainGrid& g, double zeta,
                                                      std::vector<double> R_values) {
    require(g.has_pole(), "volume_integral_condition needs a grid with a pole");
    std::sort(R_values.begin(), R_values.end());
    // truncation: the stated 0.9 x extent, pulled in when the shell window
    // needs clearance from the grid edge on coarse grids
    const double width = 2.0 * g.spacing(0);
    const double T = std::min(0.9 * g.pole_extent(), g.pole_extent() - 1.05 * width);
    require(!R_values.empty() && R_values.front() > width, "R values must exceed the shell width");
    require(R_values.back() < T, "insufficient radial extent for the requested R values");

    VolumeIntegralReport rep;
    rep.R_values = R_values;
    rep.truncation_radius = T;
    rep.tail_remainder = detail::tail_remainder_closed_form(g.profile(), g.dim(), T);

    // integrand samples on [R_min, T]
    const int samples = 96;
    const double r0 = R_values.front();
    std::vector<double> rs(samples + 1), integrand(samples + 1);
    for (int k = 0; k <= samples; ++k) {
        rs[std::size_t(k)] = r0 + (T - r0) * k / samples;
        const double vol = g.shell_area(rs[std::size_t(k)], width);
        integrand[std::size_t(k)] = std::pow(vol, -0.2);
    }
    // cumulative trapezoid from the right, then tail remainder
    std::vector<double> cum(samples + 1, 0.0);
    for (int k = samples - 1; k >= 0; --k) {
        const double dr = rs[std::size_t(k + 1)] - rs[std::size_t(k)];
        cum[std::size_t(k)] = cum[std::size_t(k + 1)] +
                              0.5 * dr * (integrand[std::size_t(k)] + integrand[std::size_t(k + 1)]);
    }
    std::vector<double> logR, loglhs;
    for (double R : R_values) {
        // locate R in the sample array (linear interpolation of the cumulative)
        const double t = (R - r0) / (T - r0) * samples;
        const int k = std::min(samples - 1, std::max(0, int(t)));
        const double frac = t - k;
        const double tail = cum[std::size_t(k)] * (1.0 - frac) + cum[std::size_t(k + 1)] * frac;
        const double lhs = tail + (std::isfinite(rep.tail_remainder) ? rep.tail_remainder : 0.0);
        rep.lhs.push_back(lhs);
        logR.push_back(std::log(R));
        loglhs.push_back(std::log(lhs));
    }
    rep.fitted_exponent = fitted_slope(logR, loglhs);
    double logC = 0.0;
    for (std::size_t k = 0; k < R_values.size(); ++k)
        logC += loglhs[k] + 0.2 * zeta * logR[k];
    logC /= double(R_values.size());
    rep.fitted_constant = std::exp(logC);
    for (double R : R_values) rep.rhs.push_back(rep.fitted_constant * std::pow(R, -0.2 * zeta));
    // decay no faster than R^{-zeta/5}, with slack for quadrature noise
    rep.pass = std::isfinite(rep.tail_remainder) && rep.fitted_exponent >= -0.2 * zeta - 0.02;
    return rep;
}

}  // namespace phi3
