#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace phi3 {

// Small dense types sized for domain dimension m <= 8 and ambient dimension
// q <= 10. Max-size template parameters keep the storage on the stack.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 10, 10>;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 10, 1>;
using Index = std::int64_t;

inline constexpr Index kNoNode = -1;

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

// Pairwise (cascade) summation: deterministic and accurate for long sums.
class PairwiseAccumulator {
  public:
    void add(double x) {
        stack_.push_back(x);
        std::size_t n = ++count_;
        while ((n & 1u) == 0u) {
            double top = stack_.back();
            stack_.pop_back();
            stack_.back() += top;
            n >>= 1u;
        }
    }
    double total() const {
        double s = 0.0;
        for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) s += *it;
        return s;
    }

  private:
    std::vector<double> stack_;
    std::size_t count_ = 0;
};

template <class F>
double pairwise_sum(Index n, F&& term) {
    PairwiseAccumulator acc;
    for (Index i = 0; i < n; ++i) acc.add(term(i));
    return acc.total();
}

// Volume of the unit n-sphere S^n (surface measure).
inline double unit_sphere_volume(int n) {
    // 2 pi^{(n+1)/2} / Gamma((n+1)/2)
    const double half = 0.5 * (n + 1);
    return 2.0 * std::pow(M_PI, half) / std::tgamma(half);
}

// Volume of the unit ball in R^m.
inline double unit_ball_volume(int m) {
    return std::pow(M_PI, 0.5 * m) / std::tgamma(0.5 * m + 1.0);
}

// Smooth step: 0 for x <= 0, 1 for x >= 1, C^inf in between.
inline double smooth_step(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / x);
    const double b = std::exp(-1.0 / (1.0 - x));
    return a / (a + b);
}

// Least-squares slope of y against x (used for convergence-order fits).
inline double fitted_slope(const std::vector<double>& x, const std::vector<double>& y) {
    require(x.size() == y.size() && x.size() >= 2, "slope fit needs >= 2 points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(x.size());
    my /= double(x.size());
    double num = 0, den = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        num += (x[i] - mx) * (y[i] - my);
        den += (x[i] - mx) * (x[i] - mx);
    }
    return num / den;
}

// Second-order Richardson extrapolation from three grid levels (h, h/2, h/4):
// removes the h^2 and h^4 error terms of the level sequence.
inline double richardson3(double coarse, double mid, double fine) {
    const double r1 = mid + (mid - coarse) / 3.0;
    const double r2 = fine + (fine - mid) / 3.0;
    return r2 + (r2 - r1) / 15.0;
}

using Rng = std::mt19937_64;

inline Vec random_unit_vector(Rng& rng, int dim) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec v(dim);
    double norm2 = 0.0;
    do {
        for (int i = 0; i < dim; ++i) v[i] = gauss(rng);
        norm2 = v.squaredNorm();
    } while (norm2 < 1e-12);
    return v / std::sqrt(norm2);
}

}  // namespace phi3
