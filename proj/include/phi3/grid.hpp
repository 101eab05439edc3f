#pragma once

#include "phi3/common.hpp"
#include "phi3/profiles.hpp"

#include <algorithm>
#include <ostream>

namespace phi3 {

enum class GridModel { FlatBox, FlatTorus, Sphere, RotationalPole };

inline constexpr double kOriginTol = 1e-12;

// A sampled chart of a Riemannian manifold (M, g) on structured cell-centered
// grids. Flat boxes and tori use a single Cartesian chart; spheres use two
// antipodal normal-coordinate caps blended by a partition of unity; manifolds
// with a pole use a single normal-coordinate ball with a warped metric.
//
// Per-node geometry (metric, orthonormal frame, weights, ambient embedding)
// is closed-form per model; only the active node index lists are stored.
class DomainGrid {
  public:
    struct Chart {
        int nodes_per_axis = 0;
        double spacing = 0.0;
        double half_extent = 0.0;  // chart covers [-L, L]^m (centered charts)
        bool periodic = false;
        bool ball_restricted = false;
        std::vector<std::uint64_t> active;  // sorted linear indices (ball charts)
        Index offset = 0;                   // first node id of this chart
        Index count = 0;
    };

    static DomainGrid flat_box(int m, double side, int nodes_per_axis) {
        require(m >= 1, "flat_box: m >= 1");
        require(side > 0.0, "flat_box: side > 0");
        require(nodes_per_axis >= 4, "flat_box: nodes per axis >= 4");
        DomainGrid g;
        g.model_ = GridModel::FlatBox;
        g.m_ = m;
        g.side_ = side;
        Chart c;
        c.nodes_per_axis = nodes_per_axis;
        c.spacing = side / nodes_per_axis;
        c.half_extent = 0.5 * side;
        g.push_full_chart(c);
        return g;
    }

    static DomainGrid flat_torus(int m, int nodes_per_axis) {
        require(m >= 1, "flat_torus: m >= 1");
        require(nodes_per_axis >= 4, "flat_torus: nodes per axis >= 4");
        DomainGrid g;
        g.model_ = GridModel::FlatTorus;
        g.m_ = m;
        Chart c;
        c.nodes_per_axis = nodes_per_axis;
        c.spacing = 2.0 * M_PI / nodes_per_axis;
        c.half_extent = M_PI;
        c.periodic = true;
        g.push_full_chart(c);
        return g;
    }

    // Two-cap sphere grid. Each cap is a normal-coordinate chart around one
    // pole; quadrature weights carry a smooth partition of unity. The caps
    // extend past the far cutoff by `margin_layers` grid spacings so that
    // difference stencils are valid wherever the weight is nonzero.
    static DomainGrid round_sphere(int m, double radius, int nodes_per_axis,
                                   int margin_layers = 2) {
        require(m >= 1 && m <= 8, "round_sphere: charts provided for m <= 8");
        require(radius > 0.0, "round_sphere: radius > 0");
        require(nodes_per_axis >= 4, "round_sphere: nodes per axis >= 4");
        DomainGrid g;
        g.model_ = GridModel::Sphere;
        g.m_ = m;
        g.radius_ = radius;
        g.support_angle_ = M_PI - 0.45;
        g.blend_angle_ = M_PI - 0.85;
        const double support_radius = radius * g.support_angle_;
        const int n = nodes_per_axis;
        require(n > 2 * margin_layers + 2, "round_sphere: grid too coarse for stencil margin");
        const double L = support_radius / (1.0 - 2.0 * margin_layers / double(n));
        for (int cap = 0; cap < 2; ++cap) {
            Chart c;
            c.nodes_per_axis = n;
            c.half_extent = L;
            c.spacing = 2.0 * L / n;
            c.ball_restricted = true;
            g.push_ball_chart(c, L);
        }
        return g;
    }

    static DomainGrid rotational_pole(int m, const CurvatureProfile& profile, double r_max,
                                      int nodes_per_axis) {
        require(m >= 1, "rotational_pole: m >= 1");
        require(r_max > 0.0, "rotational_pole: r_max > 0");
        require(nodes_per_axis >= 4, "rotational_pole: nodes per axis >= 4");
        profile.validate();
        if (profile.kind == CurvatureProfile::Kind::InverseSquare && profile.b > 0.0)
            require(nodes_per_axis % 2 == 0,
                    "rotational_pole: even node count required when the metric is "
                    "singular at the pole");
        DomainGrid g;
        g.model_ = GridModel::RotationalPole;
        g.m_ = m;
        g.r_max_ = r_max;
        g.profile_ = profile;
        Chart c;
        c.nodes_per_axis = nodes_per_axis;
        c.half_extent = r_max;
        c.spacing = 2.0 * r_max / nodes_per_axis;
        c.ball_restricted = true;
        g.push_ball_chart(c, r_max);
        return g;
    }

    GridModel model() const { return model_; }
    int dim() const { return m_; }
    Index node_count() const { return total_; }
    int chart_count() const { return int(charts_.size()); }
    bool has_pole() const { return model_ == GridModel::RotationalPole; }
    bool closed() const {
        return model_ == GridModel::FlatTorus || model_ == GridModel::Sphere;
    }
    double sphere_radius() const { return radius_; }
    double pole_extent() const { return r_max_; }
    const CurvatureProfile& profile() const { return profile_; }
    const Chart& chart(int c) const { return charts_[std::size_t(c)]; }

    int chart_of(Index id) const {
        return (charts_.size() == 2 && id >= charts_[1].offset) ? 1 : 0;
    }

    // Chart coordinates of a node.
    Vec coords(Index id) const {
        int c = chart_of(id);
        const Chart& ch = charts_[std::size_t(c)];
        std::uint64_t lin = linear_of(ch, id);
        Vec x(m_);
        for (int a = 0; a < m_; ++a) {
            std::uint64_t k = lin % std::uint64_t(ch.nodes_per_axis);
            lin /= std::uint64_t(ch.nodes_per_axis);
            x[a] = node_coord(ch, int(k));
        }
        return x;
    }

    // Geodesic distance from the pole (pole grids) or from the owning cap's
    // pole (sphere grids); flat charts report distance from the box center.
    double radial(Index id) const { return coords(id).norm(); }

    // Quadrature weight; includes sqrt(det g), the cell measure, and the
    // partition-of-unity factor on multi-chart grids.
    double weight(Index id) const {
        const Chart& ch = charts_[std::size_t(chart_of(id))];
        const double cell = std::pow(ch.spacing, m_);
        switch (model_) {
            case GridModel::FlatBox:
            case GridModel::FlatTorus:
                return cell;
            case GridModel::RotationalPole: {
                const double r = radial(id);
                if (r < kOriginTol) return cell;
                return cell * std::pow(profile_.warp(r) / r, m_ - 1);
            }
            case GridModel::Sphere: {
                const double rho = radial(id);
                if (rho < kOriginTol) return cell * pou_weight(0.0);
                const double theta = rho / radius_;
                if (theta >= support_angle_) return 0.0;
                const double sd = std::pow(radius_ * std::sin(theta) / rho, m_ - 1);
                return cell * sd * pou_weight(theta);
            }
        }
        return cell;
    }

    // Metric in chart coordinates.
    Mat metric(Index id) const {
        Mat g = Mat::Identity(m_, m_);
        if (model_ == GridModel::FlatBox || model_ == GridModel::FlatTorus) return g;
        const Vec x = coords(id);
        const double r = x.norm();
        if (r < kOriginTol) return g;
        const double fr = transverse_scale(r);
        const Vec xhat = x / r;
        g = fr * fr * Mat::Identity(m_, m_);
        g += (1.0 - fr * fr) * (xhat * xhat.transpose());
        return g;
    }

    Mat metric_inverse(Index id) const {
        if (model_ == GridModel::FlatBox || model_ == GridModel::FlatTorus)
            return Mat::Identity(m_, m_);
        const Vec x = coords(id);
        const double r = x.norm();
        if (r < kOriginTol) return Mat::Identity(m_, m_);
        const double fr = transverse_scale(r);
        const Vec xhat = x / r;
        Mat gi = (1.0 / (fr * fr)) * Mat::Identity(m_, m_);
        gi += (1.0 - 1.0 / (fr * fr)) * (xhat * xhat.transpose());
        return gi;
    }

    double sqrt_det_metric(Index id) const {
        if (model_ == GridModel::FlatBox || model_ == GridModel::FlatTorus) return 1.0;
        const double r = radial(id);
        if (r < kOriginTol) return 1.0;
        return std::pow(transverse_scale(r), m_ - 1);
    }

    // Columns form a g-orthonormal frame of the tangent space, expressed in
    // chart coordinates: column 0 is radial, the rest span its complement.
    Mat frame(Index id) const {
        if (model_ == GridModel::FlatBox || model_ == GridModel::FlatTorus)
            return Mat::Identity(m_, m_);
        const Vec x = coords(id);
        const double r = x.norm();
        if (r < kOriginTol) return Mat::Identity(m_, m_);
        const double fr = transverse_scale(r);
        Mat H = householder_basis(x / r);
        for (int j = 1; j < m_; ++j) H.col(j) /= fr;
        return H;
    }

    // --- node connectivity -------------------------------------------------

    Index neighbor(Index id, int axis, int step) const {
        const int c = chart_of(id);
        const Chart& ch = charts_[std::size_t(c)];
        std::uint64_t lin = linear_of(ch, id);
        const std::uint64_t stride = stride_of(ch, axis);
        std::int64_t k = std::int64_t((lin / stride) % std::uint64_t(ch.nodes_per_axis));
        std::int64_t kk = k + step;
        if (ch.periodic) {
            kk = ((kk % ch.nodes_per_axis) + ch.nodes_per_axis) % ch.nodes_per_axis;
        } else if (kk < 0 || kk >= ch.nodes_per_axis) {
            return kNoNode;
        }
        const std::uint64_t lin2 = lin + std::uint64_t(kk - k) * stride;
        if (!ch.ball_restricted) return ch.offset + Index(lin2);
        auto it = std::lower_bound(ch.active.begin(), ch.active.end(), lin2);
        if (it == ch.active.end() || *it != lin2) return kNoNode;
        return ch.offset + Index(it - ch.active.begin());
    }

    // Number of guaranteed stencil layers around a node (0 at a boundary).
    int interior_depth(Index id) const {
        const Chart& ch = charts_[std::size_t(chart_of(id))];
        if (ch.periodic) return ch.nodes_per_axis / 2;
        if (ch.ball_restricted) {
            const double slack = ch.half_extent - radial(id);
            return std::max(0, int(std::floor(slack / ch.spacing)));
        }
        // box: index distance to the nearest face
        std::uint64_t lin = linear_of(ch, id);
        int depth = ch.nodes_per_axis;
        for (int a = 0; a < m_; ++a) {
            const int k = int(lin % std::uint64_t(ch.nodes_per_axis));
            lin /= std::uint64_t(ch.nodes_per_axis);
            depth = std::min({depth, k, ch.nodes_per_axis - 1 - k});
        }
        return depth;
    }

    double spacing(int c = 0) const { return charts_[std::size_t(c)].spacing; }

    // --- ambient embedding (sphere grids) ----------------------------------

    int ambient_dim() const {
        require(model_ == GridModel::Sphere, "ambient embedding only on sphere grids");
        return m_ + 1;
    }

    // Position on S^m in R^{m+1}.
    Vec ambient_point(Index id) const {
        const int c = chart_of(id);
        const Vec x = coords(id);
        const double rho = x.norm();
        const double pole = (c == 0) ? 1.0 : -1.0;
        Vec p = Vec::Zero(m_ + 1);
        if (rho < kOriginTol) {
            p[m_] = pole * radius_;
            return p;
        }
        const double theta = rho / radius_;
        for (int a = 0; a < m_; ++a) p[a] = radius_ * std::sin(theta) * x[a] / rho;
        p[m_] = pole * radius_ * std::cos(theta);
        return p;
    }

    // Ambient representation of the orthonormal tangent frame: column i is
    // the push-forward of frame() column i, a unit tangent vector in R^{m+1}.
    Mat ambient_frame(Index id) const {
        const int c = chart_of(id);
        const Vec x = coords(id);
        const double rho = x.norm();
        if (rho < kOriginTol) {
            Mat dp = Mat::Zero(m_ + 1, m_);
            for (int a = 0; a < m_; ++a) dp(a, a) = 1.0;
            return dp;
        }
        const double theta = rho / radius_;
        const double pole = (c == 0) ? 1.0 : -1.0;
        const Vec xhat = x / rho;
        // d p = [cos(theta) xhat_emb - pole sin(theta) e_m] d rho
        //       + R sin(theta) d xhat_emb
        Mat dp(m_ + 1, m_);  // chart partials of the embedding
        const double s = std::sin(theta), co = std::cos(theta);
        for (int b = 0; b < m_; ++b) {
            for (int a = 0; a < m_; ++a)
                dp(a, b) = co * xhat[a] * xhat[b] +
                           (radius_ * s / rho) * ((a == b ? 1.0 : 0.0) - xhat[a] * xhat[b]);
            dp(m_, b) = -pole * s * xhat[b];
        }
        return dp * frame(id);
    }

    // Chart partials of the embedding (columns are d p / d x_a).
    Mat ambient_chart_partials(Index id) const {
        Mat A = ambient_frame(id);
        Mat Finv = frame(id).inverse();
        return A * Finv;
    }

    // --- integration helpers ------------------------------------------------

    double total_volume() const {
        return pairwise_sum(total_, [&](Index i) { return weight(i); });
    }

    // Boundary-sphere quadrature on pole grids: nodes are weighted by a
    // normalized smooth radial window of width `width` around shell_r, so
    // the sum of w * window approximates the surface integral over the
    // geodesic sphere of radius shell_r. A sharp half-cell slab suffers a
    // few-percent lattice noise; the smooth window trades that for an
    // O(width^2) bias. With `model_area_correction` each node's contribution
    // is rescaled by the known radial growth of the model area law
    // (f(shell_r)/f(r))^{m-1}, removing the window bias against steep area
    // functions; leave it off when the window must pair exactly with
    // ball_cutoff in Stokes-type identities.
    double shell_integral(double shell_r, const std::function<double(Index)>& f,
                          double width = -1.0, bool model_area_correction = false) const {
        require(has_pole(), "shell quadrature needs a pole grid");
        const double h = charts_[0].spacing;
        const double sigma = width > 0.0 ? width : 3.0 * h;
        require(shell_r - sigma > 0.0 && shell_r + sigma < r_max_,
                "shell exceeds grid extent");
        const double f0 = profile_.warp(shell_r);
        PairwiseAccumulator acc;
        for (Index i = 0; i < total_; ++i) {
            const double r = radial(i);
            const double t = (r - shell_r) / sigma;
            if (t <= -1.0 || t >= 1.0) continue;
            const double c = std::cos(0.5 * M_PI * t);
            double window = (c * c) / sigma;  // integral 1 over [-sigma, sigma]
            if (model_area_correction)
                window *= std::pow(f0 / profile_.warp(r), m_ - 1);
            acc.add(weight(i) * window * f(i));
        }
        return acc.total();
    }

    double shell_area(double shell_r, double width = -1.0) const {
        return shell_integral(shell_r, [](Index) { return 1.0; }, width, true);
    }

    // Smoothed ball indicator matching the shell window: equals 1 inside
    // B(shell_r - width), 0 outside B(shell_r + width), and its radial
    // derivative is minus the shell window. Stokes-type identities over the
    // smoothed region then pair exactly with shell_integral.
    static double ball_cutoff(double rho, double shell_r, double width) {
        const double x = rho - shell_r;
        if (x <= -width) return 1.0;
        if (x >= width) return 0.0;
        return 0.5 - 0.5 * x / width - std::sin(M_PI * x / width) / (2.0 * M_PI);
    }

    void dump(std::ostream& os) const {
        os << "# node chart";
        for (int a = 0; a < m_; ++a) os << " x" << a;
        os << " weight";
        for (int a = 0; a < m_; ++a)
            for (int b = a; b < m_; ++b) os << " g" << a << b;
        os << "\n";
        char buf[64];
        for (Index i = 0; i < total_; ++i) {
            const Vec x = coords(i);
            const Mat g = metric(i);
            os << i << " " << chart_of(i);
            for (int a = 0; a < m_; ++a) {
                std::snprintf(buf, sizeof buf, " %.17g", x[a]);
                os << buf;
            }
            std::snprintf(buf, sizeof buf, " %.17g", weight(i));
            os << buf;
            for (int a = 0; a < m_; ++a)
                for (int b = a; b < m_; ++b) {
                    std::snprintf(buf, sizeof buf, " %.17g", g(a, b));
                    os << buf;
                }
            os << "\n";
        }
    }

  private:
    GridModel model_ = GridModel::FlatBox;
    int m_ = 0;
    double side_ = 0.0;
    double radius_ = 0.0;
    double r_max_ = 0.0;
    double support_angle_ = 0.0;  // sphere: weight vanishes past this angle
    double blend_angle_ = 0.0;    // sphere: far-cutoff begins here
    CurvatureProfile profile_ = CurvatureProfile::flat();
    std::vector<Chart> charts_;
    Index total_ = 0;

    double node_coord(const Chart& ch, int k) const {
        if (model_ == GridModel::FlatTorus) return k * ch.spacing;
        if (model_ == GridModel::FlatBox) return (k + 0.5) * ch.spacing;
        return -ch.half_extent + (k + 0.5) * ch.spacing;  // centered charts
    }

    std::uint64_t linear_of(const Chart& ch, Index id) const {
        const Index local = id - ch.offset;
        return ch.ball_restricted ? ch.active[std::size_t(local)] : std::uint64_t(local);
    }

    std::uint64_t stride_of(const Chart& ch, int axis) const {
        std::uint64_t s = 1;
        for (int a = 0; a < axis; ++a) s *= std::uint64_t(ch.nodes_per_axis);
        return s;
    }

    void push_full_chart(Chart c) {
        c.offset = total_;
        c.count = 1;
        for (int a = 0; a < m_; ++a) c.count *= c.nodes_per_axis;
        total_ += c.count;
        charts_.push_back(std::move(c));
    }

    void push_ball_chart(Chart c, double ball_radius) {
        std::uint64_t n_all = 1;
        for (int a = 0; a < m_; ++a) n_all *= std::uint64_t(c.nodes_per_axis);
        const double rr = ball_radius * ball_radius;
        for (std::uint64_t lin = 0; lin < n_all; ++lin) {
            std::uint64_t t = lin;
            double s = 0.0;
            for (int a = 0; a < m_; ++a) {
                const int k = int(t % std::uint64_t(c.nodes_per_axis));
                t /= std::uint64_t(c.nodes_per_axis);
                const double x = node_coord(c, k);
                s += x * x;
            }
            if (s <= rr) c.active.push_back(lin);
        }
        c.offset = total_;
        c.count = Index(c.active.size());
        total_ += c.count;
        charts_.push_back(std::move(c));
    }

    // Transverse metric eigenvalue f(r)/r of the normal-coordinate chart.
    double transverse_scale(double r) const {
        if (model_ == GridModel::Sphere)
            return radius_ * std::sin(r / radius_) / r;
        return profile_.warp(r) / r;
    }

    // Partition of unity over the two caps, as a function of the polar angle
    // from the owning cap's pole. cos^2(theta/2) blended caps with a smooth
    // far cutoff; the two factors sum to one at every sphere point.
    double pou_weight(double theta) const {
        const double an = pou_raw(theta);
        const double as = pou_raw(M_PI - theta);
        return an / (an + as);
    }
    double pou_raw(double theta) const {
        const double c = std::cos(0.5 * theta);
        return c * c * (1.0 - smooth_step((theta - blend_angle_) / (support_angle_ - blend_angle_)));
    }

    // Orthogonal matrix whose first column is the given unit vector.
    Mat householder_basis(const Vec& u) const {
        Mat H = Mat::Identity(m_, m_);
        Vec w = u;
        w[0] -= 1.0;
        const double n2 = w.squaredNorm();
        if (n2 > 1e-28) H -= (2.0 / n2) * (w * w.transpose());
        return H;
    }
};

}  // namespace phi3
