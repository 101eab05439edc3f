#pragma once

#include "phi3/common.hpp"
#include "phi3/grid.hpp"
#include "phi3/targets.hpp"

#include <memory>
#include <utility>

namespace phi3 {

// Closed-form map u : M -> N <= R^q evaluated per grid node. du_frame returns
// the q x m matrix of du(e_i) in the node's orthonormal tangent frame.
class AnalyticMap {
  public:
    virtual ~AnalyticMap() = default;
    virtual Vec value(const DomainGrid& grid, Index node) const = 0;
    virtual Mat du_frame(const DomainGrid& grid, Index node) const = 0;
};

class ConstantMap final : public AnalyticMap {
  public:
    explicit ConstantMap(Vec v, int m) : v_(std::move(v)), m_(m) {}
    Vec value(const DomainGrid&, Index) const override { return v_; }
    Mat du_frame(const DomainGrid&, Index) const override {
        return Mat::Zero(v_.size(), m_);
    }

  private:
    Vec v_;
    int m_;
};

// u(x) = A x + b in chart coordinates of a flat grid.
class LinearChartMap final : public AnalyticMap {
  public:
    LinearChartMap(Mat A, Vec b) : A_(std::move(A)), b_(std::move(b)) {}
    Vec value(const DomainGrid& g, Index i) const override { return A_ * g.coords(i) + b_; }
    Mat du_frame(const DomainGrid& g, Index i) const override { return A_ * g.frame(i); }

  private:
    Mat A_;
    Vec b_;
};

// Identity of a sphere grid onto its own sphere, optionally composed with an
// ambient orthogonal matrix (a rotation of the sphere).
class SphereIdentityMap final : public AnalyticMap {
  public:
    SphereIdentityMap() = default;
    explicit SphereIdentityMap(Mat rotation) : rot_(std::move(rotation)), rotated_(true) {}

    Vec value(const DomainGrid& g, Index i) const override {
        Vec p = g.ambient_point(i);
        return rotated_ ? Vec(rot_ * p) : p;
    }
    Mat du_frame(const DomainGrid& g, Index i) const override {
        Mat f = g.ambient_frame(i);
        return rotated_ ? Mat(rot_ * f) : f;
    }

  private:
    Mat rot_;
    bool rotated_ = false;
};

// The map u sampled on a DomainGrid with values in an embedded target.
// Three backings:
//   - analytic:                value/du from a closed-form map
//   - stored values + du:      flows update du by exact chain rule
//   - stored values only:      du by second-order central differences
// An analytic base plus a stored displacement supports perturbed maps whose
// base has no single-chart representation (e.g. the torus identity).
class MapField {
  public:
    static MapField analytic(const DomainGrid& grid, const EmbeddedTarget& target,
                             std::shared_ptr<const AnalyticMap> map) {
        MapField u(grid, target);
        u.base_ = std::move(map);
        return u;
    }

    static MapField from_values(const DomainGrid& grid, const EmbeddedTarget& target,
                                std::vector<Vec> values) {
        MapField u(grid, target);
        require(Index(values.size()) == grid.node_count(), "MapField: values size mismatch");
        u.values_ = std::move(values);
        return u;
    }

    static MapField from_values_and_du(const DomainGrid& grid, const EmbeddedTarget& target,
                                       std::vector<Vec> values, std::vector<Mat> du) {
        MapField u = from_values(grid, target, std::move(values));
        require(Index(du.size()) == grid.node_count(), "MapField: du size mismatch");
        u.du_ = std::move(du);
        return u;
    }

    static MapField displaced(const DomainGrid& grid, const EmbeddedTarget& target,
                              std::shared_ptr<const AnalyticMap> base,
                              std::vector<Vec> displacement) {
        MapField u(grid, target);
        require(Index(displacement.size()) == grid.node_count(),
                "MapField: displacement size mismatch");
        u.base_ = std::move(base);
        u.values_ = std::move(displacement);
        u.displacement_ = true;
        return u;
    }

    const DomainGrid& grid() const { return *grid_; }
    const EmbeddedTarget& target() const { return *target_; }
    int ambient_dim() const { return target_->ambient_dim(); }

    Vec value(Index i) const {
        if (base_ && !displacement_) return base_->value(*grid_, i);
        if (displacement_) return base_->value(*grid_, i) + values_[std::size_t(i)];
        return values_[std::size_t(i)];
    }

    bool has_stored_du() const { return !du_.empty(); }
    bool is_analytic() const { return bool(base_) && !displacement_; }
    const AnalyticMap* analytic_map() const { return is_analytic() ? base_.get() : nullptr; }

    // Layers of neighbors a node needs before du is defined there.
    int du_stencil_layers() const {
        return (is_analytic() || has_stored_du()) ? 0 : 1;
    }

    bool du_defined(Index i) const {
        return grid_->interior_depth(i) >= du_stencil_layers();
    }

    // du in the node's orthonormal frame (q x m).
    Mat du_frame(Index i) const {
        if (!du_.empty()) return du_[std::size_t(i)];
        if (base_ && !displacement_) return base_->du_frame(*grid_, i);
        Mat d = fd_chart_partials(i) * grid_->frame(i);
        if (displacement_) d += base_->du_frame(*grid_, i);
        return d;
    }

    // Materialize values and du arrays (used to seed flows).
    MapField materialized() const {
        const Index n = grid_->node_count();
        std::vector<Vec> vals(static_cast<std::size_t>(n));
        std::vector<Mat> du(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) {
            vals[std::size_t(i)] = value(i);
            du[std::size_t(i)] = du_defined(i) ? du_frame(i)
                                               : Mat::Zero(ambient_dim(), grid_->dim());
        }
        return from_values_and_du(*grid_, *target_, std::move(vals), std::move(du));
    }

    double max_constraint_residual() const {
        double r = 0.0;
        for (Index i = 0; i < grid_->node_count(); ++i)
            r = std::max(r, target_->constraint_residual(value(i)));
        return r;
    }

    double max_du_tangency_residual() const {
        double r = 0.0;
        for (Index i = 0; i < grid_->node_count(); ++i) {
            if (!du_defined(i) || grid_->weight(i) == 0.0) continue;
            const Vec p = value(i);
            const Mat d = du_frame(i);
            for (int a = 0; a < d.cols(); ++a) {
                const Vec col = d.col(a);
                r = std::max(r, (col - target_->tangent_project(p, col)).norm());
            }
        }
        return r;
    }

  private:
    MapField(const DomainGrid& grid, const EmbeddedTarget& target)
        : grid_(&grid), target_(&target) {}

    Mat fd_chart_partials(Index i) const {
        const int m = grid_->dim();
        const int q = target_->ambient_dim();
        Mat d = Mat::Zero(q, m);
        const double h = grid_->spacing(grid_->chart_of(i));
        for (int a = 0; a < m; ++a) {
            const Index ip = grid_->neighbor(i, a, +1);
            const Index im = grid_->neighbor(i, a, -1);
            require(ip != kNoNode && im != kNoNode, "du stencil out of grid");
            d.col(a) = (raw_value(ip) - raw_value(im)) / (2.0 * h);
        }
        return d;
    }

    // Differences act on the stored component only (the analytic base is
    // differentiated in closed form).
    Vec raw_value(Index i) const { return values_[std::size_t(i)]; }

    const DomainGrid* grid_;
    const EmbeddedTarget* target_;
    std::shared_ptr<const AnalyticMap> base_;
    std::vector<Vec> values_;
    std::vector<Mat> du_;
    bool displacement_ = false;
};

// A section of u^{-1}TN with a compact-support mask. dv_ambient holds the
// ambient directional derivatives D_{e_i} v (q x m) when available; absent
// entries are filled by differences on demand.
struct VariationSample {
    Vec v;
    Mat dv_ambient;
    bool in_support = true;
};

class VariationField {
  public:
    VariationField() = default;

    static VariationField from_values(const MapField& u, std::vector<Vec> values,
                                      std::vector<char> support = {}) {
        VariationField f;
        f.init(u, std::move(values), std::move(support));
        f.project_tangent(u);
        return f;
    }

    // Tangential part of a constant ambient direction along u.
    static VariationField tangential_axis(const MapField& u, const Vec& direction) {
        const Index n = u.grid().node_count();
        std::vector<Vec> vals(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i)
            vals[std::size_t(i)] = u.target().tangent_project(u.value(i), direction);
        VariationField f;
        f.init(u, std::move(vals), {});
        if (dynamic_cast<const SphereTarget*>(&u.target()) != nullptr) {
            // v = w - <w,u> u / R^2 differentiates in closed form
            const double R = static_cast<const SphereTarget&>(u.target()).radius();
            f.dv_.resize(static_cast<std::size_t>(n));
            for (Index i = 0; i < n; ++i) {
                const Vec p = u.value(i);
                const Mat du = u.du_frame(i);
                Mat D(direction.size(), du.cols());
                for (int a = 0; a < du.cols(); ++a)
                    D.col(a) = -(direction.dot(du.col(a)) * p + direction.dot(p) * du.col(a)) /
                               (R * R);
                f.dv_[std::size_t(i)] = D;
            }
        }
        return f;
    }

    // Push-forward du(X) of a domain vector field given in frame coordinates.
    static VariationField pushforward(const MapField& u,
                                      const std::vector<Vec>& X_frame_coords,
                                      std::vector<char> support = {}) {
        const Index n = u.grid().node_count();
        std::vector<Vec> vals(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i)
            vals[std::size_t(i)] = u.du_defined(i)
                                       ? Vec(u.du_frame(i) * X_frame_coords[std::size_t(i)])
                                       : Vec::Zero(u.ambient_dim());
        return from_values(u, std::move(vals), std::move(support));
    }

    Index size() const { return Index(values_.size()); }
    bool in_support(Index i) const { return support_.empty() || support_[std::size_t(i)] != 0; }
    const Vec& value(Index i) const { return values_[std::size_t(i)]; }
    bool has_analytic_derivative() const { return !dv_.empty(); }

    // Ambient derivative along frame directions; falls back to central
    // differences of the stored values.
    Mat derivative(const MapField& u, Index i) const {
        if (!dv_.empty()) return dv_[std::size_t(i)];
        const DomainGrid& g = u.grid();
        const int m = g.dim();
        Mat d = Mat::Zero(values_[0].size(), m);
        const double h = g.spacing(g.chart_of(i));
        for (int a = 0; a < m; ++a) {
            const Index ip = g.neighbor(i, a, +1);
            const Index im = g.neighbor(i, a, -1);
            require(ip != kNoNode && im != kNoNode, "variation stencil out of grid");
            d.col(a) = (values_[std::size_t(ip)] - values_[std::size_t(im)]) / (2.0 * h);
        }
        return d * g.frame(i);
    }

    VariationSample sample(const MapField& u, Index i) const {
        return {values_[std::size_t(i)], derivative(u, i), in_support(i)};
    }

    double max_normal_residual(const MapField& u) const {
        double r = 0.0;
        for (Index i = 0; i < size(); ++i) {
            if (!in_support(i)) continue;
            const Vec& v = values_[std::size_t(i)];
            r = std::max(r, (v - u.target().tangent_project(u.value(i), v)).norm());
        }
        return r;
    }

    void negate() {
        for (auto& v : values_) v = -v;
        for (auto& d : dv_) d = -d;
    }

  private:
    void init(const MapField& u, std::vector<Vec> values, std::vector<char> support) {
        require(Index(values.size()) == u.grid().node_count(),
                "VariationField: size mismatch");
        values_ = std::move(values);
        support_ = std::move(support);
        if (!support_.empty()) {
            for (std::size_t i = 0; i < values_.size(); ++i)
                if (!support_[i]) values_[i].setZero();
        }
    }

    void project_tangent(const MapField& u) {
        for (Index i = 0; i < size(); ++i)
            values_[std::size_t(i)] =
                u.target().tangent_project(u.value(i), values_[std::size_t(i)]);
    }

    std::vector<Vec> values_;
    std::vector<Mat> dv_;
    std::vector<char> support_;
};

// Lazily generated variation data, for frames of fields on large grids.
using VariationGen = std::function<VariationSample(Index)>;

inline VariationGen as_generator(const VariationField& f, const MapField& u) {
    return [&f, &u](Index i) { return f.sample(u, i); };
}

// Support mask keeping nodes with at least `depth` stencil layers.
inline std::vector<char> interior_support(const DomainGrid& g, int depth) {
    std::vector<char> s(std::size_t(g.node_count()), 0);
    for (Index i = 0; i < g.node_count(); ++i)
        s[std::size_t(i)] = g.interior_depth(i) >= depth ? 1 : 0;
    return s;
}

// Smooth compactly supported random tangent field, projected to the tangent
// space and masked. On multi-chart grids the field is a function of the
// ambient domain position, so both copies of a sphere point carry the same
// geometric vector; single-chart grids use periodic chart sinusoids.
inline VariationField random_variation(const MapField& u, Rng& rng, double amplitude,
                                       std::vector<char> support = {}) {
    const DomainGrid& g = u.grid();
    const int q = u.ambient_dim();
    const Index n = g.node_count();
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::uniform_int_distribution<int> freq(1, 2);
    const int modes = 3;
    const bool ambient = g.model() == GridModel::Sphere;
    const int dim = ambient ? g.dim() + 1 : g.dim();
    std::vector<Vec> amp(modes), dir(modes);
    std::vector<Vec> phase(modes);
    std::vector<std::vector<int>> k(modes);
    for (int s = 0; s < modes; ++s) {
        amp[std::size_t(s)] = Vec(q);
        phase[std::size_t(s)] = Vec(dim);
        for (int j = 0; j < q; ++j) amp[std::size_t(s)][j] = unif(rng);
        k[std::size_t(s)].resize(std::size_t(dim));
        for (int a = 0; a < dim; ++a) {
            k[std::size_t(s)][std::size_t(a)] = freq(rng);
            phase[std::size_t(s)][a] = M_PI * unif(rng);
        }
    }
    std::vector<Vec> vals(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const Vec x = ambient ? g.ambient_point(i) : g.coords(i);
        Vec v = Vec::Zero(q);
        for (int s = 0; s < modes; ++s) {
            double c = 1.0;
            for (int a = 0; a < dim; ++a)
                c *= std::sin(k[std::size_t(s)][std::size_t(a)] * x[a] + phase[std::size_t(s)][a]);
            v += amplitude * c * amp[std::size_t(s)];
        }
        vals[std::size_t(i)] = v;
    }
    return VariationField::from_values(u, std::move(vals), std::move(support));
}

}  // namespace phi3
