#pragma once

#include "phi3/artifact.hpp"
#include "phi3/checks.hpp"
#include "phi3/config.hpp"
#include "phi3/report.hpp"

#include <thread>

namespace phi3 {

// Exit codes of the command-line runs.
inline constexpr int kExitPass = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitCheckFailed = 2;

struct RunOutcome {
    int exit_code = kExitPass;
    Json summary;
    std::string series_csv;   // empty when the operation emits no series
    bool wrote_artifact = false;
};

namespace runner_detail {

// Deterministic smooth ambient perturbation field from a seed.
inline std::function<Vec(const Vec&)> perturbation_field(int q, unsigned long seed,
                                                         double amplitude) {
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const int modes = 3;
    std::vector<Vec> amp(static_cast<std::size_t>(modes)), dir(static_cast<std::size_t>(modes));
    std::vector<double> phase(static_cast<std::size_t>(modes));
    for (int k = 0; k < modes; ++k) {
        amp[std::size_t(k)] = Vec(q);
        dir[std::size_t(k)] = Vec(q);
        for (int j = 0; j < q; ++j) {
            amp[std::size_t(k)][j] = unif(rng);
            dir[std::size_t(k)][j] = unif(rng);
        }
        phase[std::size_t(k)] = M_PI * unif(rng);
    }
    return [=](const Vec& p) {
        Vec v = Vec::Zero(p.size());
        for (int k = 0; k < modes; ++k)
            v += amplitude * std::sin(dir[std::size_t(k)].dot(p) + phase[std::size_t(k)]) *
                 amp[std::size_t(k)];
        return v;
    };
}

inline Mat matrix_from_string(const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::istringstream in(text);
    std::string rowtext;
    while (std::getline(in, rowtext, ';')) {
        std::istringstream rin(rowtext);
        std::vector<double> row;
        double x;
        while (rin >> x) row.push_back(x);
        if (!row.empty()) rows.push_back(row);
    }
    require(!rows.empty(), "map.matrix: empty matrix");
    Mat A(int(rows.size()), int(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i].size() == rows[0].size(), "map.matrix: ragged rows");
        for (std::size_t j = 0; j < rows[i].size(); ++j) A(int(i), int(j)) = rows[i][j];
    }
    return A;
}

}  // namespace runner_detail

// Build the configured map over a grid/target pair.
inline MapField map_from_config(const Config& c, const DomainGrid& grid,
                                const EmbeddedTarget& target) {
    const std::string kind = c.str("map.kind");
    const int q = target.ambient_dim();
    if (kind == "constant") {
        const auto entries = c.numbers("map.value");
        require(int(entries.size()) == q, "map.value: expected " + std::to_string(q) +
                                              " components");
        Vec v(q);
        for (std::size_t i = 0; i < entries.size(); ++i) v[int(i)] = entries[i];
        require(target.constraint_residual(v) <= 1e-8,
                "map.value: point does not lie on the target");
        return MapField::analytic(grid, target, std::make_shared<ConstantMap>(v, grid.dim()));
    }
    if (kind == "linear") {
        Mat A = runner_detail::matrix_from_string(c.str("map.matrix"));
        require(int(A.rows()) == q, "map.matrix: row count must match the ambient dimension");
        require(int(A.cols()) == grid.dim(), "map.matrix: column count must match the domain");
        return MapField::analytic(grid, target,
                                  std::make_shared<LinearChartMap>(A, Vec::Zero(q)));
    }
    if (kind == "sphere_identity") {
        require(grid.model() == GridModel::Sphere, "sphere_identity needs a sphere grid");
        require(dynamic_cast<const SphereTarget*>(&target) != nullptr,
                "sphere_identity needs a sphere target");
        return MapField::analytic(grid, target, std::make_shared<SphereIdentityMap>());
    }
    if (kind == "perturbed_identity") {
        require(grid.model() == GridModel::Sphere, "perturbed_identity needs a sphere grid");
        const auto field = runner_detail::perturbation_field(
            q, static_cast<unsigned long>(c.integer_or("run.seed", 1)),
            c.number_or("map.amplitude", 0.1));
        std::vector<Vec> vals(static_cast<std::size_t>(grid.node_count()));
        for (Index i = 0; i < grid.node_count(); ++i) {
            const Vec p = grid.ambient_point(i);
            vals[std::size_t(i)] = target.project(p + field(p));
        }
        return MapField::from_values(grid, target, vals);
    }
    if (kind == "perturbed_constant") {
        const auto base = c.numbers("map.value");
        require(int(base.size()) == q, "map.value: expected ambient components");
        Vec v(q);
        for (std::size_t i = 0; i < base.size(); ++i) v[int(i)] = base[i];
        const auto field = runner_detail::perturbation_field(
            q, static_cast<unsigned long>(c.integer_or("run.seed", 1)),
            c.number_or("map.amplitude", 0.1));
        std::vector<Vec> vals(static_cast<std::size_t>(grid.node_count()));
        for (Index i = 0; i < grid.node_count(); ++i) {
            const Vec x = grid.coords(i);
            Vec probe = Vec::Zero(q);
            for (int a = 0; a < std::min<int>(q, grid.dim()); ++a) probe[a] = std::sin(x[a]);
            vals[std::size_t(i)] = target.project(v + field(probe));
        }
        return MapField::from_values(grid, target, vals);
    }
    if (kind == "artifact") {
        const auto art = RunArtifact::read_file(c.str("map.path"));
        return art.restore(grid, target);
    }
    throw Error("config field map.kind: unknown map '" + kind + "'");
}

namespace runner_detail {

inline Json check_to_json(const CheckResult& r) {
    Json j;
    j["name"] = r.name;
    j["lhs"] = r.lhs;
    j["rhs"] = r.rhs;
    j["residual"] = r.residual;
    j["order_estimate"] = r.order;
    j["pass"] = r.pass;
    return j;
}

inline Mutation mutation_from_string(const std::string& s) {
    if (s == "none") return Mutation::None;
    if (s == "flip_tension_sign") return Mutation::FlipTensionSign;
    if (s == "flip_stress_coupling") return Mutation::FlipStressCoupling;
    if (s == "drop_grad_term_1") return Mutation::DropGradTerm1;
    if (s == "drop_grad_term_2") return Mutation::DropGradTerm2;
    if (s == "drop_grad_term_3") return Mutation::DropGradTerm3;
    if (s == "drop_grad_term_4") return Mutation::DropGradTerm4;
    if (s == "drop_grad_term_5") return Mutation::DropGradTerm5;
    throw Error("operation.mutation: unknown mutation '" + s + "'");
}

inline RunOutcome run_energy(const Config& cfg) {
    auto grid = grid_from_config(cfg);
    auto target = target_from_config(cfg);
    auto u = map_from_config(cfg, grid, *target);
    const int k = int(cfg.integer_or("operation.k", 3));
    std::optional<double> region;
    if (cfg.has("operation.region")) region = cfg.number("operation.region");
    const auto stats = phi_energy_stats(u, k, region);
    RunOutcome out;
    out.summary["energy"] = stats.energy;
    out.summary["density_min"] = stats.density_min;
    out.summary["density_max"] = stats.density_max;
    out.summary["node_count"] = stats.node_count;
    return out;
}

inline RunOutcome run_variation_verify(const Config& cfg) {
    const bool full = cfg.str_or("operation.level", "quick") == "full";
    const Mutation mut = mutation_from_string(cfg.str_or("operation.mutation", "none"));
    RunOutcome out;
    std::vector<CheckResult> results;
    results.push_back(checks::first_variation_fd(full, mut));
    results.push_back(checks::first_variation_fd_sphere(full, mut));
    results.push_back(checks::dual_first_variation_linear(mut));
    results.push_back(checks::dual_first_variation_richardson(full, mut));
    results.push_back(checks::conservation_order(full, mut));
    results.push_back(checks::stokes_residual(mut));
    results.push_back(checks::second_variation_symmetry(mut));
    results.push_back(checks::second_variation_fd(mut));
    Json arr = Json::array();
    CsvWriter csv({"check", "lhs", "rhs", "residual", "order"});
    int idx = 0;
    for (const auto& r : results) {
        arr.push_back(check_to_json(r));
        csv.add_row({double(idx++), r.lhs, r.rhs, r.residual, r.order});
    }
    out.summary["identities"] = arr;
    out.summary["pass"] = all_pass(results);
    out.series_csv = csv.str();
    out.exit_code = all_pass(results) ? kExitPass : kExitCheckFailed;
    return out;
}

inline RunOutcome run_ssu_check(const Config& cfg) {
    const std::string criterion = cfg.str("ssu.criterion");
    RunOutcome out;
    Json& s = out.summary;
    s["criterion"] = criterion;
    bool pass = false;
    if (criterion == "sphere") {
        const int m = int(cfg.integer("ssu.m"));
        pass = sphere_is_phi3_ssu(m);
        s["inputs"] = {{"m", m}};
        s["threshold"] = 6.0;
        s["value"] = 6.0 - m;  // top eigenvalue of the certificate form
        CsvWriter csv({"m", "max_eigenvalue", "is_ssu"});
        for (int mm = 2; mm <= 20; ++mm)
            csv.add_row({double(mm), 6.0 - mm, sphere_is_phi3_ssu(mm) ? 1.0 : 0.0});
        out.series_csv = csv.str();
    } else if (criterion == "hypersurface") {
        PrincipalCurvatures pc(cfg.numbers("ssu.lambda"));
        pass = hypersurface_phi3_ssu(pc);
        const auto form = ssu_form_from_principal(pc);
        s["inputs"] = {{"m", pc.dim()}};
        s["threshold"] = 0.0;
        s["value"] = form.max_eigenvalue;
    } else if (criterion == "p_hypersurface") {
        PrincipalCurvatures pc(cfg.numbers("ssu.lambda"));
        const double p = cfg.number("ssu.p");
        pass = hypersurface_p_ssu(pc, p);
        s["inputs"] = {{"m", pc.dim()}, {"p", p}};
        s["threshold"] = 0.0;
        s["value"] = pass ? -1.0 : 1.0;
    } else if (criterion == "ellipsoid") {
        const auto axes = cfg.numbers("ssu.axes");
        Vec a(int(axes.size()));
        for (std::size_t i = 0; i < axes.size(); ++i) a[int(i)] = axes[i];
        const double ric = cfg.number("ssu.ric_min");
        const int k = int(cfg.integer("ssu.k"));
        pass = ellipsoid_ssu_sufficient(a, ric, k);
        s["inputs"] = {{"ric_min", ric}, {"k", k}};
        s["threshold"] = ellipsoid_ssu_threshold(a, k);
        s["value"] = ric;
    } else if (criterion == "minimal_submanifold") {
        const double ric = cfg.number("ssu.ric_min");
        const int k = int(cfg.integer("ssu.k"));
        const double lmax = cfg.number("ssu.lambda_max");
        pass = minimal_submanifold_criterion(ric, k, lmax);
        s["inputs"] = {{"ric_min", ric}, {"k", k}, {"lambda_max", lmax}};
        s["threshold"] = minimal_submanifold_threshold(k, lmax);
        s["value"] = ric;
    } else if (criterion == "b1_norm") {
        const double b1 = cfg.number("ssu.b1_norm_sq");
        const int k = int(cfg.integer("ssu.k"));
        pass = b1_norm_criterion(b1, k);
        s["inputs"] = {{"b1_norm_sq", b1}, {"k", k}};
        s["threshold"] = b1_norm_threshold(k);
        s["value"] = b1;
    } else if (criterion == "map_instability") {
        auto grid = grid_from_config(cfg);
        auto target = target_from_config(cfg);
        auto u = map_from_config(cfg, grid, *target);
        const auto rep = average_variation_into_ssu(u);
        pass = rep.bound_holds;
        s["inputs"] = {{"axes", int(rep.per_axis.size())}};
        s["threshold"] = rep.bound;
        s["value"] = rep.total;
        s["destabilizer_index"] = rep.destabilizer_index;
        s["harmonic_residual"] = rep.harmonic_residual;
        CsvWriter csv({"axis", "second_variation"});
        for (std::size_t l = 0; l < rep.per_axis.size(); ++l)
            csv.add_row({double(l), rep.per_axis[l]});
        out.series_csv = csv.str();
    } else {
        throw Error("config field ssu.criterion: unknown criterion '" + criterion + "'");
    }
    s["pass"] = pass;
    out.exit_code = pass ? kExitPass : kExitCheckFailed;
    return out;
}

inline RunOutcome run_liouville(const Config& cfg) {
    const int m = int(cfg.integer("domain.m"));
    const auto profile = profile_from_config(cfg, "domain");
    const auto lam = lambda_constant(profile, m);
    RunOutcome out;
    out.summary["lambda"] = lam.value;
    out.summary["hypotheses_met"] = lam.hypotheses_met;
    out.summary["min_condition"] = lam.min_condition;

    CsvWriter csv({"r", "lambda_min", "lambda_max", "condition"});
    for (int k = 1; k <= 100; ++k) {
        const double r = 0.1 * k;
        const auto h = hessian_comparison(profile, r, m);
        csv.add_row({r, h.lambda_min, h.lambda_max, h.condition});
    }
    out.series_csv = csv.str();

    bool pass = lam.hypotheses_met;
    if (cfg.has("map.kind")) {
        auto grid = grid_from_config(cfg);
        auto target = target_from_config(cfg);
        auto u = map_from_config(cfg, grid, *target);
        const double zeta = cfg.number_or("operation.zeta", lam.value);
        const auto radii = cfg.numbers("operation.radii");
        const auto rep = monotonicity_check(u, zeta, radii);
        out.summary["monotonicity_pass"] = rep.pass;
        out.summary["condition_ok"] = rep.condition_ok;
        out.summary["harmonic_residual"] = rep.harmonic_residual;
        Json values = Json::array();
        for (std::size_t k = 0; k < rep.radii.size(); ++k)
            values.push_back({{"rho", rep.radii[k]}, {"normalized", rep.normalized[k]}});
        out.summary["normalized_energy"] = values;
        pass = pass && rep.pass;
    }
    out.summary["pass"] = pass;
    out.exit_code = pass ? kExitPass : kExitCheckFailed;
    return out;
}

inline RunOutcome run_flow(const Config& cfg, const std::string& outdir) {
    auto grid = grid_from_config(cfg);
    auto target = target_from_config(cfg);
    auto u0 = map_from_config(cfg, grid, *target);
    const std::string mode = cfg.str_or("operation.mode", "gradient");
    RunOutcome out;
    CsvWriter csv({"step", "energy", "residual", "ratio"});
    if (mode == "gradient") {
        GradientFlowOptions opt;
        opt.max_steps = int(cfg.integer_or("operation.iterations", 500));
        opt.residual_tol = cfg.number_or("operation.tolerance", 1e-8);
        const auto res = gradient_flow(u0, opt);
        for (const auto& e : res.trace.entries)
            csv.add_row({double(e.step), e.energy, e.residual, e.ratio});
        out.summary["initial_energy"] = res.trace.entries.front().energy;
        out.summary["final_energy"] = res.final_energy;
        out.summary["final_residual"] = res.final_residual;
        out.summary["converged"] = res.converged;
        out.summary["stalled"] = res.stalled;
        out.summary["empirical_rho"] = 0.0;
        out.summary["predicted_rho"] = 0.0;
        out.exit_code = res.stalled ? kExitCheckFailed : kExitPass;
        if (cfg.str_or("output.artifact", "false") == "true") {
            auto field = MapField::from_values(grid, *target, res.values);
            RunArtifact::from_map(field, cfg.str("domain.model"), cfg.hash())
                .write_file(outdir + "/artifact.map");
            out.wrote_artifact = true;
        }
    } else if (mode == "shrink") {
        const int iters = int(cfg.integer_or("operation.iterations", 10));
        const bool diagnostic = cfg.str_or("operation.diagnostic", "false") == "true";
        const auto res = homotopy_shrink(u0, iters, diagnostic);
        for (const auto& e : res.trace.entries)
            csv.add_row({double(e.step), e.energy, e.residual, e.ratio});
        out.summary["initial_energy"] = res.initial_energy;
        out.summary["final_energy"] = res.final_energy;
        out.summary["empirical_rho"] = res.empirical_rho;
        out.summary["predicted_rho"] = res.schedule.rho_predicted;
        out.summary["kappa"] = res.schedule.kappa;
        out.summary["xi"] = res.schedule.xi;
        out.summary["zeta"] = res.schedule.zeta;
        out.summary["descent_axis_found"] = res.descent_axis_found;
        const bool ok = res.initial_energy == 0.0 ||
                        (res.descent_axis_found && res.empirical_rho < 1.0) || diagnostic;
        out.exit_code = ok ? kExitPass : kExitCheckFailed;
    } else {
        throw Error("operation.mode: unknown flow mode '" + mode + "'");
    }
    out.series_csv = csv.str();
    return out;
}

inline RunOutcome run_verify_suite(const Config& cfg) {
    const bool full = cfg.str_or("operation.level", "quick") == "full";
    const Mutation mut = mutation_from_string(cfg.str_or("operation.mutation", "none"));
    const auto results = verify_suite(full, mut);
    RunOutcome out;
    Json arr = Json::array();
    CsvWriter csv({"index", "lhs", "rhs", "residual", "order"});
    int idx = 0;
    for (const auto& r : results) {
        arr.push_back(check_to_json(r));
        csv.add_row({double(idx++), r.lhs, r.rhs, r.residual, r.order});
    }
    out.summary["checks"] = arr;
    out.summary["pass"] = all_pass(results);
    out.series_csv = csv.str();
    out.exit_code = all_pass(results) ? kExitPass : kExitCheckFailed;
    return out;
}

}  // namespace runner_detail

// Execute one operation and write summary.json / series.csv to `outdir`.
// Returns exit code 0 on pass, 2 on check failure; errors throw phi3::Error
// (the CLI maps them to exit code 1).
inline RunOutcome run_operation(const Config& cfg, const std::string& op,
                                const std::string& outdir) {
    if (!outdir.empty()) ensure_directory(outdir);
    RunOutcome out;
    if (op == "energy")
        out = runner_detail::run_energy(cfg);
    else if (op == "variation-verify")
        out = runner_detail::run_variation_verify(cfg);
    else if (op == "ssu-check")
        out = runner_detail::run_ssu_check(cfg);
    else if (op == "liouville")
        out = runner_detail::run_liouville(cfg);
    else if (op == "flow")
        out = runner_detail::run_flow(cfg, outdir);
    else if (op == "verify-suite")
        out = runner_detail::run_verify_suite(cfg);
    else
        throw Error("unknown operation: " + op);

    out.summary["operation"] = op;
    out.summary["config_hash"] = cfg.hash();
    out.summary["seed"] = cfg.integer_or("run.seed", 1);
    out.summary["workers"] = cfg.integer_or(
        "run.workers", long(std::max(1u, std::thread::hardware_concurrency())));
    if (!outdir.empty()) {
        write_json_file(outdir + "/summary.json", out.summary);
        if (!out.series_csv.empty()) {
            std::ofstream os(outdir + "/series.csv");
            os << out.series_csv;
        }
    }
    return out;
}

}  // namespace phi3
