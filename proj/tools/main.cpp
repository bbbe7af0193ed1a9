#include "poisson_embed/calderon.hpp"
#include "poisson_embed/cli.hpp"
#include "poisson_embed/errors.hpp"
#include "poisson_embed/metric_recovery.hpp"
#include "poisson_embed/quasilinear.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>

using namespace poisson_embed;

namespace {

struct MeshOptions {
    double h = 0.1;
    std::string mesh_in, mesh_out, metric = "identity";
    double alpha = 1.0;

    void add(CLI::App* app) {
        app->add_option("--h", h, "target mesh size on the unit disk")->check(CLI::Range(1e-3, 0.25));
        app->add_option("--mesh-in", mesh_in, "read the mesh from this file instead of meshing the disk");
        app->add_option("--mesh-out", mesh_out, "write the mesh to this file");
        app->add_option("--metric", metric, "identity | conformal | aniso");
        app->add_option("--alpha", alpha, "exponent rate of the conformal metric");
    }

    HarmonicSolver solver() const {
        const TriMesh mesh = mesh_in.empty() ? build_disk_mesh(1.0, h) : read_mesh_file(mesh_in);
        if (!mesh_out.empty()) write_mesh_file(mesh_out, mesh);
        return HarmonicSolver(mesh, named_metric(metric, alpha));
    }
};

Point2 pair_of(const std::vector<double>& v, const std::string& flag) {
    if (v.size() != 2) throw Error(ErrorCode::ConfigError, "key '" + flag + "' needs two comma-separated values");
    return {v[0], v[1]};
}

int nearest_node(const TriMesh& mesh, const Point2& p) {
    int best = 0;
    for (int i = 1; i < mesh.num_nodes(); ++i) {
        if ((mesh.nodes[static_cast<std::size_t>(i)] - p).squaredNorm() <
            (mesh.nodes[static_cast<std::size_t>(best)] - p).squaredNorm()) {
            best = i;
        }
    }
    return best;
}

std::vector<Point2> read_points(const std::string& path) {
    const CsvTable t = read_csv_file(path);
    if (t.header.size() < 2 || t.header[0] != "x" || t.header[1] != "y") {
        throw Error(ErrorCode::IoError, path + ": expected header x,y");
    }
    std::vector<Point2> out;
    for (const auto& row : t.rows) out.emplace_back(std::stod(row[0]), std::stod(row[1]));
    return out;
}

std::string fmt(double v) { return format_number(v); }

void emit(const CsvTable& table, const std::string& out) {
    if (out.empty() || out == "-") write_csv(std::cout, table);
    else write_csv_file(out, table);
}

void print_checks(const RunReport& report) {
    for (const auto& c : report.checks) {
        std::cout << (c.passed ? "pass " : "FAIL ") << report.scenario << " " << c.name << " value=" << fmt(c.value)
                  << " threshold=" << fmt(c.threshold) << "\n";
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Poisson embedding laboratory"};
    // --h is the mesh size, so help is long-form only.
    app.set_help_flag("--help", "print help");
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    // dnmap
    MeshOptions dn_mesh;
    std::string dn_out;
    auto* dnmap = app.add_subcommand("dnmap", "write the weak DN matrix on the boundary loop");
    dn_mesh.add(dnmap);
    dnmap->add_option("--out", dn_out, "CSV output (stdout when omitted)");
    dnmap->callback([&] {
        const HarmonicSolver s = dn_mesh.solver();
        const DnMap dn = s.dn_map();
        CsvTable t;
        t.header = {"node"};
        for (int b : s.mesh().boundary_loop) t.header.push_back("n" + std::to_string(b));
        for (int i = 0; i < s.num_boundary(); ++i) {
            std::vector<std::string> row = {std::to_string(s.mesh().boundary_loop[static_cast<std::size_t>(i)])};
            for (int j = 0; j < s.num_boundary(); ++j) row.push_back(fmt(dn.lambda(i, j)));
            t.add_row(row);
        }
        emit(t, dn_out);
    });

    // kernel
    MeshOptions k_mesh;
    int k_node = -1;
    std::string k_out;
    auto* kernel = app.add_subcommand("kernel", "write the harmonic-measure row of an interior node");
    k_mesh.add(kernel);
    kernel->add_option("--x", k_node, "interior node index")->required();
    kernel->add_option("--out", k_out, "CSV output");
    kernel->callback([&] {
        const HarmonicSolver s = k_mesh.solver();
        if (k_node < 0 || k_node >= s.mesh().num_nodes()) throw Error(ErrorCode::ConfigError, "key 'x' out of range");
        const HarmonicMeasureRow row = s.harmonic_measure_row(k_node);
        CsvTable t;
        t.header = {"position", "node", "x", "y", "weight"};
        for (int i = 0; i < s.num_boundary(); ++i) {
            const int b = s.mesh().boundary_loop[static_cast<std::size_t>(i)];
            const Point2& p = s.mesh().nodes[static_cast<std::size_t>(b)];
            t.add_row({std::to_string(i), std::to_string(b), fmt(p.x()), fmt(p.y()), fmt(row.weights(i))});
        }
        emit(t, k_out);
    });

    // runge-jet
    MeshOptions j_mesh;
    std::vector<double> j_p{0.0, 0.0}, j_xi{0.0, 0.0}, j_h{0.0, 0.0, 0.0};
    double j_a0 = 0.0;
    int j_k = 32;
    std::string j_out;
    auto* jet = app.add_subcommand("runge-jet", "boundary data realizing a 2-jet at a point");
    j_mesh.add(jet);
    jet->add_option("--p", j_p, "point X,Y")->delimiter(',');
    jet->add_option("--a0", j_a0, "value");
    jet->add_option("--xi", j_xi, "gradient X,Y")->delimiter(',');
    jet->add_option("--H", j_h, "Hessian h11,h12,h22 (trace-free for the metric)")->delimiter(',');
    jet->add_option("--K", j_k, "number of boundary modes");
    jet->add_option("--out", j_out, "CSV of the boundary data");
    int jet_status = 0;
    jet->callback([&] {
        const HarmonicSolver s = j_mesh.solver();
        if (j_h.size() != 3) throw Error(ErrorCode::ConfigError, "key 'H' needs h11,h12,h22");
        Jet2Target target;
        target.p = pair_of(j_p, "p");
        target.a0 = j_a0;
        target.xi0 = pair_of(j_xi, "xi");
        target.h0 << j_h[0], j_h[1], j_h[1], j_h[2];
        const SourceBasis basis = SourceBasis::for_gamma(s, j_k);
        const JetFit fit = prescribe_jet(s, basis, target);
        CsvTable t;
        t.header = {"position", "node", "x", "y", "f"};
        for (int i = 0; i < s.num_boundary(); ++i) {
            const int b = s.mesh().boundary_loop[static_cast<std::size_t>(i)];
            const Point2& p = s.mesh().nodes[static_cast<std::size_t>(b)];
            t.add_row({std::to_string(i), std::to_string(b), fmt(p.x()), fmt(p.y()), fmt(fit.boundary_data(i))});
        }
        emit(t, j_out);
        const Jet& a = fit.achieved;
        std::cerr << "achieved value " << fmt(a.value) << " gradient " << fmt(a.gradient(0)) << "," << fmt(a.gradient(1))
                  << " hessian " << fmt(a.hessian(0, 0)) << "," << fmt(a.hessian(0, 1)) << "," << fmt(a.hessian(1, 1))
                  << "\nmax error " << fmt(fit.max_error) << " tol_jet " << fmt(fit.tol_jet)
                  << (fit.within_tolerance ? " ok" : " EXCEEDED") << "\n";
        jet_status = fit.within_tolerance ? 0 : 1;
    });

    // runge-fit
    MeshOptions f_mesh;
    std::vector<int> f_ks{8, 16, 32, 64};
    std::vector<double> f_center{0.0, 0.0};
    double f_radius = 0.3;
    std::string f_out;
    auto* fit = app.add_subcommand("runge-fit", "residual of fitting Re z^2 on a ball versus the basis size");
    f_mesh.add(fit);
    fit->add_option("--K", f_ks, "basis sizes")->delimiter(',');
    fit->add_option("--center", f_center, "ball center X,Y")->delimiter(',');
    fit->add_option("--radius", f_radius, "ball radius");
    fit->add_option("--out", f_out, "CSV output");
    fit->callback([&] {
        const HarmonicSolver s = f_mesh.solver();
        const std::vector<int> region = nodes_in_ball(s.mesh(), pair_of(f_center, "center"), f_radius);
        Vec target(s.mesh().num_nodes());
        for (int i = 0; i < s.mesh().num_nodes(); ++i) {
            const Point2& p = s.mesh().nodes[static_cast<std::size_t>(i)];
            target(i) = p.x() * p.x() - p.y() * p.y();
        }
        CsvTable t;
        t.header = {"K", "relative_residual", "condition", "harmonicity_defect"};
        for (int k : f_ks) {
            const LocalFit r = fit_local_solution(s, SourceBasis::for_gamma(s, k), region, target);
            t.add_row({std::to_string(k), fmt(r.relative_residual), fmt(r.condition), fmt(r.harmonicity_defect)});
        }
        emit(t, f_out);
    });

    // reconstruct
    std::string r_scenario = "pullback-radial", r_out, r_plot;
    double r_h = 0.05, r_amp = 0.3;
    int r_k = 32;
    auto* recon = app.add_subcommand("reconstruct", "match Poisson embeddings of a synthetic pair");
    recon->add_option("--scenario", r_scenario, "pullback-radial");
    recon->add_option("--h", r_h, "mesh size");
    recon->add_option("--K", r_k, "basis size");
    recon->add_option("--amplitude", r_amp, "radial map amplitude");
    recon->add_option("--out", r_out, "CSV of matched positions");
    recon->add_option("--plot", r_plot, "SVG of displacement arrows");
    int recon_status = 0;
    recon->callback([&] {
        if (r_scenario != "pullback-radial") {
            throw Error(ErrorCode::ConfigError, "key 'scenario': reconstruct supports pullback-radial");
        }
        Config cfg;
        cfg.set("scenario.name", r_scenario);
        cfg.set("scenario.h", fmt(r_h));
        cfg.set("scenario.K", std::to_string(r_k));
        cfg.set("diffeo.amplitude", fmt(r_amp));
        const RunReport report = run_scenario(cfg);
        emit(report.tables.at("correspondence"), r_out);
        if (!r_plot.empty()) {
            std::ofstream os(r_plot, std::ios::binary);
            if (!os) throw Error(ErrorCode::IoError, "cannot write " + r_plot);
            os << report.plots.at("correspondence");
        }
        print_checks(report);
        recon_status = report.passed() ? 0 : 1;
    });

    // recover-metric
    MeshOptions m_mesh;
    m_mesh.metric = "aniso";
    m_mesh.h = 0.05;
    std::string m_points, m_out;
    int m_k = 32;
    auto* recover = app.add_subcommand("recover-metric", "direction of g^{-1} in harmonic coordinates");
    m_mesh.add(recover);
    recover->add_option("--points", m_points, "CSV with columns x,y")->required();
    recover->add_option("--K", m_k, "basis size");
    recover->add_option("--out", m_out, "CSV output");
    recover->callback([&] {
        const HarmonicSolver s = m_mesh.solver();
        const SourceBasis basis = SourceBasis::for_gamma(s, m_k);
        const Mat fields = solve_basis(s, basis);
        const MetricField g = named_metric(m_mesh.metric, m_mesh.alpha);
        CsvTable t;
        t.header = {"x", "y", "ghat11", "ghat12", "ghat22", "hs_error", "angle_error_deg"};
        for (const Point2& p : read_points(m_points)) {
            const int x0 = nearest_node(s.mesh(), p);
            const LocalChart chart = build_harmonic_chart(s, basis, fields, x0);
            const InverseMetricEstimate est = recover_inverse_metric(s, basis, fields, chart);
            const Point2& xn = s.mesh().nodes[static_cast<std::size_t>(x0)];
            const Mat truth = normalized_inverse_metric(g(Vec(xn)), chart.jacobian);
            // Principal axis angle of a symmetric 2x2 matrix.
            auto axis = [](const Mat& m) { return 0.5 * std::atan2(2.0 * m(0, 1), m(0, 0) - m(1, 1)); };
            double da = std::abs(axis(est.direction) - axis(truth));
            da = std::min(da, std::numbers::pi - da) * 180.0 / std::numbers::pi;
            t.add_row({fmt(xn.x()), fmt(xn.y()), fmt(est.direction(0, 0)), fmt(est.direction(0, 1)),
                       fmt(est.direction(1, 1)), fmt((est.direction - truth).norm()), fmt(da)});
        }
        emit(t, m_out);
    });

    // isothermal
    MeshOptions i_mesh;
    i_mesh.metric = "conformal";
    i_mesh.h = 0.05;
    std::vector<double> i_x0{0.0, 0.0};
    int i_k = 32;
    std::string i_out;
    auto* isoth = app.add_subcommand("isothermal", "isothermal chart (u, conjugate of u) at a point");
    i_mesh.add(isoth);
    isoth->add_option("--x0", i_x0, "center X,Y")->delimiter(',');
    isoth->add_option("--K", i_k, "basis size");
    isoth->add_option("--out", i_out, "CSV of chart coordinates on the patch");
    isoth->callback([&] {
        const HarmonicSolver s = i_mesh.solver();
        const SourceBasis basis = SourceBasis::for_gamma(s, i_k);
        const Mat fields = solve_basis(s, basis);
        const int x0 = nearest_node(s.mesh(), pair_of(i_x0, "x0"));
        const IsothermalChart iso = build_isothermal_chart(s, basis, fields, x0);
        CsvTable t;
        t.header = {"node", "x", "y", "u", "v"};
        for (std::size_t k = 0; k < iso.chart.patch.size(); ++k) {
            const int n = iso.chart.patch[k];
            const Point2& p = s.mesh().nodes[static_cast<std::size_t>(n)];
            t.add_row({std::to_string(n), fmt(p.x()), fmt(p.y()), fmt(iso.chart.coords(static_cast<Eigen::Index>(k), 0)),
                       fmt(iso.chart.coords(static_cast<Eigen::Index>(k), 1))});
        }
        emit(t, i_out);
        std::cerr << "conformal factor " << fmt(iso.conformal_factor) << " off-diagonal ratio "
                  << fmt(iso.off_diagonal_ratio) << " normalization " << fmt(iso.normalization) << "\n";
    });

    // qlin-probe
    std::string q_op = "cubic", q_points, q_out;
    double q_c = 0.0, q_delta = 0.1;
    std::vector<double> q_sigma{0.0, 0.0};
    int q_grid = 64;
    auto* probe = app.add_subcommand("qlin-probe", "probe quasilinear coefficients with quadratic bumps");
    probe->add_option("--op", q_op, "laplace | cubic | quadratic | sine | gradient | aniso");
    probe->add_option("--points", q_points, "CSV with columns x,y")->required();
    probe->add_option("--c", q_c, "value c");
    probe->add_option("--sigma", q_sigma, "covector s1,s2")->delimiter(',');
    probe->add_option("--delta", q_delta, "probe size");
    probe->add_option("--grid", q_grid, "cells per side")->check(CLI::Range(16, 1024));
    probe->add_option("--out", q_out, "CSV output");
    probe->callback([&] {
        const Grid grid(q_grid, Box{0.25, 0.75, 0.25, 0.75});
        const QuasilinearOperator op = make_operator(q_op);
        const QBlackbox q = blackbox(op, grid);
        const Point2 s = pair_of(q_sigma, "sigma");
        CsvTable t;
        t.header = {"x", "y", "a11", "a12", "a22", "b_inv", "affinity_residual"};
        for (const Point2& p : read_points(q_points)) {
            const int y = grid.nearest_node(p);
            const ProbeResult r = probe_coefficients(q, grid, y, q_c, s, q_delta);
            const Point2 py = grid.point(y);
            t.add_row({fmt(py.x()), fmt(py.y()), fmt(r.a(0, 0)), fmt(r.a(0, 1)), fmt(r.a(1, 1)), fmt(r.b_inv),
                       fmt(r.affinity_residual)});
        }
        emit(t, q_out);
    });

    // qlin-linearize-test
    std::string l_op = "quadratic", l_out;
    std::vector<double> l_t{0.1, 0.05, 0.025};
    int l_grid = 64;
    auto* lin = app.add_subcommand("qlin-linearize-test", "convergence of difference quotients of S to S^L");
    lin->add_option("--op", l_op, "operator name");
    lin->add_option("--t", l_t, "decreasing amplitudes")->delimiter(',');
    lin->add_option("--grid", l_grid, "cells per side")->check(CLI::Range(16, 1024));
    lin->add_option("--out", l_out, "CSV output");
    lin->callback([&] {
        const Grid grid(l_grid, Box{0.25, 0.75, 0.25, 0.75});
        const auto rows = linearization_convergence_test(make_operator(l_op), grid,
                                                         bump_source(grid, Point2(0.5, 0.5), 0.1, 1.0), l_t);
        CsvTable t;
        t.header = {"t", "error", "ratio"};
        for (const auto& r : rows) t.add_row({fmt(r.t), fmt(r.error), r.ratio > 0.0 ? fmt(r.ratio) : ""});
        emit(t, l_out);
    });

    // run
    std::string run_config, run_out = "artifacts", run_baseline;
    double run_slack = 0.2;
    auto* run = app.add_subcommand("run", "run a scenario from a config file");
    run->add_option("--config", run_config, "scenario config")->required();
    run->add_option("--out", run_out, "artifact directory");
    run->add_option("--baseline", run_baseline, "metrics baseline to compare against");
    run->add_option("--slack", run_slack, "allowed relative regression");
    int run_status = 0;
    run->callback([&] {
        const RunReport report = run_scenario(Config::load(run_config));
        write_artifacts(report, run_out);
        print_checks(report);
        run_status = report.passed() ? 0 : 1;
        if (!run_baseline.empty()) {
            const BaselineComparison cmp = compare_baseline(report.metrics, run_baseline, run_slack);
            for (const auto& w : cmp.warnings) std::cout << "warning " << w << "\n";
            for (const auto& r : cmp.regressions) std::cout << "regression " << r << "\n";
            if (!cmp.passed) run_status = 1;
        }
    });

    // compare
    std::string c_metrics, c_baseline;
    double c_slack = 0.2;
    auto* compare = app.add_subcommand("compare", "compare a metrics.csv against a baseline");
    compare->add_option("--metrics", c_metrics, "metrics.csv from a run")->required();
    compare->add_option("--baseline", c_baseline, "baseline metrics file")->required();
    compare->add_option("--slack", c_slack, "allowed relative regression");
    int compare_status = 0;
    compare->callback([&] {
        const BaselineComparison cmp = compare_baseline(read_metrics_file(c_metrics), c_baseline, c_slack);
        for (const auto& w : cmp.warnings) std::cout << "warning " << w << "\n";
        for (const auto& r : cmp.regressions) std::cout << "regression " << r << "\n";
        std::cout << (cmp.passed ? "pass" : "fail") << "\n";
        compare_status = cmp.passed ? 0 : 1;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.code()) {
        case ErrorCode::ConfigError:
        case ErrorCode::InvalidArgument:
        case ErrorCode::IoError:
        case ErrorCode::MissingBaseline: return 2;
        default: return 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return jet_status | recon_status | run_status | compare_status;
}
