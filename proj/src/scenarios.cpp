#include "poisson_embed/calderon.hpp"
#include "poisson_embed/cli.hpp"
#include "poisson_embed/errors.hpp"
#include "poisson_embed/metric_recovery.hpp"
#include "poisson_embed/quasilinear.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

namespace poisson_embed {

namespace {

using Rng = std::mt19937_64;

// Bit-exact across standard libraries, unlike std::uniform_real_distribution.
double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int nearest_node(const TriMesh& mesh, const Point2& p) {
    int best = 0;
    double d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < mesh.num_nodes(); ++i) {
        const double e = (mesh.nodes[static_cast<std::size_t>(i)] - p).squaredNorm();
        if (e < d) {
            d = e;
            best = i;
        }
    }
    return best;
}

std::string fmt(double v) { return format_number(v); }

void harmonic_measure_checks(RunReport& report, const HarmonicSolver& solver, const std::string& tag) {
    const int nb = solver.num_boundary();
    const Mat p = solver.solve_dirichlet(Mat(Mat::Identity(nb, nb)));
    double lo = std::numeric_limits<double>::infinity(), sum_err = 0.0;
    for (int node : solver.interior_nodes()) {
        lo = std::min(lo, p.row(node).minCoeff());
        sum_err = std::max(sum_err, std::abs(p.row(node).sum() - 1.0));
    }
    report.check(tag + "harmonic_measure_min_entry", lo, -1e-10, Compare::AtLeast);
    report.check(tag + "harmonic_measure_sum_error", sum_err, 1e-10);
}

double dn_spectral_error(double h, int k) {
    const HarmonicSolver s(build_disk_mesh(1.0, h), MetricField::euclidean(2));
    const Vec theta = s.boundary_angles();
    const Vec f = theta.unaryExpr([k](double t) { return std::cos(k * t); });
    return std::abs(s.dn_map().rayleigh_quotient(f) - k);
}

std::vector<Point2> boundary_points(const TriMesh& mesh) {
    std::vector<Point2> out;
    for (int b : mesh.boundary_loop) out.push_back(mesh.nodes[static_cast<std::size_t>(b)]);
    return out;
}

void run_identity_disk(const Config& cfg, RunReport& report) {
    const double h = cfg.get_double("scenario.h", 0.1);
    const int k_basis = cfg.get_int("scenario.K", 16);
    const std::string metric_name = cfg.get_string("metric.name", "identity");
    const MetricField g = named_metric(metric_name, cfg.get_double("metric.alpha", 1.0));
    const TriMesh mesh = build_disk_mesh(1.0, h);
    const HarmonicSolver solver(mesh, g);

    const DnMap dn = solver.dn_map();
    const double scale = std::max(1.0, dn.lambda.cwiseAbs().maxCoeff());
    const double asym = (dn.lambda - dn.lambda.transpose()).cwiseAbs().maxCoeff() / scale;
    const double kernel = (dn.lambda * Vec::Ones(dn.lambda.cols())).cwiseAbs().maxCoeff() / scale;
    report.check("dn_symmetry", asym, 1e-10);
    report.check("dn_constants_in_kernel", kernel, 1e-10);
    report.metrics["dn_symmetry"] = asym;

    harmonic_measure_checks(report, solver, "");

    if (metric_name == "identity") {
        CsvTable spectrum;
        spectrum.header = {"k", "h_target", "error", "ratio"};
        std::vector<Series> curves;
        for (int k = 1; k <= 3; ++k) {
            const double e1 = dn_spectral_error(h, k), e2 = dn_spectral_error(h / 2.0, k);
            spectrum.add_row({format_number(k), fmt(h), fmt(e1), ""});
            spectrum.add_row({format_number(k), fmt(h / 2.0), fmt(e2), fmt(e2 / e1)});
            report.check("dn_spectrum_ratio_k" + std::to_string(k), e2 / e1, 0.7);
            report.metrics["dn_spectrum_error_k" + std::to_string(k)] = e2;
            curves.push_back({"k = " + std::to_string(k), {h, h / 2.0}, {e1, e2}});
        }
        report.tables["dn_spectrum"] = spectrum;
        report.plots["dn_spectrum"] = curve_svg(curves, "DN eigenvalue error for cos k theta", "h", "error", true);
    }

    const SourceBasis basis = SourceBasis::fourier(solver, k_basis);
    const Mat fields = solve_basis(solver, basis);
    const EmbeddingCloud cloud = build_embedding(solver, basis, "self");
    const CorrespondenceMap self = match_embeddings(cloud, cloud);
    double self_err = 0.0;
    for (int i = 0; i < mesh.num_nodes(); ++i) {
        self_err = std::max(self_err, (self.points[static_cast<std::size_t>(i)].position -
                                       mesh.nodes[static_cast<std::size_t>(i)])
                                          .norm());
    }
    report.check("self_match_position_error", self_err, 1e-10);

    Rng rng(static_cast<Rng::result_type>(cfg.get_int("scenario.seed", 1)));
    const std::vector<Point2> pts = {{0.0, 0.0}, {0.3, 0.1}, {-0.4, 0.2}, {0.1, -0.5}, {0.35, 0.3}};
    CsvTable jets;
    jets.header = {"x", "y", "trial", "max_error", "tol_jet"};
    double worst = 0.0;
    for (const Point2& p : pts) {
        const Eigen::Matrix2d gp = g(Vec(p));
        for (int t = 0; t < 10; ++t) {
            Jet2Target target;
            target.p = p;
            target.a0 = uniform(rng, -1, 1);
            target.xi0 = Eigen::Vector2d(uniform(rng, -1, 1), uniform(rng, -1, 1));
            Eigen::Matrix2d hess;
            const double a = uniform(rng, -1, 1), b = uniform(rng, -1, 1), c = uniform(rng, -1, 1);
            hess << a, b, b, c;
            hess -= 0.5 * (gp.inverse() * hess).trace() * gp;
            target.h0 = hess;
            const JetFit fit = prescribe_jet(solver, basis, fields, target);
            worst = std::max(worst, fit.max_error / fit.tol_jet);
            jets.add_row({fmt(p.x()), fmt(p.y()), format_number(t), fmt(fit.max_error), fmt(fit.tol_jet)});
        }
    }
    report.tables["jets"] = jets;
    report.check("jet_error_over_tolerance", worst, 1.0);
    report.metrics["jet_error_over_tolerance"] = worst;

    bool rejected = false;
    try {
        Jet2Target bad;
        bad.p = pts[1];
        bad.h0 = Eigen::Matrix2d::Identity();
        prescribe_jet(solver, basis, fields, bad);
    } catch (const Error& e) {
        rejected = e.code() == ErrorCode::InfeasibleTrace;
    }
    report.check("trace_violation_rejected", rejected ? 1.0 : 0.0, 1.0, Compare::AtLeast);
}

void run_pullback_radial(const Config& cfg, RunReport& report) {
    const double h = cfg.get_double("scenario.h", 0.05);
    const int k_basis = cfg.get_int("scenario.K", 32);
    const double amplitude = cfg.get_double("diffeo.amplitude", 0.3);
    const MetricField g1 = named_metric(cfg.get_string("metric.name", "conformal"), cfg.get_double("metric.alpha", 0.5));

    const TriMesh m1 = build_disk_mesh(1.0, h);
    const TriMesh m2 = pullback_mesh(m1, Diffeo::radial_disk(amplitude));
    const ElementMetric e1 = sample_metric(m1, g1);
    const HarmonicSolver s1(m1, e1), s2(m2, push_forward_metric(m1, m2, e1));

    const double dn_gap = (s1.dn_map().lambda - s2.dn_map().lambda).cwiseAbs().maxCoeff();
    report.check("dn_coordinate_invariance", dn_gap, 1e-12);
    report.metrics["dn_coordinate_invariance"] = dn_gap;
    harmonic_measure_checks(report, s1, "m1_");
    harmonic_measure_checks(report, s2, "m2_");

    const EmbeddingCloud c1 = build_embedding(s1, SourceBasis::fourier(s1, k_basis), "m1");
    const EmbeddingCloud c2 = build_embedding(s2, SourceBasis::fourier(s2, k_basis), "m2");
    const HoldoutSplit split = holdout_split(k_basis);
    const EmbeddingCloud f1 = c1.columns(split.fit), f2 = c2.columns(split.fit);
    CorrespondenceMap map = match_embeddings(f1, f2);
    estimate_jacobian(f1, f2, map);

    const auto boundary = m1.boundary_flags();
    int inside = 0, interior = 0;
    double min_det = std::numeric_limits<double>::infinity(), mean_err = 0.0;
    CsvTable corr;
    corr.header = {"node", "x", "y", "target_x", "target_y", "matched_x", "matched_y", "residual", "det_dj"};
    std::vector<Segment> arrows;
    for (int i = 0; i < m1.num_nodes(); ++i) {
        const auto& mp = map.points[static_cast<std::size_t>(i)];
        const Point2& x = m1.nodes[static_cast<std::size_t>(i)];
        const Point2& y = m2.nodes[static_cast<std::size_t>(i)];
        const double det = map.jacobian[static_cast<std::size_t>(i)].determinant();
        min_det = std::min(min_det, det);
        corr.add_row({format_number(i), fmt(x.x()), fmt(x.y()), fmt(y.x()), fmt(y.y()), fmt(mp.position.x()),
                      fmt(mp.position.y()), fmt(mp.residual), fmt(det)});
        if (boundary[static_cast<std::size_t>(i)]) continue;
        ++interior;
        const double err = (mp.position - y).norm();
        mean_err += err;
        if (err <= 2.0 * m1.h) ++inside;
        arrows.push_back({x, mp.position});
    }
    mean_err /= std::max(1, interior);
    const double fraction = static_cast<double>(inside) / std::max(1, interior);
    const double disc = verify_harmonic_morphism(c1.columns(split.holdout), c2.columns(split.holdout), map);
    report.tables["correspondence"] = corr;
    report.plots["correspondence"] = displacement_svg(boundary_points(m1), arrows, "matched positions J(x) - x");
    report.check("matched_within_2h_fraction", fraction, 0.99, Compare::AtLeast);
    report.check("holdout_discrepancy", disc, 5e-3);
    report.check("min_det_dj", min_det, 0.0, Compare::Above);
    report.metrics["holdout_discrepancy"] = disc;
    report.metrics["mean_position_error"] = mean_err;
    report.metrics["unmatched_fraction"] = 1.0 - fraction;
    report.metrics["max_match_residual"] = map.max_residual();

    // Unrelated metric on the same target mesh.
    const HarmonicSolver s3(m2, named_metric("aniso"));
    const EmbeddingCloud c3 = build_embedding(s3, SourceBasis::fourier(s3, k_basis), "control");
    const EmbeddingCloud f3 = c3.columns(split.fit);
    const CorrespondenceMap control = match_embeddings(f1, f3);
    const double neg = verify_harmonic_morphism(c1.columns(split.holdout), c3.columns(split.holdout), control);
    report.check("negative_control_discrepancy", neg, 10.0 * std::max(disc, 5e-3), Compare::Above);
}

void run_conformal_disk(const Config& cfg, RunReport& report) {
    const double h = cfg.get_double("scenario.h", 0.05);
    const int k_basis = cfg.get_int("scenario.K", 32);
    const double alpha = cfg.get_double("metric.alpha", 1.0);
    const MetricField g = named_metric("conformal", alpha);
    const TriMesh mesh = build_disk_mesh(1.0, h);
    const HarmonicSolver solver(mesh, g);
    harmonic_measure_checks(report, solver, "");

    const auto bump = [](const Point2& x) { return 1.0 + 0.5 * (1.0 - x.squaredNorm()); };
    const ConformalCheck cc = conformal_invariance_check_2d(mesh, g, bump);
    report.check("dn_conformal_invariance", cc.dn_discrepancy, 1e-10);
    report.check("conformal_boundary_warning", cc.boundary_warning ? 1.0 : 0.0, 0.0);

    ScalarField lambda;
    lambda.value = [](const Vec& x) { return std::exp(0.3 * x(0) + 0.2 * x(1)); };
    lambda.gradient = [](const Vec& x) {
        Vec d(2);
        d << 0.3, 0.2;
        return Vec(d * std::exp(0.3 * x(0) + 0.2 * x(1)));
    };
    double scaling = 0.0;
    for (const Point2& p : {Point2(0.1, 0.2), Point2(-0.3, 0.4), Point2(0.5, -0.1)}) {
        scaling = std::max(scaling, contracted_christoffel_scaling_check(g, lambda, Vec(p)));
    }
    report.check("christoffel_scaling_residual", scaling, 1e-8);

    const SourceBasis basis = SourceBasis::fourier(solver, k_basis);
    const Mat fields = solve_basis(solver, basis);
    const std::vector<Point2> pts = {{0.0, 0.0}, {0.3, 0.0}, {-0.3, 0.1}, {0.0, 0.35}, {0.2, -0.25}};
    CsvTable iso;
    iso.header = {"x", "y", "conformal_factor", "expected", "relative_error", "off_diagonal_ratio", "normalization"};
    double worst_c = 0.0, worst_off = 0.0;
    for (const Point2& p : pts) {
        const int x0 = nearest_node(mesh, p);
        const IsothermalChart chart = build_isothermal_chart(solver, basis, fields, x0);
        const Point2& xn = mesh.nodes[static_cast<std::size_t>(x0)];
        const double expected = std::exp(2.0 * alpha * xn.x());
        const double rel = std::abs(chart.conformal_factor - expected) / expected;
        worst_c = std::max(worst_c, rel);
        worst_off = std::max(worst_off, chart.off_diagonal_ratio);
        iso.add_row({fmt(xn.x()), fmt(xn.y()), fmt(chart.conformal_factor), fmt(expected), fmt(rel),
                     fmt(chart.off_diagonal_ratio), fmt(chart.normalization)});
    }
    report.tables["isothermal"] = iso;
    report.check("conformal_factor_error", worst_c, 0.05);
    report.check("off_diagonal_ratio", worst_off, 0.05);
    report.metrics["conformal_factor_error"] = worst_c;
    report.metrics["off_diagonal_ratio"] = worst_off;
}

void run_anisotropic_disk(const Config& cfg, RunReport& report) {
    const double h = cfg.get_double("scenario.h", 0.05);
    const int k_basis = cfg.get_int("scenario.K", 32);
    const MetricField g = named_metric(cfg.get_string("metric.name", "aniso"), cfg.get_double("metric.alpha", 1.0));
    const TriMesh mesh = build_disk_mesh(1.0, h);
    const HarmonicSolver solver(mesh, g);
    harmonic_measure_checks(report, solver, "");

    const SourceBasis basis = SourceBasis::fourier(solver, k_basis);
    const Mat fields = solve_basis(solver, basis);
    CsvTable out;
    out.header = {"x", "y", "ghat11", "ghat12", "ghat22", "hs_error", "route_agreement"};
    double worst = 0.0, agree = 0.0;
    for (int i = 0; i < 10; ++i) {
        const double ang = 0.6 * i, r = i == 0 ? 0.0 : 0.15 + 0.03 * i;
        const int x0 = nearest_node(mesh, Point2(r * std::cos(ang), r * std::sin(ang)));
        const LocalChart chart = build_harmonic_chart(solver, basis, fields, x0);
        const InverseMetricEstimate est = recover_inverse_metric(solver, basis, fields, chart);
        const Point2& xn = mesh.nodes[static_cast<std::size_t>(x0)];
        const Mat truth = normalized_inverse_metric(g(Vec(xn)), chart.jacobian);
        const double err = (est.direction - truth).norm();
        worst = std::max(worst, err);
        agree = std::max(agree, est.route_agreement);
        out.add_row({fmt(xn.x()), fmt(xn.y()), fmt(est.direction(0, 0)), fmt(est.direction(0, 1)),
                     fmt(est.direction(1, 1)), fmt(err), fmt(agree)});
    }
    report.tables["metric_direction"] = out;
    report.check("metric_direction_hs_error", worst, 0.05);
    report.check("route_agreement", agree, 1e-8);
    report.metrics["metric_direction_hs_error"] = worst;

    // Synthetic trace-free Hessians in three dimensions.
    Rng rng(static_cast<Rng::result_type>(cfg.get_int("scenario.seed", 3)));
    Mat a(3, 3);
    for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = uniform(rng, -1, 1);
    const Mat g3 = a * a.transpose() + Mat::Identity(3, 3);
    const Mat ginv = g3.inverse();
    std::vector<Mat> hess;
    for (int k = 0; k < 5; ++k) {
        Mat s(3, 3);
        for (int i = 0; i < 9; ++i) s(i / 3, i % 3) = uniform(rng, -1, 1);
        s = 0.5 * (s + s.transpose()).eval();
        s -= (s.cwiseProduct(ginv).sum() / ginv.squaredNorm()) * ginv;
        hess.push_back(s);
    }
    const InverseMetricEstimate est3 = inverse_metric_from_hessians(hess);
    const double err3 = (est3.direction - ginv / ginv.norm()).norm();
    report.check("synthetic_n3_direction_error", err3, 1e-10);
}

void run_quasilinear(const Config& cfg, RunReport& report, const std::string& default_op) {
    const std::string op_name = cfg.get_string("operator.name", default_op);
    const int cells = cfg.get_int("operator.grid", 64);
    if (cells < 16) throw Error(ErrorCode::ConfigError, "key 'operator.grid' must be at least 16");
    const Grid grid(cells, Box{0.25, 0.75, 0.25, 0.75});
    const QuasilinearOperator op = make_operator(op_name);
    const double lambda_min = op.check_ellipticity(grid, 0.1, 0.1);
    const double pi = std::numbers::pi;

    CsvTable settings;
    settings.header = {"name", "value"};
    settings.add_row({"operator", op_name});
    settings.add_row({"grid_cells", format_number(cells)});
    settings.add_row({"ellipticity_floor", fmt(lambda_min)});
    settings.add_row({"linearization_condition", fmt(GridLinearSolver(grid, linearize(op, grid)).condition_estimate())});

    const NewtonResult zero = newton_solve(op, grid, Vec::Zero(grid.num_nodes()));
    report.check("zero_source_zero_solution", zero.u.cwiseAbs().maxCoeff(), 0.0);

    const Vec exact = grid.sample([&](const Point2& x) { return 0.01 * std::sin(pi * x.x()) * std::sin(pi * x.y()); });
    const Vec f_exact = grid.expand(eval_Q(op, grid, exact));
    NewtonSettings uniq;
    uniq.check_uniqueness = true;
    const NewtonResult manu = newton_solve(op, grid, f_exact, Vec(), uniq);
    const double manu_err = (manu.u - exact).cwiseAbs().maxCoeff();
    report.check("manufactured_solution_error", manu_err, 1e-9);
    report.check("uniqueness_gap", manu.uniqueness_gap, 1e-9);
    report.metrics["manufactured_solution_error"] = manu_err;
    settings.add_row({"manufactured_newton_iterations", format_number(manu.iterations)});

    const Vec shape = bump_source(grid, Point2(0.5, 0.5), 0.1, 1.0);
    const double cap = measure_amplitude_cap(op, grid, shape);
    settings.add_row({"amplitude_cap", fmt(cap)});
    bool rejected = false;
    try {
        NewtonSettings capped;
        capped.amplitude_cap = cap;
        newton_solve(op, grid, 1e3 * shape, Vec(), capped);
    } catch (const Error& e) {
        rejected = e.code() == ErrorCode::AmplitudeCap || e.code() == ErrorCode::NewtonDiverged;
    }
    report.check("large_source_rejected", rejected ? 1.0 : 0.0, 1.0, Compare::AtLeast);

    const std::vector<double> ts = {0.1, 0.05, 0.025};
    const auto rows = linearization_convergence_test(op, grid, shape, ts);
    CsvTable rates;
    rates.header = {"t", "error", "ratio"};
    Series curve{"e(t)", {}, {}};
    double worst_ratio = 0.0, last_error = 0.0;
    for (const auto& row : rows) {
        rates.add_row({fmt(row.t), fmt(row.error), row.ratio > 0.0 ? fmt(row.ratio) : ""});
        curve.x.push_back(row.t);
        curve.y.push_back(row.error);
        if (row.ratio > 0.0) worst_ratio = std::max(worst_ratio, row.ratio);
        last_error = row.error;
    }
    report.tables["rates"] = rates;
    report.plots["rates"] = curve_svg({curve}, "linearization error " + op_name, "t", "e(t)", true);
    // A linear operator has e(t) at rounding level and no meaningful ratio.
    if (last_error > 1e-10) report.check("linearization_ratio", worst_ratio, 0.6);
    else report.check("linearization_error", last_error, 1e-10);
    report.metrics["linearization_error"] = last_error;

    Rng rng(static_cast<Rng::result_type>(cfg.get_int("scenario.seed", 5)));
    Vec a(2);
    a << 0.4, -0.3;
    const QuasilinearOperator gauged = gauge_transform(op, MetricField::conformal_exp(a));
    double pointwise = 0.0;
    for (int k = 0; k < 100; ++k) {
        Vec u = grid.sample([&](const Point2&) { return uniform(rng, -0.1, 0.1); });
        for (int i = 0; i < grid.num_nodes(); ++i) {
            if (grid.is_boundary(i)) u(i) = 0.0;
        }
        const int node = grid.interior_node(static_cast<int>(rng() % static_cast<std::uint64_t>(grid.num_interior())));
        const double q1 = eval_Q(op, grid, u, node), q2 = eval_Q(gauged, grid, u, node);
        pointwise = std::max(pointwise, std::abs(q1 - q2) / (1.0 + std::abs(q1)));
    }
    report.check("gauge_pointwise_identity", pointwise, 1e-12);
    double s_gap = 0.0;
    for (int k = 0; k < 10; ++k) {
        const Point2 c(uniform(rng, 0.35, 0.65), uniform(rng, 0.35, 0.65));
        const Vec f = bump_source(grid, c, 0.05, uniform(rng, -0.5, 0.5));
        const Vec u1 = newton_solve(op, grid, f).u, u2 = newton_solve(gauged, grid, f).u;
        for (int w : grid.window_nodes()) s_gap = std::max(s_gap, std::abs(u1(w) - u2(w)));
    }
    report.check("gauge_source_to_solution", s_gap, 1e-10);

    const QuasilinearOperator op2 =
        gauge_transform(pullback_operator(op, window_fixing_shear(grid.window(), 0.5)), MetricField::conformal_exp(a));
    const QBlackbox q1 = blackbox(op, grid), q2 = blackbox(op2, grid);
    CsvTable probes;
    probes.header = {"x", "y", "c", "sigma1", "sigma2", "a11", "a12", "a22", "b_inv", "operator_gap", "truth_gap"};
    double gap = 0.0, truth_gap = 0.0, affinity = 0.0;
    const int lo = grid.n_cells() * 3 / 8, span = grid.n_cells() / 4;
    for (int k = 0; k < 10; ++k) {
        const int y = grid.node(lo + (k * 7) % (span + 1), lo + (k * 11) % (span + 1));
        const Point2 py = grid.point(y);
        for (int j = 0; j < 5; ++j) {
            const double c = uniform(rng, -0.02, 0.02);
            const Eigen::Vector2d sigma(uniform(rng, -0.02, 0.02), uniform(rng, -0.02, 0.02));
            const ProbeResult p1 = probe_coefficients(q1, grid, y, c, sigma, 0.1);
            const ProbeResult p2 = probe_coefficients(q2, grid, y, c, sigma, 0.1);
            const double g_ab = std::max((p1.a - p2.a).cwiseAbs().maxCoeff(), std::abs(p1.b_inv - p2.b_inv));
            const double t_ab = (p1.a - op.a(py, c, sigma)).cwiseAbs().maxCoeff();
            gap = std::max(gap, g_ab);
            truth_gap = std::max(truth_gap, t_ab);
            affinity = std::max({affinity, p1.affinity_residual, p2.affinity_residual});
            probes.add_row({fmt(py.x()), fmt(py.y()), fmt(c), fmt(sigma(0)), fmt(sigma(1)), fmt(p1.a(0, 0)),
                            fmt(p1.a(0, 1)), fmt(p1.a(1, 1)), fmt(p1.b_inv), fmt(g_ab), fmt(t_ab)});
        }
    }
    report.tables["probes"] = probes;
    report.tables["settings"] = settings;
    report.check("probe_operator_agreement", gap, 1e-8);
    report.check("probe_coefficient_truth", truth_gap, 10.0 * grid.h() * grid.h());
    report.check("probe_affinity_residual", affinity, 1e-10);
    report.metrics["probe_operator_agreement"] = gap;
}

} // namespace

std::vector<std::string> scenario_names() {
    return {"identity-disk", "pullback-radial", "conformal-disk", "anisotropic-disk", "qlin-cubic", "qlin-quadratic"};
}

RunReport run_scenario(const Config& config) {
    config.require_known({"scenario.name", "scenario.h", "scenario.K", "scenario.seed", "metric.name", "metric.alpha",
                          "diffeo.amplitude", "operator.name", "operator.grid"});
    RunReport report;
    report.scenario = config.get_string("scenario.name");
    if (config.has("scenario.h") && !(config.get_double("scenario.h") > 0.0 && config.get_double("scenario.h") < 0.5)) {
        throw Error(ErrorCode::ConfigError, "key 'scenario.h' must lie in (0, 0.5)");
    }
    if (config.has("scenario.K") && config.get_int("scenario.K") < 4) {
        throw Error(ErrorCode::ConfigError, "key 'scenario.K' must be at least 4");
    }
    const auto start = std::chrono::steady_clock::now();
    const std::string& name = report.scenario;
    try {
        if (name == "identity-disk") run_identity_disk(config, report);
        else if (name == "pullback-radial") run_pullback_radial(config, report);
        else if (name == "conformal-disk") run_conformal_disk(config, report);
        else if (name == "anisotropic-disk") run_anisotropic_disk(config, report);
        else if (name == "qlin-cubic") run_quasilinear(config, report, "cubic");
        else if (name == "qlin-quadratic") run_quasilinear(config, report, "quadratic");
        else throw Error(ErrorCode::ConfigError, "key 'scenario.name': unknown scenario '" + name + "'");
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError) throw;
        throw Error(e.code(), "scenario " + name + ": " + e.what());
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

} // namespace poisson_embed
