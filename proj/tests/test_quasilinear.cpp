#include "doctest.h"
#include "support.hpp"

#include "poisson_embed/quasilinear.hpp"

using namespace poisson_embed;
using test_support::code_of;
using test_support::kPi;
using test_support::Uniform;

namespace {

const Box kWindow{0.25, 0.75, 0.25, 0.75};

Vec zero_boundary(const Grid& grid, Vec u) {
    for (int k = 0; k < grid.num_nodes(); ++k) {
        if (grid.is_boundary(k)) u(k) = 0.0;
    }
    return u;
}

Vec manufactured(const Grid& grid, double amp) {
    return grid.sample([amp](const Point2& x) { return amp * std::sin(kPi * x.x()) * std::sin(kPi * x.y()); });
}

bool converges(const QuasilinearOperator& op, const Grid& grid, const Vec& f) {
    NewtonSettings s;
    s.max_iterations = 10;
    try {
        newton_solve(op, grid, f, Vec(), s);
        return true;
    } catch (const Error&) {
        return false;
    }
}

} // namespace

TEST_CASE("Q by central differences") {
    const Grid grid(32, kWindow);
    const Vec r2 = grid.sample([](const Point2& x) { return x.squaredNorm(); });
    const Vec x2 = grid.sample([](const Point2& x) { return x.x() * x.x(); });
    const Vec lin = grid.sample([](const Point2& x) { return x.x(); });
    const QuasilinearOperator laplace = make_operator("laplace"), cubic = make_operator("cubic"),
                              grad = make_operator("gradient");
    for (int idx = 0; idx < grid.num_interior(); idx += 37) {
        const int node = grid.interior_node(idx);
        const Point2 p = grid.point(node);
        CHECK(std::abs(eval_Q(laplace, grid, r2, node) - 4.0) < 1e-9);
        CHECK(std::abs(eval_Q(cubic, grid, lin, node) - p.x() * p.x() * p.x()) < 1e-9);
        CHECK(std::abs(eval_Q(grad, grid, x2, node) - 2.0 * (1.0 + 4.0 * p.x() * p.x())) < 1e-9);
    }
    const Vec all = eval_Q(laplace, grid, r2);
    CHECK(all.size() == grid.num_interior());
    CHECK((all.array() - 4.0).abs().maxCoeff() < 1e-9);
    CHECK(code_of([&] { eval_Q(laplace, grid, r2, grid.node(0, 5)); }) == ErrorCode::BoundaryNodeRequested);
    CHECK(code_of([] { make_operator("nope"); }) == ErrorCode::ConfigError);
}

TEST_CASE("analytic partials agree with differences of the closures") {
    const QuasilinearOperator an = make_operator("gradient");
    const QuasilinearOperator fd("fd", [&](const Point2& x, double c, const Eigen::Vector2d& s) { return an.a(x, c, s); },
                                 [&](const Point2& x, double c, const Eigen::Vector2d& s) { return an.b(x, c, s); });
    CHECK(an.has_analytic_partials());
    CHECK_FALSE(fd.has_analytic_partials());
    const Point2 x(0.3, 0.6);
    const Eigen::Vector2d s(0.2, -0.4);
    for (int slot = 0; slot < 3; ++slot) {
        CHECK((an.a_partial(x, 0.1, s, slot) - fd.a_partial(x, 0.1, s, slot)).cwiseAbs().maxCoeff() < 1e-6);
        CHECK(std::abs(an.b_partial(x, 0.1, s, slot) - fd.b_partial(x, 0.1, s, slot)) < 1e-6);
    }
    const QuasilinearOperator sine = make_operator("sine");
    CHECK(std::abs(sine.b_partial(x, 0.3, s, 0) - std::cos(0.3)) < 1e-14);
}

TEST_CASE("ellipticity checks") {
    const Grid grid(16, kWindow);
    CHECK(std::abs(make_operator("laplace").check_ellipticity(grid, 0.1, 0.1) - 1.0) < 1e-14);
    CHECK(make_operator("aniso").check_ellipticity(grid, 0.1, 0.1) > 0.1);
    using V = Eigen::Vector2d;
    using M = Eigen::Matrix2d;
    const auto ident = [](const Point2&, double, const V&) -> M { return M::Identity(); };
    const QuasilinearOperator shifted("shifted", ident, [](const Point2&, double c, const V&) { return 1.0 + c; });
    CHECK(code_of([&] { shifted.check_ellipticity(grid, 0.1, 0.1); }) == ErrorCode::InvalidArgument);
    const QuasilinearOperator indefinite(
        "indefinite", [](const Point2&, double, const V&) -> M { return M(V(1.0, -1.0).asDiagonal()); },
        [](const Point2&, double, const V&) { return 0.0; });
    CHECK(code_of([&] { indefinite.check_ellipticity(grid, 0.1, 0.1); }) == ErrorCode::InvalidArgument);
    const QuasilinearOperator skew(
        "skew", [](const Point2&, double, const V&) -> M { return (M() << 1.0, 0.5, 0.0, 1.0).finished(); },
        [](const Point2&, double, const V&) { return 0.0; });
    CHECK(code_of([&] { skew.check_ellipticity(grid, 0.1, 0.1); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("Newton solves") {
    const Grid grid(32, kWindow);
    const QuasilinearOperator cubic = make_operator("cubic");
    CHECK(newton_solve(cubic, grid, Vec::Zero(grid.num_nodes())).u.cwiseAbs().maxCoeff() == 0.0);

    for (const char* name : {"laplace", "cubic", "quadratic", "sine", "gradient", "aniso"}) {
        const QuasilinearOperator op = make_operator(name);
        const Vec exact = manufactured(grid, 0.01);
        NewtonSettings s;
        s.check_uniqueness = true;
        const NewtonResult r = newton_solve(op, grid, grid.expand(eval_Q(op, grid, exact)), Vec(), s);
        INFO("operator " << name);
        CHECK((r.u - exact).cwiseAbs().maxCoeff() <= 1e-9);
        CHECK(r.uniqueness_gap <= 1e-9);
    }

    // Quadratic convergence on a large manufactured solution.
    const Vec exact = manufactured(grid, 1.5);
    const NewtonResult r = newton_solve(cubic, grid, grid.expand(eval_Q(cubic, grid, exact)));
    INFO("iterations " << r.iterations);
    REQUIRE(r.residuals.size() >= 4);
    int checked = 0;
    for (std::size_t k = 1; k + 1 < r.residuals.size(); ++k) {
        const double prev = r.residuals[k], next = r.residuals[k + 1];
        if (prev > 1e-2 * r.residuals[0] || next < 1e-9) continue;
        CHECK(next <= 10.0 * prev * prev / r.residuals[0] + 1e-9);
        ++checked;
    }
    CHECK(checked >= 1);

    NewtonSettings capped;
    capped.amplitude_cap = 1.0;
    CHECK(code_of([&] { newton_solve(cubic, grid, Vec(Vec::Constant(grid.num_nodes(), 2.0)), Vec(), capped); }) ==
          ErrorCode::AmplitudeCap);
    CHECK(code_of([&] { newton_solve(cubic, grid, Vec::Zero(5)); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("amplitude cap is sign-symmetric") {
    const Grid grid(16, kWindow);
    const QuasilinearOperator op = make_operator("quadratic");
    const Vec shape = bump_source(grid, Point2(0.5, 0.5), 0.1, 1.0);
    const double cap = measure_amplitude_cap(op, grid, shape);
    CHECK(cap < 1e4);
    CHECK(converges(op, grid, 0.99 * cap * shape));
    CHECK(converges(op, grid, -0.99 * cap * shape));
    CHECK_FALSE((converges(op, grid, 1.05 * cap * shape) && converges(op, grid, -1.05 * cap * shape)));
    CHECK(measure_amplitude_cap(make_operator("laplace"), grid, shape) == 1e4);
    CHECK(code_of([&] { measure_amplitude_cap(op, grid, Vec(Vec::Zero(grid.num_nodes()))); }) ==
          ErrorCode::InvalidArgument);
}

TEST_CASE("linearization at zero") {
    const Grid grid(16, kWindow);
    const SpMat lap = linearize(make_operator("laplace"), grid);
    SpMat ident(lap.rows(), lap.cols());
    ident.setIdentity();
    const double scale = Mat(lap).cwiseAbs().maxCoeff();
    CHECK(Mat(linearize(make_operator("sine"), grid) - lap - ident).cwiseAbs().maxCoeff() <= 1e-12 * scale);
    CHECK(Mat(linearize(make_operator("cubic"), grid) - lap).cwiseAbs().maxCoeff() <= 1e-12 * scale);
    CHECK(Mat(linearize(make_operator("gradient"), grid) - lap).cwiseAbs().maxCoeff() <= 1e-12 * scale);
    // Five-point stencil.
    const double h2 = grid.h() * grid.h();
    const int c = grid.interior_index(grid.node(8, 8));
    CHECK(std::abs(lap.coeff(c, c) + 4.0 / h2) <= 1e-9 * scale);
    CHECK(std::abs(lap.coeff(c, grid.interior_index(grid.node(9, 8))) - 1.0 / h2) <= 1e-9 * scale);
}

TEST_CASE("linearization convergence") {
    const Grid grid(32, kWindow);
    const Vec f = bump_source(grid, Point2(0.5, 0.5), 0.1, 1.0);
    const std::vector<double> ts = {0.1, 0.05, 0.025};
    for (const char* name : {"cubic", "quadratic"}) {
        const auto rows = linearization_convergence_test(make_operator(name), grid, f, ts);
        REQUIRE(rows.size() == 3);
        INFO("operator " << name << " errors " << rows[0].error << " " << rows[1].error << " " << rows[2].error);
        CHECK(rows[0].ratio == 0.0);
        CHECK(rows[1].ratio <= 0.6);
        CHECK(rows[2].ratio <= 0.6);
    }
    const auto flat = linearization_convergence_test(make_operator("laplace"), grid, f, ts);
    for (const auto& row : flat) CHECK(row.error <= 1e-10);
    CHECK(code_of([&] { linearization_convergence_test(make_operator("cubic"), grid, f, {0.1, 0.2}); }) ==
          ErrorCode::InvalidArgument);
}

TEST_CASE("gauge transforms leave Q and the source-to-solution map unchanged") {
    const Grid grid(32, kWindow);
    const QuasilinearOperator op = make_operator("aniso");
    const QuasilinearOperator flat = gauge_transform(op, MetricField::euclidean(2));
    const QuasilinearOperator gauged = gauge_transform(op, MetricField::conformal_exp((Vec(2) << 0.4, -0.3).finished()));
    REQUIRE(gauged.metric().has_value());
    Uniform u(3);
    for (int t = 0; t < 30; ++t) {
        const Vec v = zero_boundary(grid, grid.sample([&](const Point2&) { return u(-0.1, 0.1); }));
        const int node = grid.interior_node(static_cast<int>(u(0, 1) * grid.num_interior()) % grid.num_interior());
        const double q = eval_Q(op, grid, v, node);
        CHECK(std::abs(eval_Q(flat, grid, v, node) - q) <= 1e-12 * (1.0 + std::abs(q)));
        CHECK(std::abs(eval_Q(gauged, grid, v, node) - q) <= 1e-12 * (1.0 + std::abs(q)));
    }
    const Vec f = bump_source(grid, Point2(0.45, 0.55), 0.05, 0.4);
    const Vec s1 = newton_solve(op, grid, f).u, s2 = newton_solve(gauged, grid, f).u;
    CHECK((s1 - s2).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("cutoff and bump source") {
    const double r = 0.1;
    CHECK(cutoff(0.0, r) == 1.0);
    CHECK(cutoff(r, r) == 1.0);
    CHECK(cutoff(2 * r, r) == 0.0);
    CHECK(cutoff(3 * r, r) == 0.0);
    CHECK(std::abs(cutoff(1.5 * r, r) - 0.5) < 1e-15);
    double prev = 1.0;
    for (int i = 0; i <= 100; ++i) {
        const double v = cutoff(r + r * i / 100.0, r);
        CHECK(v <= prev);
        prev = v;
    }
    // First and second derivatives vanish at both ends; the natural scales are 1/r and 1/r^2.
    const double e = 1e-4;
    for (double d : {r, 2 * r}) {
        CHECK(std::abs(cutoff(d + e, r) - cutoff(d - e, r)) / (2 * e) < 1e-3 / r);
        CHECK(std::abs(cutoff(d + e, r) - 2 * cutoff(d, r) + cutoff(d - e, r)) / (e * e) < 0.05 / (r * r));
    }
    const Grid grid(32, kWindow);
    const Vec f = bump_source(grid, Point2(0.5, 0.5), 0.05, 2.0);
    CHECK(f.maxCoeff() == 2.0);
    for (int k = 0; k < grid.num_nodes(); ++k) {
        if ((grid.point(k) - Point2(0.5, 0.5)).norm() >= 0.1) CHECK(f(k) == 0.0);
    }
}

TEST_CASE("window-fixing shear") {
    const Grid grid(32, kWindow);
    const Diffeo phi = window_fixing_shear(kWindow, 0.5);
    Uniform u(5);
    for (int t = 0; t < 50; ++t) {
        const Vec w = Point2(u(0.25, 0.75), u(0.25, 0.75));
        CHECK((phi(w) - w).norm() == 0.0);
        const double s = u(0, 1);
        for (const Vec& b : {Vec(Point2(s, 0.0)), Vec(Point2(s, 1.0)), Vec(Point2(0.0, s)), Vec(Point2(1.0, s))}) {
            CHECK((phi(b) - b).norm() == 0.0);
        }
        const Vec x = Point2(u(0.01, 0.99), u(0.01, 0.99));
        const Mat jac = phi.jacobian(x);
        CHECK(jac.determinant() > 0.0);
        Mat fd(2, 2);
        for (int k = 0; k < 2; ++k) {
            Vec dx = Vec::Zero(2);
            dx(k) = 1e-6;
            fd.col(k) = (phi(Vec(x + dx)) - phi(Vec(x - dx))) / 2e-6;
        }
        CHECK((jac - fd).cwiseAbs().maxCoeff() < 1e-6);
    }
    const Vec mid = Point2(0.1, 0.5);
    CHECK((phi(mid) - mid).norm() > 1e-4);
}

TEST_CASE("coefficient probes") {
    const Grid grid(64, kWindow);
    const int y = grid.node(32, 32);
    const ProbeResult lap = probe_coefficients(blackbox(make_operator("laplace"), grid), grid, y, 0.0,
                                               Eigen::Vector2d::Zero(), 0.1);
    CHECK((lap.a - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(std::abs(lap.b_inv) < 1e-10);

    const QBlackbox cubic = blackbox(make_operator("cubic"), grid);
    const ProbeResult pc = probe_coefficients(cubic, grid, y, 0.01, Eigen::Vector2d::Zero(), 0.1);
    CHECK(std::abs(pc.b_inv - 1e-6) < 1e-12);
    CHECK((pc.a - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(pc.affinity_residual < 1e-10);

    CHECK(code_of([&] { probe_coefficients(cubic, grid, y, 0.08, Eigen::Vector2d(0.05, 0.0), 0.1); }) ==
          ErrorCode::ProbeOutsideSmallData);
    CHECK(code_of([&] { probe_coefficients(cubic, grid, grid.node(18, 32), 0.0, Eigen::Vector2d::Zero(), 0.1); }) ==
          ErrorCode::CutoffOverlap);
    CHECK(code_of([&] { probe_coefficients(cubic, grid, grid.node(0, 32), 0.0, Eigen::Vector2d::Zero(), 0.1); }) ==
          ErrorCode::BoundaryNodeRequested);
    CHECK(code_of([&] { probe_coefficients(cubic, grid, y, 0.0, Eigen::Vector2d::Zero(), 0.0); }) ==
          ErrorCode::InvalidArgument);
}

TEST_CASE("probes identify the operator through gauge and window-fixing changes") {
    const Grid grid(64, kWindow);
    const QuasilinearOperator op = make_operator("aniso");
    const QuasilinearOperator op2 = gauge_transform(pullback_operator(op, window_fixing_shear(kWindow, 0.5)),
                                                    MetricField::conformal_exp((Vec(2) << 0.4, -0.3).finished()));
    const QBlackbox q1 = blackbox(op, grid), q2 = blackbox(op2, grid);
    Uniform u(11);
    for (int k = 0; k < 6; ++k) {
        const int y = grid.node(26 + (k * 5) % 13, 26 + (k * 7) % 13);
        const double c = u(-0.02, 0.02);
        const Eigen::Vector2d sigma(u(-0.02, 0.02), u(-0.02, 0.02));
        const ProbeResult p1 = probe_coefficients(q1, grid, y, c, sigma, 0.1);
        const ProbeResult p2 = probe_coefficients(q2, grid, y, c, sigma, 0.1);
        CHECK((p1.a - p2.a).cwiseAbs().maxCoeff() <= 1e-8);
        CHECK(std::abs(p1.b_inv - p2.b_inv) <= 1e-8);
        CHECK((p1.a - op.a(grid.point(y), c, sigma)).cwiseAbs().maxCoeff() <= 10.0 * grid.h() * grid.h());
    }
    // Outside the window the pulled-back operator differs.
    const Point2 x(0.1, 0.5);
    const Eigen::Vector2d s(0.01, 0.0);
    CHECK((pullback_operator(op, window_fixing_shear(kWindow, 0.5)).a(x, 0.0, s) - op.a(x, 0.0, s)).norm() > 1e-6);
}

TEST_CASE("solution coordinates from interior sources") {
    const Grid grid(32, Box{0.125, 0.375, 0.125, 0.375});
    const GridLinearSolver lin(grid, linearize(make_operator("cubic"), grid));
    const int x0 = grid.node(20, 20);
    const SolutionChart sc = solution_coordinates(lin, grid.window_nodes(), x0);
    CHECK(sc.within_tolerance);
    CHECK(sc.chart.kind == ChartKind::SolutionCoords);
    CHECK((sc.chart.jacobian - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() <= std::max(1e-3, grid.h()));
    CHECK(sc.chart.patch.size() >= 12);
    for (int k = 0; k < grid.num_nodes(); ++k) {
        if (!grid.in_window(k)) {
            CHECK(sc.source1(k) == 0.0);
            CHECK(sc.source2(k) == 0.0);
        }
    }
    CHECK(code_of([&] { solution_coordinates(lin, grid.window_nodes(), grid.node(0, 3)); }) ==
          ErrorCode::BoundaryNodeRequested);
}
