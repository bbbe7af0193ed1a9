#include "poisson_embed/quasilinear.hpp"

#include "poisson_embed/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include <cmath>

namespace poisson_embed {

namespace {

double contract(const Eigen::Matrix2d& a, const Eigen::Matrix2d& b) { return (a.cwiseProduct(b)).sum(); }

Eigen::Matrix2d covariant_hessian(const Eigen::Matrix2d& hess, const Eigen::Vector2d& grad, const Connection& gamma) {
    return hess - gamma[0] * grad(0) - gamma[1] * grad(1);
}

Eigen::Vector2d slot_shift(int slot, double step) {
    Eigen::Vector2d d = Eigen::Vector2d::Zero();
    if (slot > 0) d(slot - 1) = step;
    return d;
}

} // namespace

QuasilinearOperator::QuasilinearOperator(std::string name, CoeffA a, CoeffB b, std::optional<MetricField> metric)
    : name_(std::move(name)), a_(std::move(a)), b_(std::move(b)), metric_(std::move(metric)) {
    if (!a_ || !b_) throw Error(ErrorCode::InvalidArgument, "operator coefficients must be set");
    if (metric_ && metric_->dim() != 2) throw Error(ErrorCode::InvalidArgument, "background metric must be 2D");
}

Connection QuasilinearOperator::connection(const Point2& x) const {
    Connection g{Eigen::Matrix2d::Zero(), Eigen::Matrix2d::Zero()};
    if (!metric_) return g;
    const ChristoffelData cd = christoffel(*metric_, Vec(x));
    g[0] = cd.gamma[0];
    g[1] = cd.gamma[1];
    return g;
}

void QuasilinearOperator::set_partials(PartialA da, PartialB db) {
    da_ = std::move(da);
    db_ = std::move(db);
}

Eigen::Matrix2d QuasilinearOperator::a_partial(const Point2& x, double c, const Eigen::Vector2d& s, int slot) const {
    if (da_) return da_(x, c, s, slot);
    const double step = 1e-6 * std::max(1.0, slot == 0 ? std::abs(c) : s.norm());
    const Eigen::Vector2d ds = slot_shift(slot, step);
    const double dc = slot == 0 ? step : 0.0;
    return (a_(x, c + dc, s + ds) - a_(x, c - dc, s - ds)) / (2.0 * step);
}

double QuasilinearOperator::b_partial(const Point2& x, double c, const Eigen::Vector2d& s, int slot) const {
    if (db_) return db_(x, c, s, slot);
    const double step = 1e-6 * std::max(1.0, slot == 0 ? std::abs(c) : s.norm());
    const Eigen::Vector2d ds = slot_shift(slot, step);
    const double dc = slot == 0 ? step : 0.0;
    return (b_(x, c + dc, s + ds) - b_(x, c - dc, s - ds)) / (2.0 * step);
}

double QuasilinearOperator::check_ellipticity(const Grid& grid, double radius, double floor) const {
    double lo = std::numeric_limits<double>::infinity();
    const double r = radius / 2.0;
    const std::array<std::array<double, 3>, 5> samples = {
        {{0.0, 0.0, 0.0}, {r, 0.0, 0.0}, {-r, r, 0.0}, {0.0, 0.0, -r}, {r, -r, r}}};
    for (int k = 0; k < grid.num_nodes(); ++k) {
        const Point2 x = grid.point(k);
        const double b0 = b_(x, 0.0, Eigen::Vector2d::Zero());
        if (std::abs(b0) > 1e-14) {
            throw Error(ErrorCode::InvalidArgument, "B(x, 0, 0) = " + std::to_string(b0) + " is not zero");
        }
        for (const auto& s : samples) {
            const Eigen::Matrix2d a = a_(x, s[0], Eigen::Vector2d(s[1], s[2]));
            if (!(a - a.transpose()).isZero(1e-12 * std::max(1.0, a.norm()))) {
                throw Error(ErrorCode::InvalidArgument, "A is not symmetric");
            }
            lo = std::min(lo, Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(a).eigenvalues()(0));
        }
    }
    if (!(lo >= floor)) {
        throw Error(ErrorCode::InvalidArgument, "ellipticity constant " + std::to_string(lo) + " below floor");
    }
    return lo;
}

QuasilinearOperator make_operator(const std::string& name) {
    using V = Eigen::Vector2d;
    using M = Eigen::Matrix2d;
    const auto identity = [](const Point2&, double, const V&) -> M { return M::Identity(); };
    const auto zero_da = [](const Point2&, double, const V&, int) -> M { return M::Zero(); };
    auto semilinear = [&](const std::string& n, std::function<double(double)> f, std::function<double(double)> df) {
        QuasilinearOperator op(n, identity, [f](const Point2&, double c, const V&) { return f(c); });
        op.set_partials(zero_da, [df](const Point2&, double c, const V&, int slot) { return slot == 0 ? df(c) : 0.0; });
        return op;
    };
    if (name == "laplace") {
        return semilinear(name, [](double) { return 0.0; }, [](double) { return 0.0; });
    }
    if (name == "cubic") {
        return semilinear(name, [](double c) { return c * c * c; }, [](double c) { return 3.0 * c * c; });
    }
    if (name == "quadratic") {
        return semilinear(name, [](double c) { return c * c; }, [](double c) { return 2.0 * c; });
    }
    if (name == "sine") {
        return semilinear(name, [](double c) { return std::sin(c); }, [](double c) { return std::cos(c); });
    }
    if (name == "gradient") {
        QuasilinearOperator op(
            name, [](const Point2&, double, const V& s) -> M { return (1.0 + s.squaredNorm()) * M::Identity(); },
            [](const Point2&, double, const V&) { return 0.0; });
        op.set_partials(
            [](const Point2&, double, const V& s, int slot) -> M {
                return slot == 0 ? M::Zero() : M(2.0 * s(slot - 1) * M::Identity());
            },
            [](const Point2&, double, const V&, int) { return 0.0; });
        return op;
    }
    if (name == "aniso") {
        QuasilinearOperator op(
            name,
            [](const Point2& x, double c, const V&) -> M {
                M a;
                a << 1.0 + 0.5 * x.x() + 0.1 * c, 0.2 * x.y(), 0.2 * x.y(), 1.5 - 0.3 * x.x();
                return a;
            },
            [](const Point2& x, double c, const V& s) { return c * c * c + 0.1 * x.x() * s(0) * c; });
        return op;
    }
    throw Error(ErrorCode::ConfigError, "unknown operator '" + name + "'");
}

std::vector<Connection> grid_connection(const QuasilinearOperator& op, const Grid& grid) {
    std::vector<Connection> out(static_cast<std::size_t>(grid.num_nodes()),
                                Connection{Eigen::Matrix2d::Zero(), Eigen::Matrix2d::Zero()});
    if (!op.metric()) return out;
    for (int k = 0; k < grid.num_nodes(); ++k) {
        if (!grid.is_boundary(k)) out[static_cast<std::size_t>(k)] = op.connection(grid.point(k));
    }
    return out;
}

namespace {

double eval_with(const QuasilinearOperator& op, const Grid& grid, const Vec& u, int node, const Connection& gamma) {
    const Point2 x = grid.point(node);
    const Eigen::Vector2d grad = grid.gradient(u, node);
    const Eigen::Matrix2d hess = grid.hessian(u, node);
    return contract(op.a(x, u(node), grad), covariant_hessian(hess, grad, gamma)) + op.b(x, u(node), grad);
}

} // namespace

double eval_Q(const QuasilinearOperator& op, const Grid& grid, const Vec& u, int node) {
    if (grid.is_boundary(node)) throw Error(ErrorCode::BoundaryNodeRequested, "Q is evaluated at interior nodes");
    return eval_with(op, grid, u, node, op.connection(grid.point(node)));
}

Vec eval_Q(const QuasilinearOperator& op, const Grid& grid, const Vec& u) {
    const auto gamma = grid_connection(op, grid);
    Vec out(grid.num_interior());
    for (int idx = 0; idx < grid.num_interior(); ++idx) {
        const int node = grid.interior_node(idx);
        out(idx) = eval_with(op, grid, u, node, gamma[static_cast<std::size_t>(node)]);
    }
    return out;
}

SpMat newton_jacobian(const QuasilinearOperator& op, const Grid& grid, const Vec& u,
                      const std::vector<Connection>& gamma) {
    const double h = grid.h(), h2 = h * h;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(grid.num_interior()) * 9);
    for (int row = 0; row < grid.num_interior(); ++row) {
        const int node = grid.interior_node(row);
        const int i = grid.i_of(node), j = grid.j_of(node);
        const Point2 x = grid.point(node);
        const Eigen::Vector2d p = grid.gradient(u, node);
        const Connection& gm = gamma[static_cast<std::size_t>(node)];
        const Eigen::Matrix2d hc = covariant_hessian(grid.hessian(u, node), p, gm);
        const Eigen::Matrix2d a = op.a(x, u(node), p);
        const double c0 = contract(op.a_partial(x, u(node), p, 0), hc) + op.b_partial(x, u(node), p, 0);
        double cg[2];
        for (int k = 0; k < 2; ++k) {
            cg[k] = -contract(a, gm[k]) + contract(op.a_partial(x, u(node), p, k + 1), hc) +
                    op.b_partial(x, u(node), p, k + 1);
        }
        auto add = [&](int di, int dj, double w) {
            const int col = grid.interior_index(grid.node(i + di, j + dj));
            if (col >= 0 && w != 0.0) trip.emplace_back(row, col, w);
        };
        add(0, 0, -2.0 * (a(0, 0) + a(1, 1)) / h2 + c0);
        add(1, 0, a(0, 0) / h2 + cg[0] / (2.0 * h));
        add(-1, 0, a(0, 0) / h2 - cg[0] / (2.0 * h));
        add(0, 1, a(1, 1) / h2 + cg[1] / (2.0 * h));
        add(0, -1, a(1, 1) / h2 - cg[1] / (2.0 * h));
        const double cross = 2.0 * a(0, 1) / (4.0 * h2);
        add(1, 1, cross);
        add(-1, -1, cross);
        add(1, -1, -cross);
        add(-1, 1, -cross);
    }
    SpMat jac(grid.num_interior(), grid.num_interior());
    jac.setFromTriplets(trip.begin(), trip.end());
    jac.makeCompressed();
    return jac;
}

namespace {

NewtonResult newton_core(const QuasilinearOperator& op, const Grid& grid, const Vec& f, Vec u,
                         const NewtonSettings& settings, const std::vector<Connection>& gamma) {
    const Vec f_int = grid.restrict_interior(f);
    const double tol = settings.tol_rel * std::max(1.0, f.cwiseAbs().maxCoeff());
    NewtonResult res;
    int stall = 0;
    for (int it = 0;; ++it) {
        Vec r(grid.num_interior());
        for (int idx = 0; idx < grid.num_interior(); ++idx) {
            const int node = grid.interior_node(idx);
            r(idx) = eval_with(op, grid, u, node, gamma[static_cast<std::size_t>(node)]) - f_int(idx);
        }
        const double rn = r.cwiseAbs().maxCoeff();
        if (!std::isfinite(rn)) throw Error(ErrorCode::NewtonDiverged, "Newton residual is not finite");
        if (!res.residuals.empty()) stall = rn > 0.5 * res.residuals.back() ? stall + 1 : 0;
        res.residuals.push_back(rn);
        res.iterations = it;
        if (rn <= tol) break;
        if (stall >= 5) throw Error(ErrorCode::NewtonDiverged, "residual failed to halve for 5 iterations");
        if (it >= settings.max_iterations) {
            throw Error(ErrorCode::NewtonDiverged,
                        "no convergence in " + std::to_string(settings.max_iterations) + " iterations");
        }
        const SpMat jac = newton_jacobian(op, grid, u, gamma);
        Eigen::SparseLU<SpMat> lu;
        lu.compute(jac);
        if (lu.info() != Eigen::Success) throw Error(ErrorCode::SingularLinearization, "Newton Jacobian is singular");
        const Vec du = lu.solve(-r);
        if (lu.info() != Eigen::Success || !du.allFinite()) {
            throw Error(ErrorCode::SingularLinearization, "Newton step failed");
        }
        u += grid.expand(du);
    }
    const auto& rs = res.residuals;
    const std::size_t n = rs.size();
    if (n >= 3 && rs[n - 1] > 0.0 && rs[n - 2] > 0.0 && rs[n - 3] > 0.0 && rs[n - 2] != rs[n - 3]) {
        res.observed_order = std::log(rs[n - 1] / rs[n - 2]) / std::log(rs[n - 2] / rs[n - 3]);
    }
    res.u = std::move(u);
    return res;
}

} // namespace

NewtonResult newton_solve(const QuasilinearOperator& op, const Grid& grid, const Vec& f, const Vec& u0,
                          const NewtonSettings& settings) {
    if (f.size() != grid.num_nodes()) throw Error(ErrorCode::InvalidArgument, "source size does not match grid");
    const double amp = f.cwiseAbs().maxCoeff();
    if (settings.amplitude_cap > 0.0 && amp > settings.amplitude_cap) {
        throw Error(ErrorCode::AmplitudeCap, "source amplitude " + std::to_string(amp) + " exceeds the cap " +
                                                 std::to_string(settings.amplitude_cap));
    }
    const auto gamma = grid_connection(op, grid);
    Vec start = u0.size() == 0 ? Vec(Vec::Zero(grid.num_nodes())) : u0;
    for (int k = 0; k < grid.num_nodes(); ++k) {
        if (grid.is_boundary(k)) start(k) = 0.0;
    }
    NewtonResult res = newton_core(op, grid, f, start, settings, gamma);
    if (settings.check_uniqueness) {
        // Deterministic perturbation: a smooth mode with 1e-3 relative size.
        const double scale = 1e-3 * std::max(1e-3, res.u.cwiseAbs().maxCoeff());
        Vec pert = grid.sample([&](const Point2& x) {
            return scale * std::sin(3.14159265358979323846 * x.x()) * std::sin(2.0 * 3.14159265358979323846 * x.y());
        });
        const NewtonResult second = newton_core(op, grid, f, res.u + pert, settings, gamma);
        res.uniqueness_gap = (second.u - res.u).cwiseAbs().maxCoeff();
    }
    return res;
}

SpMat linearize(const QuasilinearOperator& op, const Grid& grid) {
    return newton_jacobian(op, grid, Vec::Zero(grid.num_nodes()), grid_connection(op, grid));
}

double cutoff(double dist, double r) {
    if (dist <= r) return 1.0;
    if (dist >= 2.0 * r) return 0.0;
    const double s = (dist - r) / r;
    // 1 - (10 s^3 - 15 s^4 + 6 s^5)
    return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

Vec bump_source(const Grid& grid, const Point2& center, double r, double amplitude) {
    return grid.sample([&](const Point2& x) { return amplitude * cutoff((x - center).norm(), r); });
}

std::vector<LinearizationRow> linearization_convergence_test(const QuasilinearOperator& op, const Grid& grid,
                                                             const Vec& f, const std::vector<double>& t_list,
                                                             const NewtonSettings& settings) {
    for (std::size_t i = 0; i < t_list.size(); ++i) {
        if (!(t_list[i] > 0.0) || (i > 0 && !(t_list[i] < t_list[i - 1]))) {
            throw Error(ErrorCode::InvalidArgument, "t values must be positive and decreasing");
        }
    }
    const GridLinearSolver lin(grid, linearize(op, grid));
    const Vec sl = lin.solve_source(f);
    const Vec s0 = newton_solve(op, grid, Vec::Zero(grid.num_nodes()), Vec(), settings).u;
    std::vector<int> region = grid.window_nodes();
    if (region.empty()) {
        for (int k = 0; k < grid.num_nodes(); ++k) region.push_back(k);
    }
    std::vector<LinearizationRow> rows;
    for (double t : t_list) {
        const Vec st = newton_solve(op, grid, t * f, Vec(), settings).u;
        LinearizationRow row;
        row.t = t;
        for (int k : region) row.error = std::max(row.error, std::abs((st(k) - s0(k)) / t - sl(k)));
        if (!rows.empty() && rows.back().error > 0.0) row.ratio = row.error / rows.back().error;
        rows.push_back(row);
    }
    return rows;
}

QuasilinearOperator gauge_transform(const QuasilinearOperator& op, const MetricField& new_metric) {
    if (new_metric.dim() != 2) throw Error(ErrorCode::InvalidArgument, "gauge metric must be 2D");
    const QuasilinearOperator base = op;
    const MetricField gt = new_metric;
    auto shift = [base, gt](const Point2& x) {
        const Vec xv = x;
        gt.check_spd(xv, 0.0);
        const ChristoffelData cd = christoffel(gt, xv);
        Connection d = base.connection(x);
        d[0] = cd.gamma[0] - d[0];
        d[1] = cd.gamma[1] - d[1];
        return d;
    };
    auto b_new = [base, shift](const Point2& x, double c, const Eigen::Vector2d& s) {
        const Connection d = shift(x);
        return base.b(x, c, s) + contract(base.a(x, c, s), d[0] * s(0) + d[1] * s(1));
    };
    QuasilinearOperator out(op.name() + "+gauge",
                            [base](const Point2& x, double c, const Eigen::Vector2d& s) { return base.a(x, c, s); },
                            b_new, new_metric);
    out.set_partials(
        [base](const Point2& x, double c, const Eigen::Vector2d& s, int slot) { return base.a_partial(x, c, s, slot); },
        [base, shift](const Point2& x, double c, const Eigen::Vector2d& s, int slot) {
            const Connection d = shift(x);
            const Eigen::Matrix2d ds = d[0] * s(0) + d[1] * s(1);
            double v = base.b_partial(x, c, s, slot) + contract(base.a_partial(x, c, s, slot), ds);
            if (slot > 0) v += contract(base.a(x, c, s), d[static_cast<std::size_t>(slot - 1)]);
            return v;
        });
    return out;
}

QuasilinearOperator pullback_operator(const QuasilinearOperator& op, const Diffeo& phi) {
    const QuasilinearOperator base = op;
    const Diffeo map = phi;
    auto frame = [map](const Point2& xp, Point2& x, Eigen::Matrix2d& jinv) {
        const Vec xv = xp;
        x = map(xv);
        const Eigen::Matrix2d jac = map.jacobian(xv);
        if (!(std::abs(jac.determinant()) > 1e-14)) throw Error(ErrorCode::SingularJacobian, "pullback map is singular");
        jinv = jac.inverse();
    };
    auto a_new = [base, frame](const Point2& xp, double c, const Eigen::Vector2d& s) -> Eigen::Matrix2d {
        Point2 x;
        Eigen::Matrix2d ji;
        frame(xp, x, ji);
        return ji * base.a(x, c, ji.transpose() * s) * ji.transpose();
    };
    auto b_new = [base, frame](const Point2& xp, double c, const Eigen::Vector2d& s) {
        Point2 x;
        Eigen::Matrix2d ji;
        frame(xp, x, ji);
        return base.b(x, c, ji.transpose() * s);
    };
    std::optional<MetricField> metric;
    if (op.metric()) metric = pullback_metric(*op.metric(), phi);
    else metric = pullback_metric(MetricField::euclidean(2), phi);
    return QuasilinearOperator(op.name() + "+pullback", a_new, b_new, metric);
}

Diffeo window_fixing_shear(const Box& window, double amplitude) {
    struct Axis {
        double lo, hi;
        double gap(double t) const { return std::max({0.0, lo - t, t - hi}); }
        double cube(double t) const { const double g = gap(t); return g * g * g; }
        double dcube(double t) const {
            const double g = gap(t);
            return t < lo ? -3.0 * g * g : 3.0 * g * g;
        }
    };
    const Axis ax{window.x0, window.x1}, ay{window.y0, window.y1};
    Diffeo phi;
    phi.map = [=](const Vec& x) {
        const double s = 64.0 * x(0) * (1.0 - x(0)) * x(1) * (1.0 - x(1)) * (ax.cube(x(0)) + ay.cube(x(1)));
        Vec y = x;
        y(0) += 2.0 * amplitude * s;
        y(1) += amplitude * s;
        return y;
    };
    phi.jacobian = [=](const Vec& x) {
        const double p = x(0) * (1.0 - x(0)) * x(1) * (1.0 - x(1));
        const double m = ax.cube(x(0)) + ay.cube(x(1));
        const Eigen::Vector2d ds(64.0 * ((1.0 - 2.0 * x(0)) * x(1) * (1.0 - x(1)) * m + p * ax.dcube(x(0))),
                                 64.0 * ((1.0 - 2.0 * x(1)) * x(0) * (1.0 - x(0)) * m + p * ay.dcube(x(1))));
        Mat jac = Mat::Identity(2, 2);
        jac.row(0) += 2.0 * amplitude * ds.transpose();
        jac.row(1) += amplitude * ds.transpose();
        return jac;
    };
    return phi;
}

QBlackbox blackbox(const QuasilinearOperator& op, const Grid& grid) {
    return [op, grid](const Vec& v, int node) { return eval_Q(op, grid, v, node); };
}

ProbeResult probe_coefficients(const QBlackbox& q, const Grid& grid, int y, double c, const Eigen::Vector2d& sigma,
                               double delta_probe) {
    if (!(delta_probe > 0.0)) throw Error(ErrorCode::InvalidArgument, "probe size must be positive");
    if (std::abs(c) + sigma.norm() > delta_probe) {
        throw Error(ErrorCode::ProbeOutsideSmallData, "|c| + |sigma| exceeds the probe size");
    }
    if (grid.is_boundary(y)) throw Error(ErrorCode::BoundaryNodeRequested, "probe point on the boundary");
    const double r = 4.0 * grid.h();
    const Point2 py = grid.point(y);
    for (int k = 0; k < grid.num_nodes(); ++k) {
        if ((grid.point(k) - py).norm() >= 2.0 * r) continue;
        const bool inside = grid.has_window() ? grid.in_window(k) : !grid.is_boundary(k);
        if (!inside) throw Error(ErrorCode::CutoffOverlap, "probe cutoff support leaves the window");
    }
    auto trial = [&](const Eigen::Matrix2d& hess) {
        return grid.sample([&](const Point2& x) {
            const Eigen::Vector2d d = x - py;
            return cutoff(d.norm(), r) * (c + sigma.dot(d) + 0.5 * d.dot(hess * d));
        });
    };
    const SymSpace space(2);
    const auto basis = space.orthonormal_basis();
    ProbeResult out;
    const double q0 = q(trial(Eigen::Matrix2d::Zero()), y);
    out.b_inv = q0;
    Eigen::Matrix2d sum = Eigen::Matrix2d::Zero();
    double predicted = q0;
    for (const Mat& e : basis) {
        const double alpha = (q(trial(delta_probe * e), y) - q0) / delta_probe;
        out.a += alpha * e;
        sum += e;
        predicted += alpha * delta_probe / std::sqrt(3.0);
    }
    const double mixed = q(trial(delta_probe * sum / std::sqrt(3.0)), y);
    out.affinity_residual = std::abs(mixed - predicted);
    return out;
}

double measure_amplitude_cap(const QuasilinearOperator& op, const Grid& grid, const Vec& shape, double lo, double hi,
                             int steps) {
    const double s = shape.cwiseAbs().maxCoeff();
    if (!(s > 0.0) || !(lo > 0.0) || !(hi > lo)) throw Error(ErrorCode::InvalidArgument, "bad amplitude search range");
    const Vec unit = shape / s;
    NewtonSettings settings;
    settings.max_iterations = 10;
    auto ok = [&](double amp) {
        try {
            newton_solve(op, grid, amp * unit, Vec(), settings);
            newton_solve(op, grid, -amp * unit, Vec(), settings);
            return true;
        } catch (const Error&) {
            return false;
        }
    };
    if (!ok(lo)) throw Error(ErrorCode::NewtonDiverged, "Newton fails even at the smallest amplitude");
    if (ok(hi)) return hi;
    double a = std::log(lo), b = std::log(hi);
    for (int i = 0; i < steps; ++i) {
        const double m = 0.5 * (a + b);
        (ok(std::exp(m)) ? a : b) = m;
    }
    return std::exp(a);
}

SolutionChart solution_coordinates(const GridLinearSolver& op, const std::vector<int>& window, int x0) {
    const Grid& grid = op.grid();
    if (grid.is_boundary(x0)) throw Error(ErrorCode::BoundaryNodeRequested, "chart center on the boundary");
    const double rho = 3.0 * grid.h();
    const Point2 p0 = grid.point(x0);
    SolutionChart out;
    for (int w : window) {
        if ((grid.point(w) - p0).norm() > rho + grid.h() + 1e-12) out.window.push_back(w);
    }
    if (out.window.empty()) throw Error(ErrorCode::IllConditioned, "source window is empty after shrinking");
    const InteriorSourceControl c1 = prescribe_gradient_interior_source(op, out.window, x0, Eigen::Vector2d(1.0, 0.0));
    const InteriorSourceControl c2 = prescribe_gradient_interior_source(op, out.window, x0, Eigen::Vector2d(0.0, 1.0));
    out.source1 = c1.source;
    out.source2 = c2.source;
    out.within_tolerance = c1.within_tolerance && c2.within_tolerance;

    LocalChart& chart = out.chart;
    chart.kind = ChartKind::SolutionCoords;
    chart.center_node = x0;
    chart.center = p0;
    chart.radius = rho;
    for (int k = 0; k < grid.num_nodes(); ++k) {
        if ((grid.point(k) - p0).norm() <= rho) chart.patch.push_back(k);
    }
    chart.fields.resize(grid.num_nodes(), 2);
    chart.fields.col(0) = c1.field;
    chart.fields.col(1) = c2.field;
    chart.coords.resize(static_cast<Eigen::Index>(chart.patch.size()), 2);
    for (std::size_t k = 0; k < chart.patch.size(); ++k) {
        chart.coords(static_cast<Eigen::Index>(k), 0) = c1.field(chart.patch[k]) - c1.field(x0);
        chart.coords(static_cast<Eigen::Index>(k), 1) = c2.field(chart.patch[k]) - c2.field(x0);
    }
    chart.jacobian.row(0) = c1.achieved.transpose();
    chart.jacobian.row(1) = c2.achieved.transpose();
    if (!(chart.jacobian_condition() < 1e3)) {
        throw Error(ErrorCode::IllConditioned, "solution chart Jacobian is ill-conditioned");
    }
    return out;
}

} // namespace poisson_embed
