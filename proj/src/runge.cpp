#include "poisson_embed/runge.hpp"

#include "poisson_embed/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace poisson_embed {

namespace {

std::vector<double> gamma_parameters(const HarmonicSolver& solver, const Arc& arc, Vec& mask) {
    const TriMesh& mesh = solver.mesh();
    const Vec angles = solver.boundary_angles();
    const int nb = mesh.num_boundary();
    std::vector<double> t(nb, -1.0);
    mask = Vec::Zero(nb);
    for (int b = 0; b < nb; ++b) {
        if (!mesh.gamma_mask[mesh.boundary_loop[b]]) continue;
        double d = angles(b) - arc.begin;
        d -= 2.0 * std::numbers::pi * std::floor(d / (2.0 * std::numbers::pi));
        t[b] = d / std::min(arc.length(), 2.0 * std::numbers::pi);
        mask(b) = 1.0;
    }
    return t;
}

// Arc of Gamma recovered from the mask: the longest run of Gamma nodes.
Arc gamma_arc(const HarmonicSolver& solver) {
    const TriMesh& mesh = solver.mesh();
    const int nb = mesh.num_boundary();
    int count = 0;
    for (int b = 0; b < nb; ++b) count += mesh.gamma_mask[mesh.boundary_loop[b]] ? 1 : 0;
    if (count == 0) throw Error(ErrorCode::InvalidArgument, "mesh has no Gamma nodes");
    if (count == nb) return Arc{};
    const Vec angles = solver.boundary_angles();
    // First Gamma node after a non-Gamma node starts the arc.
    int start = -1;
    for (int b = 0; b < nb; ++b) {
        const int prev = (b + nb - 1) % nb;
        if (mesh.gamma_mask[mesh.boundary_loop[b]] && !mesh.gamma_mask[mesh.boundary_loop[prev]]) {
            start = b;
            break;
        }
    }
    int stop = start;
    while (mesh.gamma_mask[mesh.boundary_loop[(stop + 1) % nb]]) stop = (stop + 1) % nb;
    // Extend half a spacing past the extreme Gamma nodes so hats vanish off Gamma.
    const int before = (start + nb - 1) % nb, after = (stop + 1) % nb;
    auto unwrap = [](double a, double ref) {
        while (a < ref) a += 2.0 * std::numbers::pi;
        return a;
    };
    const double a0 = angles(before);
    double a_start = unwrap(angles(start), a0);
    double a_stop = unwrap(angles(stop), a_start);
    double a_after = unwrap(angles(after), a_stop);
    Arc arc;
    arc.begin = 0.5 * (a0 + a_start);
    arc.end = 0.5 * (a_stop + a_after);
    return arc;
}

Vec lumped_mass(const HarmonicSolver& solver) {
    const TriMesh& mesh = solver.mesh();
    Vec m = Vec::Zero(mesh.num_nodes());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const double w = mesh.signed_area(t) * std::sqrt(solver.element_metric()[t].determinant()) / 3.0;
        for (int v : mesh.triangles[t]) m(v) += w;
    }
    return m;
}

// Metric and Christoffel symbols at p: from the analytic field when present,
// otherwise the element metric of the nearest centroid with zero connection.
void local_geometry(const HarmonicSolver& solver, const Point2& p, Eigen::Matrix2d& g,
                    std::array<Eigen::Matrix2d, 2>& gamma) {
    g = metric_at(solver, p);
    if (solver.metric_field()) {
        const ChristoffelData cd = christoffel(*solver.metric_field(), Vec(p));
        for (int k = 0; k < 2; ++k) gamma[k] = cd.gamma[k];
        return;
    }
    gamma[0].setZero();
    gamma[1].setZero();
}

double hs_project(const Eigen::Matrix2d& e, double h11, double h12, double h22) {
    return e(0, 0) * h11 + 2.0 * e(0, 1) * h12 + e(1, 1) * h22;
}

} // namespace

SourceBasis SourceBasis::columns(const std::vector<int>& cols) const {
    SourceBasis out;
    out.kind = kind;
    out.vectors.resize(vectors.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) out.vectors.col(static_cast<Eigen::Index>(k)) = vectors.col(cols[k]);
    return out;
}

SourceBasis SourceBasis::fourier(const HarmonicSolver& solver, int count) {
    if (count < 1) throw Error(ErrorCode::InvalidArgument, "basis size must be positive");
    const TriMesh& mesh = solver.mesh();
    for (int b : mesh.boundary_loop) {
        if (!mesh.gamma_mask[b]) throw Error(ErrorCode::InvalidArgument, "Fourier basis needs Gamma to be the full circle");
    }
    const Vec theta = solver.boundary_angles();
    SourceBasis basis;
    basis.vectors.resize(theta.size(), count);
    for (int k = 0; k < count; ++k) {
        const int freq = (k + 1) / 2;
        for (Eigen::Index b = 0; b < theta.size(); ++b) {
            basis.vectors(b, k) = k == 0 ? 1.0 : (k % 2 == 1 ? std::cos(freq * theta(b)) : std::sin(freq * theta(b)));
        }
    }
    return basis;
}

SourceBasis SourceBasis::hats(const HarmonicSolver& solver, int count) {
    if (count < 1) throw Error(ErrorCode::InvalidArgument, "basis size must be positive");
    const Arc arc = gamma_arc(solver);
    Vec mask;
    const std::vector<double> t = gamma_parameters(solver, arc, mask);
    const double width = 1.0 / (count + 1);
    SourceBasis basis;
    basis.vectors = Mat::Zero(static_cast<Eigen::Index>(t.size()), count);
    for (int k = 0; k < count; ++k) {
        const double c = (k + 1) * width;
        for (std::size_t b = 0; b < t.size(); ++b) {
            if (mask(static_cast<Eigen::Index>(b)) == 0.0) continue;
            basis.vectors(static_cast<Eigen::Index>(b), k) = std::max(0.0, 1.0 - std::abs(t[b] - c) / width);
        }
    }
    return basis;
}

SourceBasis SourceBasis::for_gamma(const HarmonicSolver& solver, int count) {
    const TriMesh& mesh = solver.mesh();
    for (int b : mesh.boundary_loop) {
        if (!mesh.gamma_mask[b]) return hats(solver, count);
    }
    return fourier(solver, count);
}

SourceBasis SourceBasis::interior_nodes(const TriMesh& mesh, const std::vector<int>& window) {
    const auto flags = mesh.boundary_flags();
    SourceBasis basis;
    basis.kind = SourceKind::InteriorOnW;
    basis.vectors = Mat::Zero(mesh.num_nodes(), static_cast<Eigen::Index>(window.size()));
    for (std::size_t k = 0; k < window.size(); ++k) {
        if (flags[window[k]]) throw Error(ErrorCode::InvalidArgument, "interior source on a boundary node");
        basis.vectors(window[k], static_cast<Eigen::Index>(k)) = 1.0;
    }
    return basis;
}

Mat solve_basis(const HarmonicSolver& solver, const SourceBasis& basis) {
    if (basis.kind == SourceKind::BoundaryOnGamma) return solver.solve_dirichlet(basis.vectors);
    const Vec m = lumped_mass(solver);
    Mat out(solver.mesh().num_nodes(), basis.size());
    for (int k = 0; k < basis.size(); ++k) out.col(k) = solver.solve_load(m.cwiseProduct(basis.vectors.col(k)));
    return out;
}

RegularizedSolution regularized_lstsq(const Mat& a, const Vec& b, double reg_rel) {
    if (a.rows() != b.size()) throw Error(ErrorCode::InvalidArgument, "least-squares shape mismatch");
    if (a.size() == 0 || !a.allFinite() || !b.allFinite()) {
        throw Error(ErrorCode::IllConditioned, "least-squares system is empty or non-finite");
    }
    Eigen::BDCSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec s = svd.singularValues();
    RegularizedSolution out;
    if (!(s(0) > 0.0)) throw Error(ErrorCode::IllConditioned, "least-squares matrix is zero");
    const double smin = s(s.size() - 1);
    out.condition = smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
    const Vec utb = svd.matrixU().transpose() * b;
    Vec filt(s.size());
    if (out.condition > 1e12) {
        out.truncated = true;
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            const bool keep = s(i) > 1e-12 * s(0);
            filt(i) = keep ? 1.0 / s(i) : 0.0;
            out.rank += keep ? 1 : 0;
        }
    } else {
        const double reg = reg_rel * s(0) * s(0);
        for (Eigen::Index i = 0; i < s.size(); ++i) filt(i) = s(i) / (s(i) * s(i) + reg);
        out.rank = static_cast<int>(s.size());
    }
    out.x = svd.matrixV() * filt.cwiseProduct(utb);
    return out;
}

Eigen::Matrix2d metric_at(const HarmonicSolver& solver, const Point2& p) {
    if (solver.metric_field()) return (*solver.metric_field())(Vec(p));
    const TriMesh& mesh = solver.mesh();
    int best = 0;
    double dmin = std::numeric_limits<double>::infinity();
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const double d = (mesh.centroid(t) - p).squaredNorm();
        if (d < dmin) {
            dmin = d;
            best = t;
        }
    }
    return solver.element_metric()[best];
}

std::vector<int> nodes_in_ball(const TriMesh& mesh, const Point2& center, double radius) {
    std::vector<int> out;
    for (int i = 0; i < mesh.num_nodes(); ++i) {
        if ((mesh.nodes[i] - center).norm() <= radius) out.push_back(i);
    }
    return out;
}

LocalFit fit_local_solution(const HarmonicSolver& solver, const Mat& fields, const std::vector<int>& region,
                            const Vec& target, double reg_rel) {
    if (region.empty()) throw Error(ErrorCode::InvalidArgument, "empty fitting region");
    const Vec m = lumped_mass(solver);
    const auto nu = static_cast<Eigen::Index>(region.size());
    Mat a(nu, fields.cols());
    Vec b(nu);
    for (Eigen::Index r = 0; r < nu; ++r) {
        const double w = std::sqrt(m(region[r]));
        a.row(r) = w * fields.row(region[r]);
        b(r) = w * target(region[r]);
    }
    const RegularizedSolution sol = regularized_lstsq(a, b, reg_rel);
    LocalFit fit;
    fit.coefficients = sol.x;
    fit.condition = sol.condition;
    const double tn = b.norm();
    fit.relative_residual = (a * sol.x - b).norm() / (tn > 0.0 ? tn : 1.0);

    // RMS of the lumped discrete Laplacian over nodes whose whole star lies
    // in U, scaled by (target range) / radius(U)^2.
    const TriMesh& mesh = solver.mesh();
    std::vector<char> in_u(mesh.num_nodes(), 0);
    for (int v : region) in_u[v] = 1;
    const auto flags = mesh.boundary_flags();
    const SpMat& k = solver.stiffness();
    Point2 center = Point2::Zero();
    for (int v : region) center += mesh.nodes[v];
    center /= static_cast<double>(region.size());
    double radius = 0.0, lo = target(region[0]), hi = lo;
    for (int v : region) {
        radius = std::max(radius, (mesh.nodes[v] - center).norm());
        lo = std::min(lo, target(v));
        hi = std::max(hi, target(v));
    }
    double sum = 0.0, mass = 0.0;
    for (int v : region) {
        if (flags[v]) continue;
        bool inner = true;
        double lap = 0.0;
        for (SpMat::InnerIterator it(k, v); it; ++it) {
            if (!in_u[it.row()]) inner = false;
            lap += it.value() * target(it.row());
        }
        if (!inner) continue;
        sum += lap * lap / m(v);
        mass += m(v);
    }
    const double range = hi - lo;
    fit.harmonicity_defect = mass > 0.0 && range > 0.0 ? std::sqrt(sum / mass) * radius * radius / range : 0.0;
    fit.target_not_harmonic = fit.harmonicity_defect > 10.0 * jet_tolerance(mesh.h);
    return fit;
}

LocalFit fit_local_solution(const HarmonicSolver& solver, const SourceBasis& basis, const std::vector<int>& region,
                            const Vec& target, double reg_rel) {
    return fit_local_solution(solver, solve_basis(solver, basis), region, target, reg_rel);
}

double jet_tolerance(double h) { return std::max(1e-3, h); }

double readout_radius(double h) { return 4.0 * h; }

JetFit prescribe_jet_in_chart(const SourceBasis& basis, const Mat& fields, const LocalChart& chart, const Jet& target,
                              const std::vector<Eigen::Matrix2d>& dirs, double h, double reg_rel) {
    const QuadraticFitOperator op(chart);
    const Mat coef = op.coefficients(fields);
    const auto nk = fields.cols();
    const auto nd = static_cast<Eigen::Index>(dirs.size());
    Mat rows(3 + nd, nk);
    Vec rhs(3 + nd);
    rows.topRows(3) = coef.topRows(3);
    rhs << target.value, target.gradient(0), target.gradient(1), Vec::Zero(nd);
    for (Eigen::Index d = 0; d < nd; ++d) {
        const Eigen::Matrix2d& e = dirs[d];
        for (Eigen::Index k = 0; k < nk; ++k) rows(3 + d, k) = hs_project(e, coef(3, k), coef(4, k), coef(5, k));
        rhs(3 + d) = SymSpace::inner(e, target.hessian);
    }
    const RegularizedSolution sol = regularized_lstsq(rows, rhs, reg_rel);

    JetFit out;
    out.coefficients = sol.x;
    if (basis.kind == SourceKind::BoundaryOnGamma) out.boundary_data = basis.vectors * sol.x;
    out.field = fields * sol.x;
    const Vec c = coef * sol.x;
    out.achieved.value = c(0);
    out.achieved.gradient = c.segment<2>(1);
    out.achieved.hessian << c(3), c(4), c(4), c(5);
    out.target = target;
    out.tol_jet = jet_tolerance(h);
    const double scale =
        std::max({1.0, std::abs(target.value), target.gradient.norm(), target.hessian.norm()});
    out.max_error = std::max({std::abs(out.achieved.value - target.value),
                              (out.achieved.gradient - target.gradient).norm(),
                              (out.achieved.hessian - target.hessian).norm()}) /
                    scale;
    out.within_tolerance = out.max_error <= out.tol_jet;
    return out;
}

JetFit prescribe_jet(const HarmonicSolver& solver, const SourceBasis& basis, const Jet2Target& target,
                     double reg_rel) {
    return prescribe_jet(solver, basis, solve_basis(solver, basis), target, reg_rel);
}

JetFit prescribe_jet(const HarmonicSolver& solver, const SourceBasis& basis, const Mat& fields,
                     const Jet2Target& target, double reg_rel) {
    const TriMesh& mesh = solver.mesh();
    if (!(target.h0 - target.h0.transpose()).isZero(1e-14 * std::max(1.0, target.h0.norm()))) {
        throw Error(ErrorCode::InvalidArgument, "target Hessian is not symmetric");
    }
    Eigen::Matrix2d g;
    std::array<Eigen::Matrix2d, 2> gamma;
    local_geometry(solver, target.p, g, gamma);
    const Eigen::Matrix2d ginv = g.inverse();
    const double tr = (ginv * target.h0).trace();
    if (std::abs(tr) > 1e-10 * target.h0.norm()) {
        throw Error(ErrorCode::InfeasibleTrace,
                    "target Hessian has nonzero metric trace " + std::to_string(tr));
    }
    double dist = std::numeric_limits<double>::infinity();
    for (int b : mesh.boundary_loop) dist = std::min(dist, (mesh.nodes[b] - target.p).norm());
    if (dist < 3.0 * mesh.h) {
        throw Error(ErrorCode::InvalidArgument, "jet point must be at least 3h from the boundary");
    }

    // Hessian directions: g^{-1}/|g^{-1}| and its orthonormal complement in
    // Sym(2). The trace row has target zero; dropping it lets high modes pick
    // up spurious trace from the readout.
    const SymSpace space(2);
    const Vec n = space.vectorize(ginv).normalized();
    Eigen::HouseholderQR<Mat> qr(n);
    const Mat q = qr.householderQ() * Mat::Identity(3, 3);
    std::vector<Eigen::Matrix2d> dirs = {space.unvectorize(q.col(0)), space.unvectorize(q.col(1)),
                                         space.unvectorize(q.col(2))};

    // The covariant Hessian H - Gamma^k xi_k is affine in the coordinate
    // Hessian, so shift the target instead of the rows.
    const LocalChart chart = cartesian_chart(mesh, target.p, readout_radius(mesh.h));
    const QuadraticFitOperator op(chart);
    const Mat coef = op.coefficients(fields);
    const auto nk = fields.cols();
    Mat rows(6, nk);
    rows.topRows(3) = coef.topRows(3);
    for (int d = 0; d < 3; ++d) {
        for (Eigen::Index k = 0; k < nk; ++k) {
            const Eigen::Matrix2d corr = gamma[0] * coef(1, k) + gamma[1] * coef(2, k);
            rows(3 + d, k) = hs_project(dirs[d], coef(3, k) - corr(0, 0), coef(4, k) - corr(0, 1),
                                        coef(5, k) - corr(1, 1));
        }
    }
    Vec rhs(6);
    rhs << target.a0, target.xi0(0), target.xi0(1), SymSpace::inner(dirs[0], target.h0),
        SymSpace::inner(dirs[1], target.h0), SymSpace::inner(dirs[2], target.h0);
    const RegularizedSolution sol = regularized_lstsq(rows, rhs, reg_rel);

    JetFit out;
    out.coefficients = sol.x;
    if (basis.kind == SourceKind::BoundaryOnGamma) out.boundary_data = basis.vectors * sol.x;
    out.field = fields * sol.x;
    const Vec c = coef * sol.x;
    out.achieved.value = c(0);
    out.achieved.gradient = c.segment<2>(1);
    Eigen::Matrix2d hc;
    hc << c(3), c(4), c(4), c(5);
    out.achieved.hessian = hc - gamma[0] * c(1) - gamma[1] * c(2);
    out.target.value = target.a0;
    out.target.gradient = target.xi0;
    out.target.hessian = target.h0;
    out.tol_jet = jet_tolerance(mesh.h);
    const double scale = std::max({1.0, std::abs(target.a0), target.xi0.norm(), target.h0.norm()});
    out.max_error = std::max({std::abs(out.achieved.value - target.a0), (out.achieved.gradient - target.xi0).norm(),
                              (out.achieved.hessian - target.h0).norm()}) /
                    scale;
    out.within_tolerance = out.max_error <= out.tol_jet;
    return out;
}

Separation separate_points(const HarmonicSolver& solver, const SourceBasis& basis, int x, int y) {
    const TriMesh& mesh = solver.mesh();
    if (x == y) throw Error(ErrorCode::InvalidArgument, "cannot separate a point from itself");
    if (x < 0 || y < 0 || x >= mesh.num_nodes() || y >= mesh.num_nodes()) {
        throw Error(ErrorCode::InvalidArgument, "node index out of range");
    }
    if (basis.kind != SourceKind::BoundaryOnGamma) {
        throw Error(ErrorCode::InvalidArgument, "point separation uses boundary data");
    }
    const auto pos = mesh.boundary_position();
    if (pos[x] >= 0) throw Error(ErrorCode::BoundaryNodeRequested, "x must be an interior node");
    auto weights = [&](int node) {
        if (pos[node] >= 0) {
            Vec w = Vec::Zero(mesh.num_boundary());
            w(pos[node]) = 1.0;
            return w;
        }
        return solver.harmonic_measure_row(node).weights;
    };
    // The functional c -> u_f(x) - u_f(y) has rank one, so the maximizer on
    // the unit sphere is its normalized representer.
    const Vec d = basis.vectors.transpose() * (weights(x) - weights(y));
    Separation out;
    out.separation = d.norm();
    out.coefficients = out.separation > 0.0 ? Vec(d / out.separation) : Vec::Zero(d.size());
    out.boundary_data = basis.vectors * out.coefficients;
    return out;
}

GridLinearSolver::GridLinearSolver(const Grid& grid, SpMat matrix) : grid_(grid), matrix_(std::move(matrix)) {
    if (matrix_.rows() != grid_.num_interior() || matrix_.cols() != grid_.num_interior()) {
        throw Error(ErrorCode::InvalidArgument, "operator size does not match the grid interior");
    }
    matrix_.makeCompressed();
    auto lu = std::make_shared<Eigen::SparseLU<SpMat>>();
    lu->compute(matrix_);
    if (lu->info() != Eigen::Success) throw Error(ErrorCode::FactorizationFailed, "operator is singular");
    SpMat mt = matrix_.transpose();
    mt.makeCompressed();
    auto lut = std::make_shared<Eigen::SparseLU<SpMat>>();
    lut->compute(mt);
    if (lut->info() != Eigen::Success) throw Error(ErrorCode::FactorizationFailed, "adjoint operator is singular");
    lu_ = std::move(lu);
    lu_t_ = std::move(lut);
}

Vec GridLinearSolver::solve(const Vec& rhs) const { return lu_->solve(rhs); }

Vec GridLinearSolver::solve_transpose(const Vec& rhs) const { return lu_t_->solve(rhs); }

Vec GridLinearSolver::solve_source(const Vec& source) const {
    return grid_.expand(solve(grid_.restrict_interior(source)));
}

double GridLinearSolver::condition_estimate(int iterations) const {
    if (iterations < 1) throw Error(ErrorCode::InvalidArgument, "iterations must be positive");
    const Eigen::Index n = matrix_.rows();
    const int m = static_cast<int>(std::min<Eigen::Index>(iterations, n));
    // Fixed start vector keeps the estimate reproducible.
    Vec start(n);
    for (Eigen::Index i = 0; i < n; ++i) start(i) = 1.0 + 0.5 * std::sin(1.7 * static_cast<double>(i) + 0.3);
    start.normalize();
    // Largest Ritz value of an SPD operator, Lanczos with full reorthogonalization.
    auto top = [&](auto&& apply) {
        Mat basis(n, m);
        Mat t = Mat::Zero(m, m);
        basis.col(0) = start;
        int k = 0;
        for (; k < m; ++k) {
            Vec w = apply(Vec(basis.col(k)));
            for (int pass = 0; pass < 2; ++pass) {
                const Vec c = basis.leftCols(k + 1).transpose() * w;
                w -= basis.leftCols(k + 1) * c;
                t.col(k).head(k + 1) += c;
            }
            const double beta = w.norm();
            if (k + 1 == m || beta <= 1e-14 * t(k, k)) break;
            t(k + 1, k) = beta;
            basis.col(k + 1) = w / beta;
        }
        const Mat tk = t.topLeftCorner(k + 1, k + 1).selfadjointView<Eigen::Lower>();
        return std::sqrt(Eigen::SelfAdjointEigenSolver<Mat>(tk, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff());
    };
    const double s_max = top([&](const Vec& v) { return Vec(matrix_.transpose() * (matrix_ * v)); });
    const double inv_s_min = top([&](const Vec& v) { return Vec(solve(solve_transpose(v))); });
    return s_max * inv_s_min;
}

InteriorSourceControl prescribe_gradient_interior_source(const GridLinearSolver& op, const std::vector<int>& window,
                                                         int x, const Eigen::Vector2d& v, double reg_rel) {
    const Grid& grid = op.grid();
    if (window.empty()) throw Error(ErrorCode::InvalidArgument, "empty source window");
    if (grid.is_boundary(x)) throw Error(ErrorCode::BoundaryNodeRequested, "x must be an interior grid node");
    // x may not touch the closed window or any node its stencil reads.
    const int xi = grid.i_of(x), xj = grid.j_of(x);
    for (int w : window) {
        if (grid.is_boundary(w)) throw Error(ErrorCode::InvalidArgument, "window node on the boundary");
        if (std::abs(grid.i_of(w) - xi) <= 1 && std::abs(grid.j_of(w) - xj) <= 1) {
            throw Error(ErrorCode::XInsideW, "x lies in the closure of the source window");
        }
    }
    // Adjoint solves: row a of the response matrix is G_a L^{-1}.
    const double inv2h = 1.0 / (2.0 * grid.h());
    Mat resp(2, static_cast<Eigen::Index>(window.size()));
    for (int a = 0; a < 2; ++a) {
        Vec ga = Vec::Zero(grid.num_interior());
        const int plus = a == 0 ? grid.node(xi + 1, xj) : grid.node(xi, xj + 1);
        const int minus = a == 0 ? grid.node(xi - 1, xj) : grid.node(xi, xj - 1);
        if (grid.interior_index(plus) >= 0) ga(grid.interior_index(plus)) += inv2h;
        if (grid.interior_index(minus) >= 0) ga(grid.interior_index(minus)) -= inv2h;
        const Vec z = op.solve_transpose(ga);
        for (std::size_t k = 0; k < window.size(); ++k) {
            resp(a, static_cast<Eigen::Index>(k)) = z(grid.interior_index(window[k]));
        }
    }
    InteriorSourceControl out;
    out.source = Vec::Zero(grid.num_nodes());
    if (v.norm() > 0.0) {
        const RegularizedSolution sol = regularized_lstsq(resp, v, reg_rel);
        for (std::size_t k = 0; k < window.size(); ++k) out.source(window[k]) = sol.x(static_cast<Eigen::Index>(k));
    }
    out.field = op.solve_source(out.source);
    out.achieved = grid.gradient(out.field, x);
    out.tol_jet = jet_tolerance(grid.h());
    out.within_tolerance = (out.achieved - v).norm() <= out.tol_jet * std::max(1.0, v.norm());
    return out;
}

} // namespace poisson_embed
