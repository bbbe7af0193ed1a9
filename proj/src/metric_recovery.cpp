#include "poisson_embed/metric_recovery.hpp"

#include "poisson_embed/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <map>
#include <queue>
#include <sstream>

namespace poisson_embed {

namespace {

void require_interior_point(const TriMesh& mesh, int x0) {
    if (x0 < 0 || x0 >= mesh.num_nodes()) throw Error(ErrorCode::InvalidArgument, "node index out of range");
    const auto flags = mesh.boundary_flags();
    if (flags[x0]) throw Error(ErrorCode::BoundaryNodeRequested, "chart center must be interior");
    double dist = std::numeric_limits<double>::infinity();
    for (int b : mesh.boundary_loop) dist = std::min(dist, (mesh.nodes[b] - mesh.nodes[x0]).norm());
    if (dist < 3.0 * mesh.h) throw Error(ErrorCode::InvalidArgument, "chart center must be at least 3h from the boundary");
}

std::string matrix_text(const Eigen::Matrix2d& m) {
    std::ostringstream os;
    os << "[" << m(0, 0) << ", " << m(0, 1) << "; " << m(1, 0) << ", " << m(1, 1) << "]";
    return os.str();
}

} // namespace

LocalChart build_harmonic_chart(const HarmonicSolver& solver, const SourceBasis& basis, const Mat& fields, int x0) {
    const TriMesh& mesh = solver.mesh();
    require_interior_point(mesh, x0);
    const double rho = readout_radius(mesh.h);
    const LocalChart cart = cartesian_chart(mesh, mesh.nodes[x0], rho);
    Jet j1, j2;
    j1.gradient = Eigen::Vector2d(1.0, 0.0);
    j2.gradient = Eigen::Vector2d(0.0, 1.0);
    const JetFit u = prescribe_jet_in_chart(basis, fields, cart, j1, {}, mesh.h);
    const JetFit v = prescribe_jet_in_chart(basis, fields, cart, j2, {}, mesh.h);
    LocalChart chart = field_chart(mesh, x0, u.field, v.field, rho, ChartKind::Harmonic);
    const double cond = chart.jacobian_condition();
    if (!(cond < 1e3)) {
        throw Error(ErrorCode::IllConditioned, "harmonic chart Jacobian has condition " + std::to_string(cond));
    }
    return chart;
}

InverseMetricEstimate inverse_metric_from_hessians(std::span<const Mat> hessians) {
    if (hessians.empty()) throw Error(ErrorCode::InvalidArgument, "no Hessians given");
    const SymSpace space(static_cast<int>(hessians[0].rows()));
    const int m = static_cast<int>(hessians.size());
    if (m != space.dim() - 1) {
        throw Error(ErrorCode::NullspaceNotOneDim, "need " + std::to_string(space.dim() - 1) + " Hessians, got " +
                                                       std::to_string(m));
    }
    Mat stacked(m, space.dim());
    for (int i = 0; i < m; ++i) stacked.row(i) = space.vectorize(hessians[static_cast<std::size_t>(i)]).transpose();
    Eigen::JacobiSVD<Mat> svd(stacked, Eigen::ComputeFullV);
    InverseMetricEstimate out;
    out.singular_values = svd.singularValues();
    const Vec& s = out.singular_values;
    if (!(s(m - 1) > 1e-8 * s(0))) {
        int rank = 0;
        for (Eigen::Index i = 0; i < s.size(); ++i) rank += s(i) > 1e-8 * s(0) ? 1 : 0;
        throw Error(ErrorCode::NullspaceNotOneDim,
                    "Hessians have rank " + std::to_string(rank) + ", nullspace is not one-dimensional");
    }
    out.svd_route = canonical_sign(space, space.unvectorize(svd.matrixV().col(space.dim() - 1)));
    out.hodge_route = hodge_star_sym(space, hessians);
    out.route_agreement = (out.svd_route - out.hodge_route).norm();
    if (!(out.route_agreement <= 1e-8)) {
        throw Error(ErrorCode::IllConditioned,
                    "nullspace routes disagree by " + std::to_string(out.route_agreement));
    }
    out.direction = out.svd_route;
    Eigen::SelfAdjointEigenSolver<Mat> es(out.direction);
    if (!(es.eigenvalues().minCoeff() > 0.0)) {
        throw Error(ErrorCode::NotPositiveDefinite, "recovered inverse metric is indefinite");
    }
    out.hessians.assign(hessians.begin(), hessians.end());
    return out;
}

InverseMetricEstimate recover_inverse_metric(const HarmonicSolver& solver, const SourceBasis& basis,
                                             const Mat& fields, const LocalChart& chart) {
    const SymSpace space(2);
    const QuadraticFitOperator op(chart);
    const Mat coef = op.coefficients(fields);
    // Chart Hessians of all basis solutions span the plane orthogonal to g^{-1}.
    Mat vec_h(3, coef.cols());
    for (Eigen::Index k = 0; k < coef.cols(); ++k) {
        Mat h(2, 2);
        h << coef(3, k), coef(4, k), coef(4, k), coef(5, k);
        vec_h.col(k) = space.vectorize(h);
    }
    Eigen::JacobiSVD<Mat> plane(vec_h, Eigen::ComputeFullU);
    std::vector<Eigen::Matrix2d> dirs;
    for (int i = 0; i < 2; ++i) dirs.emplace_back(space.unvectorize(plane.matrixU().col(i)));

    std::vector<Mat> hessians;
    for (int i = 0; i < 2; ++i) {
        Jet target;
        target.hessian = dirs[static_cast<std::size_t>(i)];
        const JetFit fit = prescribe_jet_in_chart(basis, fields, chart, target, dirs, solver.mesh().h);
        hessians.emplace_back(fit.achieved.hessian);
    }
    return inverse_metric_from_hessians(hessians);
}

Mat normalized_inverse_metric(const Eigen::Matrix2d& g, const Eigen::Matrix2d& jac) {
    const Eigen::Matrix2d gi = jac * g.inverse() * jac.transpose();
    return gi / gi.norm();
}

Conjugate harmonic_conjugate(const TriMesh& mesh, const ElementMetric& metric, const Vec& u, int root) {
    if (root < 0 || root >= mesh.num_nodes()) throw Error(ErrorCode::InvalidArgument, "root out of range");
    // Per-triangle *_g du.
    std::vector<Eigen::Vector2d> w(static_cast<std::size_t>(mesh.num_triangles()));
    double rms = 0.0, area = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Eigen::Vector2d grad = mesh.basis_gradients(t) * Eigen::Vector3d(u(tri[0]), u(tri[1]), u(tri[2]));
        const Eigen::Matrix2d& g = metric[t];
        const Eigen::Vector2d z = std::sqrt(g.determinant()) * g.inverse() * grad;
        w[static_cast<std::size_t>(t)] = Eigen::Vector2d(-z(1), z(0));
        const double a = mesh.signed_area(t);
        rms += a * z.squaredNorm();
        area += a;
    }
    rms = std::sqrt(rms / area);
    // Rounding in P1 gradients of a constant is about eps |u| / h.
    const double floor = 1e-10 * u.cwiseAbs().maxCoeff() / mesh.h;
    if (!(rms > floor)) throw Error(ErrorCode::DegenerateGradient, "du vanishes identically");

    // Edge forms: average over the adjacent triangles.
    std::map<std::pair<int, int>, std::pair<Eigen::Vector2d, int>> edge_w;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        for (int e = 0; e < 3; ++e) {
            const int a = tri[e], b = tri[(e + 1) % 3];
            auto& slot = edge_w[{std::min(a, b), std::max(a, b)}];
            if (slot.second == 0) slot.first.setZero();
            slot.first += w[static_cast<std::size_t>(t)];
            slot.second += 1;
        }
    }
    auto integral = [&](int a, int b) {
        const auto& slot = edge_w.at({std::min(a, b), std::max(a, b)});
        return (slot.first / slot.second).dot(mesh.nodes[b] - mesh.nodes[a]);
    };

    std::vector<std::vector<int>> adj(static_cast<std::size_t>(mesh.num_nodes()));
    for (const auto& kv : edge_w) {
        adj[static_cast<std::size_t>(kv.first.first)].push_back(kv.first.second);
        adj[static_cast<std::size_t>(kv.first.second)].push_back(kv.first.first);
    }
    Conjugate out;
    out.root = root;
    out.v = Vec::Zero(mesh.num_nodes());
    std::vector<char> seen(static_cast<std::size_t>(mesh.num_nodes()), 0);
    std::queue<int> q;
    q.push(root);
    seen[static_cast<std::size_t>(root)] = 1;
    while (!q.empty()) {
        const int a = q.front();
        q.pop();
        for (int b : adj[static_cast<std::size_t>(a)]) {
            if (seen[static_cast<std::size_t>(b)]) continue;
            seen[static_cast<std::size_t>(b)] = 1;
            out.v(b) = out.v(a) + integral(a, b);
            q.push(b);
        }
    }

    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        double circ = 0.0, perim = 0.0;
        for (int e = 0; e < 3; ++e) {
            circ += integral(tri[e], tri[(e + 1) % 3]);
            perim += (mesh.nodes[tri[(e + 1) % 3]] - mesh.nodes[tri[e]]).norm();
        }
        out.max_circulation = std::max(out.max_circulation, std::abs(circ) / (perim * rms));
    }

    // Loop through edge midpoints and centroids around each interior node.
    // For the P1 form this equals the stiffness residual (K u)_i, so it
    // vanishes for discrete harmonic u.
    const auto flags = mesh.boundary_flags();
    std::vector<double> circ(static_cast<std::size_t>(mesh.num_nodes()), 0.0);
    std::vector<double> dual_area(static_cast<std::size_t>(mesh.num_nodes()), 0.0);
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        for (int e = 0; e < 3; ++e) {
            const int i = tri[e], a = tri[(e + 1) % 3], b = tri[(e + 2) % 3];
            circ[static_cast<std::size_t>(i)] += w[static_cast<std::size_t>(t)].dot(0.5 * (mesh.nodes[b] - mesh.nodes[a]));
            dual_area[static_cast<std::size_t>(i)] += mesh.signed_area(t) / 3.0;
        }
    }
    for (int i = 0; i < mesh.num_nodes(); ++i) {
        if (flags[i]) continue;
        out.max_dual_circulation = std::max(
            out.max_dual_circulation, std::abs(circ[static_cast<std::size_t>(i)]) / (dual_area[static_cast<std::size_t>(i)] * rms));
    }
    if (out.max_dual_circulation > 10.0 * mesh.h) {
        throw Error(ErrorCode::LargeCurlResidual,
                    "conjugate form has dual-cell circulation " + std::to_string(out.max_dual_circulation));
    }
    return out;
}

IsothermalChart build_isothermal_chart(const HarmonicSolver& solver, const SourceBasis& basis, const Mat& fields,
                                       int x0) {
    const TriMesh& mesh = solver.mesh();
    require_interior_point(mesh, x0);
    Jet2Target target;
    target.p = mesh.nodes[x0];
    target.xi0 = Eigen::Vector2d(1.0, 0.0);
    const JetFit u = prescribe_jet(solver, basis, fields, target);

    IsothermalChart out;
    out.conjugate = harmonic_conjugate(mesh, solver.element_metric(), u.field, x0);
    out.chart = field_chart(mesh, x0, u.field, out.conjugate.v, readout_radius(mesh.h), ChartKind::Isothermal);
    const Eigen::Matrix2d g = metric_at(solver, mesh.nodes[x0]);
    const Eigen::Matrix2d jinv = out.chart.jacobian.inverse();
    out.pulled_back = jinv.transpose() * g * jinv;
    const double mean = 0.5 * (out.pulled_back(0, 0) + out.pulled_back(1, 1));
    out.conformal_factor = mean;
    out.off_diagonal_ratio = std::abs(out.pulled_back(0, 1)) / mean;
    out.diagonal_mismatch = std::abs(out.pulled_back(0, 0) - out.pulled_back(1, 1)) / mean;
    const Eigen::Vector2d du = out.chart.jacobian.row(0).transpose();
    out.normalization = mean * du.dot(g.inverse() * du);
    out.tolerance = mesh.h;
    if (out.off_diagonal_ratio > out.tolerance || out.diagonal_mismatch > out.tolerance) {
        throw Error(ErrorCode::NotConformalAtTolerance,
                    "pulled-back metric " + matrix_text(out.pulled_back) + " is not conformal within " +
                        std::to_string(out.tolerance));
    }
    return out;
}

HomothetyReport boundary_homothety_check(const TriMesh& mesh, const MetricField& g1, const MetricField& g2) {
    HomothetyReport rep;
    const int nb = mesh.num_boundary();
    double sum = 0.0;
    for (int b = 0; b < nb; ++b) {
        const int node = mesh.boundary_loop[b];
        if (!mesh.gamma_mask[node]) continue;
        const Eigen::Vector2d t = mesh.nodes[mesh.boundary_loop[(b + 1) % nb]] - mesh.nodes[mesh.boundary_loop[(b + nb - 1) % nb]];
        const Vec x = mesh.nodes[node];
        const double q2 = t.dot(g2(x) * t);
        if (!(t.norm() > 0.0) || !(q2 > 0.0)) {
            throw Error(ErrorCode::DegenerateTangent, "degenerate boundary tangent at node " + std::to_string(node));
        }
        const double lambda = t.dot(g1(x) * t) / q2;
        sum += lambda;
        rep.max_deviation = std::max(rep.max_deviation, std::abs(lambda - 1.0));
        ++rep.count;
    }
    if (rep.count == 0) throw Error(ErrorCode::DegenerateTangent, "no Gamma nodes");
    rep.mean = sum / rep.count;
    return rep;
}

} // namespace poisson_embed
