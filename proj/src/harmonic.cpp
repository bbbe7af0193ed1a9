#include "poisson_embed/harmonic.hpp"

#include "poisson_embed/errors.hpp"

#include <Eigen/SparseLU>

#include <cmath>

namespace poisson_embed {

Vec DnMap::neumann_values(const Vec& f) const {
    Eigen::SparseLU<SpMat> lu(boundary_mass);
    return lu.solve(Vec(lambda * f));
}

double DnMap::rayleigh_quotient(const Vec& f) const {
    return f.dot(lambda * f) / f.dot(boundary_mass * f);
}

HarmonicSolver::HarmonicSolver(TriMesh mesh, ElementMetric metric, std::optional<MetricField> field)
    : mesh_(std::move(mesh)), metric_(std::move(metric)), field_(std::move(field)) {
    setup();
}

HarmonicSolver::HarmonicSolver(TriMesh mesh, const MetricField& metric)
    : mesh_(std::move(mesh)), metric_(sample_metric(mesh_, metric)), field_(metric) {
    setup();
}

void HarmonicSolver::setup() {
    op_ = assemble_operator(mesh_, metric_);
    const auto on_boundary = mesh_.boundary_flags();
    interior_pos_.assign(mesh_.nodes.size(), -1);
    for (int i = 0; i < mesh_.num_nodes(); ++i) {
        if (!on_boundary[i]) {
            interior_pos_[i] = static_cast<int>(interior_.size());
            interior_.push_back(i);
        }
    }
    const auto bpos = mesh_.boundary_position();
    const int ni = static_cast<int>(interior_.size());
    const int nb = mesh_.num_boundary();
    std::vector<Eigen::Triplet<double>> tii, tib, tbb;
    for (int c = 0; c < op_.stiffness.outerSize(); ++c) {
        for (SpMat::InnerIterator it(op_.stiffness, c); it; ++it) {
            const int r = static_cast<int>(it.row()), col = static_cast<int>(it.col());
            if (interior_pos_[r] >= 0 && interior_pos_[col] >= 0) {
                tii.emplace_back(interior_pos_[r], interior_pos_[col], it.value());
            } else if (interior_pos_[r] >= 0) {
                tib.emplace_back(interior_pos_[r], bpos[col], it.value());
            } else if (interior_pos_[col] < 0) {
                tbb.emplace_back(bpos[r], bpos[col], it.value());
            }
        }
    }
    k_ii_.resize(ni, ni);
    k_ii_.setFromTriplets(tii.begin(), tii.end());
    k_ib_.resize(ni, nb);
    k_ib_.setFromTriplets(tib.begin(), tib.end());
    k_bb_.resize(nb, nb);
    k_bb_.setFromTriplets(tbb.begin(), tbb.end());

    auto factor = std::make_shared<Eigen::SimplicialLLT<SpMat>>(k_ii_);
    if (factor->info() != Eigen::Success) {
        throw Error(ErrorCode::FactorizationFailed, "interior stiffness block is not SPD");
    }
    factor_ = std::move(factor);
}

Vec HarmonicSolver::solve_dirichlet(const Vec& f) const {
    if (f.size() != num_boundary()) throw Error(ErrorCode::InvalidArgument, "boundary data has wrong length");
    if (!f.allFinite()) throw Error(ErrorCode::InvalidArgument, "boundary data is not finite");
    const Vec ui = factor_->solve(Vec(-(k_ib_ * f)));
    Vec u(mesh_.num_nodes());
    for (int i = 0; i < static_cast<int>(interior_.size()); ++i) u(interior_[i]) = ui(i);
    for (int b = 0; b < num_boundary(); ++b) u(mesh_.boundary_loop[b]) = f(b);
    return u;
}

Mat HarmonicSolver::solve_dirichlet(const Mat& f) const {
    Mat u(mesh_.num_nodes(), f.cols());
    for (int c = 0; c < f.cols(); ++c) u.col(c) = solve_dirichlet(Vec(f.col(c)));
    return u;
}

Vec HarmonicSolver::solve_load(const Vec& b) const {
    if (b.size() != mesh_.num_nodes()) throw Error(ErrorCode::InvalidArgument, "load vector has wrong length");
    Vec bi(interior_.size());
    for (int i = 0; i < static_cast<int>(interior_.size()); ++i) bi(i) = b(interior_[i]);
    const Vec ui = factor_->solve(bi);
    Vec u = Vec::Zero(mesh_.num_nodes());
    for (int i = 0; i < static_cast<int>(interior_.size()); ++i) u(interior_[i]) = ui(i);
    return u;
}

DnMap HarmonicSolver::dn_map() const {
    const Mat dense_ib = Mat(k_ib_);
    const Mat x = factor_->solve(dense_ib);
    DnMap dn;
    dn.lambda = Mat(k_bb_) - dense_ib.transpose() * x;
    dn.boundary_mass = op_.boundary_mass;
    return dn;
}

HarmonicMeasureRow HarmonicSolver::harmonic_measure_row(int node) const {
    if (node < 0 || node >= mesh_.num_nodes()) throw Error(ErrorCode::InvalidArgument, "node out of range");
    if (interior_pos_[node] < 0) throw Error(ErrorCode::BoundaryNodeRequested, "harmonic measure needs an interior node");
    // Row of -K_II^{-1} K_IB, via one adjoint solve (K_II symmetric).
    const Vec e = Vec::Unit(static_cast<Eigen::Index>(interior_.size()), interior_pos_[node]);
    const Vec w = factor_->solve(e);
    HarmonicMeasureRow row;
    row.node = node;
    row.weights = -(k_ib_.transpose() * w);
    return row;
}

Vec HarmonicSolver::boundary_values(const std::function<double(const Point2&)>& f) const {
    Vec out(num_boundary());
    for (int b = 0; b < num_boundary(); ++b) out(b) = f(mesh_.nodes[mesh_.boundary_loop[b]]);
    return out;
}

Vec HarmonicSolver::boundary_angles() const {
    return boundary_values([](const Point2& p) { return std::atan2(p.y(), p.x()); });
}

ConformalCheck conformal_invariance_check_2d(const TriMesh& mesh, const MetricField& metric,
                                             const std::function<double(const Point2&)>& c) {
    const ElementMetric base = sample_metric(mesh, metric);
    ConformalCheck out;
    for (const auto& p : mesh.nodes) {
        if (!(c(p) > 0.0)) throw Error(ErrorCode::NonPositiveConformalFactor, "conformal factor must be positive");
    }
    for (int b : mesh.boundary_loop) {
        if (std::abs(c(mesh.nodes[b]) - 1.0) > 1e-12) out.boundary_warning = true;
    }
    const HarmonicSolver s1(mesh, base);
    const HarmonicSolver s2(mesh, scale_metric(mesh, base, c));
    out.dn_discrepancy = (s1.dn_map().lambda - s2.dn_map().lambda).cwiseAbs().maxCoeff();
    return out;
}

Eigen::MatrixX2d recover_gradients(const TriMesh& mesh, const Vec& u) {
    Eigen::MatrixX2d grad = Eigen::MatrixX2d::Zero(mesh.num_nodes(), 2);
    Vec weight = Vec::Zero(mesh.num_nodes());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Eigen::Vector3d local(u(tri[0]), u(tri[1]), u(tri[2]));
        const Eigen::Vector2d g = mesh.basis_gradients(t) * local;
        const double area = mesh.signed_area(t);
        for (int v : tri) {
            grad.row(v) += area * g.transpose();
            weight(v) += area;
        }
    }
    for (int i = 0; i < mesh.num_nodes(); ++i) grad.row(i) /= weight(i);
    return grad;
}

} // namespace poisson_embed
