#include "poisson_embed/calderon.hpp"

#include "poisson_embed/errors.hpp"
#include "poisson_embed/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace poisson_embed {

namespace {

// Symmetric square root of the L2(boundary) Gram matrix of a boundary basis.
Mat gram_sqrt(const HarmonicSolver& solver, const Mat& vectors) {
    const Mat gram = vectors.transpose() * (solver.boundary_mass() * vectors);
    Eigen::SelfAdjointEigenSolver<Mat> es(gram);
    const Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

bool is_fourier_like(const HarmonicSolver& solver) {
    const TriMesh& mesh = solver.mesh();
    for (int b : mesh.boundary_loop) {
        if (!mesh.gamma_mask[b]) return false;
    }
    return true;
}

struct Candidate {
    Eigen::Vector3d lambda;
    double residual;
};

// min |sum_i lambda_i w_i - r| over the probability simplex in 3 variables.
Candidate simplex_fit(const Vec& r, const Vec& w0, const Vec& w1, const Vec& w2) {
    auto eval = [&](double l1, double l2) {
        Candidate c;
        c.lambda = Eigen::Vector3d(1.0 - l1 - l2, l1, l2);
        c.residual = (c.lambda(0) * w0 + l1 * w1 + l2 * w2 - r).norm();
        return c;
    };
    const Vec d1 = w1 - w0, d2 = w2 - w0, rr = r - w0;
    Eigen::Matrix2d n;
    n << d1.dot(d1), d1.dot(d2), d1.dot(d2), d2.dot(d2);
    const Eigen::Vector2d rhs(d1.dot(rr), d2.dot(rr));
    const double scale = std::max(n(0, 0), n(1, 1));
    if (scale > 0.0 && std::abs(n.determinant()) > 1e-14 * scale * scale) {
        const Eigen::Vector2d st = n.ldlt().solve(rhs);
        if (st(0) >= 0.0 && st(1) >= 0.0 && st(0) + st(1) <= 1.0) return eval(st(0), st(1));
    }
    // Minimum lies on an edge.
    auto edge = [&](const Vec& a, const Vec& b) {
        const Vec d = b - a;
        const double dd = d.squaredNorm();
        return dd > 0.0 ? std::clamp(d.dot(r - a) / dd, 0.0, 1.0) : 0.0;
    };
    Candidate best = eval(0.0, 0.0);
    const double t01 = edge(w0, w1);
    const double t02 = edge(w0, w2);
    const double t12 = edge(w1, w2);
    for (const Candidate& c : {eval(t01, 0.0), eval(0.0, t02), eval(1.0 - t12, t12)}) {
        if (c.residual < best.residual) best = c;
    }
    return best;
}

} // namespace

EmbeddingCloud EmbeddingCloud::columns(const std::vector<int>& cols) const {
    EmbeddingCloud out;
    out.tag = tag;
    out.mesh = mesh;
    out.kind = kind;
    out.basis = basis.columns(cols);
    out.values.resize(values.rows(), static_cast<Eigen::Index>(cols.size()));
    out.row_weight.resize(static_cast<Eigen::Index>(cols.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t a = 0; a < cols.size(); ++a) {
        out.values.col(static_cast<Eigen::Index>(a)) = values.col(cols[a]);
        for (std::size_t b = 0; b < cols.size(); ++b) {
            out.row_weight(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = row_weight(cols[a], cols[b]);
        }
    }
    return out;
}

EmbeddingCloud build_embedding(const HarmonicSolver& solver, const SourceBasis& basis, std::string tag) {
    EmbeddingCloud cloud;
    cloud.tag = std::move(tag);
    cloud.mesh = solver.mesh();
    cloud.basis = basis;
    cloud.kind = basis.kind == SourceKind::BoundaryOnGamma ? EmbeddingKind::BoundaryP : EmbeddingKind::InteriorR;
    cloud.values = solve_basis(solver, basis);
    if (cloud.kind == EmbeddingKind::BoundaryP) {
        // Boundary rows are the basis traces themselves.
        for (int b = 0; b < cloud.mesh.num_boundary(); ++b) {
            cloud.values.row(cloud.mesh.boundary_loop[b]) = basis.vectors.row(b);
        }
    }
    if (cloud.kind == EmbeddingKind::BoundaryP && !is_fourier_like(solver)) {
        cloud.row_weight = gram_sqrt(solver, basis.vectors);
    } else {
        cloud.row_weight = Mat::Identity(basis.size(), basis.size());
    }
    return cloud;
}

double min_row_separation(const EmbeddingCloud& cloud) {
    const auto flags = cloud.mesh.boundary_flags();
    std::vector<int> interior;
    for (int i = 0; i < cloud.num_nodes(); ++i) {
        if (!flags[i]) interior.push_back(i);
    }
    const Mat rows = cloud.values * cloud.row_weight;
    const int n = static_cast<int>(interior.size());
    std::vector<double> best(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    parallel_for(n, [&](int a) {
        double m = std::numeric_limits<double>::infinity();
        for (int b = a + 1; b < n; ++b) m = std::min(m, (rows.row(interior[a]) - rows.row(interior[b])).squaredNorm());
        best[a] = m;
    });
    double m = std::numeric_limits<double>::infinity();
    for (double v : best) m = std::min(m, v);
    return std::sqrt(m);
}

HoldoutSplit holdout_split(int count) {
    HoldoutSplit s;
    for (int k = 0; k < count; ++k) (k % 4 == 3 ? s.holdout : s.fit).push_back(k);
    return s;
}

Eigen::MatrixX2d CorrespondenceMap::positions() const {
    Eigen::MatrixX2d out(static_cast<Eigen::Index>(points.size()), 2);
    for (std::size_t i = 0; i < points.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = points[i].position.transpose();
    return out;
}

double CorrespondenceMap::max_residual() const {
    double m = 0.0;
    for (const auto& p : points) m = std::max(m, p.residual);
    return m;
}

CorrespondenceMap match_embeddings(const EmbeddingCloud& c1, const EmbeddingCloud& c2) {
    if (c1.size() != c2.size()) throw Error(ErrorCode::InvalidArgument, "embeddings use different basis sizes");
    const Mat r1 = c1.values * c1.row_weight;
    const Mat r2 = c2.values * c2.row_weight;
    const TriMesh& m2 = c2.mesh;
    const auto star = m2.node_triangles();
    const int n1 = c1.num_nodes(), n2 = c2.num_nodes();

    CorrespondenceMap map;
    map.points.resize(static_cast<std::size_t>(n1));
    parallel_for(n1, [&](int x) {
        const Vec r = r1.row(x).transpose();
        int nearest = 0;
        double dmin = std::numeric_limits<double>::infinity();
        for (int y = 0; y < n2; ++y) {
            const double d = (r2.row(y).transpose() - r).squaredNorm();
            if (d < dmin) {
                dmin = d;
                nearest = y;
            }
        }
        MatchedPoint best;
        best.residual = std::numeric_limits<double>::infinity();
        std::vector<MatchedPoint> cands;
        for (int t : star[nearest]) {
            const auto& tri = m2.triangles[t];
            const Candidate c = simplex_fit(r, r2.row(tri[0]).transpose(), r2.row(tri[1]).transpose(),
                                            r2.row(tri[2]).transpose());
            MatchedPoint p;
            p.triangle = t;
            p.barycentric = c.lambda;
            p.residual = c.residual;
            p.position = c.lambda(0) * m2.nodes[tri[0]] + c.lambda(1) * m2.nodes[tri[1]] + c.lambda(2) * m2.nodes[tri[2]];
            cands.push_back(p);
            if (p.residual < best.residual) best = p;
        }
        for (const auto& p : cands) {
            if (std::abs(p.residual - best.residual) < 1e-12 && (p.position - best.position).norm() > m2.h) {
                best.ambiguous = true;
            }
        }
        map.points[static_cast<std::size_t>(x)] = best;
    });
    for (const auto& p : map.points) map.ambiguous_count += p.ambiguous ? 1 : 0;
    return map;
}

Vec interpolate(const TriMesh& mesh, const Mat& data, const MatchedPoint& p) {
    const auto& tri = mesh.triangles[p.triangle];
    return (p.barycentric(0) * data.row(tri[0]) + p.barycentric(1) * data.row(tri[1]) +
            p.barycentric(2) * data.row(tri[2]))
        .transpose();
}

void estimate_jacobian(const EmbeddingCloud& c1, const EmbeddingCloud& c2, CorrespondenceMap& map) {
    const int k = c1.size();
    if (k < 3) throw Error(ErrorCode::RankDeficientGradients, "need at least 3 basis functions");
    auto gradients = [k](const EmbeddingCloud& c, Mat& gx, Mat& gy) {
        gx.resize(c.num_nodes(), k);
        gy.resize(c.num_nodes(), k);
        for (int j = 0; j < k; ++j) {
            const Eigen::MatrixX2d g = recover_gradients(c.mesh, c.values.col(j));
            gx.col(j) = g.col(0);
            gy.col(j) = g.col(1);
        }
    };
    Mat gx1, gy1, gx2, gy2;
    gradients(c1, gx1, gy1);
    gradients(c2, gx2, gy2);

    const int n1 = c1.num_nodes();
    map.jacobian.assign(static_cast<std::size_t>(n1), Eigen::Matrix2d::Zero());
    map.jacobian_residual = Vec::Zero(n1);
    std::vector<char> deficient(static_cast<std::size_t>(n1), 0);
    parallel_for(n1, [&](int x) {
        const MatchedPoint& p = map.points[static_cast<std::size_t>(x)];
        Eigen::MatrixX2d g1(k, 2), g2(k, 2);
        g1.col(0) = gx1.row(x).transpose();
        g1.col(1) = gy1.row(x).transpose();
        g2.col(0) = interpolate(c2.mesh, gx2, p);
        g2.col(1) = interpolate(c2.mesh, gy2, p);
        Eigen::JacobiSVD<Eigen::MatrixX2d> svd(g2, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto s = svd.singularValues();
        if (!(s(1) > 1e-10 * s(0))) {
            deficient[static_cast<std::size_t>(x)] = 1;
            return;
        }
        const Eigen::Matrix2d dj = svd.solve(g1);
        map.jacobian[static_cast<std::size_t>(x)] = dj;
        const double n = g1.norm();
        map.jacobian_residual(x) = (g2 * dj - g1).norm() / (n > 0.0 ? n : 1.0);
    });
    for (int x = 0; x < n1; ++x) {
        if (deficient[static_cast<std::size_t>(x)]) {
            throw Error(ErrorCode::RankDeficientGradients,
                        "basis gradients have rank < 2 at node " + std::to_string(x));
        }
    }
}

std::vector<Eigen::Matrix2d> matched_position_jacobian(const TriMesh& mesh1, const CorrespondenceMap& map) {
    const Eigen::MatrixX2d pos = map.positions();
    const Eigen::MatrixX2d g0 = recover_gradients(mesh1, pos.col(0));
    const Eigen::MatrixX2d g1 = recover_gradients(mesh1, pos.col(1));
    std::vector<Eigen::Matrix2d> out(static_cast<std::size_t>(mesh1.num_nodes()));
    for (int i = 0; i < mesh1.num_nodes(); ++i) {
        out[static_cast<std::size_t>(i)].row(0) = g0.row(i);
        out[static_cast<std::size_t>(i)].row(1) = g1.row(i);
    }
    return out;
}

double verify_harmonic_morphism(const EmbeddingCloud& h1, const EmbeddingCloud& h2, const CorrespondenceMap& map) {
    if (h1.size() != h2.size()) throw Error(ErrorCode::InvalidArgument, "holdout clouds differ in size");
    double worst = 0.0;
    for (int x = 0; x < h1.num_nodes(); ++x) {
        const Vec u2 = interpolate(h2.mesh, h2.values, map.points[static_cast<std::size_t>(x)]);
        worst = std::max(worst, (h1.values.row(x).transpose() - u2).cwiseAbs().maxCoeff());
    }
    return worst;
}

} // namespace poisson_embed
