#include "poisson_embed/mesh.hpp"

#include "poisson_embed/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

namespace poisson_embed {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double a) {
    double w = std::fmod(a, kTwoPi);
    if (w < 0) w += kTwoPi;
    return w;
}

double corner_angle(const Point2& at, const Point2& p, const Point2& q) {
    const Point2 u = p - at, v = q - at;
    return std::atan2(std::abs(u.x() * v.y() - u.y() * v.x()), u.dot(v));
}

double orient(const Point2& a, const Point2& b, const Point2& c) {
    return (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
}

std::array<int, 2> edge_key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

// Lawson flips until every interior edge is locally Delaunay.
void make_delaunay(const std::vector<Point2>& nodes, std::vector<std::array<int, 3>>& tris) {
    for (int pass = 0; pass < 1000; ++pass) {
        std::map<std::array<int, 2>, std::vector<int>> edge_tris;
        for (int t = 0; t < static_cast<int>(tris.size()); ++t) {
            for (int e = 0; e < 3; ++e) edge_tris[edge_key(tris[t][e], tris[t][(e + 1) % 3])].push_back(t);
        }
        std::vector<char> dirty(tris.size(), 0);
        int flips = 0;
        for (const auto& [key, ts] : edge_tris) {
            if (ts.size() != 2 || dirty[ts[0]] || dirty[ts[1]]) continue;
            auto opposite = [&](int t) {
                for (int v : tris[t]) {
                    if (v != key[0] && v != key[1]) return v;
                }
                return -1;
            };
            const int c = opposite(ts[0]);
            const int d = opposite(ts[1]);
            const double sum = corner_angle(nodes[c], nodes[key[0]], nodes[key[1]]) +
                               corner_angle(nodes[d], nodes[key[0]], nodes[key[1]]);
            if (sum <= std::numbers::pi + 1e-10) continue;
            // t0 = (a, b, c) counterclockwise; the quad is a, d, b, c.
            int a = key[0], b = key[1];
            if (orient(nodes[a], nodes[b], nodes[c]) < 0) std::swap(a, b);
            const std::array<int, 3> n0{a, d, c};
            const std::array<int, 3> n1{d, b, c};
            if (orient(nodes[a], nodes[d], nodes[c]) <= 0 || orient(nodes[d], nodes[b], nodes[c]) <= 0) continue;
            tris[ts[0]] = n0;
            tris[ts[1]] = n1;
            dirty[ts[0]] = dirty[ts[1]] = 1;
            ++flips;
        }
        if (flips == 0) return;
    }
}

} // namespace

bool Arc::full() const { return end - begin >= kTwoPi - 1e-12; }

double Arc::length() const { return std::min(end - begin, kTwoPi); }

bool Arc::contains(double angle) const {
    if (full()) return true;
    return wrap_angle(angle - begin) <= length() + 1e-12;
}

// ---------------------------------------------------------------------------
// TriMesh

double TriMesh::signed_area(int t) const {
    const auto& tri = triangles[t];
    return 0.5 * orient(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
}

Point2 TriMesh::centroid(int t) const {
    const auto& tri = triangles[t];
    return (nodes[tri[0]] + nodes[tri[1]] + nodes[tri[2]]) / 3.0;
}

Eigen::Matrix<double, 2, 3> TriMesh::basis_gradients(int t) const {
    const auto& tri = triangles[t];
    Eigen::Matrix2d e;
    e.col(0) = nodes[tri[1]] - nodes[tri[0]];
    e.col(1) = nodes[tri[2]] - nodes[tri[0]];
    Eigen::Matrix<double, 2, 3> ref;
    ref << -1, 1, 0, -1, 0, 1;
    return e.transpose().inverse() * ref;
}

std::vector<char> TriMesh::boundary_flags() const {
    std::vector<char> flags(nodes.size(), 0);
    for (int b : boundary_loop) flags[b] = 1;
    return flags;
}

std::vector<int> TriMesh::boundary_position() const {
    std::vector<int> pos(nodes.size(), -1);
    for (int i = 0; i < num_boundary(); ++i) pos[boundary_loop[i]] = i;
    return pos;
}

std::vector<std::vector<int>> TriMesh::node_triangles() const {
    std::vector<std::vector<int>> out(nodes.size());
    for (int t = 0; t < num_triangles(); ++t) {
        for (int v : triangles[t]) out[v].push_back(t);
    }
    return out;
}

std::vector<std::array<int, 2>> TriMesh::edges() const {
    std::vector<std::array<int, 2>> out;
    for (const auto& tri : triangles) {
        for (int e = 0; e < 3; ++e) out.push_back(edge_key(tri[e], tri[(e + 1) % 3]));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void TriMesh::finalize() {
    if (gamma_mask.size() != nodes.size()) gamma_mask.assign(nodes.size(), 0);
    for (int t = 0; t < num_triangles(); ++t) {
        for (int v : triangles[t]) {
            if (v < 0 || v >= num_nodes()) throw Error(ErrorCode::DegenerateMesh, "triangle index out of range");
        }
        if (!(signed_area(t) > 0.0)) {
            throw Error(ErrorCode::InvertedTriangle, "triangle " + std::to_string(t) + " has non-positive area");
        }
    }
    std::map<std::array<int, 2>, int> edge_count;
    for (const auto& tri : triangles) {
        for (int e = 0; e < 3; ++e) ++edge_count[edge_key(tri[e], tri[(e + 1) % 3])];
    }
    std::map<std::array<int, 2>, int> loop_edges;
    for (int i = 0; i < num_boundary(); ++i) {
        ++loop_edges[edge_key(boundary_loop[i], boundary_loop[(i + 1) % num_boundary()])];
    }
    h = 0.0;
    for (const auto& [key, count] : edge_count) {
        if (count > 2) throw Error(ErrorCode::DegenerateMesh, "edge shared by more than two triangles");
        const bool on_loop = loop_edges.count(key) > 0;
        if ((count == 1) != on_loop) throw Error(ErrorCode::DegenerateMesh, "boundary loop does not match boundary edges");
        h = std::max(h, (nodes[key[0]] - nodes[key[1]]).norm());
    }
    if (loop_edges.size() != static_cast<std::size_t>(num_boundary())) {
        throw Error(ErrorCode::DegenerateMesh, "boundary loop is not a simple polygon");
    }
    const auto on_boundary = boundary_flags();
    for (int i = 0; i < num_nodes(); ++i) {
        if (gamma_mask[i] && on_boundary[i] == 0) {
            throw Error(ErrorCode::DegenerateMesh, "Gamma flag set on an interior node");
        }
    }

    non_obtuse = true;
    for (const auto& tri : triangles) {
        for (int e = 0; e < 3; ++e) {
            if (corner_angle(nodes[tri[e]], nodes[tri[(e + 1) % 3]], nodes[tri[(e + 2) % 3]]) >
                0.5 * std::numbers::pi + 1e-12) {
                non_obtuse = false;
            }
        }
    }
    delaunay = true;
    std::map<std::array<int, 2>, double> opposite_sum;
    for (const auto& tri : triangles) {
        for (int e = 0; e < 3; ++e) {
            const int a = tri[e], b = tri[(e + 1) % 3], c = tri[(e + 2) % 3];
            opposite_sum[edge_key(a, b)] += corner_angle(nodes[c], nodes[a], nodes[b]);
        }
    }
    for (const auto& [key, s] : opposite_sum) {
        if (s > std::numbers::pi + 1e-10) delaunay = false;
    }
}

// ---------------------------------------------------------------------------
// Meshing

namespace {

// Odd rings are rotated by half a node spacing so that neighbouring rings
// never line up radially.
double ring_offset(int ring) { return (ring % 2 == 1) ? 0.5 : 0.0; }

} // namespace

TriMesh build_disk_mesh(double radius, double target_h, const Arc& gamma_arc) {
    if (!(radius > 0.0) || !(target_h > 0.0) || !(target_h < radius / 4.0)) {
        throw Error(ErrorCode::DegenerateMesh, "need 0 < target_h < radius / 4");
    }
    if (gamma_arc.length() < 4.0 * target_h / radius) {
        throw Error(ErrorCode::DegenerateArc, "Gamma arc shorter than 4 * target_h / radius");
    }
    // Rings at r_i = i * dr carrying 6 i nodes; adjacent rings are zipped
    // together and the result is flipped to a Delaunay triangulation.
    const int rings = static_cast<int>(std::ceil(radius / target_h - 1e-12));
    const double dr = radius / rings;

    TriMesh mesh;
    std::vector<int> ring_start{0};
    mesh.nodes.emplace_back(0.0, 0.0);
    for (int i = 1; i <= rings; ++i) {
        ring_start.push_back(mesh.num_nodes());
        const int count = 6 * i;
        const double r = (i == rings) ? radius : i * dr;
        for (int j = 0; j < count; ++j) {
            const double th = kTwoPi * (j + ring_offset(i)) / count;
            mesh.nodes.emplace_back(r * std::cos(th), r * std::sin(th));
        }
    }

    auto add_tri = [&](int a, int b, int c) {
        if (orient(mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]) < 0) std::swap(b, c);
        mesh.triangles.push_back({a, b, c});
    };
    for (int j = 0; j < 6; ++j) add_tri(0, 1 + j, 1 + (j + 1) % 6);
    for (int i = 2; i <= rings; ++i) {
        const int m = 6 * (i - 1), n = 6 * i;
        const int in0 = ring_start[i - 1], out0 = ring_start[i];
        int p = 0, q = 0;
        while (p < m || q < n) {
            const double next_in = (p + 1 + ring_offset(i - 1)) / m;
            const double next_out = (q + 1 + ring_offset(i)) / n;
            if (p < m && (q == n || next_in < next_out)) {
                add_tri(in0 + p, in0 + (p + 1) % m, out0 + q % n);
                ++p;
            } else {
                add_tri(in0 + p % m, out0 + q, out0 + (q + 1) % n);
                ++q;
            }
        }
    }
    make_delaunay(mesh.nodes, mesh.triangles);

    const int outer = ring_start[rings];
    mesh.gamma_mask.assign(mesh.nodes.size(), 0);
    for (int j = 0; j < 6 * rings; ++j) {
        const int idx = outer + j;
        mesh.boundary_loop.push_back(idx);
        const double th = std::atan2(mesh.nodes[idx].y(), mesh.nodes[idx].x());
        mesh.gamma_mask[idx] = gamma_arc.contains(th) ? 1 : 0;
    }
    mesh.finalize();
    return mesh;
}

TriMesh map_mesh(const TriMesh& mesh, const Diffeo& phi) {
    TriMesh out = mesh;
    for (auto& p : out.nodes) {
        const Vec image = phi.map(Vec(p));
        p = Point2(image(0), image(1));
    }
    out.finalize();
    return out;
}

TriMesh pullback_mesh(const TriMesh& mesh, const Diffeo& phi) {
    TriMesh out = mesh;
    const auto on_boundary = mesh.boundary_flags();
    for (int i = 0; i < mesh.num_nodes(); ++i) {
        const Vec image = phi.map(Vec(mesh.nodes[i]));
        const Point2 q(image(0), image(1));
        if (on_boundary[i]) {
            if ((q - mesh.nodes[i]).norm() > 1e-14) {
                throw Error(ErrorCode::NotBoundaryFixing, "map moves boundary node " + std::to_string(i));
            }
            continue;
        }
        out.nodes[i] = q;
    }
    out.finalize();
    return out;
}

// ---------------------------------------------------------------------------
// Metric data and assembly

ElementMetric sample_metric(const TriMesh& mesh, const MetricField& metric) {
    ElementMetric out(mesh.triangles.size());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const Vec c = mesh.centroid(t);
        const Mat g = metric(c);
        Eigen::LLT<Mat> llt(g);
        if (llt.info() != Eigen::Success) {
            throw Error(ErrorCode::NonSpdMetric, "metric not SPD at centroid of triangle " + std::to_string(t));
        }
        out[t] = g;
    }
    return out;
}

namespace {

Eigen::Matrix2d edge_matrix(const TriMesh& mesh, int t) {
    const auto& tri = mesh.triangles[t];
    Eigen::Matrix2d e;
    e.col(0) = mesh.nodes[tri[1]] - mesh.nodes[tri[0]];
    e.col(1) = mesh.nodes[tri[2]] - mesh.nodes[tri[0]];
    return e;
}

} // namespace

ElementMetric push_forward_metric(const TriMesh& src, const TriMesh& dst, const ElementMetric& metric) {
    if (src.triangles != dst.triangles || metric.size() != src.triangles.size()) {
        throw Error(ErrorCode::InvalidArgument, "push_forward_metric needs meshes with identical connectivity");
    }
    ElementMetric out(metric.size());
    for (int t = 0; t < src.num_triangles(); ++t) {
        // A maps the src triangle onto the dst triangle.
        const Eigen::Matrix2d a_inv = edge_matrix(src, t) * edge_matrix(dst, t).inverse();
        out[t] = a_inv.transpose() * metric[t] * a_inv;
    }
    return out;
}

ElementMetric scale_metric(const TriMesh& mesh, const ElementMetric& metric,
                           const std::function<double(const Point2&)>& c) {
    ElementMetric out(metric.size());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const double s = c(mesh.centroid(t));
        if (!(s > 0.0)) throw Error(ErrorCode::NonPositiveConformalFactor, "conformal factor must be positive");
        out[t] = s * metric[t];
    }
    return out;
}

Eigen::Matrix3d local_stiffness(const Point2& p0, const Point2& p1, const Point2& p2, const Eigen::Matrix2d& g) {
    Eigen::Matrix2d e;
    e.col(0) = p1 - p0;
    e.col(1) = p2 - p0;
    const double area = 0.5 * e.determinant();
    if (!(area > 0.0)) throw Error(ErrorCode::InvertedTriangle, "triangle has non-positive area");
    Eigen::Matrix<double, 2, 3> ref;
    ref << -1, 1, 0, -1, 0, 1;
    const Eigen::Matrix<double, 2, 3> grads = e.transpose().inverse() * ref;
    const double det = g.determinant();
    if (!(det > 0.0) || !(g(0, 0) > 0.0)) throw Error(ErrorCode::NonSpdMetric, "element metric is not SPD");
    const Eigen::Matrix2d coeff = std::sqrt(det) * g.inverse();
    return area * grads.transpose() * coeff * grads;
}

AssembledOperator assemble_operator(const TriMesh& mesh, const ElementMetric& metric) {
    if (metric.size() != mesh.triangles.size()) {
        throw Error(ErrorCode::InvalidArgument, "one metric sample per triangle required");
    }
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(9 * mesh.triangles.size());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Eigen::Matrix3d k =
            local_stiffness(mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]], metric[t]);
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) trip.emplace_back(tri[i], tri[j], k(i, j));
        }
    }
    AssembledOperator op;
    op.stiffness.resize(mesh.num_nodes(), mesh.num_nodes());
    op.stiffness.setFromTriplets(trip.begin(), trip.end());

    // Boundary edge lengths measured in the metric of the adjacent triangle.
    std::map<std::array<int, 2>, int> edge_owner;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        for (int e = 0; e < 3; ++e) edge_owner[edge_key(tri[e], tri[(e + 1) % 3])] = t;
    }
    const int nb = mesh.num_boundary();
    std::vector<Eigen::Triplet<double>> mtrip;
    for (int i = 0; i < nb; ++i) {
        const int a = mesh.boundary_loop[i], b = mesh.boundary_loop[(i + 1) % nb];
        const Point2 ev = mesh.nodes[b] - mesh.nodes[a];
        const double len = std::sqrt(ev.dot(metric[edge_owner.at(edge_key(a, b))] * ev));
        const int j = (i + 1) % nb;
        mtrip.emplace_back(i, i, len / 3.0);
        mtrip.emplace_back(j, j, len / 3.0);
        mtrip.emplace_back(i, j, len / 6.0);
        mtrip.emplace_back(j, i, len / 6.0);
    }
    op.boundary_mass.resize(nb, nb);
    op.boundary_mass.setFromTriplets(mtrip.begin(), mtrip.end());
    return op;
}

AssembledOperator assemble_operator(const TriMesh& mesh, const MetricField& metric) {
    return assemble_operator(mesh, sample_metric(mesh, metric));
}

bool is_m_matrix(const SpMat& k, double tol) {
    double scale = 0.0;
    for (int i = 0; i < k.outerSize(); ++i) scale = std::max(scale, std::abs(k.coeff(i, i)));
    for (int c = 0; c < k.outerSize(); ++c) {
        for (SpMat::InnerIterator it(k, c); it; ++it) {
            if (it.row() != it.col() && it.value() > tol * scale) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Plain-text mesh files

void write_mesh(std::ostream& os, const TriMesh& mesh) {
    os << mesh.num_nodes() << ' ' << mesh.num_triangles() << ' ' << mesh.num_boundary() << '\n';
    os << std::setprecision(17);
    for (int i = 0; i < mesh.num_nodes(); ++i) {
        os << mesh.nodes[i].x() << ' ' << mesh.nodes[i].y() << ' ' << (mesh.gamma_mask[i] ? 1 : 0) << '\n';
    }
    for (const auto& tri : mesh.triangles) os << tri[0] << ' ' << tri[1] << ' ' << tri[2] << '\n';
    for (int b : mesh.boundary_loop) os << b << '\n';
}

TriMesh read_mesh(std::istream& is) {
    int nv = 0, nt = 0, nb = 0;
    if (!(is >> nv >> nt >> nb) || nv <= 0 || nt <= 0 || nb <= 0) {
        throw Error(ErrorCode::IoError, "bad mesh header, expected 'nv nt nb'");
    }
    TriMesh mesh;
    mesh.nodes.resize(nv);
    mesh.gamma_mask.resize(nv);
    for (int i = 0; i < nv; ++i) {
        int flag = 0;
        if (!(is >> mesh.nodes[i].x() >> mesh.nodes[i].y() >> flag)) {
            throw Error(ErrorCode::IoError, "truncated node list");
        }
        mesh.gamma_mask[i] = flag ? 1 : 0;
    }
    mesh.triangles.resize(nt);
    for (auto& tri : mesh.triangles) {
        if (!(is >> tri[0] >> tri[1] >> tri[2])) throw Error(ErrorCode::IoError, "truncated triangle list");
    }
    mesh.boundary_loop.resize(nb);
    for (auto& b : mesh.boundary_loop) {
        if (!(is >> b)) throw Error(ErrorCode::IoError, "truncated boundary loop");
    }
    mesh.finalize();
    return mesh;
}

void write_mesh_file(const std::string& path, const TriMesh& mesh) {
    std::ofstream os(path);
    if (!os) throw Error(ErrorCode::IoError, "cannot open " + path);
    write_mesh(os, mesh);
}

TriMesh read_mesh_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorCode::IoError, "cannot open " + path);
    return read_mesh(is);
}

} // namespace poisson_embed
