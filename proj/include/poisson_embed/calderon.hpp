#pragma once

#include "poisson_embed/runge.hpp"

#include <string>

namespace poisson_embed {

enum class EmbeddingKind { BoundaryP, InteriorR };

// Nodal values of the solutions u_{f_k}: values(x, k) = u_{f_k}(x).
struct EmbeddingCloud {
    std::string tag;
    TriMesh mesh;
    Mat values;
    SourceBasis basis;
    EmbeddingKind kind = EmbeddingKind::BoundaryP;
    // Right factor applied to rows before Euclidean comparison (K x K).
    Mat row_weight;

    int num_nodes() const { return static_cast<int>(values.rows()); }
    int size() const { return static_cast<int>(values.cols()); }
    // Keeps the listed basis columns.
    EmbeddingCloud columns(const std::vector<int>& cols) const;
};

EmbeddingCloud build_embedding(const HarmonicSolver& solver, const SourceBasis& basis, std::string tag = {});

// Minimum distance between rows of distinct interior nodes.
double min_row_separation(const EmbeddingCloud& cloud);

// 75/25 split by index: every fourth column is held out.
struct HoldoutSplit {
    std::vector<int> fit;
    std::vector<int> holdout;
};
HoldoutSplit holdout_split(int count);

struct MatchedPoint {
    int triangle = -1;
    Eigen::Vector3d barycentric = Eigen::Vector3d::Zero();
    Point2 position = Point2::Zero();
    double residual = 0.0;
    bool ambiguous = false;
};

struct CorrespondenceMap {
    std::vector<MatchedPoint> points;
    // Filled by estimate_jacobian.
    std::vector<Eigen::Matrix2d> jacobian;
    Vec jacobian_residual;
    int ambiguous_count = 0;

    Eigen::MatrixX2d positions() const;
    double max_residual() const;
};

// Nearest row of c2 for every node of c1, refined by a barycentric
// least-squares fit over the triangles around the winning node.
CorrespondenceMap match_embeddings(const EmbeddingCloud& c1, const EmbeddingCloud& c2);

// Linear interpolation of per-node rows of data (n x cols) at a matched point.
Vec interpolate(const TriMesh& mesh, const Mat& data, const MatchedPoint& p);

// Solves du1_k(x) = du2_k(J(x)) DJ(x) over k at every node of c1, with
// recovered nodal gradients on both meshes.
void estimate_jacobian(const EmbeddingCloud& c1, const EmbeddingCloud& c2, CorrespondenceMap& map);

// Jacobian of the matched positions by gradient recovery on mesh 1.
std::vector<Eigen::Matrix2d> matched_position_jacobian(const TriMesh& mesh1, const CorrespondenceMap& map);

// max over columns f of the holdout clouds and nodes x of |u1_f(x) - u2_f(J(x))|.
double verify_harmonic_morphism(const EmbeddingCloud& holdout1, const EmbeddingCloud& holdout2,
                                const CorrespondenceMap& map);

} // namespace poisson_embed
