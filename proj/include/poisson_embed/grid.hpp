#pragma once

#include "poisson_embed/mesh.hpp"

namespace poisson_embed {

// Axis-aligned box [x0, x1] x [y0, y1].
struct Box {
    double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;

    bool contains(const Point2& p, double slack = 1e-12) const {
        return p.x() >= x0 - slack && p.x() <= x1 + slack && p.y() >= y0 - slack && p.y() <= y1 + slack;
    }
};

// Uniform grid on the unit square with n_cells cells per side. Nodes are
// numbered i + (n_cells + 1) j; unknowns live on interior nodes only.
class Grid {
public:
    Grid(int n_cells, const Box& window);
    explicit Grid(int n_cells);

    int n_cells() const { return n_; }
    double h() const { return h_; }
    int num_nodes() const { return (n_ + 1) * (n_ + 1); }
    int num_interior() const { return (n_ - 1) * (n_ - 1); }

    int node(int i, int j) const { return i + (n_ + 1) * j; }
    int i_of(int node) const { return node % (n_ + 1); }
    int j_of(int node) const { return node / (n_ + 1); }
    Point2 point(int node) const { return {h_ * i_of(node), h_ * j_of(node)}; }
    bool is_boundary(int node) const;
    // Interior index of a node, -1 on the boundary.
    int interior_index(int node) const;
    int interior_node(int idx) const;

    // Nearest node to p.
    int nearest_node(const Point2& p) const;

    const Box& window() const { return window_; }
    bool has_window() const { return has_window_; }
    // Nodes of the closed window.
    const std::vector<int>& window_nodes() const { return window_nodes_; }
    bool in_window(int node) const;

    // Central-difference gradient at an interior node.
    Eigen::Vector2d gradient(const Vec& u, int node) const;
    // Central-difference Hessian at an interior node (9-point mixed term).
    Eigen::Matrix2d hessian(const Vec& u, int node) const;

    Vec sample(const std::function<double(const Point2&)>& f) const;
    // Full nodal vector from interior unknowns (boundary set to zero).
    Vec expand(const Vec& interior) const;
    Vec restrict_interior(const Vec& full) const;

private:
    int n_;
    double h_;
    Box window_;
    bool has_window_ = false;
    std::vector<int> window_nodes_;
    std::vector<char> window_mask_;
};

} // namespace poisson_embed
