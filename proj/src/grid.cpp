#include "poisson_embed/grid.hpp"

#include "poisson_embed/errors.hpp"

#include <algorithm>
#include <cmath>

namespace poisson_embed {

Grid::Grid(int n_cells) : n_(n_cells), h_(1.0 / n_cells) {
    if (n_cells < 4) throw Error(ErrorCode::InvalidArgument, "grid needs at least 4 cells per side");
    window_mask_.assign(num_nodes(), 0);
}

Grid::Grid(int n_cells, const Box& window) : Grid(n_cells) {
    const double gap = std::min({window.x0, window.y0, 1.0 - window.x1, 1.0 - window.y1});
    if (!(window.x1 > window.x0) || !(window.y1 > window.y0)) {
        throw Error(ErrorCode::InvalidArgument, "window box is empty");
    }
    if (gap < 2.0 * h_ - 1e-12) throw Error(ErrorCode::InvalidArgument, "window must stay 2h away from the boundary");
    window_ = window;
    has_window_ = true;
    for (int k = 0; k < num_nodes(); ++k) {
        if (window.contains(point(k))) {
            window_mask_[k] = 1;
            window_nodes_.push_back(k);
        }
    }
}

bool Grid::is_boundary(int node) const {
    const int i = i_of(node), j = j_of(node);
    return i == 0 || j == 0 || i == n_ || j == n_;
}

int Grid::interior_index(int node) const {
    if (is_boundary(node)) return -1;
    return (i_of(node) - 1) + (n_ - 1) * (j_of(node) - 1);
}

int Grid::interior_node(int idx) const { return node(1 + idx % (n_ - 1), 1 + idx / (n_ - 1)); }

int Grid::nearest_node(const Point2& p) const {
    const int i = std::clamp(static_cast<int>(std::lround(p.x() / h_)), 0, n_);
    const int j = std::clamp(static_cast<int>(std::lround(p.y() / h_)), 0, n_);
    return node(i, j);
}

bool Grid::in_window(int node) const { return window_mask_[node] != 0; }

Eigen::Vector2d Grid::gradient(const Vec& u, int k) const {
    const int i = i_of(k), j = j_of(k);
    return {(u(node(i + 1, j)) - u(node(i - 1, j))) / (2.0 * h_), (u(node(i, j + 1)) - u(node(i, j - 1))) / (2.0 * h_)};
}

Eigen::Matrix2d Grid::hessian(const Vec& u, int k) const {
    const int i = i_of(k), j = j_of(k);
    const double h2 = h_ * h_;
    const double uc = u(k);
    const double dxx = (u(node(i + 1, j)) - 2.0 * uc + u(node(i - 1, j))) / h2;
    const double dyy = (u(node(i, j + 1)) - 2.0 * uc + u(node(i, j - 1))) / h2;
    const double dxy =
        (u(node(i + 1, j + 1)) - u(node(i + 1, j - 1)) - u(node(i - 1, j + 1)) + u(node(i - 1, j - 1))) / (4.0 * h2);
    Eigen::Matrix2d hess;
    hess << dxx, dxy, dxy, dyy;
    return hess;
}

Vec Grid::sample(const std::function<double(const Point2&)>& f) const {
    Vec out(num_nodes());
    for (int k = 0; k < num_nodes(); ++k) out(k) = f(point(k));
    return out;
}

Vec Grid::expand(const Vec& interior) const {
    Vec full = Vec::Zero(num_nodes());
    for (int idx = 0; idx < num_interior(); ++idx) full(interior_node(idx)) = interior(idx);
    return full;
}

Vec Grid::restrict_interior(const Vec& full) const {
    Vec out(num_interior());
    for (int idx = 0; idx < num_interior(); ++idx) out(idx) = full(interior_node(idx));
    return out;
}

} // namespace poisson_embed
